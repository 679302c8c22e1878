"""Exception types shared across the toolkit.

Library code raises ``ValueError`` for ordinary precondition violations
(bad shapes, out-of-domain arguments).  The three classes below exist so
that the command line front end can map failures to distinct exit codes
and so that numerical aborts are distinguishable from bad input.
"""


class ConfigError(Exception):
    """Run configuration is malformed (unknown keys, missing sections, bad values)."""


class DataError(Exception):
    """Input data files or geometry are inconsistent with the requested run."""


class NumericsError(Exception):
    """A numerical routine hit a non-finite value or failed to make progress.

    Instances may carry a ``trace`` attribute with partial iteration
    history for post-mortem inspection.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
