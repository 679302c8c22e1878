"""Joint gravity/magnetic inversion toolkit with phase-field regularization.

Desk-scale reference implementation: closed-form potential-field forward
operators, a double-well phase energy with deterministic and stochastic
relaxation dynamics, a rectified linear flow prior, guided posterior
sampling with data-consistency refinement, and a deterministic MAP
inverter, plus simple binary file formats and a command line front end.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, NumericsError
from .grid import (
    ChiBounds,
    JointModel,
    PropertyVolume,
    SurveyGeometry,
    VoxelGrid,
    check_survey,
    chi_to_phi,
    inverse_log_transform,
    log_transform,
    phi_to_chi,
    stack_model,
    unstack_model,
)
from .forward import (
    FieldData,
    GravityKernelConfig,
    JointOperator,
    MagneticKernelConfig,
    NoiseModel,
    SensitivityOperator,
    assemble_gravity_operator,
    assemble_magnetic_operator,
    dipole_tmi_kernel,
    joint_operator,
    misfit_gradient,
    neg_log_likelihood,
    prism_gravity_kernel,
    simulate,
)
from .glphysics import (
    INTERFACE_ENERGY_CONSTANT,
    AllenCahnRun,
    AllenCahnStep,
    ChainRun,
    GLParams,
    GraphLaplacian,
    allen_cahn_evolve,
    allen_cahn_step,
    double_well,
    double_well_prime,
    dt_max,
    gl_energy,
    gl_gradient,
    gl_hessian_apply,
    gl_loss_weights,
    gl_prior_score,
    interface_energy_diagnostic,
    lambda_schedule,
    stochastic_allen_cahn_chain,
    stochastic_allen_cahn_step,
)
from .flow import (
    FlowState,
    GaussianPriorVelocity,
    TabulatedAffineVelocity,
    VelocityField,
    endpoint_estimates,
    gaussian_endpoint_means,
    gaussian_velocity,
    integrate_flow,
)
from .sampler import (
    Decoder,
    IdentityDecoder,
    LinearDecoder,
    SampleRecord,
    SamplerConfig,
    clamp_score,
    data_consistency_gradient,
    data_consistency_loss,
    gl_guidance_score,
    refine_endpoint,
    sample_chains,
    sample_posterior,
)
from .scenario import (
    BoxBody,
    Scenario,
    ScenarioSpec,
    SphereBody,
    generate_scenario,
    grid_survey,
    noise_for_snr,
    paint_bodies,
)
from .metrics import (
    RANK_BEST,
    RANK_MIXED,
    RANK_WORST,
    MetricsReport,
    delta_rmse_and_ranks,
    rmse,
)
from .mapinv import (
    MapConfig,
    MapResult,
    invert_map,
    total_energy,
    total_gradient,
)
from .io import (
    build_manifest,
    manifest_identity,
    read_field_data,
    read_json,
    read_manifest,
    read_survey,
    read_volume,
    sha256_file,
    write_field_data,
    write_json_atomic,
    write_survey,
    write_volume,
)
