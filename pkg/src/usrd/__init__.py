"""Universal sampling rate-distortion functions for finite families of multiple sources.

Three sampler classes are covered -- a fixed sampling set (FS), sets drawn
independently of the source (IRS) and sets chosen from the current source
symbol (MRS) -- each in a Bayesian (expected distortion under a prior) and a
nonBayesian (worst-case distortion) setting.  Rates are in bits.
"""
from .errors import (
    DeltaOutOfRange,
    Infeasible,
    InfeasibleDelta,
    ModelError,
    NoFeasibleSet,
    SignalingImpossible,
    TooLarge,
    TooManySamplers,
    UnknownTau,
    USRDError,
)
from .estimation_sim import (
    SimReport,
    sample_dmms,
    signaling_chunks,
    simulate_fs_ml,
    simulate_full_ml,
    simulate_irs_phase1,
    simulate_mrs_signaling,
)
from .rd_core import RDCurve, RDPoint, RateDistortionProblem, binary_entropy, mutual_information, rd_multi, rd_oracle, rd_single
from .reports import ComparisonReport, SamplerSpec, audit_shape, compare_samplers, sweep
from .source_model import (
    AmbiguityPartition,
    SourceModel,
    load_model,
    modified_distortion,
    save_model,
    theta1_partition,
    theta2_partition,
    validate_model,
)
from .usrdf_fixed import ThresholdAllocation, best_fixed_set, delta_bounds_fs, rho_fs, usrdf_fs
from .usrdf_irs import SamplingDistribution, delta_bounds_irs, rho_irs, usrdf_irs
from .usrdf_mrs import (
    DeterministicSampler,
    MrsPolicy,
    delta_bounds_mrs,
    enumerate_pure_samplers,
    evaluate_policy,
    rho_mrs_pure,
    usrdf_mrs,
)

__version__ = "0.1.0"
