"""Signed particles with singular pairwise interaction that annihilate on collision."""
from ._backend import BACKEND, available_backends
from .analysis import BoundReport, HolderFit, fit_holder_exponent, two_body_closed_form, verify_trajectory
from .collisions import CollisionEvent, HybridTrajectory, run_hybrid
from .config import RunConfig, load_config, parse_config
from .errors import (
    AlternatingSignError,
    AnnihilationError,
    ConfigError,
    DomainError,
    IllConditionedFit,
    InsufficientWindowError,
    OrderingError,
    StepFailure,
)
from .integrator import StepController, TrajectorySegment, integrate_segment, reference_integrate
from .model import (
    ExternalForce,
    Forcing,
    ForcingTerm,
    InteractionLaw,
    ParticleSystem,
    RegularPart,
    f_derivative,
    f_eval,
    gap_velocity,
    kernel_g,
    kernel_h,
    velocity_field,
)

__version__ = "0.1.0"
