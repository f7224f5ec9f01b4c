"""Stochastic quasi-interpolation with random sampling centers."""
from .kernels import Kernel, KernelFamily, eval_kernel, eval_scaled, kernel_mass, parse_kernel, support_radius
from .quasi import (
    BatchResult,
    EmptyNeighborhood,
    EvalReport,
    QuasiInterpolant,
    build,
    convolution_oracle,
    interpolate,
)
from .sampling import BoxDomain, SamplingLaw, derive_replication_seed, parse_law, sample_centers
from .targets import TargetFunction, eval_target, make_target, modulus_bound

__version__ = "0.1.0"
