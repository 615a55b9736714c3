"""Single-image dehazing by joint estimation of an airlight field, a
transmission map and the haze-free image."""

__version__ = "0.1.0"

from .basis import AirlightField, BasisSet, build_basis, eval_field, legendre_1d, normalize_coords
from .energy import Hyperparameters, EnergyBreakdown, total_energy
from .metrics import EvalReport, evaluate, mae, masked_variance, mse, psnr
from .raster import load_image, save_image, save_scalar_map
from .scatter import SyntheticSceneSpec, dark_channel_t, recover_direct, synthesize
from .solver import SolverConfig, SolverResult, energy_trace_csv, run

__all__ = [
    "AirlightField", "BasisSet", "build_basis", "eval_field", "legendre_1d", "normalize_coords",
    "Hyperparameters", "EnergyBreakdown", "total_energy",
    "EvalReport", "evaluate", "mae", "masked_variance", "mse", "psnr",
    "load_image", "save_image", "save_scalar_map",
    "SyntheticSceneSpec", "dark_channel_t", "recover_direct", "synthesize",
    "SolverConfig", "SolverResult", "energy_trace_csv", "run",
]
