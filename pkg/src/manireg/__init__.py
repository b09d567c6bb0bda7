"""Exact 1D and split 2D Potts / Mumford-Shah regularization of manifold-valued data."""
from .dp1d import MsParams, solve_1d, solve_1d_path
from .manifold import Euclidean, Manifold, Spd3, Sphere
from .prox import CppaConfig, cppa_solve
from .solver2d import Neighborhood, SplitConfig, solve_2d
from .stats import MeanConfig, frechet_point

__all__ = [
    "Manifold", "Euclidean", "Sphere", "Spd3",
    "MeanConfig", "frechet_point",
    "CppaConfig", "cppa_solve",
    "MsParams", "solve_1d", "solve_1d_path",
    "Neighborhood", "SplitConfig", "solve_2d",
]
__version__ = "0.1.0"
