"""Statistical estimators shared by all analyses."""

from .dcor import distance_correlation
from .gaussian import FisherModel, GaussianStats, fit_gaussian, gaussian_kl, local_kl_quadratic
from .ksg import KsgResult, ksg_mi
from .mine import MineCritic, MineResult, mine_estimate
from .pca import PcaBasis, pca_fit, pca_reduce, reduce_dim

__all__ = [
    "FisherModel",
    "GaussianStats",
    "KsgResult",
    "MineCritic",
    "MineResult",
    "PcaBasis",
    "distance_correlation",
    "fit_gaussian",
    "gaussian_kl",
    "ksg_mi",
    "local_kl_quadratic",
    "mine_estimate",
    "pca_fit",
    "pca_reduce",
    "reduce_dim",
]
