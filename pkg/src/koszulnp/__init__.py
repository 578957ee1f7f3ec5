"""Koszul cohomology and Betti tables of fat-point embeddings of blown-up planes."""
from .exactalg import PrimeField, RationalField, ExactMatrix, rank, rref, kernel_basis
from .polyspace import FatPointScheme, PointP2, hilbert_function, sigma, random_points
from .picard import DivisorClass, bound_dp, h0, riemann_roch_h0
from .verify import EngineOptions, KoszulEngine, betti_table, check_np, duality_gap

__version__ = "0.1.0"
