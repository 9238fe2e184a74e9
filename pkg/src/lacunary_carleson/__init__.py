"""Lacunary partial Fourier sums, time-frequency tiles and their decompositions
on the discretized unit torus."""

from .covering import CoverRounds, check_round_inequality, greedy_cover, msum_ratio
from .decomposition import Classification, FBad, Label, LevelSets, classify, f_bad, i_star, level_intervals
from .dyadic import DyadicInterval, Side, Tile, Tree, all_tiles, decompose_trees, e_set, freq, mass, space
from .errors import ConfigurationError, FrequencyOverflowError, GaugeError, InvariantViolation
from .inequalities import (
    CoefficientVector,
    coeff_dual_ratio,
    dyadic_bmo_norm,
    general_coeff_bound_ratio,
    khinchin_moment_ratio,
    zygmund_ratio,
)
from .operators import apply_T, apply_T_P, apply_T_P_star, apply_T_star_family, lambda_proj
from .torus import (
    GridFunction,
    LacunarySequence,
    full_carleson_maximal,
    lacunary_maximal,
    linearize,
    orlicz_norm,
    partial_sum,
    weak_l1_norm,
)

__version__ = "0.1.0"
