"""Dyadic reverse Hölder weights on finite spaces of homogeneous type."""

__version__ = "0.1.0"

from .family import BallFamily, CubeFamily, ball_family
from .gehring import (GehringCertificate, certify, constructive_epsilon, corollary41_mode,
                      doubling_weight_ball_mode, empirical_epsilon, lambda_threshold)
from .growth import GrowthTable, classify_growth
from .lattice import DyadicCube, DyadicLattice, build_lattice, verify_lattice
from .space import FiniteSpace, InvalidSpaceError, validate_space
from .stopping import StoppingTree, stopping_tree
from .weights import (CharacteristicReport, Weight, ap_characteristic, ainfty_fujii_wilson,
                      rh_characteristic, weak_rh_characteristic)

__all__ = [
    "BallFamily", "CubeFamily", "ball_family",
    "GehringCertificate", "certify", "constructive_epsilon", "corollary41_mode",
    "doubling_weight_ball_mode", "empirical_epsilon", "lambda_threshold",
    "GrowthTable", "classify_growth",
    "DyadicCube", "DyadicLattice", "build_lattice", "verify_lattice",
    "FiniteSpace", "InvalidSpaceError", "validate_space",
    "StoppingTree", "stopping_tree",
    "CharacteristicReport", "Weight", "ap_characteristic", "ainfty_fujii_wilson",
    "rh_characteristic", "weak_rh_characteristic",
]
