"""Exact rational geometry toolkit: flats, partition costs, discrete measures,
stability certificates, thin-graph verification and discrete Beck dichotomies.

All set memberships, ranks, minors and distances are computed over Q (via
``fractions.Fraction``); floating point appears only in exponent fits and
reported constants.
"""

from fractions import Fraction

from .exactlin import Matrix
from .flats import AffineFlat
from .flatcollect import FlatCollection
from .measures import DiscreteMeasure, PlateSpec
from .stability import StableFrame
from .thin import ThinGraph
from .beck import PointConfig

__version__ = "0.1.0"

__all__ = [
    "AffineFlat",
    "DiscreteMeasure",
    "FlatCollection",
    "Fraction",
    "Matrix",
    "PlateSpec",
    "PointConfig",
    "StableFrame",
    "ThinGraph",
    "__version__",
]
