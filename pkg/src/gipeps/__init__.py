"""Z2 gauge-invariant PEPS states on square lattices: confinement and
superselection-resolved entanglement via transfer-matrix spectra, with an
exact small-lattice oracle."""

__version__ = "0.1.0"

from .errors import (
    BlockLeakage,
    CapExceeded,
    ChargeError,
    ConfigError,
    GeometryError,
    GipepsError,
    LabelError,
    LimitError,
    NonConvergence,
    RegionError,
    ShapeError,
    ZeroOperator,
)
from .tensor import EigResult, LabeledTensor, contract, fuse, leading_eig, permute, split, truncated_svd

__all__ = [
    "BlockLeakage",
    "CapExceeded",
    "ChargeError",
    "ConfigError",
    "EigResult",
    "GeometryError",
    "GipepsError",
    "LabelError",
    "LabeledTensor",
    "LimitError",
    "NonConvergence",
    "RegionError",
    "ShapeError",
    "ZeroOperator",
    "contract",
    "fuse",
    "leading_eig",
    "permute",
    "split",
    "truncated_svd",
]
