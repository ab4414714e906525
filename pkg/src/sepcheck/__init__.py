"""Constructive separability checks for low-rank bipartite density matrices.

The library decides separability of PPT states whose ranks are low enough
for the constructive criteria to apply, and emits either an explicit
product-state decomposition or an entanglement certificate.
"""

from .numlin import DEFAULT_TOL, Tolerances
from .state import BipartiteState, Decomposition, ProductVector

__all__ = [
    "DEFAULT_TOL",
    "Tolerances",
    "BipartiteState",
    "Decomposition",
    "ProductVector",
]

__version__ = "0.1.0"
