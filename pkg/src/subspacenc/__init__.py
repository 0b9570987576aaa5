"""Network coding viewed through subspaces: what the collected subspaces
reveal about the topology and about Byzantine nodes."""

from .finite_field import FieldSpec, field_new
from .subspace import RowSpace, rref, intersect, sum_spaces, distance_ds, set_distance_DS, gaussian_binomial

__all__ = [
    "FieldSpec",
    "field_new",
    "RowSpace",
    "rref",
    "intersect",
    "sum_spaces",
    "distance_ds",
    "set_distance_DS",
    "gaussian_binomial",
]
