"""Covariant and decomposable linear maps on matrix algebras.

Coefficient-matrix representation of maps on M_n in the Frobenius basis,
covariance tests for the maximal torus of U(n), Stinespring-type dilations,
and D-divisible master equations.
"""

from .basis import FrobeniusBasis, build_frobenius_basis, canonical_basis, expand, reconstruct
from .linmap import (
    MapMatrix,
    OperatorSum,
    apply,
    certify_decomposable,
    compose_transpose,
    decomposable_certificate,
    dual_map,
    is_cocp,
    is_cp,
    to_operator_sum,
)
from .covariance import (
    TorusElement,
    build_alpha,
    build_beta,
    is_conjugate_covariant,
    is_covariant,
    project_covariant,
    random_covariant_map,
)
from .dilation import costinespring, covariance_intertwiner, jordan_dilation, stinespring

__version__ = "0.1.0"
