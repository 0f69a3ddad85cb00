"""Convexity of free invertibility sets and their LMI representations."""

from .ncpoly import Letter, MatrixTuple, NcPoly, random_tuple
from .parser import ParseError, RationalExpr, format_poly, parse, to_polynomial
from .realization import (
    Realization,
    SingularAtOrigin,
    equivalent,
    minimize,
    realize_expression,
    realize_with_inverse,
    series,
)
from .algebra import (
    BlockDecomposition,
    LinearPencil,
    NumericalRankAmbiguity,
    burnside_decompose,
    is_irreducible,
    pencil_of_realization,
    similar,
    similarity_classes,
)
from .sdp import (
    MarginalSdp,
    MomentBlock,
    SdpProblem,
    SdpResult,
    hermitian_similarity,
    inclusion,
    rank_certificate,
    solve,
)
from .convexity import (
    ConvexityReport,
    NotAtom,
    NotConvex,
    RankCheckOutcome,
    det_identity_check,
    extract_witness,
    full_rank_on_interior,
    is_atom_scalar,
    is_convex,
    lmi_representation,
    make_flip_poly,
    schur_form,
)

__version__ = "0.1.0"
