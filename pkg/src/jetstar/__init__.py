"""Exact jet calculus for star products with separation of variables."""

from .kernel import (
    CRat,
    NuSeries,
    VarSpace,
    TruncationSpec,
    Jet,
    jet_mul,
    jet_deriv,
    jet_substitute,
    exp_nu_nonneg,
    filtration_degree,
    invert_jet_matrix,
    parse_jet,
    render_jet,
)

__all__ = [
    "CRat",
    "NuSeries",
    "VarSpace",
    "TruncationSpec",
    "Jet",
    "jet_mul",
    "jet_deriv",
    "jet_substitute",
    "exp_nu_nonneg",
    "filtration_degree",
    "invert_jet_matrix",
    "parse_jet",
    "render_jet",
]
