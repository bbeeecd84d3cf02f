"""Tangent sequences, square-function harnesses, Doob-type constants and the
Davis–Garsia-type decomposition."""

from .davis_garsia import Decomposition, OracleResult, davis_garsia_decompose, davis_garsia_oracle
from .doob import DoobResult, Lemma2Result, WeightedSystem, doob_delta, doob_inequality_holds, lemma2_check
from .ratios import (
    OrthogonalityCertificate,
    RatioResult,
    SSigmaResult,
    TabulatedPhi,
    decoupling_ratio,
    make_phi,
    orthogonality_check,
    s_sigma_harness,
)
from .tangent import TangentCertificate, TangentPair, decouple, tangent_copy, verify_tangent

__all__ = [
    "Decomposition",
    "DoobResult",
    "Lemma2Result",
    "OracleResult",
    "OrthogonalityCertificate",
    "RatioResult",
    "SSigmaResult",
    "TabulatedPhi",
    "TangentCertificate",
    "TangentPair",
    "WeightedSystem",
    "davis_garsia_decompose",
    "davis_garsia_oracle",
    "decouple",
    "decoupling_ratio",
    "doob_delta",
    "doob_inequality_holds",
    "lemma2_check",
    "make_phi",
    "orthogonality_check",
    "s_sigma_harness",
    "tangent_copy",
    "verify_tangent",
]
