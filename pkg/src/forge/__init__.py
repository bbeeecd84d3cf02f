"""Exact finite filtrations, canonical product models and decoupling checks."""

from .embedding import (
    Morphism,
    build_canonical_1p,
    build_canonical_2p,
    evaluate_chain,
    preimage_measure,
    pullback,
    pullback_martingale,
    verify_morphism,
)
from .errors import (
    CapExceededError,
    F4ViolationError,
    ForgeError,
    MorphismNotVerifiedError,
    NotAdaptedError,
    SchemaError,
    SpaceMismatchError,
)
from .filtration import (
    BiFiltration,
    Filtration1P,
    Martingale1P,
    Martingale2P,
    check_f4,
    differences,
    f_minus,
    is_martingale,
    martingale_from_terminal,
)
from .measure import Partition, SampleSpace, SimpleFunction, cond_expect, cond_indep, join, refines
from .square import square_functions

__version__ = "0.1.0"

__all__ = [
    "BiFiltration",
    "CapExceededError",
    "F4ViolationError",
    "Filtration1P",
    "ForgeError",
    "Martingale1P",
    "Martingale2P",
    "Morphism",
    "MorphismNotVerifiedError",
    "NotAdaptedError",
    "Partition",
    "SampleSpace",
    "SchemaError",
    "SimpleFunction",
    "SpaceMismatchError",
    "build_canonical_1p",
    "build_canonical_2p",
    "check_f4",
    "cond_expect",
    "cond_indep",
    "differences",
    "evaluate_chain",
    "f_minus",
    "is_martingale",
    "join",
    "martingale_from_terminal",
    "preimage_measure",
    "pullback",
    "pullback_martingale",
    "refines",
    "square_functions",
    "verify_morphism",
]
