"""Tools for training a character-level LSTM on SMILES strings and for
checking, canonicalizing and profiling the molecules it generates."""

__version__ = "0.1.0"

from smilesgen.lexicon import (
    NormalizedSmiles,
    Rejection,
    RejectionReason,
    Vocabulary,
    normalize,
    window_corpus,
)
from smilesgen.molparse import ErrorKind, MoleculeGraph, ParseError, parse, prefilter

__all__ = [
    "NormalizedSmiles",
    "Rejection",
    "RejectionReason",
    "Vocabulary",
    "normalize",
    "window_corpus",
    "ErrorKind",
    "MoleculeGraph",
    "ParseError",
    "parse",
    "prefilter",
    "__version__",
]
