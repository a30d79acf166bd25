"""Corpus normalization and windowing.

Raw SMILES from a database are reduced to a strict single-character
alphabet before training: two-character element symbols and the one
bracket atom we keep are collapsed to single letters, stereochemistry is
dropped, and anything outside the supported organic subset is rejected
with a reason.  The same module turns a normalized corpus into the
fixed-length (input, target) windows the network trains on.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

# Elements a molecule may contain.  H never appears explicitly in the
# normalized alphabet; it is implied and re-derived by the parser.
ORGANIC_ELEMENTS = frozenset(["H", "C", "N", "O", "S", "P", "F", "Cl", "Br", "I"])

# Single-letter stand-ins so every vocabulary symbol is one character.
CL_CHAR = "L"
BR_CHAR = "R"
NH_CHAR = "A"

NEWLINE = "\n"

ALIPHATIC_ATOM_CHARS = frozenset("CNOSPFI") | {CL_CHAR, BR_CHAR}
AROMATIC_ATOM_CHARS = frozenset("cnosp") | {NH_CHAR}
ATOM_CHARS = ALIPHATIC_ATOM_CHARS | AROMATIC_ATOM_CHARS
RING_DIGITS = frozenset("12345")
STRUCTURE_CHARS = frozenset("()=#") | RING_DIGITS
ALPHABET = ATOM_CHARS | STRUCTURE_CHARS | {NEWLINE}

_ORGANIC_UPPER = frozenset("HCNOSPFI")
_AROMATIC_LOWER = frozenset("cnosp")


class RejectionReason(enum.Enum):
    """Why a raw SMILES string was excluded from the training corpus."""

    NON_ORGANIC_ELEMENT = "NonOrganicElement"
    CHARGED = "Charged"
    TOO_MANY_RING_CLOSURES = "TooManyRingClosures"
    UNSUPPORTED_SYNTAX = "UnsupportedSyntax"


@dataclass(frozen=True)
class Rejection:
    kind: RejectionReason
    detail: str = ""


@dataclass(frozen=True)
class NormalizedSmiles:
    text: str


def _reject(kind: RejectionReason, detail: str) -> Rejection:
    return Rejection(kind, detail)


def _normalize_bracket(body: str) -> str | Rejection:
    """Reduce a bracket atom to a single normalized character.

    Only [nH] (and stereo markers, which we strip) can be expressed in
    the target alphabet; charges, isotopes, explicit hydrogen counts and
    atom classes cannot.
    """
    if not body:
        return _reject(RejectionReason.UNSUPPORTED_SYNTAX, "empty bracket atom")
    if body[0].isdigit():
        return _reject(RejectionReason.UNSUPPORTED_SYNTAX, "isotope label")

    rest = body
    element = None
    aromatic = False
    if len(rest) >= 2 and rest[0].isupper() and rest[1].islower():
        two = rest[:2]
        rest = rest[2:]
        if two == "Cl":
            element = CL_CHAR
        elif two == "Br":
            element = BR_CHAR
        else:
            return _reject(RejectionReason.NON_ORGANIC_ELEMENT, two)
    elif len(rest) >= 2 and rest[0].islower() and rest[1].islower():
        return _reject(RejectionReason.NON_ORGANIC_ELEMENT, rest[:2])
    elif rest[0].isupper():
        if rest[0] not in _ORGANIC_UPPER:
            return _reject(RejectionReason.NON_ORGANIC_ELEMENT, rest[0])
        element = rest[0]
        rest = rest[1:]
    elif rest[0].islower():
        if rest[0] not in _AROMATIC_LOWER:
            return _reject(RejectionReason.NON_ORGANIC_ELEMENT, rest[0])
        element = rest[0]
        aromatic = True
        rest = rest[1:]
    else:
        return _reject(RejectionReason.UNSUPPORTED_SYNTAX, f"bracket atom [{body}]")

    stereo = False
    h_count = 0
    while rest:
        ch = rest[0]
        if ch == "@":
            stereo = True
            rest = rest[1:]
        elif ch == "H":
            rest = rest[1:]
            digits = ""
            while rest and rest[0].isdigit():
                digits += rest[0]
                rest = rest[1:]
            h_count = int(digits) if digits else 1
        elif ch in "+-":
            return _reject(RejectionReason.CHARGED, f"[{body}]")
        elif ch == ":":
            return _reject(RejectionReason.UNSUPPORTED_SYNTAX, "atom class")
        else:
            return _reject(RejectionReason.UNSUPPORTED_SYNTAX, f"bracket atom [{body}]")

    if element == "n" and h_count == 1:
        return NH_CHAR
    if element == "H":
        return _reject(RejectionReason.UNSUPPORTED_SYNTAX, "explicit hydrogen atom")
    if h_count == 0 and not stereo:
        # A plain bracket like [C] pins the hydrogen count to zero, which
        # the bare symbol cannot express.
        return _reject(RejectionReason.UNSUPPORTED_SYNTAX, f"bracket atom [{body}]")
    if h_count <= 1 and stereo:
        # A stereocenter's single hydrogen is recovered by implicit
        # filling once the marker is dropped.
        return element
    return _reject(RejectionReason.UNSUPPORTED_SYNTAX, f"bracket atom [{body}]")


def normalize(raw: str) -> NormalizedSmiles | Rejection:
    """Map a raw SMILES string onto the single-character training alphabet.

    Returns a Rejection carrying the first problem found when the string
    uses elements, charges, ring labels or syntax we do not support.
    Already-normalized strings pass through unchanged.
    """
    out: list[str] = []
    i = 0
    n = len(raw)
    while i < n:
        ch = raw[i]
        if ch == "C" and raw.startswith("Cl", i):
            out.append(CL_CHAR)
            i += 2
        elif ch == "B":
            if raw.startswith("Br", i):
                out.append(BR_CHAR)
                i += 2
            else:
                return _reject(RejectionReason.NON_ORGANIC_ELEMENT, "B")
        elif ch in ATOM_CHARS:
            out.append(ch)
            i += 1
        elif ch in "()=#":
            out.append(ch)
            i += 1
        elif ch in RING_DIGITS:
            out.append(ch)
            i += 1
        elif ch.isdigit() or ch == "%":
            label = "%nn" if ch == "%" else ch
            return _reject(RejectionReason.TOO_MANY_RING_CLOSURES, f"ring label {label}")
        elif ch == "[":
            end = raw.find("]", i)
            if end < 0:
                return _reject(RejectionReason.UNSUPPORTED_SYNTAX, "unterminated bracket")
            result = _normalize_bracket(raw[i + 1 : end])
            if isinstance(result, Rejection):
                return result
            out.append(result)
            i = end + 1
        elif ch in "/\\@":
            i += 1
        elif ch == "-":
            # An explicit single bond is the default and carries no
            # information in the reduced alphabet.
            i += 1
        elif ch == "+":
            return _reject(RejectionReason.CHARGED, "bare charge symbol")
        elif ch == "b":
            return _reject(RejectionReason.NON_ORGANIC_ELEMENT, "b")
        elif ch.isalpha():
            is_element_like = ch.isupper() or (i + 1 < n and raw[i + 1].islower())
            if is_element_like:
                length = 2 if i + 1 < n and raw[i + 1].islower() else 1
                return _reject(RejectionReason.NON_ORGANIC_ELEMENT, raw[i : i + length])
            return _reject(RejectionReason.UNSUPPORTED_SYNTAX, f"character {ch!r}")
        else:
            return _reject(RejectionReason.UNSUPPORTED_SYNTAX, f"character {ch!r}")
    if not out:
        return _reject(RejectionReason.UNSUPPORTED_SYNTAX, "empty string")
    return NormalizedSmiles("".join(out))


class Vocabulary:
    """Bijection between the corpus alphabet and dense integer indices.

    Symbols are ordered by code point, so the newline terminator always
    sits at index 0.
    """

    def __init__(self, symbols: Iterable[str]):
        self.symbols = tuple(symbols)
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("duplicate symbols in vocabulary")
        for sym in self.symbols:
            if len(sym) != 1:
                raise ValueError(f"vocabulary symbol {sym!r} is not a single character")
        self.index_of = {s: i for i, s in enumerate(self.symbols)}

    @property
    def size(self) -> int:
        return len(self.symbols)

    @classmethod
    def from_corpus(cls, lines: Iterable[str]) -> "Vocabulary":
        chars: set[str] = set()
        seen_any = False
        for line in lines:
            seen_any = True
            chars.update(line)
        if not seen_any:
            raise ValueError("cannot build a vocabulary from an empty corpus")
        chars.discard(NEWLINE)
        return cls(sorted(chars | {NEWLINE}))

    def encode(self, text: str) -> np.ndarray:
        try:
            return np.fromiter(
                (self.index_of[c] for c in text), dtype=np.uint8, count=len(text)
            )
        except KeyError as exc:
            raise ValueError(f"character {exc.args[0]!r} not in vocabulary") from None

    def decode(self, indices: Iterable[int]) -> str:
        return "".join(self.symbols[int(i)] for i in indices)

    def to_json(self) -> str:
        return json.dumps(list(self.symbols))

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        data = json.loads(text)
        if not isinstance(data, list):
            raise ValueError("vocabulary file must hold a JSON array of symbols")
        return cls(data)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.symbols == other.symbols

    def __repr__(self) -> str:
        return f"Vocabulary({len(self.symbols)} symbols)"


@dataclass(frozen=True)
class TrainingWindow:
    """One training example: seq_len input indices and the next index."""

    inputs: tuple[int, ...]
    target: int


def corpus_text(lines: Iterable[str]) -> str:
    """Join normalized strings into one stream, newline after each."""
    return "".join(line + NEWLINE for line in lines)


def count_windows(length: int, seq_len: int, stride: int) -> int:
    """Number of windows a corpus of `length` characters yields.

    A window needs seq_len characters plus one target, and start
    positions advance by `stride`.
    """
    if seq_len < 1:
        raise ValueError("seq_len must be at least 1")
    if stride < 1:
        raise ValueError("stride must be at least 1")
    if length < seq_len + 1:
        return 0
    return (length - seq_len - 1) // stride + 1


def window_matrix(
    text: str, vocab: Vocabulary, seq_len: int = 40, stride: int = 3
) -> tuple[np.ndarray, np.ndarray]:
    """Encode every window as index arrays: inputs (N, seq_len), targets (N,)."""
    count = count_windows(len(text), seq_len, stride)
    if count == 0:
        raise ValueError(
            f"corpus of {len(text)} characters is too short for seq_len={seq_len}"
        )
    encoded = vocab.encode(text)
    starts = np.arange(count, dtype=np.int64) * stride
    inputs = encoded[starts[:, None] + np.arange(seq_len)]
    targets = encoded[starts + seq_len]
    return inputs, targets


def window_corpus(
    text: str, vocab: Vocabulary, seq_len: int = 40, stride: int = 3
) -> Iterator[TrainingWindow]:
    """Stream TrainingWindow records over the corpus text."""
    inputs, targets = window_matrix(text, vocab, seq_len, stride)
    for row, target in zip(inputs, targets):
        yield TrainingWindow(tuple(int(v) for v in row), int(target))


def one_hot(indices: np.ndarray, size: int) -> np.ndarray:
    """One-hot encode an index array, appending the vocabulary axis."""
    indices = np.asarray(indices)
    if indices.size and (indices.min() < 0 or indices.max() >= size):
        raise ValueError("index out of vocabulary range")
    return np.eye(size, dtype=np.float64)[indices]


def encode_window(window: TrainingWindow, vocab: Vocabulary) -> tuple[np.ndarray, np.ndarray]:
    """One-hot a single window: (seq_len, V) inputs and (V,) target."""
    x = one_hot(np.asarray(window.inputs, dtype=np.int64), vocab.size)
    y = one_hot(np.asarray([window.target], dtype=np.int64), vocab.size)[0]
    return x, y


def decode_window(x: np.ndarray, y: np.ndarray) -> TrainingWindow:
    """Invert encode_window via argmax over the vocabulary axis."""
    return TrainingWindow(tuple(int(i) for i in np.argmax(x, axis=1)), int(np.argmax(y)))
