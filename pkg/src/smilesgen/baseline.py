"""Statistics-driven SMILES generator used as the weak control.

The model records atom-symbol frequencies, average character spans
between paired parentheses and paired ring digits, per-character
opening probabilities and the corpus length distribution.  Generation
fills a string symbol by symbol with roulette-wheel draws; ring and
branch closures are scheduled geometrically from the mean spans.
Aromatic symbols appear only between ring closures: they are emitted
as contiguous runs that open a ring digit on their first atom and
close it when the run ends, so an aromatic stretch is always its own
ring.  Outputs are grammatical by construction (they always pass the
syntactic prefilter) but carry no further chemical sense.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from smilesgen.lexicon import (
    ALIPHATIC_ATOM_CHARS,
    AROMATIC_ATOM_CHARS,
    ATOM_CHARS,
    RING_DIGITS,
)

_RING_DIGIT_POOL = tuple(sorted(RING_DIGITS))
# Virtual prior observations and gain for the per-string feedback that
# keeps the emitted aromatic share near the corpus share.
_SHARE_PRIOR = 8.0
_SHARE_GAIN = 10.0
# Non-aromatic rings may not close before this fraction of the mean
# span; the geometric closure hazard covers the remainder, keeping the
# realized mean span calibrated to the corpus.
_MIN_SPAN_FRACTION = 0.7


@dataclass
class BaselineModel:
    atom_freq: dict[str, float]
    mean_paren_span: float
    mean_ring_span: float
    branch_open_prob: float
    ring_open_prob: float
    double_bond_prob: float
    triple_bond_prob: float
    aromatic_ring_size: float  # mean atoms per aromatic ring
    aromatic_ring_sizes: np.ndarray  # empirical atoms-per-aromatic-ring
    aliphatic_ring_span: float  # mean chars between non-aromatic digit pairs
    lengths: np.ndarray  # empirical line-length distribution

    def __post_init__(self) -> None:
        total = sum(self.atom_freq.values())
        if not np.isclose(total, 1.0):
            raise ValueError("atom frequencies must sum to 1")
        if self.mean_paren_span < 1 or self.mean_ring_span < 1:
            raise ValueError("mean spans must be at least 1")


def _digit_owner(line: str, digit_pos: int) -> str:
    """Atom symbol the ring digit at digit_pos attaches to."""
    i = digit_pos - 1
    while i >= 0 and line[i] in RING_DIGITS:
        i -= 1
    return line[i] if i >= 0 else ""


def _ring_atoms(line: str, open_pos: int, close_pos: int) -> int:
    """Approximate atom count of the ring closed by a digit pair."""
    depth = 0
    atoms = 1  # the atom owning the opening digit
    balanced = True
    for i in range(open_pos, close_pos + 1):
        ch = line[i]
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                balanced = False
        elif ch in ATOM_CHARS and (depth == 0 or not balanced):
            atoms += 1
    if not balanced:
        # Closure inside a branch; recount every atom as a coarse guess.
        atoms = 1 + sum(1 for ch in line[open_pos : close_pos + 1] if ch in ATOM_CHARS)
    return atoms


def fit(corpus) -> BaselineModel:
    """Collect the generator's statistics from normalized corpus lines."""
    lines = [line for line in corpus]
    if not lines:
        raise ValueError("cannot fit the baseline on an empty corpus")
    atom_counts: dict[str, int] = {}
    paren_spans: list[int] = []
    ring_spans: list[int] = []
    aromatic_sizes: list[int] = []
    aliphatic_spans: list[int] = []
    total_chars = 0
    paren_opens = 0
    ring_opens = 0
    doubles = 0
    triples = 0
    lengths = []
    for line in lines:
        lengths.append(len(line))
        total_chars += len(line)
        paren_stack: list[int] = []
        open_digits: dict[str, int] = {}
        for pos, ch in enumerate(line):
            if ch in ATOM_CHARS:
                atom_counts[ch] = atom_counts.get(ch, 0) + 1
            elif ch == "(":
                paren_stack.append(pos)
                paren_opens += 1
            elif ch == ")":
                if paren_stack:
                    paren_spans.append(pos - paren_stack.pop())
            elif ch in RING_DIGITS:
                if ch in open_digits:
                    open_pos = open_digits.pop(ch)
                    ring_spans.append(pos - open_pos)
                    if _digit_owner(line, open_pos) in AROMATIC_ATOM_CHARS:
                        aromatic_sizes.append(_ring_atoms(line, open_pos, pos))
                    else:
                        aliphatic_spans.append(pos - open_pos)
                else:
                    open_digits[ch] = pos
                    ring_opens += 1
            elif ch == "=":
                doubles += 1
            elif ch == "#":
                triples += 1
    atom_total = sum(atom_counts.values())
    if atom_total == 0:
        raise ValueError("corpus contains no atom symbols")
    atom_freq = {sym: atom_counts[sym] / atom_total for sym in sorted(atom_counts)}
    mean_ring_span = max(1.0, float(np.mean(ring_spans))) if ring_spans else 1.0
    return BaselineModel(
        atom_freq=atom_freq,
        mean_paren_span=max(1.0, float(np.mean(paren_spans))) if paren_spans else 1.0,
        mean_ring_span=mean_ring_span,
        branch_open_prob=paren_opens / total_chars,
        ring_open_prob=ring_opens / total_chars,
        double_bond_prob=doubles / total_chars,
        triple_bond_prob=triples / total_chars,
        aromatic_ring_size=(
            max(3.0, float(np.mean(aromatic_sizes))) if aromatic_sizes else 6.0
        ),
        aromatic_ring_sizes=np.asarray(
            sorted(max(3, s) for s in aromatic_sizes) if aromatic_sizes else [6],
            dtype=np.int64,
        ),
        aliphatic_ring_span=(
            max(1.0, float(np.mean(aliphatic_spans)))
            if aliphatic_spans
            else mean_ring_span
        ),
        lengths=np.asarray(sorted(lengths), dtype=np.int64),
    )


class _Roulette:
    def __init__(self, freq: dict[str, float]):
        self.symbols = list(freq.keys())
        weights = np.asarray([freq[s] for s in self.symbols], dtype=np.float64)
        self.probs = weights / weights.sum()

    def draw(self, rng: np.random.Generator) -> str:
        return self.symbols[int(rng.choice(len(self.symbols), p=self.probs))]


def generate(model: BaselineModel, rng: np.random.Generator) -> str:
    """Emit one raw string; always grammatical, rarely good chemistry."""
    aliphatic_freq = {
        s: p for s, p in model.atom_freq.items() if s in ALIPHATIC_ATOM_CHARS
    }
    if not aliphatic_freq:
        aliphatic_freq = {"C": 1.0}
    aromatic_freq = {
        s: p for s, p in model.atom_freq.items() if s in AROMATIC_ATOM_CHARS
    }
    aliphatic = _Roulette(aliphatic_freq)
    aromatic = _Roulette(aromatic_freq) if aromatic_freq else None
    share_target = sum(aromatic_freq.values())

    target = int(rng.choice(model.lengths))
    run_mean = max(3.0, model.aromatic_ring_size)
    ring_min_age = max(2, int(round(_MIN_SPAN_FRACTION * model.aliphatic_ring_span)))
    residual_span = max(1.0, (1.0 - _MIN_SPAN_FRACTION) * model.aliphatic_ring_span)
    ring_close_hazard = 1.0 / residual_span
    paren_close_hazard = 1.0 / model.mean_paren_span
    bond_prob = model.double_bond_prob + model.triple_bond_prob
    # Entry probability per atom slot so that runs of mean length
    # run_mean reproduce the corpus aromatic share in expectation.
    base_enter = 0.0
    if aromatic is not None and 0.0 < share_target < 1.0:
        base_enter = share_target / (run_mean * (1.0 - share_target) + share_target)
    elif aromatic is not None:
        base_enter = 1.0

    out: list[str] = []
    depth = 0
    open_rings: dict[str, int] = {}  # digit -> atoms emitted since opening
    run_digit: str | None = None  # digit of the active aromatic ring
    run_size = 0
    run_goal = 0  # atoms the active run should reach before closing
    pending_bond = False
    digit_ok = False  # a ring digit may attach to the last token
    after_open = False  # last token was '('
    atoms_aromatic = 0
    atoms_aliphatic = 0

    def free_digit() -> str | None:
        for digit in _RING_DIGIT_POOL:
            if digit not in open_rings and digit != run_digit:
                return digit
        return None

    def age_rings() -> None:
        for digit in open_rings:
            open_rings[digit] += 1

    def emit_aliphatic() -> None:
        nonlocal digit_ok, after_open, pending_bond, atoms_aliphatic
        out.append(aliphatic.draw(rng))
        age_rings()
        atoms_aliphatic += 1
        pending_bond = False
        digit_ok = True
        after_open = False

    def emit_aromatic() -> None:
        nonlocal digit_ok, after_open, atoms_aromatic
        out.append(aromatic.draw(rng))
        age_rings()
        atoms_aromatic += 1
        digit_ok = True
        after_open = False

    def emit_atom() -> None:
        # One atom slot: start an aromatic run or place an aliphatic atom.
        nonlocal run_digit, run_size, run_goal
        goal = want_run() if run_digit is None else 0
        if goal:
            emit_aromatic()
            run_digit = free_digit()
            out.append(run_digit)
            run_size = 1
            run_goal = goal
        else:
            emit_aliphatic()

    def share_error() -> float:
        # Positive when the string is behind on aromatic atoms.
        share = (atoms_aromatic + share_target * _SHARE_PRIOR) / (
            atoms_aromatic + atoms_aliphatic + _SHARE_PRIOR
        )
        return (share_target - share) / max(share_target, 1e-9)

    def want_run() -> int:
        """Atom count for a new aromatic ring, or 0 to stay aliphatic."""
        if aromatic is None or free_digit() is None:
            return 0
        goal = int(rng.choice(model.aromatic_ring_sizes))
        # A run that cannot finish before the length target would leave
        # its aromatic surplus unpaid, biasing the emitted share, so
        # block late entries unless the string is behind on that share.
        error = share_error()
        if len(out) + goal + 1 > target and error <= 0.0:
            return 0
        correction = 1.0 + _SHARE_GAIN * error
        if rng.random() < min(1.0, max(0.0, base_enter * correction)):
            return goal
        return 0

    def close_one_ring() -> None:
        nonlocal digit_ok, after_open
        closable = sorted(d for d, age in open_rings.items() if age >= ring_min_age)
        digit = closable[int(rng.integers(len(closable)))]
        del open_rings[digit]
        out.append(digit)
        digit_ok = True
        after_open = False

    while True:
        closing = len(out) >= target
        if run_digit is not None:
            # Inside an aromatic run: grow the ring to its goal size.
            if run_size >= run_goal or (closing and run_size >= 3):
                out.append(run_digit)
                run_digit = None
                run_size = 0
                digit_ok = True
            else:
                emit_aromatic()
                run_size += 1
            continue
        if pending_bond:
            emit_aliphatic()
            continue
        if closing:
            closable = [d for d, age in open_rings.items() if age >= ring_min_age]
            if after_open:
                emit_atom()
            elif closable and digit_ok:
                close_one_ring()
            elif open_rings:
                emit_atom()
            elif depth > 0:
                out.append(")")
                depth -= 1
                digit_ok = False
            elif not out:
                emit_atom()
            else:
                break
            continue

        closable = [d for d, age in open_rings.items() if age >= ring_min_age]
        if closable and digit_ok and rng.random() < ring_close_hazard:
            close_one_ring()
        elif depth > 0 and not after_open and rng.random() < paren_close_hazard:
            out.append(")")
            depth -= 1
            digit_ok = False
        elif digit_ok and free_digit() is not None and rng.random() < model.ring_open_prob:
            digit = free_digit()
            out.append(digit)
            open_rings[digit] = 0
        elif (digit_ok or (out and out[-1] == ")")) and rng.random() < model.branch_open_prob:
            out.append("(")
            depth += 1
            digit_ok = False
            after_open = True
        elif out and not after_open and digit_ok and rng.random() < bond_prob:
            if bond_prob > 0 and rng.random() < model.triple_bond_prob / bond_prob:
                out.append("#")
            else:
                out.append("=")
            pending_bond = True
            digit_ok = False
        else:
            emit_atom()
    return "".join(out)
