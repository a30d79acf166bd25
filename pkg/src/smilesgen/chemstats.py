"""Distribution statistics over molecule sets.

Covers per-molecule structural features (ring counts, fused aromatics,
large rings, spiro atoms, heteroatom flags, molecular weight), a fixed
functional-group pattern table, circular fingerprints with Tanimoto
similarity, scaffold uniqueness/overlap, the two-sample
Kolmogorov-Smirnov test, and an aggregate report comparing a training
set against generated and control sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from smilesgen.molparse import ALLOWED_VALENCES, MoleculeGraph, canonical_form, scaffold

ATOMIC_WEIGHTS = {
    "H": 1.008,
    "C": 12.011,
    "N": 14.007,
    "O": 15.999,
    "S": 32.06,
    "P": 30.974,
    "F": 18.998,
    "Cl": 35.45,
    "Br": 79.904,
    "I": 126.904,
}

_HALOGENS = frozenset(["F", "Cl", "Br", "I"])
RING_BUCKETS = ("0", "1", "2", "3", "4", ">4")
LARGE_RING_SIZE = 8  # strictly larger counts as large


def molecular_weight(g: MoleculeGraph) -> float:
    total = 0.0
    for atom in g.atoms:
        total += ATOMIC_WEIGHTS[atom.element] + atom.implicit_h * ATOMIC_WEIGHTS["H"]
    return total


@dataclass(frozen=True)
class FeatureVector:
    ring_count: int
    ring_count_bucket: str
    has_fused_aromatic: bool
    has_large_ring: bool
    has_spiro: bool
    contains_n: bool
    contains_o: bool
    contains_s: bool
    contains_halogen: bool
    without_nos: bool
    molecular_weight: float


def _ring_views(g: MoleculeGraph) -> list[tuple[frozenset[int], frozenset[int], bool]]:
    """(atom set, bond index set, fully aromatic) per perceived ring."""
    views = []
    for ring in g.rings:
        bond_ids = frozenset(
            g._bond_index[(min(a, b), max(a, b))]
            for a, b in zip(ring, ring[1:] + ring[:1])
        )
        aromatic = all(g.atoms[i].aromatic for i in ring)
        views.append((frozenset(ring), bond_ids, aromatic))
    return views


def feature_vector(g: MoleculeGraph) -> FeatureVector:
    views = _ring_views(g)
    fused_aromatic = False
    spiro = False
    for i in range(len(views)):
        atoms_i, bonds_i, arom_i = views[i]
        for j in range(i + 1, len(views)):
            atoms_j, bonds_j, arom_j = views[j]
            shared_bonds = bonds_i & bonds_j
            if arom_i and arom_j and shared_bonds:
                fused_aromatic = True
            if len(atoms_i & atoms_j) == 1 and not shared_bonds:
                spiro = True
    elements = {a.element for a in g.atoms}
    n_rings = len(g.rings)
    bucket = str(n_rings) if n_rings <= 4 else ">4"
    has_n = "N" in elements
    has_o = "O" in elements
    has_s = "S" in elements
    return FeatureVector(
        ring_count=n_rings,
        ring_count_bucket=bucket,
        has_fused_aromatic=fused_aromatic,
        has_large_ring=any(len(r) > LARGE_RING_SIZE for r in g.rings),
        has_spiro=spiro,
        contains_n=has_n,
        contains_o=has_o,
        contains_s=has_s,
        contains_halogen=bool(elements & _HALOGENS),
        without_nos=not (has_n or has_o or has_s),
        molecular_weight=molecular_weight(g),
    )


# --- functional groups ------------------------------------------------------


@dataclass(frozen=True)
class PatternAtom:
    elements: frozenset[str]
    aromatic: bool | None = None
    h_count: int | None = None
    degree: int | None = None
    # Incident fixed-order bonds the matched atom must NOT have,
    # as (element or None for any, bond order) pairs.
    forbid: tuple[tuple[str | None, int], ...] = ()


@dataclass(frozen=True)
class Pattern:
    name: str
    atoms: tuple[PatternAtom, ...]
    # (earlier index, later index, label); label is an int bond order,
    # "a" for aromatic, or None for any bond.
    bonds: tuple[tuple[int, int, object], ...]


def _pa(
    elements: str | Iterable[str],
    aromatic: bool | None = None,
    h_count: int | None = None,
    degree: int | None = None,
    forbid: tuple[tuple[str | None, int], ...] = (),
) -> PatternAtom:
    if isinstance(elements, str):
        elements = [elements]
    return PatternAtom(frozenset(elements), aromatic, h_count, degree, forbid)


_NO_CARBONYL = (("O", 2),)

FUNCTIONAL_GROUP_PATTERNS: tuple[Pattern, ...] = (
    Pattern(
        "carboxylic_acid",
        (_pa("C", aromatic=False), _pa("O", degree=1), _pa("O", h_count=1, degree=1)),
        ((0, 1, 2), (0, 2, 1)),
    ),
    Pattern(
        "ester",
        (
            _pa("C", aromatic=False),
            _pa("O", degree=1),
            _pa("O", aromatic=False, h_count=0, degree=2),
            _pa("C"),
        ),
        ((0, 1, 2), (0, 2, 1), (2, 3, 1)),
    ),
    Pattern(
        "amide",
        (_pa("C", aromatic=False), _pa("O", degree=1), _pa("N", aromatic=False)),
        ((0, 1, 2), (0, 2, 1)),
    ),
    Pattern(
        "ketone",
        (
            _pa("C", aromatic=False, degree=3),
            _pa("O", degree=1),
            _pa("C"),
            _pa("C"),
        ),
        ((0, 1, 2), (0, 2, 1), (0, 3, 1)),
    ),
    Pattern(
        "aldehyde",
        (_pa("C", aromatic=False, degree=2, h_count=1), _pa("O", degree=1), _pa("C")),
        ((0, 1, 2), (0, 2, 1)),
    ),
    Pattern(
        "ether",
        (
            _pa("O", aromatic=False, h_count=0, degree=2),
            _pa("C", forbid=_NO_CARBONYL),
            _pa("C", forbid=_NO_CARBONYL),
        ),
        ((0, 1, 1), (0, 2, 1)),
    ),
    Pattern(
        "hydroxyl",
        (_pa("O", h_count=1, degree=1), _pa("C", forbid=_NO_CARBONYL)),
        ((0, 1, 1),),
    ),
    Pattern(
        "primary_amine",
        (_pa("N", aromatic=False, h_count=2, degree=1), _pa("C", forbid=_NO_CARBONYL)),
        ((0, 1, 1),),
    ),
    Pattern(
        "secondary_amine",
        (
            _pa("N", aromatic=False, h_count=1, degree=2),
            _pa("C", forbid=_NO_CARBONYL),
            _pa("C", forbid=_NO_CARBONYL),
        ),
        ((0, 1, 1), (0, 2, 1)),
    ),
    Pattern(
        "tertiary_amine",
        (
            _pa("N", aromatic=False, h_count=0, degree=3),
            _pa("C", forbid=_NO_CARBONYL),
            _pa("C", forbid=_NO_CARBONYL),
            _pa("C", forbid=_NO_CARBONYL),
        ),
        ((0, 1, 1), (0, 2, 1), (0, 3, 1)),
    ),
    Pattern(
        "nitrile",
        (_pa("N", aromatic=False, degree=1), _pa("C")),
        ((0, 1, 3),),
    ),
    # Unreachable for neutral nitrogen under the valence table; kept so
    # the group is reported (always zero) rather than silently missing.
    Pattern(
        "nitro",
        (_pa("N", aromatic=False, degree=3), _pa("O", degree=1), _pa("O", degree=1)),
        ((0, 1, 2), (0, 2, 2)),
    ),
    Pattern(
        "sulfonamide",
        (
            _pa("S", degree=4),
            _pa("O", degree=1),
            _pa("O", degree=1),
            _pa("N", aromatic=False),
        ),
        ((0, 1, 2), (0, 2, 2), (0, 3, 1)),
    ),
    Pattern(
        "sulfone",
        (
            _pa("S", degree=4),
            _pa("O", degree=1),
            _pa("O", degree=1),
            _pa("C"),
            _pa("C"),
        ),
        ((0, 1, 2), (0, 2, 2), (0, 3, 1), (0, 4, 1)),
    ),
    Pattern(
        "urea",
        (
            _pa("C", aromatic=False, degree=3),
            _pa("O", degree=1),
            _pa("N", aromatic=False),
            _pa("N", aromatic=False),
        ),
        ((0, 1, 2), (0, 2, 1), (0, 3, 1)),
    ),
    Pattern(
        "carbamate",
        (
            _pa("C", aromatic=False, degree=3),
            _pa("O", degree=1),
            _pa("O", h_count=0, degree=2),
            _pa("N", aromatic=False),
        ),
        ((0, 1, 2), (0, 2, 1), (0, 3, 1)),
    ),
    Pattern(
        "halogen_on_carbon",
        (_pa(_HALOGENS, degree=1), _pa("C")),
        ((0, 1, 1),),
    ),
    Pattern(
        "aromatic_n_heterocycle",
        (_pa("N", aromatic=True),),
        (),
    ),
)


def _atom_matches(g: MoleculeGraph, idx: int, pa: PatternAtom) -> bool:
    atom = g.atoms[idx]
    if atom.element not in pa.elements:
        return False
    if pa.aromatic is not None and atom.aromatic != pa.aromatic:
        return False
    if pa.h_count is not None and atom.implicit_h != pa.h_count:
        return False
    if pa.degree is not None and g.degree(idx) != pa.degree:
        return False
    for element, order in pa.forbid:
        for j, b in g.neighbors(idx):
            bond = g.bonds[b]
            if bond.aromatic:
                continue
            if bond.order == order and (element is None or g.atoms[j].element == element):
                return False
    return True


def _bond_matches(g: MoleculeGraph, i: int, j: int, label) -> bool:
    bond = g.bond_between(i, j)
    if bond is None:
        return False
    if label is None:
        return True
    if label == "a":
        return bond.aromatic
    return not bond.aromatic and bond.order == label


def count_pattern(g: MoleculeGraph, pattern: Pattern) -> int:
    """Distinct atom sets matching the pattern (substructure semantics)."""
    k = len(pattern.atoms)
    found: set[frozenset[int]] = set()
    assignment: list[int] = []

    def backtrack(depth: int) -> None:
        if depth == k:
            found.add(frozenset(assignment))
            return
        pa = pattern.atoms[depth]
        for idx in range(len(g.atoms)):
            if idx in assignment:
                continue
            if not _atom_matches(g, idx, pa):
                continue
            ok = True
            for a, b, label in pattern.bonds:
                if b == depth and a < depth:
                    if not _bond_matches(g, assignment[a], idx, label):
                        ok = False
                        break
            if ok:
                assignment.append(idx)
                backtrack(depth + 1)
                assignment.pop()

    backtrack(0)
    return len(found)


def functional_groups(g: MoleculeGraph) -> dict[str, int]:
    """Counts for every pattern in the built-in table (zeros included)."""
    return {p.name: count_pattern(g, p) for p in FUNCTIONAL_GROUP_PATTERNS}


# --- fingerprints -----------------------------------------------------------

_MASK64 = (1 << 64) - 1
_HASH_SEED = 0x243F6A8885A308D3
_ELEMENT_CODES = {el: k for k, el in enumerate(sorted(ALLOWED_VALENCES))}


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def _mix(parts: Iterable[int]) -> int:
    """Order-sensitive 64-bit combiner built from splitmix64 rounds."""
    h = _HASH_SEED
    for p in parts:
        h = _splitmix64(h ^ (p & _MASK64))
    return h


@dataclass(frozen=True)
class Fingerprint:
    bits: int  # bitmask of width nbits
    nbits: int
    radius: int

    def count(self) -> int:
        return self.bits.bit_count()


def morgan_fingerprint(g: MoleculeGraph, radius: int = 2, nbits: int = 2048) -> Fingerprint:
    """Circular environment fingerprint.

    Atom invariants start from (element, degree, implicit H, aromatic
    flag) and are combined with sorted neighbor invariants for `radius`
    rounds; every environment hash from every round is folded into the
    bit width by modulo.  Depends only on graph structure, never on
    atom input order.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if nbits < 1 or (nbits & (nbits - 1)) != 0:
        raise ValueError("nbits must be a positive power of two")
    inv = [
        _mix(
            (
                _ELEMENT_CODES[a.element],
                g.degree(i),
                a.implicit_h,
                int(a.aromatic),
            )
        )
        for i, a in enumerate(g.atoms)
    ]
    bits = 0
    for value in inv:
        bits |= 1 << (value % nbits)
    for r in range(1, radius + 1):
        nxt = []
        for i in range(len(g.atoms)):
            neighbor_part = sorted(
                (0 if g.bonds[b].aromatic else g.bonds[b].order, inv[j])
                for j, b in g.neighbors(i)
            )
            parts = [r, inv[i]]
            for code, val in neighbor_part:
                parts.append(code)
                parts.append(val)
            nxt.append(_mix(parts))
        inv = nxt
        for value in inv:
            bits |= 1 << (value % nbits)
    return Fingerprint(bits, nbits, radius)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """|A∩B| / |A∪B| over set bits; 1.0 when both fingerprints are empty."""
    if a.nbits != b.nbits:
        raise ValueError("fingerprint widths differ")
    union = (a.bits | b.bits).bit_count()
    if union == 0:
        return 1.0
    return (a.bits & b.bits).bit_count() / union


SIMILARITY_BIN_WIDTH = 0.05
_N_SIM_BINS = 20


@dataclass
class SimilarityResult:
    values: list[float]
    histogram: list[int]  # 20 bins of width 0.05 over [0, 1]


def nearest_similarity(
    queries: Sequence[Fingerprint], references: Sequence[Fingerprint]
) -> SimilarityResult:
    """Per-query maximum Tanimoto against the reference set, brute force."""
    if not references:
        raise ValueError("reference set is empty")
    values = []
    for q in queries:
        values.append(max(tanimoto(q, ref) for ref in references))
    histogram = [0] * _N_SIM_BINS
    for v in values:
        histogram[min(int(v / SIMILARITY_BIN_WIDTH), _N_SIM_BINS - 1)] += 1
    return SimilarityResult(values, histogram)


# --- scaffolds --------------------------------------------------------------


@dataclass(frozen=True)
class ScaffoldStats:
    unique_a: int
    unique_b: int
    overlap: int


def scaffold_set(molecules: Iterable[MoleculeGraph]) -> set[str]:
    return {canonical_form(scaffold(g)) for g in molecules}


def scaffold_stats(
    set_a: Iterable[MoleculeGraph], set_b: Iterable[MoleculeGraph]
) -> ScaffoldStats:
    scaffolds_a = scaffold_set(set_a)
    scaffolds_b = scaffold_set(set_b)
    return ScaffoldStats(
        len(scaffolds_a), len(scaffolds_b), len(scaffolds_a & scaffolds_b)
    )


# --- Kolmogorov-Smirnov -----------------------------------------------------

# Standard two-sample critical coefficients; alphas outside the table
# fall back to the asymptotic closed form sqrt(-ln(alpha/2)/2).
KS_COEFFICIENTS = {
    0.10: 1.224,
    0.05: 1.358,
    0.025: 1.48,
    0.01: 1.628,
    0.005: 1.731,
    0.001: 1.949,
}


@dataclass(frozen=True)
class KsResult:
    statistic: float
    n: int
    m: int
    alpha: float
    critical: float
    reject: bool

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "n": self.n,
            "m": self.m,
            "alpha": self.alpha,
            "critical": self.critical,
            "reject": self.reject,
        }


def ks_two_sample(a, b, alpha: float = 0.05) -> KsResult:
    """Exact max vertical distance between the two empirical CDFs."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    n, m = a.size, b.size
    if n == 0 or m == 0:
        raise ValueError("samples must be non-empty")
    grid = np.unique(np.concatenate([a, b]))
    cdf_a = np.searchsorted(a, grid, side="right") / n
    cdf_b = np.searchsorted(b, grid, side="right") / m
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    coefficient = KS_COEFFICIENTS.get(alpha)
    if coefficient is None:
        coefficient = math.sqrt(-math.log(alpha / 2.0) / 2.0)
    critical = coefficient * math.sqrt((n + m) / (n * m))
    return KsResult(d, n, m, alpha, critical, d > critical)


# --- aggregate report -------------------------------------------------------

MW_BIN_WIDTH = 50.0


@dataclass
class SetSummary:
    size: int
    ring_bucket_pct: dict[str, float]
    fused_aromatic_pct: float
    large_ring_pct: float
    spiro_pct: float
    contains_n_pct: float
    contains_o_pct: float
    contains_s_pct: float
    contains_halogen_pct: float
    without_nos_pct: float
    mw_histogram: dict[str, int]
    functional_group_pct: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "ring_bucket_pct": self.ring_bucket_pct,
            "fused_aromatic_pct": self.fused_aromatic_pct,
            "large_ring_pct": self.large_ring_pct,
            "spiro_pct": self.spiro_pct,
            "contains_n_pct": self.contains_n_pct,
            "contains_o_pct": self.contains_o_pct,
            "contains_s_pct": self.contains_s_pct,
            "contains_halogen_pct": self.contains_halogen_pct,
            "without_nos_pct": self.without_nos_pct,
            "mw_histogram": self.mw_histogram,
            "functional_group_pct": self.functional_group_pct,
        }


def summarize_set(molecules: Sequence[MoleculeGraph]) -> SetSummary:
    if not molecules:
        raise ValueError("cannot summarize an empty molecule set")
    size = len(molecules)
    features = [feature_vector(g) for g in molecules]
    bucket_counts = {b: 0 for b in RING_BUCKETS}
    mw_histogram: dict[str, int] = {}
    for fv in features:
        bucket_counts[fv.ring_count_bucket] += 1
        edge = int(fv.molecular_weight // MW_BIN_WIDTH) * int(MW_BIN_WIDTH)
        key = str(edge)
        mw_histogram[key] = mw_histogram.get(key, 0) + 1
    group_hits = {p.name: 0 for p in FUNCTIONAL_GROUP_PATTERNS}
    for g in molecules:
        for name, count in functional_groups(g).items():
            if count > 0:
                group_hits[name] += 1

    def pct(count: int) -> float:
        return 100.0 * count / size

    return SetSummary(
        size=size,
        ring_bucket_pct={b: pct(c) for b, c in bucket_counts.items()},
        fused_aromatic_pct=pct(sum(f.has_fused_aromatic for f in features)),
        large_ring_pct=pct(sum(f.has_large_ring for f in features)),
        spiro_pct=pct(sum(f.has_spiro for f in features)),
        contains_n_pct=pct(sum(f.contains_n for f in features)),
        contains_o_pct=pct(sum(f.contains_o for f in features)),
        contains_s_pct=pct(sum(f.contains_s for f in features)),
        contains_halogen_pct=pct(sum(f.contains_halogen for f in features)),
        without_nos_pct=pct(sum(f.without_nos for f in features)),
        mw_histogram=dict(sorted(mw_histogram.items(), key=lambda kv: int(kv[0]))),
        functional_group_pct={n: pct(c) for n, c in sorted(group_hits.items())},
    )


@dataclass
class ChemStatsReport:
    training: SetSummary
    generated: SetSummary | None
    baseline: SetSummary | None
    scaffold_unique: dict[str, int]
    scaffold_overlap: dict[str, int]
    similarity_histograms: dict[str, list[int]]
    ks: dict[str, KsResult]

    def to_dict(self) -> dict:
        return {
            "training": self.training.to_dict(),
            "generated": self.generated.to_dict() if self.generated else None,
            "baseline": self.baseline.to_dict() if self.baseline else None,
            "scaffold_unique": self.scaffold_unique,
            "scaffold_overlap": self.scaffold_overlap,
            "similarity_histograms": self.similarity_histograms,
            "ks": {name: res.to_dict() for name, res in self.ks.items()},
        }


def build_report(
    training: Sequence[MoleculeGraph],
    generated: Sequence[MoleculeGraph] | None = None,
    baseline: Sequence[MoleculeGraph] | None = None,
    radius: int = 2,
    nbits: int = 2048,
    alpha: float = 0.05,
) -> ChemStatsReport:
    """Aggregate comparison of up to three molecule sets.

    Nearest-neighbor similarities are taken against the training set
    with self-matches allowed, so comparing a set against itself gives
    similarity 1.0 everywhere and KS distance 0.
    """
    if not training:
        raise ValueError("training set is empty")
    if generated is not None and not generated:
        raise ValueError("generated set is empty")
    if baseline is not None and not baseline:
        raise ValueError("baseline set is empty")

    summary_t = summarize_set(training)
    summary_g = summarize_set(generated) if generated is not None else None
    summary_b = summarize_set(baseline) if baseline is not None else None

    scaffolds_t = scaffold_set(training)
    scaffold_unique = {"training": len(scaffolds_t)}
    scaffold_overlap: dict[str, int] = {}
    mw_t = [molecular_weight(g) for g in training]
    fps_t = [morgan_fingerprint(g, radius, nbits) for g in training]
    sims_t = nearest_similarity(fps_t, fps_t)
    similarity_histograms = {"training": sims_t.histogram}
    ks: dict[str, KsResult] = {}

    def compare(name: str, molecules: Sequence[MoleculeGraph]) -> None:
        scaffolds = scaffold_set(molecules)
        scaffold_unique[name] = len(scaffolds)
        scaffold_overlap[f"training_{name}"] = len(scaffolds_t & scaffolds)
        fps = [morgan_fingerprint(g, radius, nbits) for g in molecules]
        sims = nearest_similarity(fps, fps_t)
        similarity_histograms[name] = sims.histogram
        ks[f"mw_training_vs_{name}"] = ks_two_sample(
            mw_t, [molecular_weight(g) for g in molecules], alpha
        )
        ks[f"similarity_training_vs_{name}"] = ks_two_sample(
            sims_t.values, sims.values, alpha
        )

    if generated is not None:
        compare("generated", generated)
    if baseline is not None:
        compare("baseline", baseline)

    return ChemStatsReport(
        summary_t,
        summary_g,
        summary_b,
        scaffold_unique,
        scaffold_overlap,
        similarity_histograms,
        ks,
    )


def report_to_csv(report: ChemStatsReport) -> str:
    """Three-column feature table as CSV text."""
    columns = [("training", report.training)]
    if report.generated is not None:
        columns.append(("generated", report.generated))
    if report.baseline is not None:
        columns.append(("baseline", report.baseline))
    header = ["feature"] + [name for name, _ in columns]
    rows = [",".join(header)]

    def row(label: str, getter) -> None:
        cells = [label] + [f"{getter(summary):.1f}" for _, summary in columns]
        rows.append(",".join(cells))

    for bucket in RING_BUCKETS:
        label = f"rings_{bucket}" if bucket != ">4" else "rings_gt4"
        row(label, lambda s, b=bucket: s.ring_bucket_pct[b])
    row("fused_aromatic", lambda s: s.fused_aromatic_pct)
    row("large_ring", lambda s: s.large_ring_pct)
    row("spiro", lambda s: s.spiro_pct)
    row("contains_n", lambda s: s.contains_n_pct)
    row("contains_o", lambda s: s.contains_o_pct)
    row("contains_s", lambda s: s.contains_s_pct)
    row("contains_halogen", lambda s: s.contains_halogen_pct)
    row("without_nos", lambda s: s.without_nos_pct)
    return "\n".join(rows) + "\n"
