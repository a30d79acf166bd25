"""Synthetic drug-like corpus for desk-scale runs.

Molecules are assembled from hand-written ring cores and substituent
fragments that only use the normalized alphabet, then structurally
validated and deduplicated by canonical form.  The mix leans aromatic
with common heteroatoms, carbonyl chemistry and a few fused, spiro and
macrocyclic systems, which gives the statistics modules something
realistic to chew on.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from smilesgen.molparse import ParseError, canonical_form, parse

# {x}/{y} are substituent slots.  Cores use ring digits 1-2 and
# substituents digits 3-4, so nesting never collides.
_AROMATIC_CORES = (
    "c1ccc({x})cc1",
    "c1ccc({x})c({y})c1",
    "c1cc({x})cc({y})c1",
    "c1cc({x})c({y})cc1C",
    "c1ccc2cc({x})ccc2c1",
    "c1ccc2cc({x})ccc2c1{y}",
    "c1ccc2cc({x})c({y})cc2c1",
    "Cc1ccc2cc({x})ccc2c1",
    "c1ccc2nc({x})ccc2c1",
    "c1ccc2nc({x})cc({y})c2c1",
    "c1ccc2ncnc({x})c2c1",
    "c1ccc2Ac({x})cc2c1",
    "c1ccc2sc({x})cc2c1",
    "c1cc2ccc({x})cc2cc1{y}",
    "Cc1cc({x})c2cc({y})ccc2c1",
    "c1ccnc({x})c1",
    "c1ccn({x})c1",
    "c1cc({x})Ac1",
    "c1cc({x})sc1",
    "c1cc({x})oc1",
    "c1ccc(c2ccc({x})cc2)cc1",
    "c1cc({y})cc(c2ccc({x})cc2)c1",
    "c1ccc(N2CCN({x})CC2)cc1",
    "c1ccc(C2CCN({x})CC2)cc1",
    "c1ccc(OCc2ccc({x})cc2)cc1",
    "c1cc(C(=O)N{x})cc({y})c1",
)
_ALIPHATIC_CORES = (
    "C1CCC({x})CC1",
    "C1CCN({x})CC1",
    "C1CC({x})C1",
    "C1CCOC({x})C1",
    "C1CCC2(CC1)CCC({x})CC2",
    "C1CCC2CCC({x})CC2C1",
    "C1CCCCC1C2CCC({x})CC2",
    "C1CCN(CC1)C(=O)C2CCC({x})CC2",
    "C1CCCCCCCC1{x}",
    "C1CCCCCC({x})CCC1",
    "C1CCCC({x})CCCCCC1",
    "C1CCCCC({x})CCCCC1{y}",
    "C1CCCCCCCCCC(=O)O1",
    "C1CCCCN(C{x})CCCCC1",
    "O1CCCCCCCCC1",
    "C1CCCCCCCCCCC1",
)
_ACYCLIC = (
    "CC(=O)OCC",
    "CCN(CC)CC",
    "CC(C)CO",
    "CCOC(=O)CC",
    "CC(=O)NCC",
    "NC(=O)NC",
    "CCSCC",
    "CC(O)CCC",
    "OCC(O)CO",
    "CCC=CC",
    "CC(C)(C)CO",
    "N#CCCC",
    "LCC(=O)O",
    "CCCCCCCC",
    "OP(=O)(O)OC",
    "CCOC(=O)CCNC(=O)CC",
    "CCN(CC)CCOC(=O)CC",
    "CCOC(=O)C(C)NC(=O)CCC",
    "CCCCN(CCO)CC(=O)NCC",
)
_SIMPLE_SUBS = (
    "C",
    "CC",
    "CCC",
    "C(C)C",
    "O",
    "OC",
    "OCC",
    "N",
    "NC",
    "N(C)C",
    "F",
    "L",
    "R",
    "I",
    "C#N",
    "C=C",
    "CO",
    "CCO",
    "CCN",
    "SC",
    "C(=O)O",
    "C(=O)OC",
    "C(=O)N",
    "C(=O)NC",
    "C(=O)C",
    "NC(=O)C",
    "OC(=O)C",
    "OC(=O)NC",
    "S(=O)(=O)N",
    "S(=O)(=O)C",
    "NS(=O)(=O)C",
    "C(F)(F)F",
)
_RING_SUBS = (
    "c3ccccc3",
    "C3CCCCC3",
    "C3CCNCC3",
    "C3CCOCC3",
    "c3ccncc3",
    "N3CCOCC3",
    "Cc3ccccc3",
    "OCc3ccccc3",
    "c3ccc(C)cc3",
    "c3ccc(OC)cc3",
    "c3ccc(F)cc3",
    "c3ccc4ccccc4c3",
    "Cc3ccc4ccccc4c3",
    "c3cc4ccccc4cc3C",
    "C3CCC(O)CC3",
    "N3CCN(C)CC3",
)
# Rings a chain can pass through: the closure atom takes the next bond.
_MID_RINGS = (
    "c3ccccc3",
    "c3ccc(F)cc3",
    "c3ccc4ccccc4c3",
    "C3CCCCC3",
    "C3CCC(CC3)",
    "C3CCN(CC3)",
    "c3ccncc3",
)
# Every linker ends on an atom that tolerates one more single bond.
_LINKERS = (
    "C",
    "CC",
    "CCC",
    "C(C)",
    "O",
    "OC",
    "N",
    "NC",
    "C(=O)",
    "C(=O)N",
    "C(=O)O",
    "NC(=O)",
    "OC(=O)",
    "S(=O)(=O)",
    "C=C",
)


def _substituent(rng: np.random.Generator) -> str:
    parts = []
    segments = 2 if rng.random() < 0.55 else 1
    for segment in range(segments):
        for _ in range(int(rng.choice(4, p=[0.15, 0.35, 0.3, 0.2]))):
            parts.append(_LINKERS[int(rng.integers(len(_LINKERS)))])
        if segment < segments - 1:
            parts.append(_MID_RINGS[int(rng.integers(len(_MID_RINGS)))])
        else:
            # Ring terminals stay near half so strings keep some chain flavor.
            pool = _RING_SUBS if rng.random() < 0.5 else _SIMPLE_SUBS
            parts.append(pool[int(rng.integers(len(pool)))])
    return "".join(parts)


def _fill(template: str, rng: np.random.Generator) -> str:
    values = {}
    if "{x}" in template:
        values["x"] = _substituent(rng)
    if "{y}" in template:
        values["y"] = _substituent(rng)
    return template.format(**values) if values else template


@lru_cache(maxsize=4)
def toy_corpus(count: int = 5000, seed: int = 2024) -> tuple[str, ...]:
    """Deterministic list of `count` unique valid normalized strings."""
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    groups = (_AROMATIC_CORES, _ALIPHATIC_CORES, _ACYCLIC)
    weights = np.asarray([0.6, 0.34, 0.06])
    lines: list[str] = []
    seen: set[str] = set()
    attempts = 0
    while len(lines) < count:
        attempts += 1
        if attempts > count * 100:
            raise RuntimeError("toy corpus generation failed to reach target size")
        group = groups[int(rng.choice(len(groups), p=weights))]
        text = _fill(group[int(rng.integers(len(group)))], rng)
        try:
            key = canonical_form(parse(text))
        except ParseError:
            continue
        if key in seen:
            continue
        seen.add(key)
        lines.append(text)
    return tuple(lines)
