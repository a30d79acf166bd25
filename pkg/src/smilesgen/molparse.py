"""Structural validation of normalized SMILES strings.

Two stages: `prefilter` is a constant-state scan that throws out strings
with obviously broken punctuation, and `parse` builds a molecular graph,
perceives rings, checks aromatic membership, kekulizes, and fills
implicit hydrogens against a valence table.  The module also provides a
canonical string form, randomized alternative spellings, and ring-system
scaffolds, all over the same graph type.
"""

from __future__ import annotations

import enum
import sys
from collections import deque
from dataclasses import dataclass, replace
from typing import Sequence

import networkx as nx

from smilesgen.lexicon import ALIPHATIC_ATOM_CHARS, AROMATIC_ATOM_CHARS, BR_CHAR, CL_CHAR, NH_CHAR

# Valences an uncharged atom may carry.  Sulfur and phosphorus get their
# common expanded states; everything else is fixed.
ALLOWED_VALENCES: dict[str, tuple[int, ...]] = {
    "H": (1,),
    "C": (4,),
    "N": (3,),
    "O": (2,),
    "S": (2, 4, 6),
    "P": (3, 5),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

_ALIPHATIC_ELEMENT = {c: c for c in "CNOSPFI"}
_ALIPHATIC_ELEMENT[CL_CHAR] = "Cl"
_ALIPHATIC_ELEMENT[BR_CHAR] = "Br"
_AROMATIC_ELEMENT = {"c": "C", "n": "N", "o": "O", "s": "S", "p": "P", NH_CHAR: "N"}

_BOND_ORDERS = {"=": 2, "#": 3}
_RING_LABELS = frozenset("123456789")


class ErrorKind(enum.Enum):
    SYNTAX = "SyntaxError"
    VALENCE = "ValenceError"
    AROMATICITY = "AromaticityError"
    KEKULIZATION = "KekulizationError"
    DISCONNECTED = "DisconnectedError"


class ParseError(ValueError):
    """Structural rejection with the stage that failed and, where it
    makes sense, the offending character position."""

    def __init__(self, kind: ErrorKind, message: str, position: int | None = None):
        self.kind = kind
        self.position = position
        if position is not None:
            message = f"{message} (position {position})"
        super().__init__(f"{kind.value}: {message}")


@dataclass(slots=True)
class Atom:
    element: str
    aromatic: bool
    forced_h: bool = False
    implicit_h: int = 0


@dataclass(slots=True)
class Bond:
    a: int
    b: int
    order: int  # 0 while unresolved during construction, then 1, 2 or 3
    aromatic: bool = False

    def other(self, i: int) -> int:
        return self.b if i == self.a else self.a


class MoleculeGraph:
    """Connected molecular graph with perceived rings and implicit H."""

    __slots__ = ("atoms", "bonds", "rings", "_adj", "_bond_index")

    def __init__(self, atoms: list[Atom], bonds: list[Bond]):
        self.atoms = atoms
        self.bonds = bonds
        self.rings: tuple[tuple[int, ...], ...] = ()
        self._adj: list[list[tuple[int, int]]] = [[] for _ in atoms]
        self._bond_index: dict[tuple[int, int], int] = {}
        for idx, bond in enumerate(bonds):
            self._adj[bond.a].append((bond.b, idx))
            self._adj[bond.b].append((bond.a, idx))
            self._bond_index[_pair(bond.a, bond.b)] = idx

    def neighbors(self, i: int) -> list[tuple[int, int]]:
        """(neighbor atom index, bond index) pairs for atom i."""
        return self._adj[i]

    def degree(self, i: int) -> int:
        return len(self._adj[i])

    def bond_between(self, i: int, j: int) -> Bond | None:
        idx = self._bond_index.get(_pair(i, j))
        return None if idx is None else self.bonds[idx]

    def bond_order_sum(self, i: int) -> int:
        return sum(self.bonds[b].order for _, b in self._adj[i])

    def __len__(self) -> int:
        return len(self.atoms)


def _pair(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


def prefilter(s: str) -> bool:
    """Cheap syntactic screen run before full parsing.

    Passes iff the string is non-empty, does not open with a bond symbol
    or a closing parenthesis, keeps parentheses balanced without going
    negative, and uses every ring digit an even number of times.  Any
    string the full parser accepts also passes here.
    """
    if not s:
        return False
    if s[0] in "=#)":
        return False
    depth = 0
    digit_parity = 0  # bit per digit character
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                return False
        elif "0" <= ch <= "9":
            digit_parity ^= 1 << (ord(ch) - ord("0"))
    return depth == 0 and digit_parity == 0


def parse(s: str) -> MoleculeGraph:
    """Full structural parse; raises ParseError when the string does not
    describe a sound neutral molecule."""
    atoms, bonds = _build_graph(s)
    return _finalize(atoms, bonds)


def _build_graph(s: str) -> tuple[list[Atom], list[Bond]]:
    if not s:
        raise ParseError(ErrorKind.SYNTAX, "empty string")
    atoms: list[Atom] = []
    bonds: list[Bond] = []
    bond_index: dict[tuple[int, int], int] = {}
    stack: list[int] = []
    ring_open: dict[str, tuple[int, int, int]] = {}
    current: int | None = None
    pending = 0  # bond order queued by '=' or '#'
    digit_ok = False  # ring digits may only follow an atom or another digit
    after_open = False  # previous token was '('

    def add_bond(a: int, b: int, order: int, pos: int) -> None:
        if a == b:
            raise ParseError(ErrorKind.SYNTAX, "ring bond closes on its own atom", pos)
        key = _pair(a, b)
        if key in bond_index:
            raise ParseError(ErrorKind.SYNTAX, "duplicate bond between two atoms", pos)
        bond_index[key] = len(bonds)
        bonds.append(Bond(a, b, order))

    for pos, ch in enumerate(s):
        if ch in ALIPHATIC_ATOM_CHARS or ch in AROMATIC_ATOM_CHARS:
            aromatic = ch in AROMATIC_ATOM_CHARS
            element = _AROMATIC_ELEMENT[ch] if aromatic else _ALIPHATIC_ELEMENT[ch]
            atoms.append(Atom(element, aromatic, forced_h=(ch == NH_CHAR)))
            new = len(atoms) - 1
            if current is not None:
                add_bond(current, new, pending, pos)
            current = new
            pending = 0
            digit_ok = True
            after_open = False
        elif ch in _RING_LABELS:
            if not digit_ok or current is None:
                raise ParseError(ErrorKind.SYNTAX, "ring digit not attached to an atom", pos)
            if ch in ring_open:
                open_atom, open_order, open_pos = ring_open.pop(ch)
                if pending and open_order and pending != open_order:
                    raise ParseError(
                        ErrorKind.SYNTAX, f"ring {ch} opened and closed with different bond orders", pos
                    )
                add_bond(open_atom, current, pending or open_order, pos)
            else:
                ring_open[ch] = (current, pending, pos)
            pending = 0
            after_open = False
        elif ch in _BOND_ORDERS:
            if pending:
                raise ParseError(ErrorKind.SYNTAX, "two bond symbols in a row", pos)
            if current is None:
                raise ParseError(ErrorKind.SYNTAX, "bond symbol before any atom", pos)
            pending = _BOND_ORDERS[ch]
        elif ch == "(":
            if current is None:
                raise ParseError(ErrorKind.SYNTAX, "branch before any atom", pos)
            if pending:
                raise ParseError(ErrorKind.SYNTAX, "bond symbol before a branch", pos)
            if after_open:
                raise ParseError(ErrorKind.SYNTAX, "branch starts with another branch", pos)
            stack.append(current)
            digit_ok = False
            after_open = True
        elif ch == ")":
            if not stack:
                raise ParseError(ErrorKind.SYNTAX, "unmatched closing parenthesis", pos)
            if pending:
                raise ParseError(ErrorKind.SYNTAX, "dangling bond before closing parenthesis", pos)
            if after_open:
                raise ParseError(ErrorKind.SYNTAX, "empty branch", pos)
            current = stack.pop()
            digit_ok = False
            after_open = False
        else:
            raise ParseError(ErrorKind.SYNTAX, f"unexpected character {ch!r}", pos)

    if pending:
        raise ParseError(ErrorKind.SYNTAX, "dangling bond at end of string")
    if stack:
        raise ParseError(ErrorKind.SYNTAX, "unclosed branch")
    if ring_open:
        digits = ", ".join(sorted(ring_open))
        raise ParseError(ErrorKind.SYNTAX, f"unclosed ring label {digits}")
    if not atoms:
        raise ParseError(ErrorKind.SYNTAX, "no atoms")
    return atoms, bonds


def _finalize(atoms: list[Atom], bonds: list[Bond]) -> MoleculeGraph:
    """Connectivity, rings, aromaticity, kekulization, hydrogen fill."""
    graph = MoleculeGraph(atoms, bonds)
    _check_connected(graph)
    graph.rings = tuple(_perceive_rings(graph))
    _check_aromatic_membership(graph)
    _kekulize(graph)
    _fill_hydrogens(graph)
    return graph


def _check_connected(g: MoleculeGraph) -> None:
    seen = [False] * len(g)
    queue = deque([0])
    seen[0] = True
    count = 1
    while queue:
        u = queue.popleft()
        for v, _ in g.neighbors(u):
            if not seen[v]:
                seen[v] = True
                count += 1
                queue.append(v)
    if count != len(g):
        raise ParseError(ErrorKind.DISCONNECTED, "graph has more than one fragment")


def _bfs_tree(g: MoleculeGraph, root: int) -> tuple[list[int], list[int]]:
    dist = [-1] * len(g)
    parent = [-1] * len(g)
    dist[root] = 0
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v, _ in g.neighbors(u):
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                parent[v] = u
                queue.append(v)
    return dist, parent


def _path_to_root(i: int, parent: list[int]) -> list[int]:
    path = [i]
    while parent[path[-1]] >= 0:
        path.append(parent[path[-1]])
    return path


def _normalize_cycle(cycle: tuple[int, ...]) -> tuple[int, ...]:
    """Rotate and orient a cycle so equal rings compare equal."""
    k = cycle.index(min(cycle))
    rotated = cycle[k:] + cycle[:k]
    reverse = (rotated[0],) + tuple(reversed(rotated[1:]))
    return min(rotated, reverse)


def _perceive_rings(g: MoleculeGraph) -> list[tuple[int, ...]]:
    """Smallest set of smallest rings for a connected graph.

    Candidate cycles come from BFS trees rooted at every atom plus one
    non-tree edge; the basis is picked greedily by size with GF(2)
    independence over bond-membership vectors.
    """
    ring_count = len(g.bonds) - len(g) + 1
    if ring_count <= 0:
        return []
    candidates: dict[frozenset[int], tuple[int, tuple[int, ...], tuple[int, ...]]] = {}
    for root in range(len(g)):
        dist, parent = _bfs_tree(g, root)
        for bond in g.bonds:
            x, y = bond.a, bond.b
            if parent[x] == y or parent[y] == x:
                continue
            path_x = _path_to_root(x, parent)
            path_y = _path_to_root(y, parent)
            if set(path_x) & set(path_y) != {root}:
                continue
            cycle = tuple(reversed(path_x)) + tuple(path_y[:-1])
            key = frozenset(
                g._bond_index[_pair(cycle[i], cycle[(i + 1) % len(cycle)])]
                for i in range(len(cycle))
            )
            if key not in candidates:
                norm = _normalize_cycle(cycle)
                candidates[key] = (len(cycle), norm, norm)
    ordered = sorted(candidates.items(), key=lambda kv: (kv[1][0], kv[1][1]))

    chosen: list[tuple[int, ...]] = []
    basis: list[tuple[int, int]] = []  # (pivot bit, reduced mask)
    for key, (_, _, cycle) in ordered:
        mask = 0
        for bidx in key:
            mask |= 1 << bidx
        for pivot, bmask in basis:
            if (mask >> pivot) & 1:
                mask ^= bmask
        if mask:
            basis.append((mask.bit_length() - 1, mask))
            basis.sort(reverse=True)
            chosen.append(cycle)
            if len(chosen) == ring_count:
                break
    return chosen


def _check_aromatic_membership(g: MoleculeGraph) -> None:
    aromatic_rings = [r for r in g.rings if all(g.atoms[i].aromatic for i in r)]
    covered: set[int] = set()
    for ring in aromatic_rings:
        covered.update(ring)
    for i, atom in enumerate(g.atoms):
        if atom.aromatic and i not in covered:
            raise ParseError(
                ErrorKind.AROMATICITY,
                f"aromatic atom {i} is not part of any fully aromatic ring",
            )
    # Unspecified bonds inside fully aromatic rings take part in the
    # conjugated system; every other unspecified bond is a single bond.
    for ring in aromatic_rings:
        for k in range(len(ring)):
            bond = g.bonds[g._bond_index[_pair(ring[k], ring[(k + 1) % len(ring)])]]
            if bond.order == 0:
                bond.aromatic = True


def _kekulize(g: MoleculeGraph) -> None:
    """Assign alternating orders inside aromatic systems.

    Aromatic carbons must host exactly one double bond.  Two-connected
    aromatic N and P do too, while N with a fixed hydrogen, aromatic O
    and S, and three-connected N/P contribute a lone pair instead and
    stay out of the matching.
    """
    needs_match: list[int] = []
    for i, atom in enumerate(g.atoms):
        if not atom.aromatic:
            continue
        if atom.element == "C":
            required = True
        elif atom.element in ("N", "P"):
            required = not atom.forced_h and g.degree(i) == 2
        else:
            required = False
        if required and any(
            g.bonds[b].order >= 2 for _, b in g.neighbors(i) if not g.bonds[b].aromatic
        ):
            # An explicit double or triple bond already saturates the atom.
            required = False
        if required:
            needs_match.append(i)

    node_set = set(needs_match)
    matcher = nx.Graph()
    matcher.add_nodes_from(sorted(node_set))
    for bond in sorted(g.bonds, key=lambda b: _pair(b.a, b.b)):
        if bond.aromatic and bond.a in node_set and bond.b in node_set:
            matcher.add_edge(*_pair(bond.a, bond.b))
    matching = nx.max_weight_matching(matcher, maxcardinality=True)
    if 2 * len(matching) < len(node_set):
        raise ParseError(
            ErrorKind.KEKULIZATION,
            "no alternating single/double assignment covers the aromatic system",
        )
    for u, v in matching:
        g.bonds[g._bond_index[_pair(u, v)]].order = 2
    for bond in g.bonds:
        if bond.order == 0:
            bond.order = 1


def _fill_hydrogens(g: MoleculeGraph) -> None:
    for i, atom in enumerate(g.atoms):
        bond_sum = g.bond_order_sum(i)
        allowed = ALLOWED_VALENCES[atom.element]
        if atom.forced_h:
            if bond_sum + 1 not in allowed:
                raise ParseError(
                    ErrorKind.VALENCE,
                    f"atom {i} ({atom.element}H) exceeds valence with {bond_sum} bonds",
                )
            atom.implicit_h = 1
            continue
        fitting = [v for v in allowed if v >= bond_sum]
        if not fitting:
            raise ParseError(
                ErrorKind.VALENCE,
                f"atom {i} ({atom.element}) carries {bond_sum} bonds, above any allowed valence",
            )
        atom.implicit_h = min(fitting) - bond_sum


def check_valence(g: MoleculeGraph) -> None:
    """Re-verify stored hydrogen counts against the valence table."""
    for i, atom in enumerate(g.atoms):
        total = g.bond_order_sum(i) + atom.implicit_h
        if total not in ALLOWED_VALENCES[atom.element]:
            raise ParseError(
                ErrorKind.VALENCE,
                f"atom {i} ({atom.element}) totals valence {total}",
            )
        if atom.forced_h and atom.implicit_h != 1:
            raise ParseError(
                ErrorKind.VALENCE,
                f"atom {i} must carry exactly one hydrogen",
            )


# --- canonical and alternative string forms -------------------------------


def _atom_symbol(atom: Atom) -> str:
    if atom.aromatic:
        if atom.forced_h:
            return NH_CHAR
        return atom.element.lower()
    if atom.element == "Cl":
        return CL_CHAR
    if atom.element == "Br":
        return BR_CHAR
    return atom.element


def _bond_code(bond: Bond) -> int:
    # Aromatic bonds compare equal regardless of the kekulized order so
    # every spelling of the same molecule ranks atoms identically.
    return 0 if bond.aromatic else bond.order


_BOND_SYMBOL = {2: "=", 3: "#"}


def write_smiles(g: MoleculeGraph, ranks: Sequence[int] | None = None) -> str:
    """Emit a SMILES string visiting atoms in the order given by ranks.

    The default rank order reproduces input numbering.  Ring-closure
    digits are allocated lowest-free-first and bond symbols appear on
    both sides of a closure.
    """
    n = len(g)
    if n == 0:
        raise ValueError("cannot write an empty graph")
    order = list(ranks) if ranks is not None else list(range(n))
    if len(order) != n:
        raise ValueError("rank vector length does not match atom count")

    def neighbor_key(item: tuple[int, int]) -> tuple[int, int]:
        return (order[item[0]], item[0])

    start = min(range(n), key=lambda i: (order[i], i))
    visited = [False] * n
    used_bonds = [False] * len(g.bonds)
    tree_children: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    opens: list[list[int]] = [[] for _ in range(n)]  # bond indices, discovery order
    closes: list[list[int]] = [[] for _ in range(n)]

    visited[start] = True
    # Iterative DFS; the recursive emitter below follows the same child
    # order, so "visited earlier" here means "emitted earlier" there.
    frames: list[tuple[int, list[tuple[int, int]]]] = [
        (start, sorted(g.neighbors(start), key=neighbor_key))
    ]
    while frames:
        u, todo = frames[-1]
        advanced = False
        while todo:
            v, bidx = todo.pop(0)
            if used_bonds[bidx]:
                continue
            used_bonds[bidx] = True
            if visited[v]:
                # Back edge: the earlier atom opens the digit, this one
                # closes it.
                opens[v].append(bidx)
                closes[u].append(bidx)
                continue
            visited[v] = True
            tree_children[u].append((v, bidx))
            frames.append((v, sorted(g.neighbors(v), key=neighbor_key)))
            advanced = True
            break
        if not advanced:
            frames.pop()

    if not all(visited):
        raise ParseError(ErrorKind.DISCONNECTED, "graph has more than one fragment")

    digit_of: dict[int, str] = {}
    free_digits = [str(d) for d in range(1, 10)]
    out: list[str] = []

    def bond_prefix(bidx: int) -> str:
        bond = g.bonds[bidx]
        if bond.aromatic:
            return ""
        return _BOND_SYMBOL.get(bond.order, "")

    def emit(u: int) -> None:
        out.append(_atom_symbol(g.atoms[u]))
        for bidx in closes[u]:
            digit = digit_of.pop(bidx)
            free_digits.append(digit)
            free_digits.sort()
            out.append(bond_prefix(bidx) + digit)
        for bidx in opens[u]:
            if not free_digits:
                raise RuntimeError("more than nine ring closures open at once")
            digit = free_digits.pop(0)
            digit_of[bidx] = digit
            out.append(bond_prefix(bidx) + digit)
        children = tree_children[u]
        for k, (v, bidx) in enumerate(children):
            last = k == len(children) - 1
            if not last:
                out.append("(")
            out.append(bond_prefix(bidx))
            emit(v)
            if not last:
                out.append(")")

    limit = sys.getrecursionlimit()
    if n + 50 > limit:
        sys.setrecursionlimit(n + 100)
    try:
        emit(start)
    finally:
        sys.setrecursionlimit(limit)
    return "".join(out)


def _initial_ranks(g: MoleculeGraph) -> list[int]:
    keys = [
        (a.element, a.aromatic, g.degree(i), a.implicit_h, a.forced_h)
        for i, a in enumerate(g.atoms)
    ]
    return _dense_ranks(keys)


def _dense_ranks(keys: list) -> list[int]:
    order = sorted(set(keys))
    index = {k: r for r, k in enumerate(order)}
    return [index[k] for k in keys]


def _refine(g: MoleculeGraph, ranks: list[int]) -> list[int]:
    n = len(g)
    while True:
        keys = []
        for i in range(n):
            nbr = sorted((_bond_code(g.bonds[b]), ranks[j]) for j, b in g.neighbors(i))
            keys.append((ranks[i], tuple(nbr)))
        new_ranks = _dense_ranks(keys)
        if new_ranks == ranks:
            return ranks
        ranks = new_ranks


def _canonical_string(g: MoleculeGraph, ranks: list[int]) -> str:
    counts: dict[int, int] = {}
    for r in ranks:
        counts[r] = counts.get(r, 0) + 1
    tied = sorted(r for r, c in counts.items() if c > 1)
    if not tied:
        return write_smiles(g, ranks)
    target = tied[0]
    best: str | None = None
    for i in [a for a in range(len(g)) if ranks[a] == target]:
        forced = [2 * r + (0 if a == i else 1) for a, r in enumerate(ranks)]
        candidate = _canonical_string(g, _refine(g, _dense_ranks(forced)))
        if best is None or candidate < best:
            best = candidate
    assert best is not None
    return best


def canonical_form(g: MoleculeGraph) -> str:
    """Unique string for the molecule, independent of input spelling.

    Atom classes are refined by neighborhood invariants; remaining ties
    are broken by trying each member and keeping the smallest emitted
    string, so the result depends only on graph structure.
    """
    return _canonical_string(g, _refine(g, _initial_ranks(g)))


def random_spelling(g: MoleculeGraph, rng) -> str:
    """A valid alternative spelling using a random atom order."""
    ranks = [int(v) for v in rng.permutation(len(g))]
    return write_smiles(g, ranks)


# --- scaffolds -------------------------------------------------------------


def _subgraph(g: MoleculeGraph, atom_ids: list[int]) -> MoleculeGraph:
    remap = {old: new for new, old in enumerate(atom_ids)}
    atoms = []
    for i in atom_ids:
        atom = replace(g.atoms[i], implicit_h=0)
        lost = any(j not in remap for j, _ in g.neighbors(i))
        if lost and atom.aromatic and atom.element in ("N", "P"):
            # A hydrogen takes the removed substituent's place, so the
            # atom stays a lone-pair donor instead of flipping into the
            # kekulization matching and breaking ring parity.
            atom.forced_h = True
        atoms.append(atom)
    bonds = []
    for bond in g.bonds:
        if bond.a in remap and bond.b in remap:
            order = 0 if bond.aromatic else bond.order
            bonds.append(Bond(remap[bond.a], remap[bond.b], order))
    return _finalize(atoms, bonds)


def scaffold(g: MoleculeGraph) -> MoleculeGraph:
    """Ring systems with their linkers; for acyclic molecules, the
    longest backbone path.  Hydrogen counts are refilled on the result."""
    n = len(g)
    if g.rings:
        ring_atoms: set[int] = set()
        for ring in g.rings:
            ring_atoms.update(ring)
        keep = set(range(n))
        changed = True
        while changed:
            changed = False
            for i in sorted(keep - ring_atoms):
                held = [(j, b) for j, b in g.neighbors(i) if j in keep]
                if len(held) > 1:
                    continue
                if held:
                    j, b = held[0]
                    bond = g.bonds[b]
                    # A substituent double-bonded to an aromatic ring atom
                    # is part of the framework; removing it would leave
                    # that atom without a consistent kekulization.
                    if g.atoms[j].aromatic and not bond.aromatic and bond.order >= 2:
                        continue
                keep.discard(i)
                changed = True
        return _subgraph(g, sorted(keep))

    if n == 1:
        return _subgraph(g, [0])

    dists = [_bfs_tree(g, root)[0] for root in range(n)]
    diameter = max(max(row) for row in dists)
    best_string: str | None = None
    best_ids: list[int] | None = None
    for u in range(n):
        for v in range(u + 1, n):
            if dists[u][v] != diameter:
                continue
            _, parent = _bfs_tree(g, u)
            path = _path_to_root(v, parent)
            ids = sorted(path)
            candidate = _subgraph(g, ids)
            text = canonical_form(candidate)
            if best_string is None or text < best_string:
                best_string = text
                best_ids = ids
    assert best_ids is not None
    return _subgraph(g, best_ids)
