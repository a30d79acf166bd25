"""Structural parser, canonicalization and scaffold tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smilesgen.molparse import (
    Atom,
    Bond,
    ErrorKind,
    ParseError,
    _finalize,
    canonical_form,
    parse,
    prefilter,
    random_spelling,
    scaffold,
    write_smiles,
)
from smilesgen.toydata import toy_corpus


def error_kind(text):
    with pytest.raises(ParseError) as info:
        parse(text)
    return info.value.kind


# --- prefilter --------------------------------------------------------------


@pytest.mark.parametrize("text", ["C", "CCO", "c1ccccc1", "C(N)(O)=O", "C1CC1"])
def test_prefilter_accepts_plausible_strings(text):
    assert prefilter(text)


@pytest.mark.parametrize("text", ["", "=C", "#C", ")C", "C(C", "C)C(", "C1CC", "C12CC1"])
def test_prefilter_rejects_obvious_garbage(text):
    assert not prefilter(text)


def test_prefilter_is_weaker_than_parse():
    # Digit parity and balance pass here; the parser still says no.
    assert prefilter("C11")
    assert error_kind("C11") is ErrorKind.SYNTAX


# --- parse accepts ----------------------------------------------------------


def test_parse_methane():
    g = parse("C")
    assert len(g) == 1
    assert g.atoms[0].element == "C"
    assert g.atoms[0].implicit_h == 4
    assert not g.bonds


def test_parse_benzene():
    g = parse("c1ccccc1")
    assert len(g) == 6
    assert len(g.bonds) == 6
    assert [len(r) for r in g.rings] == [6]
    orders = sorted(b.order for b in g.bonds)
    assert orders == [1, 1, 1, 2, 2, 2]
    assert all(a.aromatic and a.implicit_h == 1 for a in g.atoms)


def test_parse_kekulizes_each_aromatic_atom_once():
    for text in ("c1ccccc1", "c1ccncc1", "c1ccAc1", "c1ccoc1", "c1ccsc1"):
        g = parse(text)
        for idx, atom in enumerate(g.atoms):
            doubles = sum(1 for j, b in g.neighbors(idx) if g.bonds[b].order == 2)
            assert doubles <= 1, text


def test_parse_pyrrole_nitrogen_keeps_hydrogen():
    g = parse("c1ccAc1")
    nitrogen = next(a for a in g.atoms if a.element == "N")
    assert nitrogen.forced_h
    assert nitrogen.implicit_h == 1


def test_parse_ring_bond_orders():
    g = parse("C=1CCCC=1")
    ring_bond = g.bond_between(0, 4)
    assert ring_bond is not None and ring_bond.order == 2
    # Declaring the order on only one side of the closure also works.
    assert parse("C1CCC=1").bond_between(0, 3).order == 2


def test_parse_branches_and_bonds():
    g = parse("CC(=O)NC")
    carbonyl = g.bond_between(1, 2)
    assert carbonyl.order == 2
    assert g.atoms[2].implicit_h == 0
    assert g.atoms[3].implicit_h == 1  # amide nitrogen


# --- parse rejects ----------------------------------------------------------


@pytest.mark.parametrize(
    "text",
    [
        "",
        "C(",
        "C)",
        "(C)",
        "=C",
        "C=",
        "C==C",
        "C=)O",
        "C()C",
        "C((C))",
        "C1",
        "C11",
        "C1C1",
        "1CC",
        "C(1CC1)",
        "C=(C)O",
    ],
)
def test_parse_syntax_errors(text):
    assert error_kind(text) is ErrorKind.SYNTAX


def test_ring_closure_bond_order_conflict():
    # C=1...#1 asks for two different orders on the same ring bond.
    assert error_kind("C=1CCCC#1") is ErrorKind.SYNTAX


@pytest.mark.parametrize("text", ["CC(C)(C)(C)C", "C#O", "I=C", "O(C)(C)C", "N(C)(C)(C)C"])
def test_parse_valence_errors(text):
    assert error_kind(text) is ErrorKind.VALENCE


@pytest.mark.parametrize("text", ["c1ccccc1c", "cc", "cC", "CcC"])
def test_aromatic_atom_outside_ring(text):
    assert error_kind(text) is ErrorKind.AROMATICITY


@pytest.mark.parametrize("text", ["c1cccc1", "c1ccAcc1", "c1ccccc1c1cccc1"])
def test_kekulization_failures(text):
    assert error_kind(text) is ErrorKind.KEKULIZATION


def test_error_messages_carry_kind_prefix():
    for text, name in [
        ("C(", "SyntaxError"),
        ("CC(C)(C)(C)C", "ValenceError"),
        ("cc", "AromaticityError"),
        ("c1cccc1", "KekulizationError"),
    ]:
        with pytest.raises(ParseError) as info:
            parse(text)
        assert str(info.value).startswith(name)


def test_syntax_error_reports_position():
    with pytest.raises(ParseError) as info:
        parse("CC=)O")
    assert info.value.position == 3


def test_disconnected_graph_is_rejected():
    atoms = [Atom("C", False), Atom("C", False)]
    with pytest.raises(ParseError) as info:
        _finalize(atoms, [])
    assert info.value.kind is ErrorKind.DISCONNECTED
    assert str(info.value).startswith("DisconnectedError")


# --- ring perception --------------------------------------------------------


def test_naphthalene_rings():
    g = parse("c1ccc2ccccc2c1")
    assert sorted(len(r) for r in g.rings) == [6, 6]
    shared = set(g.rings[0]) & set(g.rings[1])
    assert len(shared) == 2


def test_spiro_rings_share_one_atom():
    g = parse("C1CCC2(CC1)CCCC2")
    assert sorted(len(r) for r in g.rings) == [5, 6]
    shared = set(g.rings[0]) & set(g.rings[1])
    assert len(shared) == 1


def test_macrocycle_ring_size():
    g = parse("C1CCCCCCCCCCC1")
    assert [len(r) for r in g.rings] == [12]


def test_ring_count_equals_cyclomatic_number():
    for line in toy_corpus(count=300, seed=5):
        g = parse(line)
        assert len(g.rings) == len(g.bonds) - len(g) + 1, line


# --- canonicalization -------------------------------------------------------


def test_canonical_form_identifies_equivalent_spellings():
    spellings = ["CCO", "OCC", "C(O)C", "C(C)O"]
    forms = {canonical_form(parse(s)) for s in spellings}
    assert len(forms) == 1


def test_canonical_form_distinguishes_isomers():
    assert canonical_form(parse("CCO")) != canonical_form(parse("COC"))
    assert canonical_form(parse("C1CC1C")) != canonical_form(parse("C1CCC1"))
    # Same molecule under a shifted double bond spelling collapses.
    assert canonical_form(parse("C=CC")) == canonical_form(parse("CC=C"))


def test_canonical_form_idempotent():
    for text in ("CC(=O)Nc1ccc(O)cc1", "C1CCC2(CC1)CCCC2", "LC(R)c1ccncc1"):
        canon = canonical_form(parse(text))
        assert canonical_form(parse(canon)) == canon


def test_random_spelling_round_trip():
    rng = np.random.default_rng(3)
    for line in toy_corpus(count=40, seed=9):
        g = parse(line)
        want = canonical_form(g)
        for _ in range(5):
            alt = random_spelling(g, rng)
            assert canonical_form(parse(alt)) == want, (line, alt)


def test_write_smiles_reparses():
    for line in toy_corpus(count=60, seed=17):
        g = parse(line)
        text = write_smiles(g)
        assert canonical_form(parse(text)) == canonical_form(g)


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_random_spelling_is_always_valid(seed):
    rng = np.random.default_rng(seed)
    g = parse("CC(=O)Nc1ccc2cc(S(=O)(=O)N)ccc2c1")
    alt = random_spelling(g, rng)
    assert canonical_form(parse(alt)) == canonical_form(g)


# --- scaffolds --------------------------------------------------------------


def test_scaffold_strips_substituents():
    got = canonical_form(scaffold(parse("CCc1ccc(O)cc1")))
    assert got == canonical_form(parse("c1ccccc1"))


def test_scaffold_keeps_ring_linkers():
    text = "c1ccc(CCC2CCCCC2)cc1"
    got = canonical_form(scaffold(parse(text)))
    assert got == canonical_form(parse(text))


def test_scaffold_of_acyclic_molecule_is_longest_chain():
    # The diameter path runs from the amine nitrogen to the hydroxyl
    # oxygen; both methyls fall away.
    got = canonical_form(scaffold(parse("CC(C)(CN)CCO")))
    assert got == canonical_form(parse("NCCCCO"))


def test_scaffold_single_atom():
    assert canonical_form(scaffold(parse("C"))) == canonical_form(parse("C"))


def test_scaffold_restores_azole_hydrogen():
    # Stripping the substituent off a pyrrole-type nitrogen must leave
    # an NH nitrogen, or the bare ring has no kekulization.
    got = canonical_form(scaffold(parse("c1ccn(OC)c1")))
    assert got == canonical_form(parse("c1ccAc1"))


def test_scaffold_keeps_exocyclic_double_bond():
    # A carbonyl double-bonded to an aromatic ring atom stays attached.
    text = "O=c1ccocc1"
    got = canonical_form(scaffold(parse(text)))
    assert got == canonical_form(parse(text))


def test_scaffold_idempotent_on_corpus():
    for line in toy_corpus(120, seed=8):
        once = scaffold(parse(line))
        again = scaffold(once)
        assert canonical_form(again) == canonical_form(once)


# --- fuzzing ----------------------------------------------------------------


@given(
    st.text(
        alphabet="CNOScnos()=#123ALRF",
        min_size=1,
        max_size=24,
    )
)
@settings(max_examples=400, deadline=None)
def test_parser_never_crashes_and_prefilter_is_sound(text):
    try:
        parse(text)
        ok = True
    except ParseError:
        ok = False
    if ok:
        # Anything the parser accepts must also pass the cheap screen.
        assert prefilter(text)
