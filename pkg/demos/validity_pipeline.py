"""Walk strings through the two-stage validity check.

The cheap text screen catches unbalanced brackets and unpaired ring
digits; full parsing then enforces chemistry (valence, aromaticity,
kekulization).  Each stage reports a distinct error kind.
"""

from smilesgen.molparse import ParseError, canonical_form, parse, prefilter

CASES = [
    "CCO",
    "c1ccccc1",
    "C1CC(C",
    "C1CC",
    "CC(C)(C)(C)C",
    "c1cccc1",
    "c1ccccc1c",
    "C=1CCCCC=1",
    "OCc1ccc(N)cc1",
]


def main() -> None:
    for text in CASES:
        if not prefilter(text):
            print(f"{text:14} screen: reject")
            continue
        try:
            graph = parse(text)
        except ParseError as err:
            print(f"{text:14} parse:  {err}")
            continue
        print(
            f"{text:14} ok:     {len(graph.atoms)} atoms, "
            f"{len(graph.rings)} rings, canonical {canonical_form(graph)}"
        )


if __name__ == "__main__":
    main()
