"""Normalize a handful of raw SMILES strings and build a vocabulary.

Shows which strings survive the alphabet restrictions, why the others
are rejected, and what the resulting training alphabet looks like.
"""

from smilesgen.lexicon import NormalizedSmiles, Vocabulary, corpus_text, normalize

RAW = [
    "CCOC(=O)c1ccccc1",
    "C[C@H](N)C(=O)O",
    "ClCCBr",
    "C[N+](C)(C)C",
    "CC[Si](C)(C)C",
    "c1cc[nH]c1",
    "O=C(C)Oc1ccccc1C(=O)O",
    "CC%12CC%12",
]


def main() -> None:
    kept = []
    print("normalization")
    print("-" * 60)
    for raw in RAW:
        result = normalize(raw)
        if isinstance(result, NormalizedSmiles):
            kept.append(result.text)
            print(f"  {raw:28} -> {result.text}")
        else:
            print(f"  {raw:28} -> rejected ({result.kind.value}: {result.detail})")

    vocab = Vocabulary.from_corpus(corpus_text(kept))
    print()
    print(f"vocabulary over {len(kept)} kept strings: {vocab.size} symbols")
    print("  " + " ".join(repr(s)[1:-1] or "\\n" for s in vocab.symbols))


if __name__ == "__main__":
    main()
