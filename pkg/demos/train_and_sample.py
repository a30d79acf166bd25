"""Train a small network on a small corpus and sample from it.

Takes a minute or two.  Expect the loss to fall steadily but only a
handful of samples to parse; character-level models need far more data
and training time before most of their output is well-formed.  The
README lists a configuration that gets there.
"""

import numpy as np

from smilesgen.genpipe import SampleConfig, TrainConfig, sample_one, train
from smilesgen.molparse import ParseError, parse, prefilter
from smilesgen.toydata import toy_corpus


def main() -> None:
    corpus = toy_corpus(1000, seed=3)
    config = TrainConfig(
        seq_len=32,
        stride=3,
        epochs=8,
        batch_size=128,
        lr_start=0.01,
        lr_end=0.0025,
        seed=0,
        dropout_rate=0.1,
        units1=48,
        units2=32,
    )
    result = train(corpus, config)
    print("mean loss per epoch:", " ".join(f"{x:.3f}" for x in result.loss_history))

    rng = np.random.default_rng(7)
    sample_cfg = SampleConfig(temperature=0.7, max_len=100, seed=7, count=1)
    print("\nsamples (* marks strings that parse):")
    hits = 0
    for _ in range(20):
        text = sample_one(result.params, result.vocab, sample_cfg, rng).text
        ok = False
        if prefilter(text):
            try:
                parse(text)
                ok = True
            except ParseError:
                pass
        hits += ok
        print(f"  {'*' if ok else ' '} {text}")
    print(f"\n{hits} of 20 parse")


if __name__ == "__main__":
    main()
