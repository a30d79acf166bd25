"""Training, sampling and batch generation.

Training iterates seeded-shuffled corpus windows with a geometric
learning-rate decay.  Sampling walks the network one character at a
time, reweighting each step's distribution by a temperature.  Batch
generation fans sampling out to worker processes with derived seeds,
pushes every raw string through the two-stage validity filter, and
reports stage counts.
"""

from __future__ import annotations

import multiprocessing
import time
from dataclasses import dataclass, field

import numpy as np

from smilesgen.lexicon import NEWLINE, Vocabulary, corpus_text, window_matrix
from smilesgen.molparse import ParseError, canonical_form, parse, prefilter
from smilesgen.neural import (
    LstmParams,
    backward,
    batch_cross_entropy,
    clip_global_norm,
    init_params,
    lstm_cell_step,
    lstm_forward,
    rmsprop_init,
    rmsprop_step,
    softmax,
)


@dataclass
class TrainConfig:
    seq_len: int = 40
    stride: int = 3
    epochs: int = 10
    batch_size: int = 128
    lr_start: float = 0.01
    lr_end: float = 0.0002
    seed: int = 0
    dropout_rate: float = 0.2
    units1: int = 128
    units2: int = 64
    clip_norm: float | None = 5.0

    def __post_init__(self) -> None:
        if not (self.lr_start >= self.lr_end > 0):
            raise ValueError("require lr_start >= lr_end > 0")
        if self.seq_len < 1:
            raise ValueError("seq_len must be at least 1")
        if self.stride < 1:
            raise ValueError("stride must be at least 1")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")


@dataclass
class SampleConfig:
    temperature: float = 1.0
    max_len: int = 120
    seed: int = 0
    count: int = 1
    prompt: str = ""

    def __post_init__(self) -> None:
        if not (np.isfinite(self.temperature) and self.temperature > 0):
            raise ValueError("temperature must be finite and positive")
        if self.max_len < 1:
            raise ValueError("max_len must be at least 1")
        if self.count < 0:
            raise ValueError("count must be non-negative")


@dataclass
class GenerationStats:
    requested: int
    syntactic_rejects: int
    parse_rejects: int
    valid: int
    duplicates_of_training: int
    unique_canonical: int
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "requested": self.requested,
            "syntactic_rejects": self.syntactic_rejects,
            "parse_rejects": self.parse_rejects,
            "valid": self.valid,
            "duplicates_of_training": self.duplicates_of_training,
            "unique_canonical": self.unique_canonical,
            "wall_time": self.wall_time,
        }


@dataclass
class SampledString:
    text: str
    truncated: bool


@dataclass
class TrainResult:
    params: LstmParams
    vocab: Vocabulary
    loss_history: list[float] = field(default_factory=list)
    learning_rates: list[float] = field(default_factory=list)


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"non-finite loss in epoch {epoch}")


def learning_rate_schedule(config: TrainConfig) -> list[float]:
    """Geometric decay from lr_start (epoch 0) to lr_end (last epoch)."""
    if config.epochs <= 1:
        return [config.lr_start] * config.epochs
    ratio = config.lr_end / config.lr_start
    span = config.epochs - 1
    return [config.lr_start * ratio ** (e / span) for e in range(config.epochs)]


def train(corpus, config: TrainConfig) -> TrainResult:
    """Fit the stack on normalized corpus lines; deterministic per seed."""
    lines = [line for line in corpus]
    if not lines:
        raise ValueError("cannot train on an empty corpus")
    vocab = Vocabulary.from_corpus(lines)
    text = corpus_text(lines)
    inputs, targets = window_matrix(text, vocab, config.seq_len, config.stride)

    root = np.random.SeedSequence(config.seed)
    init_seq, shuffle_seq, dropout_seq = root.spawn(3)
    params = init_params(
        vocab.size,
        config.units1,
        config.units2,
        config.dropout_rate,
        np.random.default_rng(init_seq),
    )
    state = rmsprop_init(params, config.lr_start)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    dropout_rng = np.random.default_rng(dropout_seq)
    schedule = learning_rate_schedule(config)

    eye = np.eye(vocab.size, dtype=np.float64)
    count = inputs.shape[0]
    history: list[float] = []
    for epoch in range(config.epochs):
        state.learning_rate = schedule[epoch]
        perm = shuffle_rng.permutation(count)
        running = 0.0
        for start in range(0, count, config.batch_size):
            batch_idx = perm[start : start + config.batch_size]
            xb = eye[inputs[batch_idx]]
            yb = targets[batch_idx]
            trace = lstm_forward(params, xb, training=True, rng=dropout_rng)
            loss = batch_cross_entropy(trace.probs, yb)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            grads = backward(params, trace, yb)
            if config.clip_norm is not None:
                clip_global_norm(grads, config.clip_norm)
            rmsprop_step(params, grads, state)
            running += loss * len(batch_idx)
        history.append(running / count)
    return TrainResult(params, vocab, history, schedule)


def temperature_reweight(probs: np.ndarray, temperature: float) -> np.ndarray:
    """p_i' ∝ exp(log p_i / T); identity at T=1, argmax as T→0."""
    log_p = np.log(np.maximum(probs, 1e-300))
    return softmax(log_p / temperature)


def sample_one(
    params: LstmParams,
    vocab: Vocabulary,
    cfg: SampleConfig,
    rng: np.random.Generator,
) -> SampledString:
    """Sample one raw string character-by-character.

    The walk starts from zero states primed with the newline terminator
    (optionally followed by a prompt prefix, which is kept in the
    output) and stops at the next newline or at max_len characters.
    """
    if params.vocab_size != vocab.size:
        raise ValueError("checkpoint vocabulary size does not match the vocabulary")
    newline = vocab.index_of[NEWLINE]
    size = vocab.size
    eye = np.eye(size, dtype=np.float64)
    h1 = np.zeros((1, params.layer1.units))
    c1 = np.zeros_like(h1)
    h2 = np.zeros((1, params.layer2.units))
    c2 = np.zeros_like(h2)

    out: list[str] = []
    x = eye[[newline]]
    for ch in cfg.prompt:
        if ch not in vocab.index_of:
            raise ValueError(f"prompt character {ch!r} not in vocabulary")
        h1, c1 = lstm_cell_step(params.layer1, x, h1, c1)
        h2, c2 = lstm_cell_step(params.layer2, h1, h2, c2)
        out.append(ch)
        x = eye[[vocab.index_of[ch]]]

    while len(out) < cfg.max_len:
        h1, c1 = lstm_cell_step(params.layer1, x, h1, c1)
        h2, c2 = lstm_cell_step(params.layer2, h1, h2, c2)
        logits = (h2 @ params.dense_w + params.dense_b)[0]
        probs = temperature_reweight(softmax(logits), cfg.temperature)
        probs = probs / probs.sum()
        index = int(rng.choice(size, p=probs))
        if index == newline:
            return SampledString("".join(out), truncated=False)
        out.append(vocab.symbols[index])
        x = eye[[index]]
    return SampledString("".join(out), truncated=True)


def worker_rng(base_seed: int, worker_index: int) -> np.random.Generator:
    """Worker PRNG derived from (base seed, worker index).

    numpy's SeedSequence spawn-key mixing keeps every worker's stream
    independent of how many other workers exist.
    """
    return np.random.default_rng(
        np.random.SeedSequence(base_seed, spawn_key=(worker_index,))
    )


def _generate_chunk(args) -> tuple[list[str], int, int]:
    params, vocab, cfg, worker_index, count = args
    rng = worker_rng(cfg.seed, worker_index)
    valid: list[str] = []
    syntactic = 0
    parse_rejects = 0
    for _ in range(count):
        raw = sample_one(params, vocab, cfg, rng).text
        if not prefilter(raw):
            syntactic += 1
            continue
        try:
            graph = parse(raw)
        except ParseError:
            parse_rejects += 1
            continue
        valid.append(canonical_form(graph))
    return valid, syntactic, parse_rejects


def generate_batch(
    params: LstmParams,
    vocab: Vocabulary,
    cfg: SampleConfig,
    workers: int = 1,
    training_canonicals: frozenset[str] | set[str] = frozenset(),
) -> tuple[list[str], GenerationStats]:
    """Generate cfg.count raw strings across workers and keep the valid
    canonical molecules, in deterministic worker-then-sample order."""
    if workers < 1:
        raise ValueError("workers must be at least 1")
    if params.vocab_size != vocab.size:
        raise ValueError("checkpoint vocabulary size does not match the vocabulary")
    started = time.perf_counter()
    share, extra = divmod(cfg.count, workers)
    counts = [share + (1 if i < extra else 0) for i in range(workers)]
    tasks = [
        (params, vocab, cfg, index, chunk)
        for index, chunk in enumerate(counts)
        if chunk > 0
    ]
    if len(tasks) <= 1:
        results = [_generate_chunk(task) for task in tasks]
    else:
        with multiprocessing.Pool(processes=len(tasks)) as pool:
            results = pool.map(_generate_chunk, tasks)

    valid: list[str] = []
    syntactic = 0
    parse_rejects = 0
    for chunk_valid, chunk_syn, chunk_parse in results:
        valid.extend(chunk_valid)
        syntactic += chunk_syn
        parse_rejects += chunk_parse
    training = (
        training_canonicals
        if isinstance(training_canonicals, (set, frozenset))
        else set(training_canonicals)
    )
    duplicates = sum(1 for c in valid if c in training)
    stats = GenerationStats(
        requested=cfg.count,
        syntactic_rejects=syntactic,
        parse_rejects=parse_rejects,
        valid=len(valid),
        duplicates_of_training=duplicates,
        unique_canonical=len(set(valid)),
        wall_time=time.perf_counter() - started,
    )
    return valid, stats


def dedup(
    valid_canonicals, training_canonicals
) -> tuple[list[str], int]:
    """Novel molecules in first-seen order plus the count of generated
    strings already present in the training set (with multiplicity)."""
    training = set(training_canonicals)
    novel: list[str] = []
    seen: set[str] = set()
    duplicates = 0
    for text in valid_canonicals:
        if text in training:
            duplicates += 1
        elif text not in seen:
            seen.add(text)
            novel.append(text)
    return novel, duplicates
