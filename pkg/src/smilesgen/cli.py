"""Command line front end for the generation pipeline.

Five subcommands cover the full workflow: preprocess raw SMILES into a
training corpus, train a model, generate molecules from a checkpoint,
produce the frequency-driven control set, and compare up to three
molecule files statistically.  Options resolve in three layers: builtin
defaults, then a flat JSON config file, then explicit flags.  Every run
writes its resolved configuration next to its outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from collections import Counter
from pathlib import Path

import numpy as np

from smilesgen import __version__
from smilesgen import baseline as baseline_mod
from smilesgen.chemstats import build_report, report_to_csv
from smilesgen.genpipe import (
    GenerationStats,
    SampleConfig,
    TrainConfig,
    generate_batch,
    train,
)
from smilesgen.lexicon import NormalizedSmiles, Vocabulary, corpus_text, normalize
from smilesgen.molparse import ParseError, canonical_form, parse, prefilter
from smilesgen.neural import load_checkpoint, save_checkpoint


class CliError(Exception):
    """User-facing failure; message goes to stderr, exit code 1."""


_SCHEMAS: dict[str, dict[str, object]] = {
    "preprocess": {},
    "train": {
        "seq_len": 40,
        "stride": 3,
        "epochs": 10,
        "batch_size": 128,
        "lr_start": 0.01,
        "lr_end": 0.0002,
        "dropout": 0.2,
        "seed": 0,
        "units1": 128,
        "units2": 64,
        "clip_norm": 5.0,
    },
    "generate": {
        "temperature": 1.0,
        "count": 1000,
        "max_len": 120,
        "seed": 0,
        "workers": 1,
        "prompt": "",
        "training_corpus": "",
    },
    "baseline": {
        "count": 10000,
        "seed": 0,
    },
    "analyze": {
        "radius": 2,
        "nbits": 2048,
        "alpha": 0.05,
    },
}
# A config file may describe a whole pipeline run, so any key known to
# any command is accepted; each command reads only its own keys.
_ALL_KEYS = {key for schema in _SCHEMAS.values() for key in schema}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise CliError(f"config {path} must be a JSON object")
    unknown = sorted(set(payload) - _ALL_KEYS)
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(unknown)}")
    return payload


def _resolve(args: argparse.Namespace, command: str) -> dict:
    config = _load_config(args.config)
    resolved = {}
    for key, default in _SCHEMAS[command].items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            resolved[key] = flag_value
        elif key in config:
            resolved[key] = config[key]
        else:
            resolved[key] = default
    return resolved


def _output_dir(args: argparse.Namespace) -> Path:
    out = Path(args.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _read_lines(path: str) -> list[str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    return [line.strip() for line in text.splitlines() if line.strip()]


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_lines(path: Path, lines) -> None:
    path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")


def _write_run_config(out: Path, command: str, inputs, resolved: dict) -> None:
    payload = {
        "command": command,
        "version": __version__,
        "input": inputs,
        "output": str(out),
        "parameters": resolved,
    }
    _write_json(out / "run_config.json", payload)


def cmd_preprocess(args: argparse.Namespace) -> int:
    resolved = _resolve(args, "preprocess")
    out = _output_dir(args)
    raw_lines = _read_lines(args.input)
    kept: list[str] = []
    reasons: Counter[str] = Counter()
    rejected: list[dict] = []
    for number, line in enumerate(raw_lines, start=1):
        result = normalize(line)
        if isinstance(result, NormalizedSmiles):
            kept.append(result.text)
        else:
            reasons[result.kind.value] += 1
            rejected.append(
                {
                    "line": number,
                    "text": line,
                    "reason": result.kind.value,
                    "detail": result.detail,
                }
            )
    if not kept:
        raise CliError(f"no molecules survived normalization of {args.input}")
    vocab = Vocabulary.from_corpus(corpus_text(kept))
    _write_lines(out / "corpus.txt", kept)
    (out / "vocabulary.json").write_text(vocab.to_json() + "\n", encoding="utf-8")
    _write_json(
        out / "rejections.json",
        {
            "input_lines": len(raw_lines),
            "kept": len(kept),
            "rejected": len(rejected),
            "reasons": dict(reasons),
            "lines": rejected,
        },
    )
    _write_run_config(out, "preprocess", args.input, resolved)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    resolved = _resolve(args, "train")
    out = _output_dir(args)
    corpus = _read_lines(args.input)
    config = TrainConfig(
        seq_len=resolved["seq_len"],
        stride=resolved["stride"],
        epochs=resolved["epochs"],
        batch_size=resolved["batch_size"],
        lr_start=resolved["lr_start"],
        lr_end=resolved["lr_end"],
        seed=resolved["seed"],
        dropout_rate=resolved["dropout"],
        units1=resolved["units1"],
        units2=resolved["units2"],
        clip_norm=resolved["clip_norm"],
    )
    result = train(corpus, config)
    save_checkpoint(result.params, result.vocab, out / "checkpoint.json")
    _write_json(
        out / "history.json",
        {"loss": result.loss_history, "learning_rate": result.learning_rates},
    )
    _write_run_config(out, "train", args.input, resolved)
    return 0


def _training_canonicals(path: str) -> frozenset[str]:
    canonicals = set()
    for line in _read_lines(path):
        try:
            canonicals.add(canonical_form(parse(line)))
        except ParseError:
            continue
    return frozenset(canonicals)


def cmd_generate(args: argparse.Namespace) -> int:
    resolved = _resolve(args, "generate")
    out = _output_dir(args)
    try:
        params, vocab = load_checkpoint(args.input)
    except OSError as exc:
        raise CliError(f"cannot read checkpoint {args.input}: {exc}") from exc
    config = SampleConfig(
        temperature=resolved["temperature"],
        max_len=resolved["max_len"],
        seed=resolved["seed"],
        count=resolved["count"],
        prompt=resolved["prompt"],
    )
    training = frozenset()
    if resolved["training_corpus"]:
        training = _training_canonicals(resolved["training_corpus"])
    molecules, stats = generate_batch(
        params,
        vocab,
        config,
        workers=resolved["workers"],
        training_canonicals=training,
    )
    _write_lines(out / "molecules.txt", molecules)
    _write_json(out / "stats.json", stats.to_dict())
    _write_run_config(out, "generate", args.input, resolved)
    return 0


def cmd_baseline(args: argparse.Namespace) -> int:
    resolved = _resolve(args, "baseline")
    out = _output_dir(args)
    corpus = _read_lines(args.input)
    model = baseline_mod.fit(corpus)
    rng = np.random.default_rng(resolved["seed"])
    started = time.perf_counter()
    molecules: list[str] = []
    syntactic = 0
    parse_rejects = 0
    for _ in range(resolved["count"]):
        raw = baseline_mod.generate(model, rng)
        if not prefilter(raw):
            syntactic += 1
            continue
        try:
            graph = parse(raw)
        except ParseError:
            parse_rejects += 1
            continue
        molecules.append(canonical_form(graph))
    training = frozenset(
        canonical_form(parse(line)) for line in corpus
    )
    stats = GenerationStats(
        requested=resolved["count"],
        syntactic_rejects=syntactic,
        parse_rejects=parse_rejects,
        valid=len(molecules),
        duplicates_of_training=sum(1 for m in molecules if m in training),
        unique_canonical=len(set(molecules)),
        wall_time=time.perf_counter() - started,
    )
    _write_lines(out / "molecules.txt", molecules)
    _write_json(out / "stats.json", stats.to_dict())
    _write_run_config(out, "baseline", args.input, resolved)
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    resolved = _resolve(args, "analyze")
    out = _output_dir(args)
    paths = args.input
    if not 1 <= len(paths) <= 3:
        raise CliError("analyze expects between one and three --input files")
    names = ("training", "generated", "baseline")
    graph_sets: dict[str, list] = {}
    failures: dict[str, int] = {}
    for name, path in zip(names, paths):
        graphs = []
        failed = 0
        for line in _read_lines(path):
            try:
                graphs.append(parse(line))
            except ParseError:
                failed += 1
        graph_sets[name] = graphs
        failures[name] = failed
    report = build_report(
        graph_sets["training"],
        generated=graph_sets.get("generated"),
        baseline=graph_sets.get("baseline"),
        radius=resolved["radius"],
        nbits=resolved["nbits"],
        alpha=resolved["alpha"],
    )
    payload = report.to_dict()
    payload["parse_failures"] = failures
    _write_json(out / "report.json", payload)
    (out / "table1.csv").write_text(report_to_csv(report), encoding="utf-8")
    _write_run_config(out, "analyze", list(paths), resolved)
    return 0


_COMMANDS = {
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "generate": cmd_generate,
    "baseline": cmd_baseline,
    "analyze": cmd_analyze,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smilesgen",
        description="Train and sample a character-level SMILES generator.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--output", required=True, help="output directory")
        p.add_argument("--config", help="flat JSON config file; flags override it")

    p = sub.add_parser("preprocess", help="normalize raw SMILES into a corpus")
    p.add_argument("--input", required=True, help="raw SMILES file, one per line")
    common(p)

    p = sub.add_parser("train", help="train a model on a corpus")
    p.add_argument("--input", required=True, help="corpus file from preprocess")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--seq-len", type=int, dest="seq_len")
    p.add_argument("--stride", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr-start", type=float, dest="lr_start")
    p.add_argument("--lr-end", type=float, dest="lr_end")
    p.add_argument("--dropout", type=float)

    p = sub.add_parser("generate", help="sample molecules from a checkpoint")
    p.add_argument("--input", required=True, help="checkpoint file from train")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--temperature", type=float)
    p.add_argument("--count", type=int)
    p.add_argument("--max-len", type=int, dest="max_len")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("baseline", help="fit and sample the frequency control")
    p.add_argument("--input", required=True, help="corpus file from preprocess")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--count", type=int)

    p = sub.add_parser("analyze", help="compare up to three molecule files")
    p.add_argument(
        "--input",
        required=True,
        action="append",
        help="molecule file; repeat for training, generated, baseline",
    )
    common(p)
    p.add_argument("--radius", type=int)
    p.add_argument("--nbits", type=int)
    p.add_argument("--alpha", type=float)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
