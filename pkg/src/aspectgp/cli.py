"""``aspectgp`` command line.

Exit codes: 0 success, 1 usage error, 2 data error. Progress and
diagnostics go to stderr; results go to ``--out`` or stdout.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from typing import Optional, Sequence

from .classifier import Objective, TrainReport, classify, load_model, save_model, train
from .clause import RecordError
from .corpus import (
    MASKS_BY_LEVEL,
    SimilarityConfig,
    build_index,
    frequency_table,
    ingest,
    retrieve_similar,
    write_corpus,
)
from .evaluate import BatchError, run_batch, sample_labeled
from .gp import GPConfig
from .synth import GenSpec, default_planted_spec, generate

log = logging.getLogger("aspectgp")

DEFAULTS = {
    "k": 100,
    "seed": 42,
    "objective": "accuracy",
    "runs": 1,
    "train_fraction": 0.5,
    "pop": 500,
    "inserts": 10_000,
    "tournament": 4,
    "mutation": 0.0,
    "jobs": 1,
}

COMMANDS = ("ingest", "stats", "similar", "train", "classify", "evaluate", "synth")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key=value defaults file")
    common.add_argument("--corpus", metavar="PATH")
    common.add_argument("--model", metavar="PATH")
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--k", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--objective", choices=[o.value for o in Objective])
    common.add_argument("--runs", type=int)
    common.add_argument("--train-fraction", type=float)
    common.add_argument("--pop", type=int)
    common.add_argument("--inserts", type=int)
    common.add_argument("--tournament", type=int)
    common.add_argument("--mutation", type=float)
    common.add_argument("--jobs", type=int)
    common.add_argument("--spec", metavar="PATH", help="GenSpec JSON for synth")
    common.add_argument("--labeled", type=int, metavar="N",
                        help="use a seeded sample of N labeled clauses")
    common.add_argument("--id", type=int, dest="clause_id", metavar="INT", help="corpus clause id")
    common.add_argument("--clauses", metavar="PATH", help="JSON-lines clauses to classify")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="aspectgp", description="Telicity classification with evolved indicator trees.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    helps = {
        "ingest": "validate a corpus file and count its records",
        "stats": "mean indicator frequencies over similar clauses, per class",
        "similar": "show one clause's similar set",
        "train": "evolve a classifier and write a model file",
        "classify": "label clauses with a trained model",
        "evaluate": "train/test batch with baselines, as a tab-separated report",
        "synth": "write a synthetic labeled corpus",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def read_config(path: str) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from the config file, then from DEFAULTS."""
    config = read_config(args.config) if args.config else {}
    types = {"k": int, "seed": int, "runs": int, "train_fraction": float, "pop": int,
             "inserts": int, "tournament": int, "mutation": float, "jobs": int, "labeled": int,
             "clause_id": int}
    for key, value in config.items():
        if not hasattr(args, key) or key in ("config", "command"):
            raise UsageError(f"unknown config key {key!r}")
        if getattr(args, key) is None:
            try:
                setattr(args, key, types.get(key, str)(value))
            except ValueError:
                raise UsageError(f"bad value for {key}: {value!r}") from None
    args.seed_given = args.seed is not None
    for key, value in DEFAULTS.items():
        if getattr(args, key) is None:
            setattr(args, key, value)
    if args.objective not in {o.value for o in Objective}:
        raise UsageError(f"unknown objective {args.objective!r}")
    return args


def _need(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"{args.command} needs --{name.replace('_', '-')}")


def _load_corpus(path):
    try:
        corpus, report = ingest(path)
    except OSError as exc:
        raise DataError(f"cannot read corpus {path}: {exc}") from exc
    for lineno, msg in report.errors:
        print(f"{path}:{lineno}: {msg}", file=sys.stderr)
    return corpus, report


def _emit(text: str, path: Optional[str]):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _labeled(args, corpus):
    clauses = sample_labeled(corpus.labeled(), args.labeled, args.seed)
    if not clauses:
        raise DataError("corpus has no telic/non-telic labeled clauses")
    return clauses


def _gp_config(args) -> GPConfig:
    try:
        return GPConfig(
            population_size=args.pop,
            total_inserts=args.inserts,
            tournament_size=args.tournament,
            mutation_rate=args.mutation,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _sim_config(args) -> SimilarityConfig:
    try:
        return SimilarityConfig(k=args.k)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_ingest(args):
    _need(args, "corpus")
    corpus, report = _load_corpus(args.corpus)
    text = f"accepted\t{report.accepted}\nrejected\t{report.rejected}\n"
    labels = {}
    for rec in corpus:
        labels[rec.label.value] = labels.get(rec.label.value, 0) + 1
    text += "".join(f"label:{k}\t{v}\n" for k, v in sorted(labels.items()))
    _emit(text, args.out)


def cmd_stats(args):
    _need(args, "corpus")
    corpus, _ = _load_corpus(args.corpus)
    table = frequency_table(build_index(corpus), _labeled(args, corpus), _sim_config(args))
    _emit(table.to_text(), args.out)


def cmd_similar(args):
    _need(args, "corpus", "clause_id")
    corpus, _ = _load_corpus(args.corpus)
    if not 0 <= args.clause_id < len(corpus):
        raise DataError(f"no clause with id {args.clause_id}")
    clause = corpus.records[args.clause_id]
    index = build_index(corpus)
    sim = retrieve_similar(index, clause.key, _sim_config(args), clause.id)
    lines = [
        f"clause\t{clause.id}",
        "key\t" + " ".join(tok if tok is not None else "-" for tok in clause.key),
        f"level_reached\t{sim.level_reached}",
        f"exact_count\t{sim.exact_count}",
    ]
    for level, count in enumerate(sim.level_counts):
        used = [m for m in MASKS_BY_LEVEL[level] if index.lookup(m, clause.key)]
        lines.append(f"level\t{level}\t{count}\tmasks\t" + ",".join(f"{m:05b}"[::-1] for m in used))
    lines.append("id\tlevel\tkey")
    for cid in sim.member_ids:
        rec = corpus.records[cid]
        mismatch = sum(a != b for a, b in zip(rec.key, clause.key))
        lines.append(f"{cid}\t{mismatch}\t" + " ".join(t if t is not None else "-" for t in rec.key))
    _emit("\n".join(lines) + "\n", args.out)


def cmd_train(args):
    _need(args, "corpus", "model")
    corpus, _ = _load_corpus(args.corpus)
    clauses = _labeled(args, corpus)
    try:
        report: TrainReport = train(
            corpus, clauses, args.objective, _gp_config(args), _sim_config(args), verbose=args.verbose
        )
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    save_model(report.model, args.model)
    log.info("trained on %d clauses in %.1fs", report.n_train, report.elapsed)
    if args.out:
        _emit(json.dumps(report.to_dict(), indent=2) + "\n", args.out)


def cmd_classify(args):
    _need(args, "corpus", "model")
    corpus, _ = _load_corpus(args.corpus)
    try:
        model = load_model(args.model)
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot load model {args.model}: {exc}") from exc
    index = build_index(corpus)
    if args.clauses:
        targets, _ = _load_corpus(args.clauses)
        # ids of external clauses are file positions; id -1 keeps them from
        # being mistaken for corpus members
        rows = [(rec.id, *classify(model, index, replace(rec, id=-1))) for rec in targets]
    else:
        rows = [(rec.id, *classify(model, index, rec)) for rec in corpus]
    _emit("id\tlabel\tscore\n" + "".join(f"{i}\t{lab.value}\t{s}\n" for i, lab, s in rows), args.out)


def cmd_evaluate(args):
    _need(args, "corpus")
    corpus, _ = _load_corpus(args.corpus)
    clauses = _labeled(args, corpus)
    try:
        batch = run_batch(
            corpus,
            clauses,
            args.objective,
            n_runs=args.runs,
            base_seed=args.seed,
            gp_config=_gp_config(args),
            similarity_config=_sim_config(args),
            train_fraction=args.train_fraction,
            n_jobs=args.jobs,
        )
    except (BatchError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    _emit(batch.to_text(), args.out)


def cmd_synth(args):
    _need(args, "out")
    if args.spec:
        try:
            with open(args.spec, encoding="utf-8") as fh:
                spec = GenSpec.from_dict(json.load(fh))
        except (OSError, ValueError, TypeError) as exc:
            raise DataError(f"bad spec file {args.spec}: {exc}") from exc
    else:
        spec = default_planted_spec()
    if args.seed_given:
        spec = replace(spec, seed=args.seed)
    try:
        corpus, report = generate(spec)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    write_corpus(corpus, args.out)
    with open(args.out + ".report.json", "w", encoding="utf-8") as fh:
        fh.write(report.dumps())
    print(f"wrote {len(corpus)} clauses to {args.out}", file=sys.stderr)


HANDLERS = {
    "ingest": cmd_ingest,
    "stats": cmd_stats,
    "similar": cmd_similar,
    "train": cmd_train,
    "classify": cmd_classify,
    "evaluate": cmd_evaluate,
    "synth": cmd_synth,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            raise UsageError("aspectgp: error: a subcommand is required")
        args = resolve(args)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(name)s: %(message)s",
            stream=sys.stderr,
        )
        HANDLERS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (DataError, RecordError) as exc:
        print(f"aspectgp: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"aspectgp: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
