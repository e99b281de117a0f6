"""Command-line entry point: ``idofew <command> [flags]``.

Exit codes: 0 success, 1 validation/usage error, 2 runtime error.
Seed precedence: --seed, then the config file's ``seed``, then $IDOFEW_SEED, then 0.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path
from typing import Any

from . import __version__
from .clustering import load_clustering_dump
from .config import ExperimentConfig, config_from_dict, parse_budget, tomllib
from .corpus import load_corpus, write_corpus
from .embed import FileProvider
from .errors import StageError, ValidationError
from .evaluation import nmi
from .pipeline import (
    SCHEMA_VERSION,
    VARIANTS,
    run_idofew,
    run_variant,
    summarize,
    sweep_clusters,
    sweep_fraction,
    sweep_label_budget,
)
from .synth import PlantedSpec, generate

log = logging.getLogger("idofew")

STAGE2_FRACTIONS = (0.05, 0.10, 0.20)
STAGE1_FRACTIONS = (1.0, 0.8, 0.7, 0.5)


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def write_json_atomic(obj: Any, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(obj: Any, out: str | None) -> None:
    if out:
        write_json_atomic(obj, out)
    else:
        json.dump(obj, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")


def _csv(cast):
    def parse(text: str):
        try:
            return [cast(v.strip()) for v in text.split(",") if v.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _fraction(text: str) -> float:
    text = text.strip()
    return float(text[:-1]) / 100.0 if text.endswith("%") else float(text)


def resolve_config(args) -> ExperimentConfig:
    data: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"{args.config}: {exc}") from None
    config = config_from_dict(data)
    file_has_seed = "seed" in data or "seed" in (data.get("experiment") or {})
    if args.seed is not None:
        seed = args.seed
    elif file_has_seed:
        seed = config.seed
    elif os.environ.get("IDOFEW_SEED"):
        try:
            seed = int(os.environ["IDOFEW_SEED"])
        except ValueError:
            raise ValidationError("IDOFEW_SEED must be an integer") from None
    else:
        seed = config.seed
    overrides: dict[str, Any] = {"seed": seed}
    if getattr(args, "dataset", None):
        overrides["dataset"] = args.dataset
    if getattr(args, "n_labels", None) is not None:
        overrides["finetune"] = replace(config.finetune, n_labels=args.n_labels)
    if getattr(args, "embeddings", None):
        overrides["embedding"] = replace(config.embedding, provider="file", path=args.embeddings)
    return replace(config, **overrides)


def _sweep_doc(command: str, config: ExperimentConfig, reports: list[dict]) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "command": command,
        "config": config.to_dict(),
        "runs": reports,
        "summary": summarize(reports),
    }


def cmd_run(args) -> int:
    config = resolve_config(args)
    report = run_idofew(config, dump_dir=args.dump_dir)
    _emit(report, args.out)
    return 0


def cmd_ablate(args) -> int:
    config = resolve_config(args)
    report = run_variant(config, args.variant, dump_dir=args.dump_dir)
    _emit(report, args.out)
    return 0


def cmd_sweep_clusters(args) -> int:
    config = resolve_config(args)
    values = args.values or list(config.eval.cluster_sweep)
    reports = sweep_clusters(config, values, args.seeds, args.variant, args.jobs)
    _emit(_sweep_doc("sweep-clusters", config, reports), args.out)
    return 0


def cmd_sweep_labels(args) -> int:
    config = resolve_config(args)
    budgets = args.budgets or list(config.eval.label_budgets)
    reports = sweep_label_budget(config, budgets, args.seeds, args.variant, args.jobs)
    _emit(_sweep_doc("sweep-labels", config, reports), args.out)
    return 0


def cmd_sweep_fraction(args) -> int:
    config = resolve_config(args)
    if args.values:
        values = args.values
    else:
        values = list(STAGE1_FRACTIONS if args.stage == 1 else STAGE2_FRACTIONS)
    reports = sweep_fraction(config, values, args.stage, args.seeds, args.variant, args.jobs)
    doc = _sweep_doc("sweep-fraction", config, reports)
    doc["stage"] = args.stage
    _emit(doc, args.out)
    return 0


def cmd_embed_validate(args) -> int:
    provider = FileProvider.load(args.embeddings, args.dim)
    corpus = load_corpus(args.corpus)
    missing = provider.missing(corpus)
    result = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "embeddings": str(args.embeddings),
        "corpus": str(args.corpus),
        "dim": args.dim,
        "n_documents": len(corpus),
        "n_missing": len(missing),
        "missing": missing,
        "ok": not missing,
    }
    _emit(result, args.out)
    return 0 if not missing else 1


def cmd_synth(args) -> int:
    seed = args.seed if args.seed is not None else int(os.environ.get("IDOFEW_SEED", 0))
    spec = PlantedSpec(args.n_classes, args.docs_per_class, args.vocab_per_class,
                       args.shared_vocab, args.doc_length, args.noise, seed)
    corpus = generate(spec)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{out.name}.", dir=out.parent)
        os.close(fd)
        try:
            write_corpus(corpus, tmp)
            os.replace(tmp, out)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    else:
        for d in corpus:
            sys.stdout.write(json.dumps({"id": d.id, "text": d.text, "label": d.gold_label}) + "\n")
    return 0


def cmd_eval_nmi(args) -> int:
    ids, clusters = load_clustering_dump(args.clusters)
    if args.against_clusters:
        other_ids, other = load_clustering_dump(args.against_clusters)
        lookup = dict(zip(other_ids, other.tolist()))
    else:
        corpus = load_corpus(args.corpus)
        lookup = {d.id: d.gold_label for d in corpus}
    missing = [i for i in ids if lookup.get(i) is None]
    if missing:
        raise ValidationError(f"{len(missing)} clustered documents have no reference label (first: {missing[0]!r})")
    reference = [lookup[i] for i in ids]
    _emit({
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "n": len(ids),
        "nmi": nmi(reference, clusters),
    }, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="idofew", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"idofew {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, config=True):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="report path (stdout if omitted)")
        if config:
            p.add_argument("--config", default=None, help="TOML experiment config")
            p.add_argument("--dataset", default=None, help="JSONL corpus (overrides config)")
            p.add_argument("--embeddings", default=None, help="JSONL embedding file; selects the file provider")
            p.add_argument("--n-labels", type=int, default=None)

    def sweep_flags(p):
        p.add_argument("--seeds", type=_csv(int), default=None, help="comma-separated seeds (default: --seed)")
        p.add_argument("--variant", default="SIB-KMEANS", type=str.upper, choices=VARIANTS)
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("run", help="full dual-clustering pipeline")
    common(p)
    p.add_argument("--dump-dir", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ablate", help="run one pipeline variant")
    common(p)
    p.add_argument("--variant", required=True, type=str.upper, choices=VARIANTS)
    p.add_argument("--dump-dir", default=None)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep-clusters", help="vary the cluster count of both stages")
    common(p)
    sweep_flags(p)
    p.add_argument("--values", type=_csv(int), default=None)
    p.set_defaults(func=cmd_sweep_clusters)

    p = sub.add_parser("sweep-labels", help="vary the fine-tuning label budget")
    common(p)
    sweep_flags(p)
    p.add_argument("--budgets", type=_csv(parse_budget), default=None, help="e.g. 64,5%%,0.1")
    p.set_defaults(func=cmd_sweep_labels)

    p = sub.add_parser("sweep-fraction", help="vary the text fraction of one clustering stage")
    common(p)
    sweep_flags(p)
    p.add_argument("--stage", type=int, choices=(1, 2), default=2)
    p.add_argument("--values", type=_csv(_fraction), default=None)
    p.set_defaults(func=cmd_sweep_fraction)

    p = sub.add_parser("embed-validate", help="check an embedding file covers a corpus")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--dim", type=int, default=384)
    p.set_defaults(func=cmd_embed_validate)

    p = sub.add_parser("synth", help="write a planted-class synthetic corpus")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="corpus JSONL path (stdout if omitted)")
    defaults = PlantedSpec()
    p.add_argument("--n-classes", type=int, default=defaults.n_classes)
    p.add_argument("--docs-per-class", type=int, default=defaults.docs_per_class)
    p.add_argument("--vocab-per-class", type=int, default=defaults.vocab_per_class)
    p.add_argument("--shared-vocab", type=int, default=defaults.shared_vocab)
    p.add_argument("--doc-length", type=int, default=defaults.doc_length)
    p.add_argument("--noise", type=float, default=defaults.noise)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval-nmi", help="NMI of a clustering dump against gold labels or another dump")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--clusters", required=True)
    ref = p.add_mutually_exclusive_group(required=True)
    ref.add_argument("--corpus")
    ref.add_argument("--against-clusters")
    p.set_defaults(func=cmd_eval_nmi)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1 if isinstance(exc.cause, ValidationError) else 2
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
