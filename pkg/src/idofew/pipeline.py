"""Stage orchestration: cluster -> pseudo-label inter-training (x1 or x2) -> few-label fine-tuning.

A run is a chain of clustering stages followed by fine-tuning:

1. split the corpus; build the embedding provider that feeds the classifier;
2. for each clustering stage: sample its share of the training texts, cluster
   them (SIB on TF-IDF or KMeans on embeddings), swap in a head sized to the
   cluster count and inter-train the classifier on the cluster ids;
3. swap in a head for the gold classes and train on `n_labels` gold samples;
4. report test accuracy, per-stage NMI of pseudo-labels vs. gold, timings.

Gold labels are stripped from every clustering-stage input; they are read
only for NMI and for the majority-vote mapping behind intermediate accuracy.
"""

from __future__ import annotations

import logging
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .clustering import Clustering, dump_clustering, dump_trace
from .config import ExperimentConfig, StageConfig, default_stage2, parse_budget
from .corpus import Corpus, load_corpus, preprocess_corpus, sample_fraction, sample_labeled, split
from .embed import EmbeddingProvider, FileProvider, ProjectionProvider
from .errors import IdofewError, NotEnoughLabels, StageError, ValidationError
from .evaluation import accuracy, nmi
from .kmeans import kmeans_cluster
from .model import Classifier, new_classifier, reset_head, train
from .sib import sib_cluster
from .synth import generate
from .tfidf import build_vocabulary, row_normalize, vectorize

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TIMING_KEY = "wall_clock_s"

VARIANTS = (
    "SIB-KMEANS",
    "SIB-SIB",
    "KMEANS-KMEANS",
    "KMEANS-SIB",
    "SINGLE-SIB",
    "SINGLE-KMEANS",
    "BASELINE-FEWLABEL",
    "BASELINE-ZEROLABEL",
)

_SIB = ("sib", "tfidf")
_KMEANS = ("kmeans", "embedding")
_VARIANT_STAGES = {
    "SIB-KMEANS": (_SIB, _KMEANS),
    "SIB-SIB": (_SIB, _SIB),
    "KMEANS-KMEANS": (_KMEANS, _KMEANS),
    "KMEANS-SIB": (_KMEANS, _SIB),
    "SINGLE-SIB": (_SIB,),
    "SINGLE-KMEANS": (_KMEANS,),
    "BASELINE-FEWLABEL": (),
    "BASELINE-ZEROLABEL": (),
}


def substream(seed: int, tag: str) -> int:
    """Independent, reproducible child seed for one named consumer."""
    return int(np.random.SeedSequence([seed, zlib.crc32(tag.encode())]).generate_state(1)[0])


# ---------------------------------------------------------------- data


@dataclass
class Prepared:
    """Split corpus plus classifier inputs for every document."""

    train: Corpus
    test: Corpus
    label_set: tuple[str, ...]
    provider: EmbeddingProvider
    X_train: np.ndarray
    X_test: np.ndarray
    row_of: dict[str, int]


def load_dataset(config: ExperimentConfig) -> Corpus:
    if config.dataset:
        return load_corpus(config.dataset)
    return generate(config.synthetic)


def make_provider(config: ExperimentConfig, train: Corpus) -> EmbeddingProvider:
    emb = config.embedding
    if emb.provider == "file":
        provider = FileProvider.load(emb.path, emb.dim)
        return provider
    vocab = build_vocabulary(preprocess_corpus(train), config.max_terms)
    return ProjectionProvider(vocab, emb.dim, substream(config.seed, "projection"))


def classifier_inputs(E: np.ndarray) -> np.ndarray:
    """Rescale unit-norm sentence vectors to unit mean-square entries.

    The classifier's 1/sqrt(fan_in) initialization assumes inputs of that
    scale; raw unit vectors leave the first layer nearly silent.
    """
    return E * np.sqrt(E.shape[1])


def prepare(config: ExperimentConfig, corpus: Corpus | None = None) -> Prepared:
    corpus = load_dataset(config) if corpus is None else corpus
    if len(corpus.label_set) < 2:
        raise ValidationError("the corpus needs gold labels from at least two classes")
    train_c, test_c = split(corpus, config.train_ratio, substream(config.seed, "split"))
    if len(test_c) == 0:
        raise ValidationError("test split is empty")
    provider = make_provider(config, train_c)
    X_train = classifier_inputs(provider.embed_corpus(train_c))
    X_test = classifier_inputs(provider.embed_corpus(test_c))
    return Prepared(
        train_c, test_c, corpus.label_set, provider, X_train, X_test,
        {doc_id: i for i, doc_id in enumerate(train_c.ids)},
    )


# ---------------------------------------------------------------- stages


def cluster_subset(subset: Corpus, stage: StageConfig, config: ExperimentConfig,
                   provider: EmbeddingProvider, seed: int) -> Clustering:
    """Cluster an unlabeled subset with the stage's algorithm and feature space."""
    if any(d.gold_label is not None for d in subset):
        raise AssertionError("gold labels leaked into a clustering stage")
    cc = config.clustering
    if stage.features == "tfidf":
        tokens = preprocess_corpus(subset)
        vocab = build_vocabulary(tokens, config.max_terms)
        matrix = vectorize(tokens, vocab)
        if stage.algorithm == "sib":
            return sib_cluster(row_normalize(matrix), stage.clusters, cc.sib_max_sweeps, cc.sib_tol, seed)
        dense = matrix.toarray()
        norms = np.linalg.norm(dense, axis=1, keepdims=True)
        features = np.divide(dense, norms, out=np.zeros_like(dense), where=norms > 0)
    else:
        features = provider.embed_corpus(subset)
    return kmeans_cluster(features, stage.clusters, cc.kmeans_max_iter, cc.kmeans_tol, seed)


def stage_pseudo_train(model: Classifier, X: np.ndarray, clustering: Clustering, cfg) -> tuple[Classifier, list[float]]:
    """Inter-train on (input row, cluster id) pairs; the head must match the cluster count."""
    if clustering.n_clusters < 2:
        raise ValidationError("pseudo-label training needs at least 2 clusters")
    if model.n_classes != clustering.n_clusters:
        raise ValidationError(
            f"head width {model.n_classes} != {clustering.n_clusters} clusters; call reset_head first"
        )
    if X.shape[0] != len(clustering.assignment):
        raise ValidationError("clustering does not cover the subset")
    return train(model, X, clustering.assignment, cfg)


def majority_map(assignment: np.ndarray, gold: np.ndarray, n_clusters: int, n_classes: int) -> np.ndarray:
    """Cluster id -> most frequent gold class among its members (lowest index on ties)."""
    table = np.zeros((n_clusters, n_classes), dtype=np.int64)
    np.add.at(table, (assignment, gold), 1)
    return np.argmax(table, axis=1)


def _stage_name(stages: Sequence[StageConfig], upto: int) -> str:
    names = {"sib": "SIB", "kmeans": "KMeans"}
    return "PTM-" + "-".join(names[s.algorithm] for s in stages[: upto + 1])


def _encoder_snapshot(model: Classifier) -> tuple[np.ndarray, np.ndarray]:
    return model.params["W1"].copy(), model.params["b1"].copy()


def execute(config: ExperimentConfig, stages: Sequence[StageConfig], variant: str,
            *, finetune: bool = True, prepared: Prepared | None = None,
            dump_dir: str | Path | None = None) -> dict[str, Any]:
    """Run a chain of clustering stages then (optionally) fine-tuning; returns a RunReport dict."""
    t0 = time.perf_counter()
    try:
        prep = prepare(config) if prepared is None else prepared
    except IdofewError as exc:
        raise StageError("prepare", exc) from exc
    t_prep = time.perf_counter() - t0

    n_classes = len(prep.label_set)
    gold_train = prep.train.label_indices(prep.label_set)
    gold_test = prep.test.label_indices(prep.label_set)
    dump = Path(dump_dir) if dump_dir else None
    if dump:
        dump.mkdir(parents=True, exist_ok=True)

    model: Classifier | None = None
    stage_reports = []
    for i, stage in enumerate(stages):
        tag = f"stage{i + 1}"
        name = _stage_name(stages, i)
        ts = time.perf_counter()
        try:
            subset = sample_fraction(prep.train, stage.text_fraction, substream(config.seed, f"{tag}/sample"))
            rows = np.array([prep.row_of[d.id] for d in subset], dtype=np.int64)
            clustering = cluster_subset(subset.without_labels(), stage, config, prep.provider,
                                        substream(config.seed, f"{tag}/cluster"))
            head_seed = substream(config.seed, f"{tag}/head")
            if model is None:
                model = new_classifier(prep.provider.dim, config.hidden_dim, clustering.n_clusters, head_seed)
            else:
                before = _encoder_snapshot(model)
                model = reset_head(model, clustering.n_clusters, head_seed)
                after = _encoder_snapshot(model)
                assert all(np.array_equal(a, b) for a, b in zip(before, after)), "encoder changed by reset_head"
            cfg = config.train.with_seed(substream(config.seed, f"{tag}/train"))
            model, losses = stage_pseudo_train(model, prep.X_train[rows], clustering, cfg)
        except IdofewError as exc:
            raise StageError(tag, exc) from exc

        subset_gold = gold_train[rows]
        mapping = majority_map(clustering.assignment, subset_gold, clustering.n_clusters, n_classes)
        inter_acc = accuracy(mapping[model.predict(prep.X_test)], gold_test)
        if dump:
            dump_clustering(clustering, subset.ids, dump / f"{tag}_clusters.jsonl")
            dump_trace(clustering, dump / f"{tag}_trace.txt")
        stage_reports.append({
            "stage": tag,
            "model": name,
            "algorithm": stage.algorithm,
            "features": stage.features,
            "clusters": stage.clusters,
            "text_fraction": stage.text_fraction,
            "n_docs": len(subset),
            "nmi_vs_gold": nmi(subset_gold, clustering.assignment),
            "objective_final": clustering.objective,
            "sweeps": clustering.n_sweeps,
            "empty_clusters": clustering.empty_clusters,
            "train_loss": losses,
            "intermediate_accuracy": inter_acc,
            TIMING_KEY: time.perf_counter() - ts,
        })
        log.info("%s %s: nmi=%.4f acc=%.4f", variant, name, stage_reports[-1]["nmi_vs_gold"], inter_acc)

    tf = time.perf_counter()
    ft_report: dict[str, Any] = {"n_labels": 0, "train_loss": []}
    ft_seed = substream(config.seed, "finetune/head")
    if model is None:
        model = new_classifier(prep.provider.dim, config.hidden_dim, n_classes, ft_seed)
    else:
        model = reset_head(model, n_classes, ft_seed)
    if finetune:
        try:
            labeled = sample_labeled(prep.train, config.finetune.n_labels,
                                     substream(config.seed, "finetune/sample"), config.finetune.stratified)
            rows = np.array([prep.row_of[d.id] for d in labeled], dtype=np.int64)
            cfg = config.train.with_seed(substream(config.seed, "finetune/train"))
            model, losses = train(model, prep.X_train[rows], gold_train[rows], cfg)
        except IdofewError as exc:
            raise StageError("finetune", exc) from exc
        ft_report = {"n_labels": len(labeled), "train_loss": losses}
    ft_report["model"] = (stage_reports[-1]["model"] + "_FT") if stage_reports and finetune else variant
    final_acc = accuracy(model.predict(prep.X_test), gold_test)
    ft_report[TIMING_KEY] = time.perf_counter() - tf

    return {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "variant": variant,
        "seed": config.seed,
        "config": config.to_dict(),
        "n_train": len(prep.train),
        "n_test": len(prep.test),
        "label_set": list(prep.label_set),
        "stages": stage_reports,
        "finetune": ft_report,
        "final_accuracy": final_acc,
        TIMING_KEY: {"prepare": t_prep, "total": time.perf_counter() - t0},
    }


def run_idofew(config: ExperimentConfig, **kwargs) -> dict[str, Any]:
    """The full dual-clustering pipeline with the stages exactly as configured."""
    if config.stage2 is None:
        raise ValidationError("run_idofew needs a [stage2] configuration")
    return execute(config, [config.stage1, config.stage2], "IDOFEW", **kwargs)


def variant_stages(config: ExperimentConfig, variant: str) -> list[StageConfig]:
    if variant not in _VARIANT_STAGES:
        raise ValidationError(f"unknown variant {variant!r}; choose from {', '.join(VARIANTS)}")
    templates = [config.stage1, config.stage2 or default_stage2()]
    stages = []
    for template, (algorithm, features) in zip(templates, _VARIANT_STAGES[variant]):
        stages.append(replace(template, algorithm=algorithm, features=features))
    return stages


def run_variant(config: ExperimentConfig, variant: str, **kwargs) -> dict[str, Any]:
    variant = variant.upper()
    stages = variant_stages(config, variant)
    return execute(config, stages, variant, finetune=variant != "BASELINE-ZEROLABEL", **kwargs)


# ---------------------------------------------------------------- sweeps


def _run_job(job: tuple[ExperimentConfig, str, dict]) -> dict[str, Any]:
    config, variant, extra = job
    report = run_variant(config, variant)
    report["sweep"] = extra
    return report


def run_jobs(jobs: list[tuple[ExperimentConfig, str, dict]], n_jobs: int = 1) -> list[dict[str, Any]]:
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(_run_job, jobs))
    return [_run_job(j) for j in jobs]


def _seeds(config: ExperimentConfig, seeds: Iterable[int] | None) -> list[int]:
    return [config.seed] if seeds is None else list(seeds)


def sweep_clusters(config: ExperimentConfig, values: Iterable[int], seeds=None, variant: str = "SIB-KMEANS",
                   n_jobs: int = 1) -> list[dict[str, Any]]:
    values = list(values)
    if any(v < 2 for v in values):
        raise ValidationError("cluster counts must be >= 2")
    jobs = []
    for v in values:
        for s in _seeds(config, seeds):
            cfg = replace(config, seed=s, stage1=replace(config.stage1, clusters=v),
                          stage2=replace(config.stage2 or default_stage2(), clusters=v))
            jobs.append((cfg, variant, {"parameter": "clusters", "value": v}))
    return run_jobs(jobs, n_jobs)


def sweep_fraction(config: ExperimentConfig, fractions: Iterable[float], stage: int = 2, seeds=None,
                   variant: str = "SIB-KMEANS", n_jobs: int = 1) -> list[dict[str, Any]]:
    if stage not in (1, 2):
        raise ValidationError("stage must be 1 or 2")
    jobs = []
    for f in fractions:
        for s in _seeds(config, seeds):
            if stage == 1:
                cfg = replace(config, seed=s, stage1=replace(config.stage1, text_fraction=f))
            else:
                cfg = replace(config, seed=s, stage2=replace(config.stage2 or default_stage2(), text_fraction=f))
            jobs.append((cfg, variant, {"parameter": f"stage{stage}.text_fraction", "value": f}))
    return run_jobs(jobs, n_jobs)


def budget_to_count(budget, n_labeled: int) -> int:
    b = parse_budget(budget)
    if isinstance(b, int):
        return b
    return max(1, int(np.floor(b * n_labeled + 0.5)))


def sweep_label_budget(config: ExperimentConfig, budgets: Iterable, seeds=None, variant: str = "SIB-KMEANS",
                       n_jobs: int = 1) -> list[dict[str, Any]]:
    """One run per budget; ints are sample counts, fractions are shares of the labeled train split."""
    corpus = load_dataset(config)
    train_c, _ = split(corpus, config.train_ratio, substream(config.seed, "split"))
    n_labeled = sum(d.gold_label is not None for d in train_c)
    jobs = []
    for b in budgets:
        n = budget_to_count(b, n_labeled)
        if n > n_labeled:
            raise NotEnoughLabels(n_labeled, n)
        for s in _seeds(config, seeds):
            cfg = replace(config, seed=s, finetune=replace(config.finetune, n_labels=n))
            jobs.append((cfg, variant, {"parameter": "finetune.n_labels", "value": parse_budget(b), "n_labels": n}))
    return run_jobs(jobs, n_jobs)


def summarize(reports: Sequence[dict[str, Any]]) -> list[dict[str, Any]]:
    """Mean and standard deviation of final accuracy per swept value, in first-seen order."""
    groups: dict[Any, list[float]] = {}
    for r in reports:
        groups.setdefault(r["sweep"]["value"], []).append(r["final_accuracy"])
    return [
        {"value": v, "runs": len(accs), "mean_accuracy": float(np.mean(accs)), "std_accuracy": float(np.std(accs))}
        for v, accs in groups.items()
    ]


def strip_timings(obj):
    """Copy of a report with every timing field removed (for determinism checks)."""
    if isinstance(obj, dict):
        return {k: strip_timings(v) for k, v in obj.items() if k != TIMING_KEY}
    if isinstance(obj, list):
        return [strip_timings(v) for v in obj]
    return obj
