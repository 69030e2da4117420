"""
Experiment orchestration.

One run reads its corpora, builds (or restores) the embedding table,
trains one classifier per target word and writes ``results.json``,
``report.txt``, ``manifest.json`` and training histories to the output
directory. Per-word jobs run on a thread pool; each job gets a seed
derived from the run seed and the word, and results are merged in word
order, so output files do not depend on scheduling.

Modes:
    cv        k-fold cross validation over ``fold_source`` (+ ``always_in_train``)
    train     train on the training corpus, save checkpoints, evaluate on
              ``test_corpus`` when given
    eval      load checkpoints, evaluate on ``test_corpus``
    wsd       lexical-sample protocol over ``lexical_sample_dir``
    analyze   feature-detector analysis of CNN filters
    tune      region-size selection only
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple
import logging

from .checkpoint import load_checkpoint, read_checkpoint, save_checkpoint
from .config import BalanceMode, EmbeddingKind, EmbeddingMode, ExperimentSpec, ModelKind, RunMode
from .dataset import Dataset, balance, load_dataset, stratified_folds, train_validation_split
from .diagnostics import describe_counts
from .embeddings import EmbeddingTable, load_embeddings, oov_bound_from_table
from .evaluation import (
    EvalResult, PairedComparison, evaluate, evaluate_by_genre, mcnemar_midp, micro_average
)
from .exceptions import ConfigurationError, ReportWriteError, SenseCnnError
from .introspect import analyze_filters, distance_stats, export_report, hit_vectors
from .numerics import SeededRng
from .optim import TrainedModel, TrainingHistory, training_accuracy
from .registry import FitRequest, ModelRegistry, default_registry
from .reports import render_results_text
from .serialization import canonical_json, derive_seed, hash_file_content, hash_multiple_files

logger = logging.getLogger(__name__)

ALL_WORDS = "all"
TRAIN_SUFFIX = ".train.jsonl"
TEST_SUFFIX = ".test.jsonl"
ANY_MATCH_NOTE = "multi-label test instances count as correct when the prediction matches any gold sense"


@dataclass
class WordResult:
    """Outcome for one target word (one per-verb classifier)."""
    word: str
    result: EvalResult
    baselines: Dict[str, EvalResult] = field(default_factory=dict)
    comparisons: List[PairedComparison] = field(default_factory=list)
    histories: Dict[str, TrainingHistory] = field(default_factory=dict)
    genres: Dict[str, EvalResult] = field(default_factory=dict)
    extras: Dict[str, Any] = field(default_factory=dict)
    gold_sets: List[Tuple[str, ...]] = field(default_factory=list)

    def to_json(self) -> Dict[str, Any]:
        entry = self.result.to_json()
        entry["baselines"] = {kind: r.to_json() for kind, r in sorted(self.baselines.items())}
        if self.genres:
            entry["genres"] = {g: r.to_json() for g, r in self.genres.items()}
        entry.update(self.extras)
        return entry


@dataclass
class RunResult:
    """Everything a run reports, merged over words in sorted order."""
    mode: str
    model: str
    words: Dict[str, WordResult] = field(default_factory=dict)
    baselines: List[str] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    seeds: Dict[str, int] = field(default_factory=dict)
    pooled: List[PairedComparison] = field(default_factory=list)
    tuning: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    analysis: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    alpha: float = 0.05

    @property
    def micro(self) -> Optional[float]:
        results = [w.result for w in self.words.values()]
        return micro_average(results) if results else None

    def baselines_micro(self) -> Dict[str, float]:
        micro = {}
        for kind in self.baselines:
            results = [w.baselines[kind] for w in self.words.values() if kind in w.baselines]
            if results:
                micro[kind] = micro_average(results)
        return micro

    def significance(self) -> List[Dict[str, Any]]:
        rows = []
        for word, outcome in self.words.items():
            for comparison in outcome.comparisons:
                rows.append(dict(comparison.to_json(), verb=word))
        for comparison in self.pooled:
            rows.append(dict(comparison.to_json(), verb="micro"))
        return rows

    def to_json(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "model": self.model,
            "per_verb": {word: outcome.to_json() for word, outcome in self.words.items()},
            "micro": self.micro,
            "baselines": list(self.baselines),
            "baselines_micro": self.baselines_micro(),
            "significance": self.significance(),
            "alpha": self.alpha,
            "notes": list(self.notes),
            "tuning": self.tuning,
            "analysis": self.analysis,
        }


@dataclass
class _Prediction:
    ids: List[str] = field(default_factory=list)
    golds: List[str] = field(default_factory=list)
    gold_sets: List[Tuple[str, ...]] = field(default_factory=list)
    genres: List[Optional[str]] = field(default_factory=list)
    by_kind: Dict[str, List[str]] = field(default_factory=dict)

    def add_gold(self, ds: Dataset) -> None:
        for inst in ds:
            self.ids.append(inst.id)
            self.golds.append(inst.label)
            self.gold_sets.append(inst.gold_labels)
            self.genres.append(inst.genre)

    def add(self, kind: str, labels: Sequence[str]) -> None:
        self.by_kind.setdefault(kind, []).extend(labels)


# ---------------------------------------------------------------------------
# inputs

def corpus_tokens(corpora: Iterable[Dataset]) -> set:
    """Every token (and its lowercased form) of the given corpora."""
    tokens = set()
    for ds in corpora:
        for inst in ds:
            tokens.update(inst.tokens)
            tokens.update(t.lower() for t in inst.tokens)
    return tokens


def build_table(spec: ExperimentSpec, corpora: Sequence[Dataset]) -> Optional[EmbeddingTable]:
    """
    Embedding table for a run, or None when no neural model is trained.

    Pre-trained vectors are restricted to the corpora's vocabulary. The
    random condition draws every row from U[-a, a], with ``a`` taken from
    ``random_bound`` or matched to the variance of the embedding file.
    """
    if not spec.needs_embeddings:
        return None
    tuned = spec.embedding_mode is EmbeddingMode.TUNED
    oov_seed = derive_seed(spec.seed, "oov")

    if spec.embedding_kind is EmbeddingKind.PRETRAINED:
        table = load_embeddings(
            spec.embeddings, spec.embedding_dim,
            restrict_to=corpus_tokens(corpora), trainable=tuned, seed=oov_seed,
        )
        return table

    bound = spec.random_bound
    if bound is None:
        bound = oov_bound_from_table(load_embeddings(spec.embeddings, spec.embedding_dim))
    logger.info("random embeddings (d=%d) from U[-%.4f, %.4f]", spec.embedding_dim, bound, bound)
    return EmbeddingTable.random_init(spec.embedding_dim, bound, seed=oov_seed, trainable=tuned)


def _group(ds: Dataset, spec: ExperimentSpec) -> Dict[str, Dataset]:
    if spec.group_by_target:
        return ds.group_by_target()
    return {ALL_WORDS: ds}


def _require_path(value: Optional[Path], key: str) -> Path:
    if value is None:
        raise ConfigurationError(f"this mode needs '{key}' to be set")
    return value


def _job_table(table: Optional[EmbeddingTable], spec: ExperimentSpec) -> Optional[EmbeddingTable]:
    # tuned training writes rows, so every job owns a copy
    if table is not None and spec.embedding_mode is EmbeddingMode.TUNED:
        return table.copy()
    return table


def _prepare_train(train: Dataset, spec: ExperimentSpec, seed: int, word: str) -> Dataset:
    if spec.balance is BalanceMode.NONE:
        return train
    present = [label for label, c in train.label_counts().items() if c > 0]
    if len(present) < 2:
        logger.warning("%s: only one sense present, not balancing", word)
        return train
    balanced = balance(train, spec.balance.value, derive_seed(seed, "balance"))
    logger.debug("%s", describe_counts(balanced.label_counts(), f"{word} balanced"))
    return balanced


def _kinds(spec: ExperimentSpec) -> List[str]:
    kinds = [spec.model.value]
    for kind in spec.compare_with:
        if kind.value not in kinds:
            kinds.append(kind.value)
    return kinds


def _run_jobs(jobs: Dict[str, Callable[[], WordResult]], workers: int) -> Dict[str, WordResult]:
    """Run per-word jobs, merged in sorted word order."""
    if workers <= 1 or len(jobs) <= 1:
        return {word: jobs[word]() for word in sorted(jobs)}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {word: pool.submit(job) for word, job in jobs.items()}
        return {word: futures[word].result() for word in sorted(futures)}


def _comparisons(model: str, preds: _Prediction) -> List[PairedComparison]:
    return [
        mcnemar_midp(preds.by_kind[model], preds.by_kind[kind], preds.golds,
                     pair=(model, kind), gold_sets=preds.gold_sets)
        for kind in preds.by_kind if kind != model
    ]


def _finish(word: str, model: str, preds: _Prediction, label_set: Sequence[str]) -> WordResult:
    results = {
        kind: evaluate(labels, preds.golds, label_set, preds.ids, preds.gold_sets)
        for kind, labels in preds.by_kind.items()
    }
    unseen = sorted(set(results[model].labels) - set(label_set))
    if unseen:
        logger.warning("%s: test senses absent from training count as misses: %s", word, ", ".join(unseen))
    outcome = WordResult(
        word=word,
        result=results.pop(model),
        baselines=results,
        comparisons=_comparisons(model, preds),
        gold_sets=list(preds.gold_sets),
    )
    if any(g is not None for g in preds.genres):
        outcome.genres = evaluate_by_genre(
            preds.by_kind[model], preds.golds, preds.genres, label_set, preds.gold_sets
        )
    if unseen:
        outcome.extras["unseen_labels"] = unseen
    return outcome


def _pooled(model: str, words: Dict[str, WordResult]) -> List[PairedComparison]:
    """McNemar tests over the predictions of all words together."""
    if len(words) < 2:
        return []
    kinds = sorted({kind for w in words.values() for kind in w.baselines})
    pooled = []
    for kind in kinds:
        a, b, golds, accepted = [], [], [], []
        for outcome in words.values():
            if kind not in outcome.baselines:
                continue
            a.extend(p for _, _, p in outcome.result.predictions)
            b.extend(p for _, _, p in outcome.baselines[kind].predictions)
            golds.extend(g for _, g, _ in outcome.result.predictions)
            accepted.extend(outcome.gold_sets or [(g,) for _, g, _ in outcome.result.predictions])
        pooled.append(mcnemar_midp(a, b, golds, pair=(model, kind), gold_sets=accepted))
    return pooled


# ---------------------------------------------------------------------------
# cross validation

def _cv_word(
    word: str,
    source: Dataset,
    extra: Optional[Dataset],
    spec: ExperimentSpec,
    table: Optional[EmbeddingTable],
    seed: int,
    registry: ModelRegistry
) -> WordResult:
    kinds = _kinds(spec)
    label_set = source.concat(extra).label_set if extra is not None else source.label_set
    plan = stratified_folds(source, spec.folds, derive_seed(seed, "folds"))
    preds = _Prediction()
    histories: Dict[str, TrainingHistory] = {}

    for fold in range(spec.folds):
        train_part, test_part = plan.split(source, fold)
        if len(test_part) == 0:
            continue
        if extra is not None:
            train_part = train_part.concat(extra)
        fold_seed = derive_seed(seed, "fold", fold)
        train_part = _prepare_train(train_part, spec, fold_seed, word)
        preds.add_gold(test_part)
        for kind in kinds:
            request = FitRequest(train_part, spec, derive_seed(fold_seed, kind), _job_table(table, spec))
            predictor = registry.fit(kind, request)
            preds.add(kind, predictor.predict_labels(test_part))
            if kind == spec.model.value and isinstance(predictor, TrainedModel):
                histories[f"fold{fold}"] = predictor.history
        logger.info("%s: fold %d/%d done (%d test instances)", word, fold + 1, spec.folds, len(test_part))

    outcome = _finish(word, spec.model.value, preds, label_set)
    outcome.histories = histories
    outcome.extras["folds"] = plan.fold_sizes()
    return outcome


def run_cv(spec: ExperimentSpec, registry: Optional[ModelRegistry] = None) -> RunResult:
    """
    k-fold cross validation, one classifier per target word.

    Folds are built over ``fold_source``; ``always_in_train`` corpora are
    added to every training fold. Baselines in ``compare_with`` train on the
    same folds, so their predictions pair with the model's for McNemar tests.
    """
    registry = registry or default_registry()
    source = load_dataset(_require_path(spec.fold_source, "fold_source"))
    extras = [load_dataset(p) for p in spec.always_in_train]
    table = build_table(spec, [source] + extras)

    groups = _group(source, spec)
    extra_groups: Dict[str, List[Dataset]] = {}
    for ds in extras:
        for word, part in _group(ds, spec).items():
            extra_groups.setdefault(word, []).append(part)
    missing = sorted(set(extra_groups) - set(groups))
    if missing:
        logger.warning("training-only corpora mention words without folds: %s", ", ".join(missing))

    if table is not None:
        table.warm(inst.tokens for ds in [source] + extras for inst in ds)

    run = RunResult(mode=spec.mode.value, model=spec.model.value, baselines=_kinds(spec)[1:])
    jobs = {}
    for word, ds in groups.items():
        parts = extra_groups.get(word, [])
        extra = parts[0].concat(*parts[1:]) if parts else None
        seed = derive_seed(spec.seed, word)
        run.seeds[word] = seed
        jobs[word] = (lambda w=word, d=ds, e=extra, s=seed:
                      _cv_word(w, d, e, spec, table, s, registry))
    run.words = _run_jobs(jobs, spec.workers)
    run.pooled = _pooled(run.model, run.words)
    return run


# ---------------------------------------------------------------------------
# train / eval

def training_data(spec: ExperimentSpec) -> Dataset:
    """
    Training corpus of train and analyze runs.

    With ``train_fold`` set, only that fold's training part of
    ``fold_source`` is used (the cross-corpus setting).
    """
    source = load_dataset(_require_path(spec.fold_source, "fold_source"))
    if spec.train_fold is not None:
        if spec.train_fold >= spec.folds:
            raise ConfigurationError(f"train_fold {spec.train_fold} out of range for {spec.folds} folds")
        if spec.group_by_target:
            parts = []
            for word, ds in source.group_by_target().items():
                plan = stratified_folds(ds, spec.folds, derive_seed(derive_seed(spec.seed, word), "folds"))
                parts.append(plan.split(ds, spec.train_fold)[0])
            source = parts[0].concat(*parts[1:])
        else:
            plan = stratified_folds(source, spec.folds, derive_seed(derive_seed(spec.seed, ALL_WORDS), "folds"))
            source = plan.split(source, spec.train_fold)[0]
    extras = [load_dataset(p) for p in spec.always_in_train]
    return source.concat(*extras) if extras else source


def checkpoint_dir(spec: ExperimentSpec) -> Path:
    return spec.checkpoint if spec.checkpoint is not None else spec.out_dir / "checkpoints"


def fit_words(
    spec: ExperimentSpec,
    train_ds: Dataset,
    table: Optional[EmbeddingTable],
    registry: ModelRegistry
) -> Dict[str, Tuple[Dict[str, Any], int]]:
    """Train every kind per word; returns word -> ({kind: predictor}, seed)."""
    def job(word: str, ds: Dataset, seed: int):
        def run():
            ds_ready = _prepare_train(ds, spec, seed, word)
            fitted = {
                kind: registry.fit(kind, FitRequest(ds_ready, spec, derive_seed(seed, kind), _job_table(table, spec)))
                for kind in _kinds(spec)
            }
            logger.info("%s: trained on %d instances", word, len(ds_ready))
            return fitted, seed
        return run

    jobs = {word: job(word, ds, derive_seed(spec.seed, word)) for word, ds in _group(train_ds, spec).items()}
    return _run_jobs(jobs, spec.workers)


def _evaluate_fitted(
    spec: ExperimentSpec,
    fitted: Dict[str, Tuple[Dict[str, Any], int]],
    test_ds: Dataset
) -> RunResult:
    run = RunResult(mode=spec.mode.value, model=spec.model.value, baselines=_kinds(spec)[1:])
    test_groups = _group(test_ds, spec)
    for word in sorted(set(test_groups) - set(fitted)):
        logger.warning("%s: no training data, %d test instances skipped", word, len(test_groups[word]))
        run.notes.append(f"{word}: skipped, no training data")

    for word in sorted(set(test_groups) & set(fitted)):
        predictors, seed = fitted[word]
        test = test_groups[word]
        preds = _Prediction()
        preds.add_gold(test)
        for kind, predictor in predictors.items():
            preds.add(kind, predictor.predict_labels(test))
        main = predictors[spec.model.value]
        label_set = getattr(main, "label_set", test.label_set)
        outcome = _finish(word, spec.model.value, preds, label_set)
        if isinstance(main, TrainedModel):
            outcome.histories["train"] = main.history
        run.words[word] = outcome
        run.seeds[word] = seed
    run.pooled = _pooled(run.model, run.words)
    return run


def run_train_eval(spec: ExperimentSpec, registry: Optional[ModelRegistry] = None) -> RunResult:
    """
    Train on the training corpus and evaluate on ``test_corpus``.

    In ``train`` mode checkpoints of the neural model are written (one file
    per word under ``checkpoint``). Without a test corpus the model is
    scored on its own training data.
    """
    registry = registry or default_registry()
    train_ds = training_data(spec)
    test_ds = load_dataset(spec.test_corpus) if spec.test_corpus is not None else None
    table = build_table(spec, [train_ds] + ([test_ds] if test_ds is not None else []))
    base = table.copy() if table is not None else None
    if table is not None:
        table.warm(inst.tokens for inst in train_ds)
        if test_ds is not None:
            table.warm(inst.tokens for inst in test_ds)

    fitted = fit_words(spec, train_ds, table, registry)

    if spec.mode is RunMode.TRAIN:
        directory = checkpoint_dir(spec)
        for word, (predictors, seed) in sorted(fitted.items()):
            main = predictors[spec.model.value]
            if isinstance(main, TrainedModel):
                save_checkpoint(
                    main, directory / f"{word}.json", base=base,
                    embeddings_source=spec.embeddings,
                    seed_info={"run": spec.seed, "word": seed},
                )

    if test_ds is None:
        run = _evaluate_fitted(spec, fitted, train_ds)
        run.notes.append("no test corpus: scores are training accuracies")
        return run

    run = _evaluate_fitted(spec, fitted, test_ds)
    train_words = _group(train_ds, spec)
    for word, outcome in run.words.items():
        main = fitted[word][0][spec.model.value]
        if isinstance(main, TrainedModel):
            outcome.extras["training_accuracy"] = training_accuracy(main, train_words[word])
    return run


def _checkpoint_files(spec: ExperimentSpec) -> Dict[str, Path]:
    location = _require_path(spec.checkpoint, "checkpoint")
    if location.is_file():
        return {ALL_WORDS if not spec.group_by_target else location.stem: location}
    files = {p.stem: p for p in sorted(location.glob("*.json"))}
    if not files:
        raise ConfigurationError(f"no checkpoints found in {location}")
    return files


def _base_table_for(path: Path, spec: ExperimentSpec, corpora: Sequence[Dataset]) -> Optional[EmbeddingTable]:
    meta = read_checkpoint(path)["embeddings"]
    if not meta.get("n_pretrained"):
        return None
    source = spec.embeddings or (Path(meta["source"]) if meta.get("source") else None)
    if source is None:
        raise ConfigurationError("checkpoint needs its embedding file; set 'embeddings'")
    return load_embeddings(source, int(meta["dim"]), restrict_to=corpus_tokens(corpora))


def load_trained(spec: ExperimentSpec, corpora: Sequence[Dataset]) -> Dict[str, TrainedModel]:
    """Checkpointed models by word."""
    loaded = {}
    for word, path in _checkpoint_files(spec).items():
        loaded[word] = load_checkpoint(path, _base_table_for(path, spec, corpora))
        logger.info("%s: loaded %s checkpoint %s", word, loaded[word].kind, path)
    return loaded


def run_eval(spec: ExperimentSpec) -> RunResult:
    """Evaluate checkpointed models on ``test_corpus``."""
    test_ds = load_dataset(_require_path(spec.test_corpus, "test_corpus"))
    loaded = load_trained(spec, [test_ds])
    kind = next(iter(loaded.values())).kind
    spec = spec.with_overrides(model=kind, compare_with=[])
    fitted = {word: ({kind: trained}, 0) for word, trained in loaded.items()}
    run = _evaluate_fitted(spec, fitted, test_ds)
    run.seeds = {}
    return run


# ---------------------------------------------------------------------------
# region sizes and WSD

def tune_region_sizes(
    train_ds: Dataset,
    candidates: Sequence[Tuple[int, ...]],
    spec: ExperimentSpec,
    table: EmbeddingTable,
    seed: int,
    registry: Optional[ModelRegistry] = None
) -> Tuple[Tuple[int, ...], Dict[str, float]]:
    """
    Pick region sizes by validation accuracy on a stratified split.

    Returns:
        (chosen sizes, validation accuracy per candidate); ties go to the
        earlier candidate. When the split is degenerate (a class with fewer
        than two instances or an empty part) the configured sizes are
        returned untried.
    """
    registry = registry or default_registry()
    if not candidates:
        raise ConfigurationError("no region-size candidates to choose from")

    counts = [c for c in train_ds.label_counts().values() if c > 0]
    fit_part, held_out = (None, None)
    if len(counts) >= 2 and min(counts) >= 2:
        fit_part, held_out = train_validation_split(train_ds, spec.validation_fraction, derive_seed(seed, "split"))
    if fit_part is None or len(held_out) == 0 or len(fit_part) == 0:
        logger.warning("region-size tuning skipped (degenerate split); using %s", tuple(spec.region_sizes))
        return tuple(spec.region_sizes), {}
    if min(counts) < 5:
        logger.info("region-size tuning with fewer than 5 instances in a class")

    scores: Dict[str, float] = {}
    best, best_score = None, -1.0
    for sizes in candidates:
        sizes = tuple(sizes)
        request = FitRequest(fit_part, spec, derive_seed(seed, "tune", *sizes), _job_table(table, spec), sizes)
        predictor = registry.fit(ModelKind.CNN, request)
        predicted = predictor.predict_labels(held_out)
        score = evaluate(predicted, held_out.labels(), fit_part.label_set).accuracy
        scores["-".join(map(str, sizes))] = score
        logger.info("region sizes %s: validation accuracy %.4f", sizes, score)
        if score > best_score:
            best, best_score = sizes, score
    return best, scores


def resolve_training_labels(ds: Dataset, seed: int) -> Tuple[Dataset, int]:
    """
    Training view of a lexical-sample corpus.

    Instances with several marked targets are dropped; instances with
    several gold senses keep one picked at random.

    Returns:
        (dataset, number of dropped instances)
    """
    rng = SeededRng(seed)
    kept = []
    dropped = 0
    for inst in ds:
        if inst.target_count > 1:
            dropped += 1
            continue
        if len(inst.labels) > 1:
            inst = replace(inst, label=inst.labels[rng.choice_index(len(inst.labels))], labels=())
        elif inst.labels:
            inst = replace(inst, label=inst.labels[0], labels=())
        kept.append(inst)
    return Dataset(kept, target_word=ds.target_word), dropped


def lexical_sample_words(directory: Path) -> Dict[str, Tuple[Path, Optional[Path]]]:
    """``<word>.train.jsonl`` / ``<word>.test.jsonl`` pairs of a lexical-sample directory."""
    pairs: Dict[str, Tuple[Path, Optional[Path]]] = {}
    for path in sorted(Path(directory).glob(f"*{TRAIN_SUFFIX}")):
        word = path.name[:-len(TRAIN_SUFFIX)]
        test = path.with_name(f"{word}{TEST_SUFFIX}")
        pairs[word] = (path, test if test.exists() else None)
    if not pairs:
        raise ConfigurationError(f"no '*{TRAIN_SUFFIX}' files in {directory}")
    return pairs


def _wsd_word(
    word: str,
    train_raw: Dataset,
    test: Dataset,
    spec: ExperimentSpec,
    table: Optional[EmbeddingTable],
    seed: int,
    registry: ModelRegistry
) -> Optional[WordResult]:
    train_ds, dropped = resolve_training_labels(train_raw, derive_seed(seed, "labels"))
    if dropped:
        logger.info("%s: %d training instances with several targets omitted", word, dropped)
    if len(train_ds) == 0:
        logger.warning("%s: no training data, skipped", word)
        return None

    sizes: Optional[Tuple[int, ...]] = None
    scores: Dict[str, float] = {}
    if spec.model is ModelKind.CNN and spec.tune_regions:
        sizes, scores = tune_region_sizes(train_ds, spec.region_candidates, spec, table, seed, registry)

    preds = _Prediction()
    preds.add_gold(test)
    for kind in _kinds(spec):
        request = FitRequest(train_ds, spec, derive_seed(seed, kind), _job_table(table, spec),
                             sizes if kind == ModelKind.CNN.value else None)
        preds.add(kind, registry.fit(kind, request).predict_labels(test))

    outcome = _finish(word, spec.model.value, preds, train_ds.label_set)
    outcome.extras["dropped_multi_target"] = dropped
    outcome.extras["train_size"] = len(train_ds)
    if sizes is not None:
        outcome.extras["region_sizes"] = list(sizes)
        outcome.extras["validation"] = scores
    return outcome


def run_wsd(spec: ExperimentSpec, registry: Optional[ModelRegistry] = None) -> RunResult:
    """Lexical-sample WSD: one classifier per word, any-match scoring."""
    registry = registry or default_registry()
    pairs = lexical_sample_words(_require_path(spec.lexical_sample_dir, "lexical_sample_dir"))
    corpora = {}
    for word, (train_path, test_path) in pairs.items():
        if test_path is None:
            logger.warning("%s: no test file, skipped", word)
            continue
        corpora[word] = (load_dataset(train_path), load_dataset(test_path))

    table = build_table(spec, [ds for pair in corpora.values() for ds in pair])
    if table is not None:
        table.warm(inst.tokens for pair in corpora.values() for ds in pair for inst in ds)

    run = RunResult(mode=spec.mode.value, model=spec.model.value, baselines=_kinds(spec)[1:])
    run.notes.append(ANY_MATCH_NOTE)
    jobs = {}
    for word, (train_raw, test) in corpora.items():
        seed = derive_seed(spec.seed, word)
        run.seeds[word] = seed
        jobs[word] = (lambda w=word, tr=train_raw, te=test, s=seed:
                      _wsd_word(w, tr, te, spec, table, s, registry))
    outcomes = _run_jobs(jobs, spec.workers)
    for word, outcome in outcomes.items():
        if outcome is None:
            run.notes.append(f"{word}: skipped, no training data")
            run.seeds.pop(word, None)
        else:
            run.words[word] = outcome
    run.pooled = _pooled(run.model, run.words)
    return run


def run_tune(spec: ExperimentSpec, registry: Optional[ModelRegistry] = None) -> RunResult:
    """Region-size selection per word on the training corpus, without a test run."""
    registry = registry or default_registry()
    train_ds = training_data(spec)
    table = build_table(spec.with_overrides(model=ModelKind.CNN.value), [train_ds])
    table.warm(inst.tokens for inst in train_ds)

    def job(ds: Dataset, seed: int):
        return lambda: tune_region_sizes(ds, spec.region_candidates, spec, table, seed, registry)

    run = RunResult(mode=spec.mode.value, model=ModelKind.CNN.value)
    jobs = {}
    for word, ds in _group(train_ds, spec).items():
        run.seeds[word] = derive_seed(spec.seed, word)
        jobs[word] = job(ds, run.seeds[word])
    for word, (sizes, scores) in _run_jobs(jobs, spec.workers).items():
        run.tuning[word] = {"region_sizes": list(sizes), "validation": scores}
        run.notes.append(f"{word}: region sizes {'-'.join(map(str, sizes))}")
    return run


# ---------------------------------------------------------------------------
# feature detectors

def run_analyze(spec: ExperimentSpec, registry: Optional[ModelRegistry] = None) -> RunResult:
    """
    Rank the training sentences of every CNN filter and export the report.

    Models come from ``checkpoint`` when set, otherwise they are trained
    here. Exports land in ``<out_dir>/analysis/<word>/``.
    """
    registry = registry or default_registry()
    train_ds = training_data(spec)
    groups = _group(train_ds, spec)
    run = RunResult(mode=spec.mode.value, model=ModelKind.CNN.value)

    if spec.checkpoint is not None:
        models = load_trained(spec, [train_ds])
    else:
        cnn_spec = spec.with_overrides(model=ModelKind.CNN.value, compare_with=[])
        table = build_table(cnn_spec, [train_ds])
        table.warm(inst.tokens for inst in train_ds)
        fitted = fit_words(cnn_spec, train_ds, table, registry)
        models = {word: predictors[ModelKind.CNN.value] for word, (predictors, _) in fitted.items()}
        run.seeds = {word: seed for word, (_, seed) in fitted.items()}

    for word in sorted(models):
        trained = models[word]
        if word not in groups:
            logger.warning("%s: checkpoint has no training sentences to rank", word)
            continue
        if not isinstance(trained, TrainedModel):
            logger.warning("%s: a single sense, no filters to analyze", word)
            continue
        data = groups[word]
        hits = analyze_filters(trained, data, k=spec.top_k)
        stats = distance_stats((hit for found in hits.values() for hit in found), data)
        written = export_report(hits, hit_vectors(trained.table, hits), stats,
                                spec.out_dir / "analysis" / word, dim=trained.table.dim)
        run.analysis[word] = dict(stats.overall.to_json(), files=sorted(p.name for p in written.values()))
        logger.info("%s: %d filters analyzed", word, len(hits))
    return run


# ---------------------------------------------------------------------------
# outputs

def corpus_paths(spec: ExperimentSpec) -> List[Path]:
    paths = [p for p in (spec.fold_source, spec.test_corpus) if p is not None]
    paths.extend(spec.always_in_train)
    if spec.lexical_sample_dir is not None and Path(spec.lexical_sample_dir).is_dir():
        paths.extend(sorted(Path(spec.lexical_sample_dir).glob("*.jsonl")))
    return [p for p in paths if Path(p).is_file()]


def build_manifest(spec: ExperimentSpec, run: RunResult) -> Dict[str, Any]:
    """Spec, seeds and input digests; loading it as a config replays the run."""
    from . import __version__

    embeddings = {}
    if spec.embeddings is not None and Path(spec.embeddings).is_file():
        embeddings[Path(spec.embeddings).as_posix()] = hash_file_content(Path(spec.embeddings))
    checkpoints = {}
    if spec.checkpoint is not None and spec.mode in (RunMode.EVAL, RunMode.ANALYZE) \
            and Path(spec.checkpoint).exists():
        checkpoints = hash_multiple_files(_checkpoint_files(spec).values())
    return {
        "spec": spec.model_dump(mode='json'),
        "seeds": {"run": spec.seed, **run.seeds},
        "corpora": hash_multiple_files(corpus_paths(spec)),
        "embeddings": embeddings,
        "checkpoints": checkpoints,
        "package_version": __version__,
    }


def _write(path: Path, content: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding='utf-8')
    except OSError as e:
        raise ReportWriteError(path, e.strerror or str(e)) from e
    return path


def write_outputs(spec: ExperimentSpec, run: RunResult) -> Dict[str, Path]:
    """
    Write the run's files into ``spec.out_dir``.

    Files:
        results.json, report.txt, manifest.json,
        history/<word>-<job>.csv per trained model and history.csv (the last one)

    Raises:
        ReportWriteError: If a file cannot be written
    """
    out = Path(spec.out_dir)
    document = run.to_json()
    written = {
        "results": _write(out / "results.json", canonical_json(document, indent=2) + "\n"),
        "report": _write(out / "report.txt", render_results_text(dict(document, title=f"sensecnn {run.mode}"))),
        "manifest": _write(out / "manifest.json", canonical_json(build_manifest(spec, run), indent=2) + "\n"),
    }

    last = None
    for word, outcome in run.words.items():
        for job, history in sorted(outcome.histories.items()):
            path = out / "history" / f"{word}-{job}.csv"
            try:
                path.parent.mkdir(parents=True, exist_ok=True)
                history.to_csv(path)
            except OSError as e:
                raise ReportWriteError(path, e.strerror or str(e)) from e
            last = history
    if last is not None:
        try:
            last.to_csv(out / "history.csv")
        except OSError as e:
            raise ReportWriteError(out / "history.csv", e.strerror or str(e)) from e
        written["history"] = out / "history.csv"
    logger.info("results written to %s", out)
    return written


RUNNERS: Dict[RunMode, Callable[..., RunResult]] = {
    RunMode.CV: run_cv,
    RunMode.TRAIN: run_train_eval,
    RunMode.EVAL: lambda spec, registry=None: run_eval(spec),
    RunMode.WSD: run_wsd,
    RunMode.ANALYZE: run_analyze,
    RunMode.TUNE: run_tune,
}


def run_experiment(spec: ExperimentSpec, registry: Optional[ModelRegistry] = None) -> RunResult:
    """
    Run ``spec`` and write its outputs.

    Raises:
        SenseCnnError: Any package error raised on the way
    """
    registry = registry or default_registry()
    for kind in [spec.model, *spec.compare_with]:
        registry.get(kind)
    logger.info("%s run, model %s, seed %d", spec.mode.value, spec.model.value, spec.seed)
    run = RUNNERS[spec.mode](spec, registry)
    if not run.words and not run.tuning and not run.analysis:
        raise SenseCnnError("the run produced no results", {"mode": spec.mode.value})
    write_outputs(spec, run)
    return run
