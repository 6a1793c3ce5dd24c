"""Experiment orchestration: spurious-ratio, K and alpha sweeps, co-dependence
grids, agreement-score reports, and deterministic result files.

A config is a YAML mapping (see ``configs/`` for one example per family).
Every grid point is a pure function of the config and its axis values, so a
re-run reproduces the emitted file byte for byte.
"""

from __future__ import annotations

import concurrent.futures
import csv
import enum
import io
import itertools
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field, replace
from typing import Any, Iterable

import numpy as np
import yaml

from .datagen import (
    CoDependenceSpec,
    ConcatTaskSpec,
    TwoDTaskSpec,
    Variant,
    gen_2d_task,
    gen_codependence_task,
    gen_concat_task,
)
from .hypotheses import (
    AgreementScoreEstimate,
    Dataset,
    Hypothesis,
    TrainingDiverged,
    accuracy,
    agreement,
    boundary_angle,
    estimate_agreement_score,
    linear_from_angle,
    predict_labels,
    worst_group_accuracy,
)
from .losses import DiversificationConfig, LossKind
from .numerics import Model, ModelKind, ModelSpec
from .trainers import HypothesisSet, TrainSchedule, disambiguate, train_sequential, train_simultaneous

log = logging.getLogger(__name__)

RESULTS_VERSION = "divlab-results/1"


class TaskKind(str, enum.Enum):
    TWO_D = "two_d"
    CONCAT = "concat"
    CODEPENDENCE = "codependence"


class Method(str, enum.Enum):
    DBAT = "dbat"
    DIVDIS = "divdis"
    DIVDIS_SEQ = "divdis_seq"

    @property
    def loss_kind(self) -> LossKind:
        return LossKind.DBAT if self is Method.DBAT else LossKind.DIVDIS


METRICS = (
    "best_hypothesis_accuracy",
    "worst_group",
    "per_hypothesis_accuracy",
    "agreement_on_Du",
    "boundary_angles",
    "agreement_score",
)

COLUMNS = (
    "experiment",
    "task",
    "method",
    "model",
    "variant",
    "t",
    "r",
    "K",
    "alpha",
    "seed",
    "hypothesis",
    "status",
    "error",
    "best_index",
    "best_hypothesis_accuracy",
    "worst_group",
    "per_hypothesis_accuracy",
    "agreement_on_Du",
    "boundary_angles",
    "agreement_score",
    "agreement_score_std",
    "h2_accuracy",
    "precondition",
    "underfit",
    "final_loss",
    "wall_time",
)


# -- configuration ----------------------------------------------------------------


@dataclass(frozen=True)
class ModelChoice:
    """Model family without the input width, which comes from the task."""

    kind: ModelKind = ModelKind.LINEAR
    hidden: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    def spec(self, input_dim: int, num_classes: int = 2) -> ModelSpec:
        if self.kind is ModelKind.LINEAR:
            return ModelSpec.linear(input_dim, num_classes)
        return ModelSpec.mlp(input_dim, self.hidden, num_classes)

    @property
    def label(self) -> str:
        return "linear" if self.kind is ModelKind.LINEAR else "mlp" + "x".join(str(h) for h in self.hidden)

    @classmethod
    def parse(cls, raw) -> "ModelChoice":
        if isinstance(raw, ModelChoice):
            return raw
        if isinstance(raw, str):
            return cls(raw)
        return cls(raw.get("kind", "linear"), raw.get("hidden", ()))


@dataclass(frozen=True)
class ASSettings:
    """How agreement scores are estimated: model, schedule and number of pairs."""

    model: ModelChoice = ModelChoice()
    schedule: TrainSchedule = TrainSchedule(epochs=20, learning_rate=0.1, batch_size=32)
    n_pairs: int = 5


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    task: TaskKind
    task_params: dict
    methods: tuple[Method, ...]
    models: tuple[ModelChoice, ...]
    diversification: DiversificationConfig
    schedule: TrainSchedule
    r_values: tuple[float, ...] = (0.0,)
    K_values: tuple[int, ...] = (2,)
    alpha_values: tuple[float | None, ...] = (None,)
    seeds: tuple[int, ...] = (0, 1, 2)
    variants: tuple[Variant, ...] = (Variant.PERP_A, Variant.PERP_B)
    t_values: tuple[float, ...] = ()
    metrics: tuple[str, ...] = ("best_hypothesis_accuracy", "worst_group", "per_hypothesis_accuracy")
    overrides: dict = field(default_factory=dict)
    first_hypothesis: str = "erm"
    trunk_depth: int = 0
    oracle_fraction: float = 0.2
    oracle_criterion: str = "accuracy"
    agreement_score: ASSettings = ASSettings()
    precondition_models: tuple[ModelChoice, ModelChoice] | None = None
    workers: int = 1
    record_wall_time: bool = False

    def __post_init__(self):
        for axis in ("methods", "models", "r_values", "K_values", "alpha_values", "seeds"):
            if not getattr(self, axis):
                raise ValueError(f"sweep axis {axis!r} is empty")
        if self.task is TaskKind.CODEPENDENCE and not (self.variants or self.t_values):
            raise ValueError("co-dependence runs need variants or t values")
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise ValueError(f"unknown metrics {sorted(unknown)}")
        if not 0 < self.oracle_fraction < 1:
            raise ValueError("oracle_fraction must lie in (0, 1)")
        if self.first_hypothesis not in ("erm", "spurious"):
            raise ValueError("first_hypothesis must be 'erm' or 'spurious'")
        if self.oracle_criterion not in ("accuracy", "worst_group"):
            raise ValueError("oracle_criterion must be 'accuracy' or 'worst_group'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def diversification_for(self, method: Method, K: int, alpha: float | None) -> DiversificationConfig:
        base = self.diversification
        over = self.overrides.get(method.value, {}).get("diversification", {})
        a = alpha if alpha is not None else over.get("alpha")
        fields = dict(
            K=K,
            alpha=a,
            lam=over.get("lam", base.lam),
            loss_kind=method.loss_kind,
            prior=over.get("prior", base.prior),
            seq_reduction=over.get("seq_reduction", base.seq_reduction),
        )
        return DiversificationConfig(**fields)

    def schedule_for(self, method: Method, seed: int) -> TrainSchedule:
        over = self.overrides.get(method.value, {}).get("schedule", {})
        return replace(self.schedule, **over, seed=seed)


def _tuple(v, cast=lambda x: x) -> tuple:
    if v is None:
        return ()
    if isinstance(v, (list, tuple)):
        return tuple(cast(x) for x in v)
    return (cast(v),)


def _schedule(raw: dict | None, base: TrainSchedule | None = None) -> TrainSchedule:
    raw = dict(raw or {})
    return replace(base, **raw) if base else TrainSchedule(**raw)


def _optional_float(x):
    return None if x is None else float(x)


def config_from_dict(d: dict) -> ExperimentConfig:
    """Build a config from the documented YAML schema."""
    d = dict(d)
    task = dict(d.get("task") or {})
    kind = TaskKind(task.pop("kind", "two_d"))
    div = dict(d.get("diversification") or {})
    methods = _tuple(d.get("method", d.get("methods", "dbat")), Method)
    alpha = div.pop("alpha", None)
    overrides = {k: dict(v) for k, v in (d.get("overrides") or {}).items()}
    per_method = alpha if isinstance(alpha, dict) else {m.value: alpha for m in methods}
    for m, a in per_method.items():
        if a is not None:
            overrides.setdefault(Method(m).value, {}).setdefault("diversification", {})["alpha"] = float(a)
    div_cfg = DiversificationConfig(
        K=int(div.pop("K", 2)),
        loss_kind=methods[0].loss_kind if methods else LossKind.DBAT,
        **div,
    )
    axes = dict(d.get("axes") or {})
    models = _tuple(d.get("models", d.get("model", "linear")), ModelChoice.parse)
    as_raw = dict(d.get("agreement_score") or {})
    as_settings = ASSettings(
        model=ModelChoice.parse(as_raw.get("model", "linear")),
        schedule=_schedule(as_raw.get("schedule"), ASSettings().schedule),
        n_pairs=int(as_raw.get("n_pairs", 5)),
    )
    pre = d.get("precondition_models")
    return ExperimentConfig(
        name=str(d.get("name", "experiment")),
        task=kind,
        task_params=task,
        methods=methods,
        models=models,
        diversification=div_cfg,
        schedule=_schedule(d.get("schedule")),
        r_values=_tuple(axes.get("r", [0.0]), float),
        K_values=_tuple(axes.get("K", [div_cfg.K]), int),
        alpha_values=_tuple(axes.get("alpha", [None]), _optional_float),
        seeds=_tuple(axes.get("seeds", [0, 1, 2]), int),
        variants=_tuple(axes.get("variants", ["perp_a", "perp_b"]), Variant),
        t_values=_tuple(axes.get("t", []), float),
        metrics=_tuple(d.get("metrics", ExperimentConfig.metrics)),
        overrides=overrides,
        first_hypothesis=str(d.get("first_hypothesis", "erm")),
        trunk_depth=int(d.get("trunk_depth", 0)),
        oracle_fraction=float(d.get("oracle_fraction", 0.2)),
        oracle_criterion=str(d.get("oracle_criterion", "accuracy")),
        agreement_score=as_settings,
        precondition_models=tuple(ModelChoice.parse(m) for m in pre) if pre else None,
        workers=int(d.get("workers", 1)),
        record_wall_time=bool(d.get("record_wall_time", False)),
    )


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    with open(path) as f:
        return config_from_dict(yaml.safe_load(f) or {})


# -- results ----------------------------------------------------------------------


@dataclass
class SweepResult:
    config: ExperimentConfig
    records: list[dict] = field(default_factory=list)
    precondition_ok: bool | None = None

    @property
    def ok(self) -> bool:
        return all(r.get("status") == "ok" for r in self.records)

    @property
    def failures(self) -> list[dict]:
        return [r for r in self.records if r.get("status") != "ok"]

    def column(self, name: str, **where) -> list:
        return [r.get(name) for r in self.records if all(r.get(k) == v for k, v in where.items())]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    return str(v)


def _round6(v):
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return float(f"{f:.6g}") if math.isfinite(f) else str(f)
    if isinstance(v, (list, tuple)):
        return [_round6(x) for x in v]
    if isinstance(v, np.integer):
        return int(v)
    return v


def results_to_text(res: SweepResult, fmt: str = "csv") -> str:
    """Render records in canonical order.

    CSV starts with a ``# divlab-results/1 columns=...`` comment line, then a
    header row with :data:`COLUMNS`. Lists are ``;``-joined. JSON-lines emits
    one object per record with the same keys.
    """
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(f"# {RESULTS_VERSION} columns={len(COLUMNS)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in res.records:
            w.writerow([_fmt(r.get(c)) for c in COLUMNS])
        return buf.getvalue()
    if fmt in ("jsonl", "json-lines", "json"):
        lines = [json.dumps({c: _round6(r.get(c)) for c in COLUMNS}) for r in res.records]
        return "".join(line + "\n" for line in lines)
    raise ValueError(f"unknown results format {fmt!r}")


def emit_results(res: SweepResult, path: str | os.PathLike, fmt: str = "csv"):
    text = results_to_text(res, fmt)
    with open(path, "w", newline="") as f:
        f.write(text)


# -- shared pieces ------------------------------------------------------------------


def split_oracle(D_ood: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded disjoint split of labeled OOD data into (oracle, test)."""
    n = len(D_ood)
    n_oracle = min(max(1, int(round(fraction * n))), n - 1)
    perm = np.random.default_rng(np.random.SeedSequence([int(seed), 7])).permutation(n)
    return D_ood.subset(np.sort(perm[:n_oracle])), D_ood.subset(np.sort(perm[n_oracle:]))


def make_task(cfg: ExperimentConfig, seed: int, r: float = 0.0, variant: Variant | None = None, t: float = 0.0):
    params = dict(cfg.task_params)
    if cfg.task is TaskKind.TWO_D:
        return gen_2d_task(TwoDTaskSpec(**params, r=r, seed=seed))
    if cfg.task is TaskKind.CONCAT:
        return gen_concat_task(ConcatTaskSpec(**params, r_u=r, seed=seed))
    spec = CoDependenceSpec(**params, variant=variant or Variant.PERP_A, t=t, seed=seed)
    return gen_codependence_task(spec)[:3]


def spurious_hypothesis(cfg: ExperimentConfig, spec: ModelSpec, scale: float = 1000.0) -> Hypothesis:
    """A nearly hard linear model for the task's spurious labeling."""
    if spec.kind is not ModelKind.LINEAR:
        raise ValueError("the spurious first hypothesis is a linear model")
    if cfg.task is TaskKind.TWO_D:
        return Hypothesis(model=linear_from_angle(0.0, scale=scale), name="h_sp")
    if cfg.task is TaskKind.CONCAT:
        ts = ConcatTaskSpec(**cfg.task_params)
        n = np.zeros(ts.dim)
        n[ts.dim_semantic :] = scale / np.sqrt(ts.dim_spurious)
        W = np.stack([-0.5 * n, 0.5 * n], axis=1)
        return Hypothesis(model=Model(spec, [(W, np.zeros(2))]), name="h_sp")
    raise ValueError("no spurious labeling model for this task")


def train_method(cfg, method: Method, spec: ModelSpec, D_t, D_u, div: DiversificationConfig, sched) -> HypothesisSet:
    if method is Method.DIVDIS:
        return train_simultaneous(spec, cfg.trunk_depth, D_t, D_u, div, sched)
    h1 = spurious_hypothesis(cfg, spec) if cfg.first_hypothesis == "spurious" else None
    return train_sequential(spec, D_t, D_u, div, sched, h1_override=h1)


def mean_pairwise_agreement(hs: Iterable, D: Dataset) -> float:
    hs = list(hs)
    vals = [agreement(a, b, D) for a, b in itertools.combinations(hs, 2)]
    return float(np.mean(vals))


def _error_tag(e: BaseException) -> str:
    tag = "diverged" if isinstance(e, TrainingDiverged) else type(e).__name__
    return f"{tag}: {e}"


def _run_jobs(fn, jobs: list, workers: int) -> list:
    if workers == 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, *zip(*jobs)))


# -- agreement scores ---------------------------------------------------------------


@dataclass(frozen=True)
class ASReport:
    hypotheses: tuple[AgreementScoreEstimate, ...]
    semantic: AgreementScoreEstimate
    random: AgreementScoreEstimate

    def within_semantic_band(self, width: float = 0.1) -> list[bool]:
        return [abs(h.mean - self.semantic.mean) <= width for h in self.hypotheses]


def measure_as_of_hypotheses(
    hs,
    D_t: Dataset,
    D_u: Dataset,
    D_ood: Dataset,
    n_pairs: int = 5,
    seed: int = 0,
    settings: ASSettings = ASSettings(),
) -> ASReport:
    """AS of each hypothesis's labeling of ``D_t + D_u``, next to two baselines.

    The semantic baseline uses the ground-truth labels; the random baseline
    keeps them on ``D_t`` and draws uniformly random labels on ``D_u``.
    """
    pool = Dataset.concat(D_t, D_u)
    if pool.y_true is None:
        raise ValueError("the semantic baseline needs ground-truth labels on D_t and D_u")
    q = 2
    spec = settings.model.spec(pool.dim, q)
    trainer = (spec, settings.schedule)

    def score(labels, tag):
        return estimate_agreement_score(trainer, labels, pool, D_ood, n_pairs, seed=int(seed) * 1000 + tag)

    per = tuple(score(predict_labels(h, pool), i + 2) for i, h in enumerate(hs))
    rand = pool.y_true.copy()
    rand[len(D_t) :] = np.random.default_rng(np.random.SeedSequence([int(seed), 11])).integers(0, q, len(D_u))
    return ASReport(per, score(pool.y_true, 0), score(rand, 1))


# -- sweeps -------------------------------------------------------------------------


def _base_record(cfg: ExperimentConfig, **axes) -> dict:
    rec = {c: None for c in COLUMNS}
    rec.update(experiment=cfg.name, task=cfg.task.value, status="ok", **axes)
    return rec


def _sweep_point(cfg: ExperimentConfig, method: Method, model: ModelChoice, r: float, K: int, alpha, seed: int) -> dict:
    t0 = time.perf_counter()
    div = None
    rec = _base_record(cfg, method=method.value, model=model.label, r=r, K=K, seed=seed)
    try:
        div = cfg.diversification_for(method, K, alpha)
        rec["alpha"] = float(div.alpha)
        D_t, D_u, D_ood = make_task(cfg, seed, r)
        spec = model.spec(D_t.dim)
        hs = train_method(cfg, method, spec, D_t, D_u, div, cfg.schedule_for(method, seed))
        oracle, test = split_oracle(D_ood, cfg.oracle_fraction, seed)
        best, _ = disambiguate(hs, oracle, cfg.oracle_criterion)
        rec["best_index"] = best
        rec["best_hypothesis_accuracy"] = accuracy(hs[best], test)
        rec["final_loss"] = hs.final_loss
        rec["underfit"] = len(hs.underfit)
        if "worst_group" in cfg.metrics:
            rec["worst_group"] = worst_group_accuracy(hs[best], test)
        if "per_hypothesis_accuracy" in cfg.metrics:
            rec["per_hypothesis_accuracy"] = [accuracy(h, test) for h in hs]
        if "agreement_on_Du" in cfg.metrics:
            rec["agreement_on_Du"] = mean_pairwise_agreement(hs, D_u)
        if "boundary_angles" in cfg.metrics and cfg.task is TaskKind.TWO_D and spec.kind is ModelKind.LINEAR:
            rec["boundary_angles"] = [boundary_angle(h) for h in hs]
        if "agreement_score" in cfg.metrics:
            s = cfg.agreement_score
            est = measure_as_of_hypotheses([hs[best]], D_t, D_u, D_ood, s.n_pairs, seed, s).hypotheses[0]
            rec["agreement_score"], rec["agreement_score_std"] = est.mean, est.std
    except Exception as e:  # noqa: BLE001 - isolate per-record failures
        log.warning("run failed (%s, r=%s, K=%s, seed=%s): %s", method.value, r, K, seed, e)
        rec["status"] = "error"
        rec["error"] = _error_tag(e)
    if cfg.record_wall_time:
        rec["wall_time"] = time.perf_counter() - t0
    return rec


def run_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Train and score every (method, model, r, K, alpha, seed) grid point.

    Records come back axis-major, seed-minor. A failing point is kept as a
    record with ``status="error"`` and the sweep carries on.
    """
    if cfg.task is TaskKind.CODEPENDENCE:
        raise ValueError("use run_codependence for the co-dependence task")
    jobs = [
        (cfg, m, mo, r, K, a, s)
        for m, mo, r, K, a, s in itertools.product(
            cfg.methods, cfg.models, cfg.r_values, cfg.K_values, cfg.alpha_values, cfg.seeds
        )
    ]
    return SweepResult(cfg, _run_jobs(_sweep_point, jobs, cfg.workers))


# -- co-dependence -------------------------------------------------------------------


def check_alignment_precondition(cfg: ExperimentConfig, seed: int) -> tuple[bool, dict]:
    """Empirical alignment check on the PerpA task.

    With models ``(m_A, m_B)`` (default: first and second configured model),
    requires ``AS_{m_A}(h_A) > AS_{m_A}(h_B)`` and ``AS_{m_B}(h_B) > AS_{m_B}(h_A)``.
    """
    m_a, m_b = cfg.precondition_models or cfg.models[:2]
    params = dict(cfg.task_params)
    D_t, D_u, D_ood, hA, hB = gen_codependence_task(CoDependenceSpec(**params, variant=Variant.PERP_A, seed=seed))
    pool = Dataset.concat(D_t, D_u)
    labels = {
        "A": np.concatenate([D_t.y_true, hA]),
        "B": np.concatenate([D_t.y_true, hB]),
    }
    s = cfg.agreement_score
    scores = {}
    for mname, m in (("model_A", m_a), ("model_B", m_b)):
        trainer = (m.spec(pool.dim), s.schedule)
        for lname, y in labels.items():
            scores[f"{mname}/h_{lname}"] = estimate_agreement_score(trainer, y, pool, D_ood, s.n_pairs, seed=seed).mean
    ok = scores["model_A/h_A"] > scores["model_A/h_B"] and scores["model_B/h_B"] > scores["model_B/h_A"]
    return ok, scores


def _codep_point(cfg: ExperimentConfig, model: ModelChoice, variant: Variant, t: float, seed: int) -> dict:
    t0 = time.perf_counter()
    rec = _base_record(cfg, method=Method.DBAT.value, model=model.label, variant=variant.value, t=t, K=2, seed=seed)
    try:
        div = cfg.diversification_for(Method.DBAT, 2, None)
        rec["alpha"] = float(div.alpha)
        D_t, D_u, D_ood = make_task(cfg, seed, variant=variant, t=t)
        spec = model.spec(D_t.dim)
        hs = train_sequential(spec, D_t, D_u, div, cfg.schedule_for(Method.DBAT, seed))
        accs = [accuracy(h, D_ood) for h in hs]
        rec["per_hypothesis_accuracy"] = accs
        rec["h2_accuracy"] = accs[1]
        rec["final_loss"] = hs.final_loss
        rec["underfit"] = len(hs.underfit)
        if "agreement_on_Du" in cfg.metrics:
            rec["agreement_on_Du"] = agreement(hs[0], hs[1], D_u)
    except Exception as e:  # noqa: BLE001
        log.warning("co-dependence run failed (%s, %s, t=%s, seed=%s): %s", model.label, variant.value, t, seed, e)
        rec["status"] = "error"
        rec["error"] = _error_tag(e)
    if cfg.record_wall_time:
        rec["wall_time"] = time.perf_counter() - t0
    return rec


def run_codependence(cfg: ExperimentConfig, check_precondition: bool = True) -> SweepResult:
    """D-BAT with K=2 over (model x variant) and the optional interpolation axis.

    Each record carries the second hypothesis's accuracy on ``D_ood`` and the
    outcome of the alignment precondition for its seed.
    """
    if cfg.task is not TaskKind.CODEPENDENCE:
        raise ValueError("run_codependence needs the co-dependence task")
    if cfg.methods != (Method.DBAT,):
        raise ValueError("the co-dependence experiment runs D-BAT only")
    if cfg.K_values != (2,):
        raise ValueError("the co-dependence experiment uses K = 2")
    points = [(v, 0.0) for v in cfg.variants] + [(Variant.INTERPOLATE, t) for t in cfg.t_values]
    jobs = [(cfg, m, v, t, s) for m in cfg.models for v, t in points for s in cfg.seeds]
    records = _run_jobs(_codep_point, jobs, cfg.workers)
    pre_ok = None
    if check_precondition and (cfg.precondition_models or len(cfg.models) >= 2):
        verdicts = {}
        for s in cfg.seeds:
            try:
                verdicts[s] = "pass" if check_alignment_precondition(cfg, s)[0] else "fail"
            except Exception as e:  # noqa: BLE001
                verdicts[s] = f"error: {e}"
        for rec in records:
            rec["precondition"] = verdicts[rec["seed"]]
        pre_ok = all(v == "pass" for v in verdicts.values())
        if not pre_ok:
            log.warning("alignment precondition check failed: %s", verdicts)
    return SweepResult(cfg, records, pre_ok)


def crossing_point(ts, acc_a, acc_b) -> float | None:
    """First t where ``acc_a - acc_b`` changes sign (linear interpolation), else None."""
    d = np.asarray(acc_a, dtype=float) - np.asarray(acc_b, dtype=float)
    ts = np.asarray(ts, dtype=float)
    for i in range(len(d) - 1):
        if d[i] == 0:
            return float(ts[i])
        if d[i] * d[i + 1] < 0:
            return float(ts[i] + (ts[i + 1] - ts[i]) * d[i] / (d[i] - d[i + 1]))
    return float(ts[-1]) if len(d) and d[-1] == 0 else None


# -- agreement-score experiment ----------------------------------------------------


def _as_point(cfg: ExperimentConfig, method: Method, model: ModelChoice, r: float, K: int, seed: int) -> list[dict]:
    base = dict(method=method.value, model=model.label, r=r, K=K, seed=seed)
    try:
        div = cfg.diversification_for(method, K, None)
        D_t, D_u, D_ood = make_task(cfg, seed, r)
        hs = train_method(cfg, method, model.spec(D_t.dim), D_t, D_u, div, cfg.schedule_for(method, seed))
        s = cfg.agreement_score
        rep = measure_as_of_hypotheses(hs.hyps, D_t, D_u, D_ood, s.n_pairs, seed, s)
    except Exception as e:  # noqa: BLE001
        rec = _base_record(cfg, **base)
        rec.update(status="error", error=_error_tag(e))
        return [rec]
    out = []
    named = [(f"h{i + 1}", est) for i, est in enumerate(rep.hypotheses)]
    for name, est in [("semantic", rep.semantic), ("random", rep.random), *named]:
        rec = _base_record(cfg, hypothesis=name, alpha=float(div.alpha), **base)
        rec["agreement_score"], rec["agreement_score_std"] = est.mean, est.std
        out.append(rec)
    return out


def run_agreement_scores(cfg: ExperimentConfig) -> SweepResult:
    """Per seed: find hypotheses, then report their AS with the two baselines."""
    jobs = [
        (cfg, m, mo, r, K, s)
        for m, mo, r, K, s in itertools.product(cfg.methods, cfg.models, cfg.r_values, cfg.K_values, cfg.seeds)
    ]
    return SweepResult(cfg, [rec for recs in _run_jobs(_as_point, jobs, cfg.workers) for rec in recs])


def summarize(res: SweepResult, value: str, by: tuple[str, ...]) -> dict[tuple, float]:
    """Seed-averaged ``value`` grouped by the ``by`` columns (successful records only)."""
    groups: dict[tuple, list[float]] = {}
    for r in res.records:
        if r.get("status") == "ok" and r.get(value) is not None:
            groups.setdefault(tuple(r[k] for k in by), []).append(float(r[value]))
    return {k: float(np.mean(v)) for k, v in groups.items()}


def describe(cfg: ExperimentConfig) -> dict[str, Any]:
    """Plain summary of the grid, used by the CLI before a run."""
    return {
        "name": cfg.name,
        "task": cfg.task.value,
        "methods": [m.value for m in cfg.methods],
        "models": [m.label for m in cfg.models],
        "points": len(cfg.methods) * len(cfg.models) * len(cfg.r_values) * len(cfg.K_values) * len(cfg.alpha_values) * len(cfg.seeds),
    }
