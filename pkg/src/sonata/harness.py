"""Experiment harness: flat-text configs, Monte-Carlo trials, CSV traces.

Config files are INI-style key/value text with one section per algorithm;
unknown keys and sections are rejected outright so typos fail fast.  Trial t
always uses seed ``base_seed + t`` and every algorithm inside a trial sees
the identical data set and graph sequence, which makes reruns byte-identical
and trial order irrelevant to the aggregates.
"""

from __future__ import annotations

import configparser
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .algorithm import (
    AlgorithmConfig,
    Mixing,
    Preset,
    StepRule,
    StepSizeSchedule,
    TraceRecord,
    WeightRule,
    apply_preset,
    run,
)
from .baselines import BaselineConfig, BaselineKind, run_baseline
from .graphs import GraphModel, GraphSequence, load_custom_sequence
from .problems import (
    ProblemInstance,
    RegKind,
    Regularizer,
    make_distributed_pca,
    make_sparse_regression,
)
from .surrogates import SurrogateKind, SurrogateSpec


class ConfigFileError(ValueError):
    """Configuration file failed to parse or validate."""


TRACE_COLUMNS = [
    "iter",
    "msg_exchanges",
    "alpha",
    "J",
    "J_inf",
    "D",
    "D_inf",
    "M",
    "NMSE",
    "consensus_err",
    "tracking_err",
    "U_mean",
]

AGGREGATE_COLUMNS = ["iter", "msg_exchanges", "mean_log10_J", "mean_log10_D", "mean_nmse"]


@dataclass(frozen=True)
class ProblemConfig:
    kind: str = "sparse_regression"
    agents: int = 10
    dimension: int = 50
    rows_per_agent: int = 20
    noise_sigma: float = math.sqrt(0.1)
    sparsity: float = 0.8
    reg: str = "log"
    theta: float = 2.0
    lam: float = 0.1
    scad_a: float = 3.7
    eps: float = 1e-4
    p: float = -1.0
    data_path: str = ""


@dataclass(frozen=True)
class GraphConfig:
    model: str = "ring_plus_random"
    window: int = 1
    extras: int = 1
    path: str = ""


@dataclass(frozen=True)
class AlgorithmEntry:
    label: str
    kind: str = "sonata"
    preset: str = ""
    surrogate: str = "linearization"
    tau: float = 1.5
    split: int = -1
    inner_tolerance: float = 1e-8
    mixing: str = "atc"
    weights: str = "push_sum"
    step: str = "recursive"
    alpha0: float = 0.5
    beta: float = 1.0
    mu: float = 0.01


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    iterations: int = 1000
    trials: int = 1
    base_seed: int = 0
    log_every: int = 1
    output: str = "results"
    workers: int = 1
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    algorithms: tuple[AlgorithmEntry, ...] = (AlgorithmEntry(label="sonata"),)

    def __post_init__(self):
        if self.trials < 1 or self.iterations < 0:
            raise ConfigFileError("trials must be >= 1 and iterations >= 0")
        labels = [a.label for a in self.algorithms]
        if len(set(labels)) != len(labels):
            raise ConfigFileError("algorithm labels must be unique")


def _coerce(section: str, key: str, raw: str, default):
    try:
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return type(default)(raw)
    except ValueError as exc:
        raise ConfigFileError(f"[{section}] {key}: cannot parse {raw!r}") from exc


def _fill(section_name: str, items: dict, defaults) -> dict:
    known = {f: getattr(defaults, f) for f in defaults.__dataclass_fields__}
    out = {}
    for key, raw in items.items():
        if key not in known:
            raise ConfigFileError(f"unknown key {key!r} in section [{section_name}]")
        out[key] = _coerce(section_name, key, raw, known[key])
    return out


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigFileError(f"config parse error: {exc}") from exc
    exp_kwargs: dict = {}
    problem = ProblemConfig()
    graph = GraphConfig()
    algorithms: list[AlgorithmEntry] = []
    for section in parser.sections():
        items = dict(parser.items(section))
        if section == "experiment":
            scalar_defaults = ExperimentConfig()
            allowed = {
                k: getattr(scalar_defaults, k)
                for k in ("name", "iterations", "trials", "base_seed", "log_every", "output", "workers")
            }
            for key, raw in items.items():
                if key not in allowed:
                    raise ConfigFileError(f"unknown key {key!r} in section [experiment]")
                exp_kwargs[key] = _coerce(section, key, raw, allowed[key])
        elif section == "problem":
            problem = ProblemConfig(**_fill(section, items, ProblemConfig()))
        elif section == "graph":
            graph = GraphConfig(**_fill(section, items, GraphConfig()))
        elif section.startswith("algorithm"):
            label = section[len("algorithm"):].strip() or "sonata"
            entry = AlgorithmEntry(label=label, **_fill(section, items, AlgorithmEntry(label=label)))
            algorithms.append(entry)
        else:
            raise ConfigFileError(f"unknown section [{section}]")
    if not algorithms:
        algorithms = [AlgorithmEntry(label="sonata")]
    return ExperimentConfig(
        problem=problem, graph=graph, algorithms=tuple(algorithms), **exp_kwargs
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigFileError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Write a config back to its flat-text form; parses to an equal config."""
    parser = configparser.ConfigParser(interpolation=None)
    parser["experiment"] = {
        "name": cfg.name,
        "iterations": str(cfg.iterations),
        "trials": str(cfg.trials),
        "base_seed": str(cfg.base_seed),
        "log_every": str(cfg.log_every),
        "output": cfg.output,
        "workers": str(cfg.workers),
    }
    parser["problem"] = {k: str(getattr(cfg.problem, k)) for k in ProblemConfig.__dataclass_fields__}
    parser["graph"] = {k: str(getattr(cfg.graph, k)) for k in GraphConfig.__dataclass_fields__}
    for a in cfg.algorithms:
        fields = {k: str(getattr(a, k)) for k in AlgorithmEntry.__dataclass_fields__ if k != "label"}
        parser[f"algorithm {a.label}"] = fields
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def make_problem(cfg: ProblemConfig, seed: int) -> ProblemInstance:
    reg = Regularizer(
        kind=RegKind(cfg.reg),
        lam=cfg.lam,
        theta=cfg.theta,
        scad_a=cfg.scad_a,
        eps=cfg.eps,
        p=cfg.p,
    )
    if cfg.kind == "sparse_regression":
        return make_sparse_regression(
            cfg.agents,
            cfg.dimension,
            cfg.rows_per_agent,
            cfg.noise_sigma,
            cfg.sparsity,
            seed,
            reg,
        )
    if cfg.kind == "dpca_synthetic":
        return make_distributed_pca(cfg.agents, cfg.rows_per_agent, cfg.dimension, seed)
    if cfg.kind == "dpca_file":
        return make_distributed_pca(
            cfg.agents, cfg.rows_per_agent, cfg.dimension, seed,
            mode="from_file", path=cfg.data_path,
        )
    raise ConfigFileError(f"unknown problem kind {cfg.kind!r}")


def make_sequence(cfg: GraphConfig, agents: int, seed: int) -> GraphSequence:
    if cfg.model == "custom":
        return load_custom_sequence(cfg.path, agents, cfg.window)
    try:
        model = GraphModel(cfg.model)
    except ValueError as exc:
        raise ConfigFileError(f"unknown graph model {cfg.model!r}") from exc
    return GraphSequence(model, agents, seed=seed, window_b=cfg.window, extras=cfg.extras)


def _make_schedule(entry: AlgorithmEntry) -> StepSizeSchedule:
    rule = {
        "constant": StepRule.CONSTANT,
        "power": StepRule.DIMINISHING_POWER,
        "recursive": StepRule.DIMINISHING_RECURSIVE,
    }.get(entry.step)
    if rule is None:
        raise ConfigFileError(f"unknown step rule {entry.step!r}")
    return StepSizeSchedule(rule=rule, alpha0=entry.alpha0, beta=entry.beta, mu=entry.mu)


def make_algorithm(entry: AlgorithmEntry, num_agents: int):
    """Translate one config section into a runnable algorithm object."""
    schedule = _make_schedule(entry)
    if entry.kind in (BaselineKind.SUBGRADIENT_PUSH, BaselineKind.GRADIENT_PROJECTION):
        return BaselineConfig(kind=entry.kind, schedule=schedule, name=entry.label)
    if entry.kind != "sonata":
        raise ConfigFileError(f"unknown algorithm kind {entry.kind!r}")
    if entry.preset:
        try:
            preset = Preset(entry.preset)
        except ValueError as exc:
            raise ConfigFileError(f"unknown preset {entry.preset!r}") from exc
        cfg = apply_preset(preset, num_agents, schedule)
        return replace(cfg, name=entry.label)
    try:
        kind = SurrogateKind(entry.surrogate)
    except ValueError as exc:
        raise ConfigFileError(f"unknown surrogate {entry.surrogate!r}") from exc
    surrogate = SurrogateSpec(
        kind=kind,
        tau=entry.tau,
        split=None if entry.split < 0 else entry.split,
        inner_tolerance=entry.inner_tolerance,
    )
    try:
        mixing = Mixing(entry.mixing)
        weights = WeightRule(entry.weights)
    except ValueError as exc:
        raise ConfigFileError(f"bad mixing/weights in [{entry.label}]: {exc}") from exc
    return AlgorithmConfig(
        surrogate=surrogate,
        schedule=schedule,
        mixing=mixing,
        weights=weights,
        name=entry.label,
    )


def _fmt(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def records_to_csv(records: list[TraceRecord]) -> str:
    lines = [",".join(TRACE_COLUMNS)]
    for r in records:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    r.iter,
                    r.msg_exchanges,
                    r.alpha,
                    r.J,
                    r.J_inf,
                    r.D,
                    r.D_inf,
                    r.M,
                    r.nmse,
                    r.consensus_err,
                    r.tracking_err,
                    r.u_mean,
                )
            )
        )
    return "\n".join(lines) + "\n"


def run_trial(cfg: ExperimentConfig, trial: int) -> dict[str, list[TraceRecord]]:
    """Run every configured algorithm on trial ``trial``'s shared instance."""
    seed = cfg.base_seed + trial
    problem = make_problem(cfg.problem, seed)
    out: dict[str, list[TraceRecord]] = {}
    for entry in cfg.algorithms:
        seq = make_sequence(cfg.graph, cfg.problem.agents, seed)
        algo = make_algorithm(entry, cfg.problem.agents)
        if isinstance(algo, BaselineConfig):
            out[entry.label] = run_baseline(
                problem, algo, seq, cfg.iterations, seed=seed, log_every=cfg.log_every
            )
        else:
            out[entry.label] = run(
                problem, algo, seq, cfg.iterations, seed=seed, log_every=cfg.log_every
            )
    return out


def aggregate(traces: list[list[TraceRecord]]) -> list[dict]:
    """Mean log10(J), log10(D) and NMSE across trials, aligned by iteration."""
    n_rows = min(len(t) for t in traces)
    rows = []
    for k in range(n_rows):
        recs = [t[k] for t in traces]
        log_j = float(np.mean([math.log10(max(r.J, 1e-300)) for r in recs]))
        log_d = float(np.mean([math.log10(max(r.D, 1e-300)) for r in recs]))
        nmses = [r.nmse for r in recs if r.nmse is not None]
        rows.append(
            {
                "iter": recs[0].iter,
                "msg_exchanges": float(np.mean([r.msg_exchanges for r in recs])),
                "mean_log10_J": log_j,
                "mean_log10_D": log_d,
                "mean_nmse": float(np.mean(nmses)) if nmses else None,
            }
        )
    return rows


def aggregate_to_csv(rows: list[dict]) -> str:
    lines = [",".join(AGGREGATE_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in AGGREGATE_COLUMNS))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ExperimentSummary:
    name: str
    out_dir: Path
    trace_paths: dict[str, list[Path]]
    aggregate_paths: dict[str, Path]
    aggregates: dict[str, list[dict]]


def run_experiment(cfg: ExperimentConfig, quiet: bool = True) -> ExperimentSummary:
    """Run all trials, write per-trial traces and per-algorithm aggregates."""
    out_dir = Path(cfg.output) / cfg.name
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run_trial, [cfg] * cfg.trials, range(cfg.trials)))
    else:
        results = [run_trial(cfg, t) for t in range(cfg.trials)]
    trace_paths: dict[str, list[Path]] = {}
    aggregate_paths: dict[str, Path] = {}
    aggregates: dict[str, list[dict]] = {}
    for entry in cfg.algorithms:
        label = entry.label
        algo_dir = out_dir / label
        algo_dir.mkdir(exist_ok=True)
        paths = []
        for t, res in enumerate(results):
            p = algo_dir / f"trial_{t:03d}.csv"
            p.write_text(records_to_csv(res[label]))
            paths.append(p)
        trace_paths[label] = paths
        rows = aggregate([res[label] for res in results])
        agg_path = out_dir / f"{label}_aggregate.csv"
        agg_path.write_text(aggregate_to_csv(rows))
        aggregate_paths[label] = agg_path
        aggregates[label] = rows
        if not quiet:
            print(f"{label}: {len(paths)} trials -> {agg_path}")
    return ExperimentSummary(
        name=cfg.name,
        out_dir=out_dir,
        trace_paths=trace_paths,
        aggregate_paths=aggregate_paths,
        aggregates=aggregates,
    )
