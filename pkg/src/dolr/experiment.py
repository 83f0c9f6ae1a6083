"""Config-driven experiments: build graph and data, run a variant, compute metrics.

A config is one JSON document::

    {
      "graph": {"family": "path", "n": 5},
      "data": {"mode": "oblivious", "m": 3, "alpha_h": 1.0, "alpha_z": 5.0, "sigma_noise": 0.1},
      "algo": {"variant": "FIF", "beta": 0.75},
      "horizons": [256, 512, 1024, 2048],
      "trials": 1,
      "master_seed": 0,
      "output": "runs/fif"
    }

See the README for every field.  Seeds for the graph, the planted
parameter, the constraints, the data of each horizon and the algorithm
randomness of each trial are all derived from ``master_seed``.
"""

from __future__ import annotations

import copy
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from dolr import metrics
from dolr.adversary import gen_exact, gen_oblivious, make_tracking_adversary
from dolr.export import dump_json, read_series_csv, series_to_csv
from dolr.graphs import Graph, MixingMatrix, build_graph, max_degree_weights
from dolr.projection import Polytope, PolytopeBall
from dolr.protocol import AlgoParams, Issue, RunTrace, Variant, run

ALGO_KEYS = ("beta", "gamma", "kappa", "c", "alpha_h", "eps", "xi", "eta", "pi", "R", "r")

# stream tags for seed derivation
_GRAPH, _PLANT, _CONSTRAINTS, _DATA, _ADVERSARY, _ALGO = range(1, 7)


class ConfigError(ValueError):
    pass


@dataclass
class GraphSpec:
    family: str = "path"
    n: int = 5
    radius: float | None = None
    k: int | None = None


@dataclass
class DataSpec:
    mode: str = "oblivious"  # oblivious | exact | adaptive
    m: int = 3
    alpha_h: float = 1.0
    alpha_z: float = 5.0
    sigma_noise: float = 0.1
    y_star: list[float] | None = None


@dataclass
class AlgoSpec:
    variant: str = "FIF"
    beta: float | None = None
    gamma: float | None = None
    kappa: float | None = None
    c: float | None = None
    alpha_h: float | None = None
    eps: float | None = None
    xi: float | None = None
    eta: float | None = None
    pi: float | None = None
    R: float | None = None
    r: float | None = None
    constraints: dict | None = None  # {"s": 3, "bound": 1.0} or {"vectors": [[...], ...]}


@dataclass
class ExperimentConfig:
    graph: GraphSpec = field(default_factory=GraphSpec)
    data: DataSpec = field(default_factory=DataSpec)
    algo: AlgoSpec = field(default_factory=AlgoSpec)
    horizons: list[int] = field(default_factory=lambda: [256, 512, 1024, 2048])
    trials: int = 1
    master_seed: int = 0
    output: str = "runs/experiment"
    x_init: list[float] | None = None
    write_traces: bool = True
    write_series: bool = True

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        try:
            graph = GraphSpec(**doc.pop("graph", {}))
            data = DataSpec(**doc.pop("data", {}))
            algo = AlgoSpec(**doc.pop("algo", {}))
            return cls(graph=graph, data=data, algo=algo, **doc)
        except TypeError as exc:
            raise ConfigError(f"unknown or missing config field: {exc}") from exc

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def load(cls, path: str | Path, overrides: list[str] = ()) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for item in overrides:
            set_path(doc, *parse_assignment(item))
        return cls.from_dict(doc)


def parse_assignment(item: str) -> tuple[str, Any]:
    """``"algo.beta=0.75"`` -> ("algo.beta", 0.75); values are parsed as JSON when possible."""
    if "=" not in item:
        raise ConfigError(f"expected KEY=VALUE, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def set_path(doc: dict, path: str, value: Any) -> None:
    parts = path.split(".")
    node = doc
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{path!r} does not name a config field")
    node[parts[-1]] = value


def derive_seed(master_seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([master_seed, *keys]).generate_state(1, np.uint64)[0] >> 1)


# building blocks ---------------------------------------------------------------

def build_network(cfg: ExperimentConfig) -> tuple[Graph, MixingMatrix]:
    g = cfg.graph
    extra = {k: v for k, v in (("radius", g.radius), ("k", g.k)) if v is not None}
    graph = build_graph(g.family, g.n, derive_seed(cfg.master_seed, _GRAPH), **extra)
    return graph, max_degree_weights(graph)


def planted_parameter(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.data.y_star is not None:
        return np.asarray(cfg.data.y_star, dtype=float)
    return np.random.default_rng(derive_seed(cfg.master_seed, _PLANT)).standard_normal(cfg.data.m)


def build_constraints(cfg: ExperimentConfig) -> Polytope | None:
    spec = cfg.algo.constraints
    if spec is None:
        return None
    if "vectors" in spec:
        return Polytope(np.asarray(spec["vectors"], dtype=float), spec.get("bound"))
    rng = np.random.default_rng(derive_seed(cfg.master_seed, _CONSTRAINTS))
    return Polytope.random(int(spec["s"]), cfg.data.m, float(spec.get("bound", 1.0)), rng)


def algo_params(cfg: ExperimentConfig, T: int) -> AlgoParams:
    given = {k: getattr(cfg.algo, k) for k in ALGO_KEYS if getattr(cfg.algo, k) is not None}
    variant = Variant(cfg.algo.variant)
    if variant in (Variant.FIF, Variant.BF) and "alpha_h" not in given:
        given["alpha_h"] = cfg.data.alpha_h
    cons = build_constraints(cfg)
    if cons is not None:
        given["constraints"] = cons
    return AlgoParams.derive(variant, T, n=cfg.graph.n, m=cfg.data.m, **given)


def make_data(cfg: ExperimentConfig, T: int, trial: int):
    d = cfg.data
    if d.mode == "adaptive":
        return make_tracking_adversary(d.alpha_h, d.alpha_z, derive_seed(cfg.master_seed, _ADVERSARY, T, trial), d.m)
    seed = derive_seed(cfg.master_seed, _DATA, T)
    if d.mode == "exact":
        return gen_exact(cfg.graph.n, d.m, T, d.alpha_h, planted_parameter(cfg), seed)
    if d.mode == "oblivious":
        return gen_oblivious(cfg.graph.n, d.m, T, d.alpha_h, d.alpha_z, d.sigma_noise, seed,
                             planted_parameter(cfg))
    raise ConfigError(f"unknown data mode {d.mode!r}")


def comparator_set(params: AlgoParams):
    if params.variant is Variant.BF_AA:
        return params.decision_set
    if params.variant.constrained:
        return PolytopeBall(params.constraints, params.R)
    return None


# validate ----------------------------------------------------------------------

def cmd_validate(cfg: ExperimentConfig) -> list[Issue]:
    """Check every parameter hypothesis without running anything."""
    issues: list[Issue] = []

    def err(msg):
        issues.append(Issue("error", msg))

    h = cfg.horizons
    if not h:
        err("horizons list is empty")
    if any(b <= a for a, b in zip(h, h[1:])):
        err(f"horizons must be strictly increasing, got {h}")
    if any(t < 1 for t in h):
        err("every horizon must be >= 1")
    if cfg.trials < 1:
        err(f"trials must be >= 1, got {cfg.trials}")
    if cfg.data.mode not in ("oblivious", "exact", "adaptive"):
        err(f"unknown data mode {cfg.data.mode!r}")
    if cfg.data.mode != "adaptive" and cfg.graph.n < cfg.data.m:
        err(f"rank condition needs n >= m, got n={cfg.graph.n}, m={cfg.data.m}")
    if cfg.data.y_star is not None and len(cfg.data.y_star) != cfg.data.m:
        err(f"y_star has {len(cfg.data.y_star)} entries, m = {cfg.data.m}")
    if cfg.x_init is not None and len(cfg.x_init) != cfg.data.m:
        err(f"x_init has {len(cfg.x_init)} entries, m = {cfg.data.m}")
    try:
        variant = Variant(cfg.algo.variant)
    except ValueError:
        err(f"unknown variant {cfg.algo.variant!r}")
        return issues
    if variant is Variant.BF_AA and cfg.data.mode == "oblivious" and cfg.data.alpha_z is None:
        err("BF_AA needs alpha_z")
    if variant is Variant.ELR and cfg.data.mode != "exact":
        issues.append(Issue("warning", "ELR assumes exactly realizable data"))
    try:
        graph, w = build_network(cfg)
        for problem in w.check(graph):
            err(f"mixing matrix: {problem}")
    except (ValueError, RuntimeError, KeyError) as exc:
        err(f"graph: {exc}")

    seen = set()
    for T in h:
        try:
            params = algo_params(cfg, T)
        except (ValueError, KeyError) as exc:
            if cfg.algo.variant == "BF" and cfg.data.alpha_h >= cfg.graph.n:
                issues.append(Issue("warning", f"alpha_h = {cfg.data.alpha_h} >= n = {cfg.graph.n}: the "
                                               "bandit regret bound assumes alpha_h < n"))
            err(f"T={T}: {exc}")
            break
        for issue in params.check(cfg.graph.n, cfg.data.m):
            key = (issue.level, re.sub(r"T = \d+", "T", issue.message))
            if key not in seen:
                seen.add(key)
                issues.append(Issue(issue.level, f"T={T}: {issue.message}"))
    return issues


def has_errors(issues: list[Issue]) -> bool:
    return any(i.level == "error" for i in issues)


# run -----------------------------------------------------------------------------

@dataclass
class CellResult:
    T: int
    trial: int
    seed: int
    finals: dict[str, list[float]]  # metric -> per-node (or single network) final value


def cell_stem(cfg: ExperimentConfig, T: int, trial: int, seed: int) -> str:
    return f"{cfg.algo.variant}_n{cfg.graph.n}_T{T}_trial{trial}_seed{seed}"


def cell_metrics(trace: RunTrace, params: AlgoParams, data_mode: str) -> dict[str, np.ndarray]:
    """Metric series of one run: regret per node, plus l1 regret / CV / disagreement."""
    data = trace.data
    cset = comparator_set(params)
    if cset is None:
        y_star = metrics.offline_ls_unconstrained(data)
    else:
        y_star = metrics.offline_ls_constrained(data, cset)
    out = {"regret": metrics.regret_ls(trace, y_star),
           "disagreement": metrics.cumulative_disagreement(trace)}
    if data_mode == "exact" and trace.predictors is not None:
        out["l1_regret"] = metrics.regret_l1(trace)
    if params.variant.constrained:
        out["cv"] = metrics.cumulative_violation(trace)
    return out


def run_cell(cfg: ExperimentConfig, T: int, trial: int, out_dir: Path | None) -> CellResult:
    seed = derive_seed(cfg.master_seed, _ALGO, T, trial)
    try:
        _, w = build_network(cfg)
        params = algo_params(cfg, T)
        source = make_data(cfg, T, trial)
        x_init = None if cfg.x_init is None else np.asarray(cfg.x_init, dtype=float)
        trace = run(params, w, source, x_init=x_init, seed=seed)
        series = cell_metrics(trace, params, cfg.data.mode)
    except Exception as exc:
        raise RuntimeError(f"T={T}, trial={trial}: {exc}") from exc
    if out_dir is not None:
        stem = cell_stem(cfg, T, trial, seed)
        if cfg.write_traces:
            (out_dir / f"{stem}.trace.csv").write_text(trace.to_csv())
            dump_json({"params": trace.params, "master_seed": cfg.master_seed, "T": T, "trial": trial,
                       "seed": seed}, out_dir / f"{stem}.params.json")
        for name, s in series.items():
            if not cfg.write_series:
                break
            (out_dir / f"{stem}.{name}.csv").write_text(series_to_csv(s))
    finals = {name: np.atleast_1d(s[-1]).tolist() for name, s in series.items()}
    return CellResult(T, trial, seed, finals)


def summarize(cells: list[CellResult], horizons: list[int]) -> dict:
    """Per metric: trial-mean of the final value (max over nodes), stderr and exponent fit."""
    out: dict[str, dict] = {}
    names = sorted({k for c in cells for k in c.finals})
    for name in names:
        finals, stderrs = [], []
        for T in horizons:
            rows = np.array([c.finals[name] for c in cells if c.T == T])
            stats = metrics.summarize_trials(rows)
            worst = int(np.argmax(stats.mean))
            finals.append(float(stats.mean[worst]))
            stderrs.append(float(stats.stderr[worst]))
        entry: dict[str, Any] = {"horizons": list(horizons), "final": finals, "stderr": stderrs}
        try:
            fit = metrics.fit_exponent(horizons, finals)
            entry.update(slope=fit.slope, r_squared=fit.r_squared, intercept=fit.intercept,
                         fit_horizons=fit.horizons)
        except ValueError:
            pass
        out[name] = entry
    return out


def summary_path(cfg: ExperimentConfig, out_dir: Path) -> Path:
    return out_dir / f"summary_{cfg.algo.variant}_n{cfg.graph.n}_seed{cfg.master_seed}.json"


def cmd_run(cfg: ExperimentConfig, out_dir: str | Path | None = None, threads: int = 1) -> dict:
    """Run every (horizon, trial) cell; write per-cell CSVs and a summary JSON."""
    issues = cmd_validate(cfg)
    if has_errors(issues):
        raise ConfigError("; ".join(str(i) for i in issues if i.level == "error"))
    out = Path(out_dir if out_dir is not None else cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(T, k) for T in cfg.horizons for k in range(cfg.trials)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            cells = list(pool.map(lambda job: run_cell(cfg, job[0], job[1], out), jobs))
    else:
        cells = [run_cell(cfg, T, k, out) for T, k in jobs]
    summary = {"config": cfg.to_dict(), "metrics": summarize(cells, cfg.horizons),
               "warnings": [str(i) for i in issues]}
    dump_json(summary, summary_path(cfg, out))
    return summary


# sweep ---------------------------------------------------------------------------

def get_path(doc: dict, path: str) -> Any:
    node: Any = doc
    for p in path.split("."):
        if not isinstance(node, dict) or p not in node:
            raise ConfigError(f"{path!r} does not name a config field")
        node = node[p]
    return node


def cmd_sweep(cfg: ExperimentConfig, vary: str, values: list, out_dir: str | Path | None = None,
              threads: int = 1) -> list[dict]:
    """Re-run the experiment for each value of one config field, seeds shared."""
    base = cfg.to_dict()
    get_path(base, vary)
    out = Path(out_dir if out_dir is not None else cfg.output)
    table = []
    for value in values:
        doc = copy.deepcopy(base)
        set_path(doc, vary, value)
        sub = ExperimentConfig.from_dict(doc)
        summary = cmd_run(sub, out / f"{vary}={value}", threads)
        for name, entry in summary["metrics"].items():
            table.append({"value": value, "metric": name, "final": entry["final"][-1],
                          "T": entry["horizons"][-1], "slope": entry.get("slope"),
                          "r_squared": entry.get("r_squared")})
    out.mkdir(parents=True, exist_ok=True)
    dump_json({"vary": vary, "values": list(values), "rows": table}, out / f"sweep_{vary}.json")
    return table


# fit -------------------------------------------------------------------------------

_CELL_RE = re.compile(r"^(?P<variant>\w+?)_n(?P<n>\d+)_T(?P<T>\d+)_trial(?P<trial>\d+)_seed(?P<seed>\d+)"
                      r"\.(?P<metric>\w+)\.csv$")


def cmd_fit(out_dir: str | Path, metric: str = "regret") -> dict:
    """Re-fit the exponent of ``metric`` from the per-cell CSVs in ``out_dir``."""
    groups: dict[int, list[np.ndarray]] = {}
    for path in sorted(Path(out_dir).glob(f"*.{metric}.csv")):
        m = _CELL_RE.match(path.name)
        if not m or m["metric"] != metric:
            continue
        series = read_series_csv(path.read_text())
        finals = np.array([series[node][-1] for node in sorted(series)])
        groups.setdefault(int(m["T"]), []).append(finals)
    if not groups:
        raise ConfigError(f"no *.{metric}.csv cell files in {out_dir}")
    horizons = sorted(groups)
    finals = [float(np.mean(groups[T], axis=0).max()) for T in horizons]
    result: dict[str, Any] = {"metric": metric, "horizons": horizons, "final": finals}
    try:
        fit = metrics.fit_exponent(horizons, finals)
        result.update(slope=fit.slope, r_squared=fit.r_squared, fit_horizons=fit.horizons)
    except ValueError as exc:
        result["fit_error"] = str(exc)
    return result
