"""Declarative experiment runner.

A config is a YAML document::

    schema: 1
    experiment: THEOREM1
    seeds: [0, 1, 2]          # or {start: 0, count: 20}
    output_path: runs/theorem1
    grid:
      n: [2000]
      d: [16]
    thresholds:
      pass_rate: 0.95

Every grid key is a non-empty list; omitted keys take the experiment's
defaults. Each (grid point, seed) pair yields one CSV row.
"""
from __future__ import annotations

import csv
import datetime as _dt
import io
import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from threadpoolctl import threadpool_limits

from .cluster import Method, PreScoreConfig, lloyd_cluster
from .errors import ConfigError
from .exact import exact_attention, exact_leverage_scores
from .hyper import HyperConfig, PreScoredConfig, hyper_attention, prescored_hyper_attention, uniform_sample_attention
from .matrix import gaussian_matrix, make_rng, normalize_rows
from .metrics import attention_error, heavy_coverage, recovery_score
from .planted import (PlantedConfig, PlantedInstance, generate_counterexample, generate_planted, group_size,
                      partition_cost, planted_cost_gap, planted_queries)
from .prescore import prescore

SCHEMA_VERSION = 1

_PLANTED = {"n": [2000], "d": [16], "epsilon": [0.1], "c_S": [0.1], "c_N": [0.1]}

GRID_DEFAULTS: dict[str, dict[str, list]] = {
    "THEOREM1": dict(_PLANTED),
    "THEOREM2": {**_PLANTED, "restarts": [10]},
    "COROLLARY1": {"n": [2000], "d": [16], "c_S": [0.1], "c_N": [0.1], "restarts": [10]},
    "CLAIM1": {**_PLANTED, "p": [1.0, 1.5, 3.0], "restarts": [10]},
    "COUNTEREXAMPLE": {"n": [1000], "d": [8], "big_norm": [100.0]},
    "COVERAGE": {"n": [64], "d": [4], "epsilon": [0.25], "c_S": [0.1], "c_N": [0.1], "query_scale": [4.0],
                 "method": ["KMEANS"], "s": [8, 16, 32], "eps_heavy": [0.01, 0.1, 0.3]},
    "SPEED": {"n": [1024, 2048, 4096, 8192, 16384], "d": [16], "epsilon": [0.1], "s": [256],
              "block_size": [64], "lsh_bits": [8], "method": ["KMEANS"]},
    "APPROX_ERROR": {"n": [512], "d": [8], "epsilon": [0.1], "c_S": [0.1], "c_N": [0.1], "query_scale": [4.0],
                     "block_size": [64], "residual_samples": [64], "lsh_bits": [8], "s": [128],
                     "method": ["KMEANS"]},
}

THRESHOLD_DEFAULTS: dict[str, dict] = {
    "THEOREM1": {"ratio": 10.0, "pass_rate": 0.95},
    "THEOREM2": {"pass_rate": 0.95, "concentration_factor": 5.0},
    "COROLLARY1": {"pass_rate": 0.95},
    "CLAIM1": {"pass_rate": 0.9},
    "COUNTEREXAMPLE": {},
    "COVERAGE": {"win_rate": 0.9, "win_eps_heavy": [0.1], "random_subsets": 100},
    "SPEED": {"max_prescored_slope": 1.5, "min_exact_slope": 1.8, "min_speedup": 2.0, "speedup_n": 8192,
              "repeats": 5},
    "APPROX_ERROR": {},
}

_STR_KEYS = {"method"}
_INT_KEYS = {"n", "d", "restarts", "s", "block_size", "lsh_bits", "residual_samples"}


@dataclass
class ExperimentConfig:
    experiment: str
    grid: dict[str, list]
    seeds: list[int]
    output_path: str = "results"
    thresholds: dict = field(default_factory=dict)
    schema: int = SCHEMA_VERSION

    def points(self) -> list[dict]:
        keys = list(self.grid)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.grid[k] for k in keys))]


def _coerce(key: str, value, where: str):
    if key in _STR_KEYS:
        try:
            return Method(str(value).upper()).value
        except ValueError:
            raise ConfigError(f"unknown method {value!r}", where) from None
    value = _number(value, where)
    if key in _INT_KEYS:
        if float(value) != int(value):
            raise ConfigError(f"expected an integer, got {value!r}", where)
        return int(value)
    return float(value)


def _number(value, where: str):
    # YAML 1.1 reads exponents without a dot (1e9) as strings
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"expected a finite number, got {value!r}", where)
    return value


def _parse_seeds(raw) -> list[int]:
    if isinstance(raw, dict):
        unknown = set(raw) - {"start", "count"}
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", "seeds")
        start, count = raw.get("start", 0), raw.get("count")
        if not isinstance(count, int) or not isinstance(start, int):
            raise ConfigError("start and count must be integers", "seeds")
        raw = list(range(start, start + count))
    if not isinstance(raw, list):
        raise ConfigError("must be a list of integers or {start, count}", "seeds")
    if not raw:
        raise ConfigError("seed list is empty", "seeds")
    seeds = []
    for i, s in enumerate(raw):
        if isinstance(s, bool) or not isinstance(s, int) or s < 0:
            raise ConfigError(f"seed {s!r} is not a non-negative integer", f"seeds[{i}]")
        seeds.append(s)
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct", "seeds")
    return seeds


def config_from_dict(doc: dict, experiment: str | None = None) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a mapping")
    unknown = set(doc) - {"schema", "experiment", "seeds", "output_path", "grid", "thresholds"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    schema = doc.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema {schema!r}; expected {SCHEMA_VERSION}", "schema")
    name = doc.get("experiment", experiment)
    if name is None:
        raise ConfigError("missing experiment name", "experiment")
    name = str(name).upper()
    if name not in GRID_DEFAULTS:
        raise ConfigError(f"unknown experiment {name!r}", "experiment")
    if experiment is not None and experiment.upper() != name:
        raise ConfigError(f"config is for {name}, not {experiment.upper()}", "experiment")
    if "seeds" not in doc:
        raise ConfigError("missing seed list", "seeds")
    seeds = _parse_seeds(doc["seeds"])

    raw_grid = doc.get("grid") or {}
    if not isinstance(raw_grid, dict):
        raise ConfigError("must be a mapping of lists", "grid")
    defaults = GRID_DEFAULTS[name]
    grid: dict[str, list] = {}
    for key, default in defaults.items():
        values = raw_grid.get(key, default)
        if not isinstance(values, list):
            values = [values]
        if not values:
            raise ConfigError("grid list is empty", f"grid.{key}")
        grid[key] = [_coerce(key, v, f"grid.{key}[{i}]") for i, v in enumerate(values)]
    extra = set(raw_grid) - set(defaults)
    if extra:
        raise ConfigError(f"not a parameter of {name}", f"grid.{sorted(extra)[0]}")

    thresholds = dict(THRESHOLD_DEFAULTS[name])
    given = doc.get("thresholds") or {}
    if not isinstance(given, dict):
        raise ConfigError("must be a mapping", "thresholds")
    for key, value in given.items():
        if key not in thresholds:
            raise ConfigError(f"not a threshold of {name}", f"thresholds.{key}")
        default = thresholds[key]
        if isinstance(default, list):
            if not isinstance(value, list) or not value:
                raise ConfigError("expected a non-empty list", f"thresholds.{key}")
            value = [float(_number(v, f"thresholds.{key}[{i}]")) for i, v in enumerate(value)]
        else:
            value = _number(value, f"thresholds.{key}")
            if isinstance(default, int) and float(value) != int(value):
                raise ConfigError(f"expected an integer, got {value!r}", f"thresholds.{key}")
            value = type(default)(value)
        thresholds[key] = value
    cfg = ExperimentConfig(experiment=name, grid=grid, seeds=seeds,
                           output_path=str(doc.get("output_path", f"results/{name.lower()}")),
                           thresholds=thresholds, schema=schema)
    _validate_points(cfg)
    return cfg


def _validate_points(cfg: ExperimentConfig) -> None:
    for point in cfg.points():
        try:
            if "epsilon" in point and "c_S" in point:
                PlantedConfig(point["n"], point["d"], point["epsilon"], point["c_S"], point["c_N"])
            elif cfg.experiment == "COROLLARY1":
                PlantedConfig(point["n"], point["d"], 1.0, point["c_S"], point["c_N"])
            elif cfg.experiment == "SPEED":
                PlantedConfig(point["n"], point["d"], point["epsilon"])
                if point["s"] > point["n"]:
                    raise ValueError(f"s={point['s']} exceeds n={point['n']}")
            elif cfg.experiment == "COUNTEREXAMPLE":
                if point["d"] % 2 or point["n"] <= point["d"] // 2 or point["big_norm"] <= 1:
                    raise ValueError("need even d, n > d/2 and big_norm > 1")
            if point.get("s", 1) > point.get("n", math.inf):
                raise ValueError(f"s={point['s']} exceeds n={point['n']}")
        except ValueError as exc:
            raise ConfigError(str(exc), "grid") from None


def load_config(path, experiment: str | None = None) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else None
        raise ConfigError(f"YAML parse error: {getattr(exc, 'problem', exc)}", where) from None
    return config_from_dict(doc, experiment)


def config_for_row(cfg: ExperimentConfig, row: dict) -> ExperimentConfig:
    """Single-point config reproducing one CSV row (used for round-trip checks)."""
    doc = {"schema": cfg.schema, "experiment": cfg.experiment, "seeds": [int(row["seed"])],
           "output_path": cfg.output_path, "thresholds": cfg.thresholds,
           "grid": {key: [_parse_cell(row[key])] for key in cfg.grid}}
    return config_from_dict(doc)


def _parse_cell(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


# --- per-experiment trials ---------------------------------------------------

def _planted(point, seed, epsilon=None) -> PlantedInstance:
    cfg = PlantedConfig(n=point["n"], d=point["d"], epsilon=point.get("epsilon", 1.0) if epsilon is None else epsilon,
                        c_S=point.get("c_S", 0.1), c_N=point.get("c_N", 0.1), seed=seed)
    return generate_planted(cfg, make_rng(seed))


def _theorem1(point, seed, th):
    inst = _planted(point, seed)
    h = exact_leverage_scores(inst.matrix)
    lo = float(h[inst.signal_rows].min())
    hi = float(h[inst.noise_rows].max())
    ratio = lo / hi
    return {"min_signal_leverage": lo, "max_noise_leverage": hi, "ratio": ratio,
            "separated": ratio > th["ratio"]}


def _recovered_centroid_errors(inst: PlantedInstance, cl) -> tuple[float, float]:
    """Worst ``||mu_j - v_j||`` over signal groups and ``||mu_0||``."""
    worst = 0.0
    mu0 = 0.0
    for label in np.unique(inst.labels):
        members = inst.labels == label
        cluster_id = np.bincount(cl.assignment[members]).argmax()
        mu = cl.centroids[cluster_id]
        if label == 0:
            mu0 = float(np.linalg.norm(mu))
        else:
            worst = max(worst, float(np.linalg.norm(mu - inst.basis[label - 1])))
    return worst, mu0


def _theorem2(point, seed, th):
    inst = _planted(point, seed)
    d = point["d"]
    cl = lloyd_cluster(inst.matrix, PreScoreConfig(method=Method.KMEANS, k=d + 1, s=1,
                                                   restarts=point["restarts"], seed=seed))
    ari = recovery_score(inst.labels, cl.assignment)
    pc = inst.config
    m = pc.m
    sig_bound = th["concentration_factor"] * pc.sigma_signal * math.sqrt(d / m)
    noise_bound = th["concentration_factor"] * pc.sigma_noise * math.sqrt(d / (pc.n - d * m))
    sig_err, mu0 = _recovered_centroid_errors(inst, cl)
    recovered = ari == 1.0
    concentrated = recovered and sig_err <= sig_bound and mu0 <= noise_bound
    return {"ari": ari, "objective": cl.objective, "signal_centroid_error": sig_err,
            "signal_bound": sig_bound, "noise_centroid_norm": mu0, "noise_bound": noise_bound,
            "recovered": recovered, "concentrated": concentrated}


def _corollary1(point, seed, th):
    inst = _planted(point, seed, epsilon=1.0)
    d = point["d"]
    cl = lloyd_cluster(inst.matrix, PreScoreConfig(method=Method.KMEANS, k=d + 1, s=1,
                                                   restarts=point["restarts"], seed=seed))
    sizes = np.bincount(cl.assignment, minlength=d + 1)
    singletons = all(sizes[cl.assignment[i]] == 1 for i in inst.signal_rows)
    noise_ids = np.unique(cl.assignment[inst.noise_rows])
    pooled = noise_ids.size == 1 and sizes[noise_ids[0]] == inst.noise_rows.size
    return {"ari": recovery_score(inst.labels, cl.assignment), "signal_singletons": singletons,
            "noise_pooled": pooled, "recovered": singletons and pooled}


def _claim1(point, seed, th):
    inst = _planted(point, seed)
    d = point["d"]
    base = dict(k=d + 1, s=1, restarts=point["restarts"], seed=seed)
    cl = lloyd_cluster(inst.matrix, PreScoreConfig(method=Method.LP_KMEANS, p=point["p"], **base))
    row = {"ari": recovery_score(inst.labels, cl.assignment), "objective": cl.objective}
    row["recovered"] = row["ari"] == 1.0
    reference = {2.0: Method.KMEANS, 1.0: Method.KMEDIAN}.get(point["p"])
    if reference is None:
        row["reference_method"] = ""
        row["matches_reference"] = ""
    else:
        ref = lloyd_cluster(inst.matrix, PreScoreConfig(method=reference, **base))
        row["reference_method"] = reference.value
        row["matches_reference"] = bool(np.array_equal(ref.assignment, cl.assignment))
    return row


def isolates_signal(inst: PlantedInstance, assignment) -> bool:
    """True when every signal row is alone in its cluster."""
    assignment = np.asarray(assignment)
    sizes = np.bincount(assignment)
    return bool(all(sizes[assignment[i]] == 1 for i in inst.signal_rows))


def counterexample_trial(n: int, d: int, big_norm: float, seed: int) -> dict:
    inst = generate_counterexample(n, d, big_norm)
    half = d // 2
    raw = lloyd_cluster(inst.matrix, PreScoreConfig(method=Method.KMEANS, k=half, s=1, seed=seed))
    # S rows in their own clusters; with only k = d/2 clusters the S^c block must join one of them
    isolating = np.full(n, half - 1)
    isolating[:half] = np.arange(half)
    gap_isolating = planted_cost_gap(inst, isolating)
    gap_returned = planted_cost_gap(inst, raw)
    normed = PlantedInstance(matrix=normalize_rows(inst.matrix), labels=inst.labels, basis=inst.basis,
                             config=inst.config)
    fixed = lloyd_cluster(normed.matrix, PreScoreConfig(method=Method.KMEANS, k=d + 1, s=1, seed=seed))
    return {"unnormalized_isolates_S": isolates_signal(inst, raw.assignment),
            "returned_cost": partition_cost(inst.matrix, raw.assignment),
            "isolating_cost": partition_cost(inst.matrix, isolating),
            "isolating_minus_returned": gap_isolating - gap_returned,
            "normalized_isolates_S": isolates_signal(normed, fixed.assignment)}


def _counterexample(point, seed, th):
    row = counterexample_trial(point["n"], point["d"], point["big_norm"], seed)
    row["passed"] = (not row["unnormalized_isolates_S"] and row["isolating_minus_returned"] > 0
                     and row["normalized_isolates_S"])
    return row


def _coverage(point, seed, th):
    inst = _planted(point, seed)
    q = planted_queries(inst, point["query_scale"])
    k = inst.matrix
    d = point["d"]
    sel = prescore(k, PreScoreConfig(method=Method(point["method"]), k=d + 1, s=point["s"], seed=seed),
                   make_rng(seed))
    rep = heavy_coverage(q, k, sel, point["eps_heavy"])
    rng = make_rng(seed, 1)
    rand = [heavy_coverage(q, k, rng.choice(k.shape[0], point["s"], replace=False), point["eps_heavy"]).percentage
            for _ in range(int(th["random_subsets"]))]
    med = float(np.median(rand))
    row = rep.csv_row(point["method"], seed)
    # the report's epsilon is the heaviness threshold, already in the grid as eps_heavy
    for key in ("epsilon", "method", "seed"):
        row.pop(key)
    row.update({"random_median_percentage": med, "beats_random": rep.percentage > med})
    return row


def _approx_error(point, seed, th):
    inst = _planted(point, seed)
    q = planted_queries(inst, point["query_scale"])
    k = inst.matrix
    v = gaussian_matrix(make_rng(seed, 1), k.shape[0], point["d"])
    exact = exact_attention(q, k, v)
    hcfg = HyperConfig(lsh_bits=point["lsh_bits"], block_size=point["block_size"],
                       residual_samples=point["residual_samples"], seed=seed)
    hyper = hyper_attention(q, k, v, hcfg, make_rng(seed, 2))
    pcfg = PreScoredConfig(prescore=PreScoreConfig(method=Method(point["method"]), k=point["d"] + 1, s=point["s"],
                                                   seed=seed), hyper=hcfg)
    pre = prescored_hyper_attention(q, k, v, pcfg, make_rng(seed, 2))
    uni = uniform_sample_attention(q, k, v, min(k.shape[0], point["block_size"] + point["residual_samples"]),
                                   make_rng(seed, 3))
    return {"hyper_error": attention_error(hyper, exact), "prescored_error": attention_error(pre, exact),
            "uniform_error": attention_error(uni, exact), "prescored_fallback": pre.fallback}


def _speed_inputs(point, seed):
    rng = make_rng(seed, 1)
    n, d = point["n"], point["d"]
    inst = generate_planted(PlantedConfig(n=n, d=d, epsilon=point["epsilon"], seed=seed), make_rng(seed))
    return gaussian_matrix(rng, n, d), inst.matrix, gaussian_matrix(rng, n, d)


def _speed_cfg(point, seed):
    return PreScoredConfig(prescore=PreScoreConfig(method=Method(point["method"]), k=point["d"] + 1, s=point["s"],
                                                   seed=seed),
                           hyper=HyperConfig(lsh_bits=point["lsh_bits"], block_size=point["block_size"], seed=seed))


def _speed(point, seed, th):
    q, k, v = _speed_inputs(point, seed)
    res = prescored_hyper_attention(q, k, v, _speed_cfg(point, seed), make_rng(seed, 2))
    return {"keys_retained": res.keys_retained, "blocks_evaluated": res.blocks_evaluated}


def time_call(fn, repeats: int) -> float:
    """Median wall time of ``repeats`` calls after one warm-up (monotonic clock)."""
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def loglog_slope(ns, times) -> float:
    return float(np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(times, float)), 1)[0])


def speed_timings(point, seed, repeats: int) -> dict:
    q, k, v = _speed_inputs(point, seed)
    cfg = _speed_cfg(point, seed)
    t_pre = time_call(lambda: prescored_hyper_attention(q, k, v, cfg, make_rng(seed, 2)), repeats)
    t_exact = time_call(lambda: exact_attention(q, k, v), repeats)
    return {"prescored_seconds": t_pre, "exact_seconds": t_exact}


TRIALS = {"THEOREM1": _theorem1, "THEOREM2": _theorem2, "COROLLARY1": _corollary1, "CLAIM1": _claim1,
          "COUNTEREXAMPLE": _counterexample, "COVERAGE": _coverage, "SPEED": _speed,
          "APPROX_ERROR": _approx_error}


# --- summaries -----------------------------------------------------------------

def _rate(rows, key):
    vals = [bool(r[key]) for r in rows]
    return sum(vals) / len(vals) if vals else 0.0


def _group(rows, keys):
    out: dict[tuple, list] = {}
    for r in rows:
        out.setdefault(tuple(r[k] for k in keys), []).append(r)
    return out


def _summarize(cfg: ExperimentConfig, rows: list[dict], timings: list[dict]) -> dict:
    th = cfg.thresholds
    name = cfg.experiment
    params = list(cfg.grid)
    summary: dict = {"experiment": name, "rows": len(rows), "thresholds": th}
    checks: dict[str, bool] = {}
    if name == "THEOREM1":
        summary["separation_pass_rate"] = min(_rate(g, "separated") for g in _group(rows, params).values())
        summary["median_ratio"] = float(np.median([r["ratio"] for r in rows]))
        checks["separation"] = summary["separation_pass_rate"] >= th["pass_rate"]
    elif name == "THEOREM2":
        summary["recovery_pass_rate"] = min(_rate(g, "recovered") for g in _group(rows, params).values())
        summary["concentration_pass_rate"] = min(_rate(g, "concentrated") for g in _group(rows, params).values())
        checks["recovery"] = summary["recovery_pass_rate"] >= th["pass_rate"]
        checks["concentration"] = summary["concentration_pass_rate"] >= th["pass_rate"]
    elif name == "COROLLARY1":
        summary["singleton_pass_rate"] = min(_rate(g, "recovered") for g in _group(rows, params).values())
        checks["singletons"] = summary["singleton_pass_rate"] >= th["pass_rate"]
    elif name == "CLAIM1":
        per_p = {}
        for key, grp in _group(rows, params).items():
            p = dict(zip(params, key))["p"]
            per_p[repr(p)] = min(per_p.get(repr(p), 1.0), _rate(grp, "recovered"))
        summary["recovery_pass_rate_by_p"] = per_p
        checks["recovery"] = all(v >= th["pass_rate"] for v in per_p.values())
        refs = [r["matches_reference"] for r in rows if r["matches_reference"] != ""]
        summary["reference_matches"] = f"{sum(refs)}/{len(refs)}"
        checks["reference_equality"] = all(refs)
    elif name == "COUNTEREXAMPLE":
        checks["regression"] = all(r["passed"] for r in rows)
    elif name == "COVERAGE":
        medians = {}
        for key, grp in _group(rows, params).items():
            medians[key] = float(np.median([r["percentage"] for r in grp]))
        summary["median_percentage"] = [dict(zip(params, k), median=v) for k, v in medians.items()]
        monotone = True
        other = [p for p in params if p != "s"]
        for key, grp in _group(rows, other + ["seed"]).items():
            ordered = sorted(grp, key=lambda r: r["keys_sampled"])
            pct = [r["percentage"] for r in ordered]
            monotone &= all(b >= a for a, b in zip(pct, pct[1:]))
        checks["monotone_in_s"] = monotone
        wins = {}
        for key, grp in _group(rows, params).items():
            point = dict(zip(params, key))
            if point["eps_heavy"] in th["win_eps_heavy"]:
                wins[json.dumps(point, sort_keys=True)] = _rate(grp, "beats_random")
        summary["beats_random_rate"] = wins
        checks["beats_random"] = all(v >= th["win_rate"] for v in wins.values())
    elif name == "SPEED":
        by_method = _group(timings, [p for p in params if p != "n"])
        slopes = []
        for key, grp in by_method.items():
            ns = [g["n"] for g in grp]
            pre = [np.median([g["prescored_seconds"] for g in grp if g["n"] == n]) for n in sorted(set(ns))]
            ex = [np.median([g["exact_seconds"] for g in grp if g["n"] == n]) for n in sorted(set(ns))]
            entry = dict(zip([p for p in params if p != "n"], key))
            if len(set(ns)) >= 2:
                entry["prescored_slope"] = loglog_slope(sorted(set(ns)), pre)
                entry["exact_slope"] = loglog_slope(sorted(set(ns)), ex)
                checks[f"slopes[{len(slopes)}]"] = (entry["prescored_slope"] < th["max_prescored_slope"]
                                                    and entry["exact_slope"] > th["min_exact_slope"])
            if th["speedup_n"] in ns:
                i = sorted(set(ns)).index(th["speedup_n"])
                entry["speedup"] = float(ex[i] / pre[i])
                checks[f"speedup[{len(slopes)}]"] = entry["speedup"] >= th["min_speedup"]
            slopes.append(entry)
        summary["fits"] = slopes
    elif name == "APPROX_ERROR":
        for col in ("hyper_error", "prescored_error", "uniform_error"):
            summary[f"median_{col}"] = float(np.median([r[col] for r in rows]))
        checks["hyper_beats_uniform"] = summary["median_hyper_error"] <= summary["median_uniform_error"]
    summary["checks"] = checks
    summary["passed"] = all(checks.values())
    return summary


# --- running and writing ---------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def render_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def run_rows(cfg: ExperimentConfig, threads: int = 1) -> list[dict]:
    trial = TRIALS[cfg.experiment]
    jobs = [(pi, si, point, seed) for pi, point in enumerate(cfg.points()) for si, seed in enumerate(cfg.seeds)]

    def work(job):
        pi, si, point, seed = job
        row = dict(point)
        row["seed"] = seed
        row.update(trial(point, seed, cfg.thresholds))
        return (pi, si), row

    if threads > 1 and cfg.experiment != "SPEED":
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    return [row for _, row in sorted(results, key=lambda x: x[0])]


def _speed_table(cfg: ExperimentConfig) -> list[dict]:
    return [{**point, "seed": seed, **speed_timings(point, seed, int(cfg.thresholds["repeats"]))}
            for point in cfg.points() for seed in cfg.seeds]


def run_experiment(cfg: ExperimentConfig, out_dir=None, threads: int = 1) -> dict:
    """Run ``cfg`` and write ``results.csv`` and ``summary.json`` (plus
    ``timings.csv`` for SPEED) into ``out_dir``. Returns the summary."""
    out = Path(out_dir if out_dir is not None else cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_rows(cfg, threads)
    timings: list[dict] = []
    if cfg.experiment == "SPEED":
        with threadpool_limits(limits=1):
            timings = _speed_table(cfg)
    columns = list(cfg.grid) + ["seed"] + [c for c in rows[0] if c not in cfg.grid and c != "seed"]
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    header = f"# prescore_attn {cfg.experiment} schema={cfg.schema} generated={stamp}\n"
    (out / "results.csv").write_text(header + render_csv(rows, columns), encoding="utf-8")
    if timings:
        tcols = list(cfg.grid) + ["seed", "prescored_seconds", "exact_seconds"]
        (out / "timings.csv").write_text(header + render_csv(timings, tcols), encoding="utf-8")
    summary = _summarize(cfg, rows, timings)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=_json_default) + "\n", encoding="utf-8")
    return summary


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def read_results(path) -> tuple[list[str], list[dict]]:
    """Parse a results.csv written by :func:`run_experiment` (header comment skipped)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    reader = csv.DictReader(body)
    return list(reader.fieldnames or []), list(reader)


def csv_body(path) -> str:
    """File contents minus the timestamped header line."""
    return "\n".join(ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if not ln.startswith("#"))


__all__ = ["ExperimentConfig", "load_config", "config_from_dict", "config_for_row", "run_experiment", "run_rows",
           "read_results", "csv_body", "loglog_slope", "time_call", "counterexample_trial", "isolates_signal",
           "GRID_DEFAULTS", "group_size"]
