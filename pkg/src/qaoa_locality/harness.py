"""Config-driven experiment runner with atomic outputs and recorded seeds."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from filelock import FileLock, Timeout

from . import __version__, acceptance, ensemble, lightcone, ogp, qaoa_plus, tail_bounds
from .errors import ConfigError, ExperimentError, HarnessBusyError, ParameterError
from .graphs import Graph, InterpolationPath, Model, random_graph
from .rng import derive_seed
from .statevector import QaoaParams, q_max_override

RESERVED = ("kind", "seed", "out")

_GRAPH = {"graph": None, "n": 12, "d": 3.0, "model": "fixed"}
_ANGLES = {"gammas": [0.6], "betas": [0.35], "theta": 0.4, "initial": None}

# default value of every accepted key, per experiment kind
SCHEMAS: dict[str, dict] = {
    "sample_graph": {"n": 1000, "d": 3.0, "model": "fixed"},
    "qaoa_expect": {**_GRAPH, **_ANGLES, "method": "lightcone", "variance": False,
                    "threads": 1, "q_max": None},
    "qaoa_plus_sample": {**_GRAPH, **_ANGLES, "shots": 1000, "rule": "independent",
                         "q_max": None},
    "p15_optimize": {"d": 3.0, "grid": 9, "n_starts": 20, "degree_cut": None,
                     "tail_tol": 1e-10, "theta_box": [0.0, math.pi / 2],
                     "gamma_box": [0.0, math.pi], "beta_box": [0.0, math.pi / 2]},
    "p15_scan": {"ds": [3, 10, 30, 100], "grid": 9, "n_starts": 20, "tail_tol": 1e-10},
    "ogp_scan": {"n": 24, "d": 10.0, "eta": 0.9, "alpha_mode": "instance",
                 "n_pairs": 10, "t_pairs": None, "cap": ogp.DEFAULT_CAP},
    "verify_far_lemma": {**_GRAPH, "n": 10, "d": 2.0, **_ANGLES, "edge": None,
                         "modes": ["quantum", "pruning"], "rule": "independent",
                         "radius_shift": 0, "tolerance": 1e-10},
    "lightcone_check": {**_GRAPH, **_ANGLES, "pairs": 5, "tolerance": 1e-9, "q_max": None},
    "branching": {"d": 3.0, "k": 6, "replicates": 100_000, "us": [5, 10]},
    "neighborhood_tail": {"n": 10_000, "d": 3.0, "w": 0.9, "trials": 5,
                          "exponents": [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99], "s": 0.1},
    "concentration": {**_GRAPH, "n": 1000, **_ANGLES, "mode": "variance", "shots": 1000,
                      "deltas": [0.01, 0.02, 0.05, 0.1], "threads": 1, "q_max": None},
    "count_mvg": {"t_max": 9, "brute_max": 6},
    "reproduce_paper": {"profile": "full", "q_max": None, "threads": 1},
}
ALIASES = {"far_lemma": "verify_far_lemma"}


def canonical_kind(kind: str) -> str:
    kind = str(kind).replace("-", "_")
    return ALIASES.get(kind, kind)


@dataclass
class ExperimentConfig:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    out: str = "runs"

    def __post_init__(self):
        self.kind = canonical_kind(self.kind)
        problems = []
        if self.kind not in SCHEMAS:
            problems.append(f"unknown kind {self.kind!r}; choose from {sorted(SCHEMAS)}")
        else:
            allowed = SCHEMAS[self.kind]
            for key in sorted(self.params):
                if key not in allowed:
                    problems.append(f"unknown key {key!r} for kind {self.kind!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) \
                or not 0 <= self.seed < 2**64:
            problems.append(f"seed must be an integer in [0, 2^64), got {self.seed!r}")
        if not isinstance(self.out, str) or not self.out:
            problems.append("out must be a nonempty path")
        if problems:
            raise ConfigError(problems)

    def resolved(self) -> dict:
        return {**SCHEMAS[self.kind], **self.params}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "out": self.out, **self.params}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict) or "kind" not in data:
            raise ConfigError(["config must be an object with a 'kind' key"])
        params = {k: v for k, v in data.items() if k not in RESERVED}
        return cls(data["kind"], params, data.get("seed", 0), data.get("out", "runs"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"invalid JSON: {exc}"]) from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())


@dataclass
class RunRecord:
    config: dict
    version: str
    wall_clock_s: float
    payload: dict
    seeds: dict
    artifacts: list = field(default_factory=list)
    passed: bool = True

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "version": self.version,
            "wall_clock_s": self.wall_clock_s,
            "passed": self.passed,
            "seeds": self.seeds,
            "artifacts": self.artifacts,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        return cls(data["config"], data["version"], data["wall_clock_s"], data["payload"],
                   data["seeds"], data.get("artifacts", []), data.get("passed", True))

    @classmethod
    def load(cls, path) -> "RunRecord":
        return cls.from_dict(json.loads(Path(path).read_text()))


# -- persistence ------------------------------------------------------------------


def atomic_write(path, text: str) -> None:
    """Write via a temporary file in the same directory and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def payload_digest(payload: dict) -> str:
    text = json.dumps(to_jsonable(payload), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()


# -- task context --------------------------------------------------------------------


class _Context:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.p = cfg.resolved()
        self.seeds: dict[str, int] = {}
        self.files: dict[str, str] = {}

    def seed(self, *path) -> int:
        s = derive_seed(self.cfg.seed, self.cfg.kind, *path)
        self.seeds["/".join(str(x) for x in path)] = s
        return s

    def graph(self) -> Graph:
        if self.p.get("graph"):
            return Graph.load(self.p["graph"])
        model = Model.BERNOULLI_EDGES if self.p["model"] == "bernoulli" else Model.FIXED_EDGE_COUNT
        return random_graph(int(self.p["n"]), float(self.p["d"]), self.seed("graph"), model)

    def params(self) -> QaoaParams:
        return QaoaParams(self.p["gammas"], self.p["betas"], self.p["theta"], self.p["initial"])

    def emit(self, name: str, text: str) -> None:
        self.files[name] = text


def _run_sample_graph(ctx: _Context) -> dict:
    g = ctx.graph()
    ctx.emit("graph.txt", g.to_edgelist())
    deg = g.degrees()
    return {"n": g.n, "m": g.m, "mean_degree": float(deg.mean()) if g.n else 0.0,
            "max_degree": int(deg.max()) if g.n else 0}


def _run_qaoa_expect(ctx: _Context) -> dict:
    g, params, p = ctx.graph(), ctx.params(), ctx.p
    if p["method"] == "full":
        ref = lightcone.full_statevector_values(g, params, q_max=p["q_max"])
        out = {"objective": ref["objective"], "bits": ref["bits"]}
        if p["variance"]:
            out["variance"] = ref["variance"]
    elif p["method"] == "lightcone":
        workers = lightcone.default_workers(p["threads"])
        bits = lightcone.bit_expectations(g, params, p["q_max"], workers)
        out = {"objective": lightcone.objective_expectation(g, params, p["q_max"], workers),
               "bits": bits}
        if p["variance"]:
            out["variance"] = lightcone.hamming_variance(g, params, p["q_max"], workers)
    else:
        raise ParameterError(f"unknown method {p['method']!r}")
    ctx.emit("bits.csv", csv_text(["vertex", "expectation"], enumerate(out["bits"].tolist())))
    out["objective_per_n"] = out["objective"] / g.n if g.n else 0.0
    out["bits"] = out["bits"].tolist() if g.n <= 64 else "see bits.csv"
    return out


def _run_qaoa_plus_sample(ctx: _Context) -> dict:
    g, params, p = ctx.graph(), ctx.params(), ctx.p
    measured, pruned = qaoa_plus.qaoa_plus_bits(g, params, int(p["shots"]), ctx.seed("shots"),
                                                p["rule"], p["q_max"])
    sizes = pruned.sum(axis=1)
    weights = measured.sum(axis=1)
    ctx.emit("shots.csv", csv_text(["shot", "weight", "size"],
                                   zip(range(len(sizes)), weights.tolist(), sizes.tolist())))
    return {"shots": int(p["shots"]), "mean_size": float(sizes.mean()),
            "max_size": int(sizes.max()), "mean_weight": float(weights.mean())}


def _p15_kwargs(p: dict) -> dict:
    keys = ("grid", "n_starts", "degree_cut", "tail_tol", "theta_box", "gamma_box", "beta_box")
    out = {k: p[k] for k in keys if k in p}
    for k in ("theta_box", "gamma_box", "beta_box"):
        if k in out:
            out[k] = tuple(out[k])
    return out


def _run_p15_optimize(ctx: _Context) -> dict:
    res = ensemble.p15_optimize(ensemble.P15Config(d=float(ctx.p["d"]), **_p15_kwargs(ctx.p)))
    out = res.to_dict()
    out["d_times_value"] = res.d * res.value_per_n
    return out


def _run_p15_scan(ctx: _Context) -> dict:
    rows = ensemble.p15_large_d_scan([float(d) for d in ctx.p["ds"]], **_p15_kwargs(ctx.p))
    ctx.emit("p15_scan.csv", csv_text(ensemble.SCAN_COLUMNS,
                                      ([r[c] for c in ensemble.SCAN_COLUMNS] for r in rows)))
    return {"rows": rows}


def _run_ogp_scan(ctx: _Context) -> dict:
    p = ctx.p
    n, d = int(p["n"]), float(p["d"])
    g0 = random_graph(n, d, ctx.seed("g0"))
    gm = random_graph(n, d, ctx.seed("gm"))
    cfg = ogp.OgpConfig(eta=float(p["eta"]), alpha_mode=p["alpha_mode"], cap=int(p["cap"]))
    rep = ogp.ogp_scan(InterpolationPath(g0, gm), cfg, p["t_pairs"], int(p["n_pairs"]),
                       ctx.seed("pairs"))
    hists = rep.pop("_histograms")
    cols = ["t1", "t2", "bin_lo", "bin_hi", "count"]
    rows = [[row[c] for c in cols] for h in hists for row in h.csv_rows()]
    ctx.emit("overlap_histograms.csv", csv_text(cols, rows))
    rep["passed"] = all(pr["mass_conserved"] for pr in rep["pairs"])
    return rep


def _run_far_lemma(ctx: _Context) -> dict:
    p = ctx.p
    params = ctx.params()
    g = ctx.graph()
    edge = p["edge"]
    if edge is None:
        rng = np.random.default_rng(ctx.seed("edge"))
        candidates = [(i, j) for i in range(g.n) for j in range(i + 1, g.n)
                      if not g.has_edge(i, j)]
        if not candidates:
            raise ParameterError("graph is complete; no edge to toggle")
        edge = candidates[int(rng.integers(len(candidates)))]
    rep = qaoa_plus.verify_far_lemma(g, edge, params, tuple(p["modes"]), p["rule"],
                                     int(p["radius_shift"]))
    rep["max_residual"] = rep.pop("max_discrepancy")
    for m in rep["modes"].values():
        m["far"] = list(m["far"])
    rep["passed"] = rep["max_residual"] < float(p["tolerance"])
    return rep


def _run_lightcone_check(ctx: _Context) -> dict:
    p = ctx.p
    g, params = ctx.graph(), ctx.params()
    rng = np.random.default_rng(ctx.seed("pairs"))
    pairs = [tuple(sorted(rng.choice(g.n, 2, replace=False).tolist())) for _ in range(int(p["pairs"]))]
    ref = lightcone.full_statevector_values(g, params, pairs, q_max=p["q_max"])
    diffs = {
        "bits": float(np.max(np.abs(lightcone.bit_expectations(g, params, p["q_max"]) - ref["bits"]))),
        "pairs": max((abs(lightcone.cone_expectation_pair(g, params, i, j, p["q_max"]).value
                          - ref["pairs"][(i, j)]) for i, j in pairs), default=0.0),
        "objective": abs(lightcone.objective_expectation(g, params, p["q_max"]) - ref["objective"]),
        "variance": abs(lightcone.hamming_variance(g, params, p["q_max"]) - ref["variance"]),
    }
    fact = lightcone.verify_factorization(g, params, q_max=p["q_max"])
    worst = max(diffs.values())
    return {"differences": diffs, "max_difference": worst,
            "max_far_covariance": fact["max_far_residual"],
            "max_near_covariance": fact["max_near_residual"],
            "passed": worst < float(p["tolerance"]) and fact["max_far_residual"] < 1e-10}


def _run_branching(ctx: _Context) -> dict:
    p = ctx.p
    d, k = float(p["d"]), int(p["k"])
    stats = tail_bounds.branching_simulate(d, k, int(p["replicates"]), ctx.seed("replicates"))
    zk = stats.generations[:, k]
    scale = (d / tail_bounds.LN2) ** k
    us = np.linspace(0, max(p["us"]), 41)
    ctx.emit("branching_tail.csv", csv_text(
        ["u", "threshold", "empirical", "bound"],
        ([float(u), u * scale, float(np.mean(zk >= u * scale)), math.e * math.exp(-u)]
         for u in us)))
    rep = tail_bounds.branching_tail_check(d, k, int(p["replicates"]), ctx.seeds["replicates"],
                                           tuple(p["us"]))
    rep["passed"] = rep["mean_ok"] and rep["tails_ok"]
    return rep


def _run_neighborhood_tail(ctx: _Context) -> dict:
    p = ctx.p
    rep = tail_bounds.neighborhood_tail_experiment(
        int(p["n"]), float(p["d"]), float(p["w"]), int(p["trials"]), ctx.seed("trials"),
        tuple(p["exponents"]), float(p["s"]))
    ctx.emit("neighborhood_tail.csv", csv_text(
        ["A", "n^A", "frac_2p_exceeds", "frac_p_exceeds_half"],
        ([r["A"], r["n^A"], r["frac_2p_exceeds"], r["frac_p_exceeds_half"]] for r in rep["curve"])))
    return rep


def _run_concentration(ctx: _Context) -> dict:
    p = ctx.p
    rep = tail_bounds.weight_concentration_experiment(
        ctx.graph(), ctx.params(), int(p["shots"]), ctx.seed("shots"), p["mode"],
        tuple(p["deltas"]), p["q_max"], lightcone.default_workers(p["threads"]))
    if "bands" in rep:
        ctx.emit("concentration.csv", csv_text(
            ["delta", "frac_outside"], ([b["delta"], b["frac_outside"]] for b in rep["bands"])))
    return rep


def _run_count_mvg(ctx: _Context) -> dict:
    t_max, b_max = int(ctx.p["t_max"]), int(ctx.p["brute_max"])
    rows = []
    for t in range(0, t_max + 1):
        v = tail_bounds.count_minimal_valid_graphs(t)
        brute = tail_bounds.count_minimal_valid_graphs_bruteforce(t) if 2 <= t <= b_max else None
        rows.append([t, v, brute, math.factorial(t)])
    ctx.emit("mvg_counts.csv", csv_text(["t", "V_t", "brute_force", "t_factorial"], rows))
    ok = all(r[2] is None or r[1] == r[2] for r in rows) and all(r[1] <= r[3] for r in rows)
    return {"counts": {str(r[0]): r[1] for r in rows}, "passed": ok}


def reproduce_paper(seed: int = 0, q_max: int | None = None, profile: str = "full",
                    workers: int = 1, log=None) -> dict:
    """Every acceptance row; the last row re-runs the quick table and compares digests."""
    if profile not in acceptance.PROFILES:
        raise ParameterError(f"profile must be one of {acceptance.PROFILES}")
    rows = []
    for fn in acceptance.CHECKS:
        kw = {"workers": workers} if fn is acceptance.check_variance_scaling else {}
        res = acceptance.run_check(fn, seed, profile, q_max, **kw)
        rows.append(res)
        if log:
            log(res.line())
    t0 = time.perf_counter()
    digests = [payload_digest({"rows": [r.payload() for r in _quick_table(seed, q_max)]})
               for _ in range(2)]
    det = acceptance.CriterionResult(
        14, "determinism of the quick table", acceptance._status(digests[0] == digests[1]),
        digests[0][:16], "two runs, identical digests", {"digests": digests},
        time.perf_counter() - t0)
    rows.append(det)
    if log:
        log(det.line())
    return {
        "profile": profile,
        "rows": [to_jsonable(r.payload()) for r in rows],
        "passed": all(r.status != acceptance.FAIL for r in rows),
        "counts": {s: sum(r.status == s for r in rows)
                   for s in (acceptance.PASS, acceptance.FAIL, acceptance.SKIPPED)},
        "_timings": [r.seconds for r in rows],
    }


def _quick_table(seed, q_max):
    return [acceptance.run_check(fn, seed, "quick", q_max) for fn in acceptance.CHECKS]


def _run_reproduce(ctx: _Context) -> dict:
    p = ctx.p
    rep = reproduce_paper(ctx.cfg.seed, p["q_max"], p["profile"],
                          lightcone.default_workers(p["threads"]), log=ctx.log)
    timings = rep.pop("_timings")
    rows = [[r["number"], r["name"], r["status"], json.dumps(r["measured"]), r["expected"], f"{t:.2f}"]
            for r, t in zip(rep["rows"], timings)]
    ctx.emit("acceptance.csv", csv_text(
        ["criterion", "name", "status", "measured", "expected", "seconds"], rows))
    return rep


RUNNERS = {
    "sample_graph": _run_sample_graph,
    "qaoa_expect": _run_qaoa_expect,
    "qaoa_plus_sample": _run_qaoa_plus_sample,
    "p15_optimize": _run_p15_optimize,
    "p15_scan": _run_p15_scan,
    "ogp_scan": _run_ogp_scan,
    "verify_far_lemma": _run_far_lemma,
    "lightcone_check": _run_lightcone_check,
    "branching": _run_branching,
    "neighborhood_tail": _run_neighborhood_tail,
    "concentration": _run_concentration,
    "count_mvg": _run_count_mvg,
    "reproduce_paper": _run_reproduce,
}


def run(cfg: ExperimentConfig, write: bool = True, log=None, lock_timeout: float = 0) -> RunRecord:
    """Dispatch ``cfg`` and (optionally) persist record.json plus artifacts under ``cfg.out``."""
    ctx = _Context(cfg)
    ctx.log = log
    out = Path(cfg.out)
    lock = None
    if write:
        out.mkdir(parents=True, exist_ok=True)
        lock = FileLock(str(out / ".lock"))
        try:
            lock.acquire(timeout=lock_timeout)
        except Timeout as exc:
            raise HarnessBusyError(f"{out} is locked by another run") from exc
        # leftovers of an interrupted writer; safe to drop while we hold the lock
        for stale in out.glob(".*.tmp"):
            stale.unlink()
    try:
        t0 = time.perf_counter()
        q_max = ctx.p.get("q_max")
        try:
            if q_max is not None:
                with q_max_override(int(q_max)):
                    payload = RUNNERS[cfg.kind](ctx)
            else:
                payload = RUNNERS[cfg.kind](ctx)
        except (ConfigError, HarnessBusyError):
            raise
        except Exception as exc:
            raise ExperimentError(cfg.kind, exc) from exc
        payload = to_jsonable(payload)
        record = RunRecord(cfg.to_dict(), __version__, time.perf_counter() - t0, payload,
                           dict(ctx.seeds), sorted(ctx.files), bool(payload.get("passed", True)))
        if write:
            for name, text in ctx.files.items():
                atomic_write(out / name, text)
            atomic_write(out / "record.json", json.dumps(record.to_dict(), indent=2, sort_keys=True))
        return record
    finally:
        if lock is not None:
            lock.release()


def rerun(record: RunRecord, write: bool = False) -> RunRecord:
    return run(ExperimentConfig.from_dict(record.config), write=write)
