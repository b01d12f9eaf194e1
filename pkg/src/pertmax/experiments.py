"""Batch experiments: configuration, runners and report writing.

Every runner is a pure function of its :class:`ExperimentConfig`; reports
contain no timing or machine-dependent data (timing goes to a separate
file), so identical configurations give byte-identical ``report.json``
whatever the worker count.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .core import RETAIN_ALL, TailLaw, step_eval
from .functional import (DemoParams, F_path, TimeChange, demo_limit_function,
                         demo_limit_measure, eval_F, skorokhod_upper_bound, theorem2_demo_step)
from .limit import coupled_comparison, sample_conjecture_rv, sample_limit, sample_prm
from .parallel import map_array, map_replicas
from .samplers import RngStream, XiLaw
from .stats import (frechet_cdf, ks_one_sample, ks_two_sample, normal_cdf,
                    prob_conjecture_negative)
from .walk import (WalkConfig, draw_perturbations, empirical_point_measure,
                   perturbed_max_at, perturbed_max_path, scaled_max_perturbation,
                   scaled_terminal_sum, scaled_walk_path)

EXPERIMENTS = ("convergence", "disprove", "frechet-check", "donsker-check",
               "prm-check", "theorem2-demo", "coupling-identity")

# First element of every stream path; keeps experiments from sharing draws.
_EXPERIMENT_LABEL = {name: i for i, name in enumerate(EXPERIMENTS)}

# KS critical value at the 1% level, asymptotically.
KS_CRIT_1PCT = 1.63


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str = "convergence"
    c: float = 1.0
    a: float = 2.0
    v: float = 1.0
    xi: str = "rademacher"
    n_grid: list = field(default_factory=lambda: [100, 1000, 10000])
    replicas: int = 1000
    delta: float = 1e-3
    delta_grid: list = field(default_factory=lambda: [0.1, 0.01])
    T: float = 1.0
    seed: int = 0
    probe_times: Optional[list] = None
    boxes: list = field(default_factory=lambda: [[1.0, 0.1], [0.5, 0.2], [1.0, 1.0]])
    mc_draws: int = 1_000_000
    output_dir: str = "out"
    workers: int = 1

    # Keys that do not influence results and are left out of the report.
    _NOT_ECHOED = ("output_dir", "workers")

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        for key in ("c", "a", "T", "delta"):
            if not (getattr(self, key) > 0 and math.isfinite(getattr(self, key))):
                raise ConfigError(f"{key} must be positive")
        if self.xi == "degenerate":
            if self.v != 0 and self.experiment not in ("convergence", "frechet-check",
                                                       "coupling-identity", "prm-check"):
                raise ConfigError("degenerate increments are only meaningful with v = 0")
        elif not self.v > 0:
            raise ConfigError("v must be positive")
        if int(self.replicas) != self.replicas or self.replicas < 1:
            raise ConfigError("replicas must be a positive integer")
        if not self.n_grid or any(int(n) != n or n < 1 for n in self.n_grid):
            raise ConfigError("n_grid must be a nonempty list of positive integers")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if any(not d > 0 for d in self.delta_grid):
            raise ConfigError("delta_grid entries must be positive")
        if any(not (0 <= t <= self.T) for t in self.probes):
            raise ConfigError("probe times must lie in [0, T]")
        if any(len(b) != 2 or not b[0] > 0 or not b[1] > 0 for b in self.boxes):
            raise ConfigError("boxes are [s, x] pairs with s, x > 0")
        if self.mc_draws < 1 or self.workers < 1:
            raise ConfigError("mc_draws and workers must be positive")

    @property
    def probes(self) -> list:
        if self.probe_times is None:
            return [0.25 * self.T, 0.5 * self.T, self.T]
        return [float(t) for t in self.probe_times]

    @property
    def tail(self) -> TailLaw:
        return TailLaw(self.c, self.a)

    @property
    def xi_law(self) -> XiLaw:
        return XiLaw(self.xi, 0.0 if self.xi == "degenerate" else self.v)

    def walk(self, n: int) -> WalkConfig:
        return WalkConfig(self.xi_law, self.tail, int(n), self.T)

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        for k in self._NOT_ECHOED:
            d.pop(k)
        d["probe_times"] = self.probes
        return d

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        aliases = {"n": "n_grid", "horizon": "T", "out": "output_dir"}
        clean = {}
        for k, v in values.items():
            k = aliases.get(k.replace("-", "_"), k.replace("-", "_"))
            if k not in known:
                raise ConfigError(f"unknown config key {k!r}")
            clean[k] = v
        if "n_grid" in clean and not isinstance(clean["n_grid"], list):
            clean["n_grid"] = [clean["n_grid"]]
        return cls(**clean)


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; values are JSON literals or bare strings.
    Blank lines and ``#`` comments are ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def load_config(path) -> dict:
    return parse_config_text(Path(path).read_text())


# ---------------------------------------------------------------------------
# Report


class Report:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.tables: dict[str, dict[str, list]] = {}
        self.assertions: list[dict] = []
        self.streams: dict[str, str] = {}

    def table(self, name: str, rows: list[dict]) -> None:
        cols = list(rows[0]) if rows else []
        self.tables[name] = {c: [_jsonable(r[c]) for r in rows] for c in cols}

    def check(self, name: str, passed: bool, **detail) -> None:
        self.assertions.append({"name": name, "passed": bool(passed),
                                **{k: _jsonable(v) for k, v in detail.items()}})

    def stream(self, role: str, labels: tuple) -> None:
        self.streams[role] = (f"SeedSequence({self.cfg.seed}, spawn_key=(replica, "
                              f"{', '.join(str(x) for x in labels)}))")

    @property
    def passed(self) -> bool:
        return all(a["passed"] for a in self.assertions)

    def to_dict(self) -> dict:
        return {
            "experiment": self.cfg.experiment,
            "version": __version__,
            "config": self.cfg.echo(),
            "streams": {"root_seed": self.cfg.seed, "replicas": self.cfg.replicas,
                        "derivation": self.streams},
            "tables": self.tables,
            "assertions": self.assertions,
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json())
        for name, cols in self.tables.items():
            with open(out / f"{name}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(cols)
                for row in zip(*cols.values()):
                    w.writerow(row)
        return out / "report.json"


def _jsonable(x):
    if isinstance(x, (list, tuple)):
        return [_jsonable(y) for y in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isinf(x):
            return "+inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


_ROLE = {"prelimit": 0, "limit": 1, "mc": 2, "conjecture": 3, "compare": 4,
         "prm": 5, "empirical": 6}


def _streams(cfg: ExperimentConfig, *labels) -> tuple:
    return (_EXPERIMENT_LABEL[cfg.experiment],) + tuple(_ROLE.get(x, x) for x in labels)


def _rng(seed: int, labels: tuple, r: int) -> RngStream:
    return RngStream(int(seed), r, tuple(labels))


# ---------------------------------------------------------------------------
# Per-replica kernels (module level so worker processes can unpickle them)


def _k_prelimit(seed, labels, walk, probes, r):
    return perturbed_max_at(_rng(seed, labels, r), walk, probes)


def _k_limit(seed, labels, tail, v, T, delta, probes, r):
    s = sample_limit(_rng(seed, labels, r), tail, v, T, delta)
    return np.concatenate((s.value_at(probes, empty=0.0), [s.lower, s.upper, len(s.points)]))


def _k_terminal(seed, labels, walk, r):
    return scaled_terminal_sum(_rng(seed, labels, r), walk)


def _k_max_eta(seed, labels, walk, r):
    return scaled_max_perturbation(_rng(seed, labels, r), walk)


def _k_prm_counts(seed, labels, tail, T, boxes, r):
    trunc = min(x for _, x in boxes)
    nu = sample_prm(_rng(seed, labels, r).generator(), tail, T, trunc)
    return [nu.count(0.0, s, x) for s, x in boxes]


def _k_emp_counts(seed, labels, walk, boxes, r):
    etas = draw_perturbations(_rng(seed, labels, r), walk)
    nu = empirical_point_measure(etas, walk.n, walk.tail.a, 0.0, walk.horizon)
    return [nu.count(0.0, s, x) for s, x in boxes]


def _k_conjecture(seed, labels, tail, v, r):
    return float(sample_conjecture_rv(_rng(seed, labels, r), tail, v))


def _k_mc_negative(seed, labels, tail, v, size, r):
    x = sample_conjecture_rv(_rng(seed, labels, r).generator(), tail, v, size=size)
    return int(np.count_nonzero(x < 0))


def _k_compare(seed, labels, tail, v, T, delta, r):
    cmp = coupled_comparison(_rng(seed, labels, r), tail, v, T, delta)
    return [cmp.lower, cmp.rhs, cmp.resamples]


def coupling_mismatches(rng: RngStream, walk: WalkConfig) -> int:
    """Number of check times where ``F(walk path, all atoms)`` differs (in any
    bit) from the perturbed running maximum."""
    fpath = scaled_walk_path(rng, walk)
    nu = empirical_point_measure(draw_perturbations(rng, walk), walk.n, walk.tail.a,
                                 RETAIN_ALL, walk.horizon)
    direct = perturbed_max_path(rng, walk)
    times = np.unique(np.concatenate(([0.0, walk.horizon], direct.times, nu.times)))
    via_f = eval_F(fpath, nu, times)
    return int(np.count_nonzero(via_f != step_eval(direct, times)))


def _k_coupling(seed, labels, walk, r):
    return coupling_mismatches(_rng(seed, labels, r), walk)


# ---------------------------------------------------------------------------
# Runners


def _limit_block(cfg, rep, delta, role, probes):
    labels = _streams(cfg, "limit", role)
    rep.stream(f"limit(delta={delta})", labels)
    fn = partial(_k_limit, cfg.seed, labels, cfg.tail, cfg.v, cfg.T, delta, probes)
    arr = np.asarray(map_replicas(fn, cfg.replicas, cfg.workers), dtype=float)
    k = len(probes)
    return {"values": arr[:, :k], "lower": arr[:, k], "upper": arr[:, k + 1],
            "points": arr[:, k + 2]}


def run_convergence(cfg: ExperimentConfig) -> Report:
    rep = Report(cfg)
    probes = cfg.probes
    degenerate = cfg.xi == "degenerate"
    rows = []
    if not degenerate:
        lim = _limit_block(cfg, rep, cfg.delta, 0, probes)
        coarse = _limit_block(cfg, rep, 10 * cfg.delta, 1, probes)
        width = float(np.mean(lim["upper"] - lim["lower"]))
        width_coarse = float(np.mean(coarse["upper"] - coarse["lower"]))
        rep.table("bracket", [
            {"delta": cfg.delta, "mean_bracket_width": width, "mean_points": float(np.mean(lim["points"]))},
            {"delta": 10 * cfg.delta, "mean_bracket_width": width_coarse,
             "mean_points": float(np.mean(coarse["points"]))},
        ])
        rep.check("bracket width shrinks with delta", width < width_coarse,
                  width=width, width_coarse=width_coarse)
    for gi, n in enumerate(cfg.n_grid):
        labels = _streams(cfg, "prelimit", gi)
        rep.stream(f"prelimit(n={n})", labels)
        fn = partial(_k_prelimit, cfg.seed, labels, cfg.walk(n), probes)
        pre = np.asarray(map_replicas(fn, cfg.replicas, cfg.workers), dtype=float).reshape(-1, len(probes))
        for pi, t in enumerate(probes):
            if degenerate:
                ks = ks_one_sample(pre[:, pi], lambda x, t=t: frechet_cdf(x, TailLaw(cfg.c * t, cfg.a))) \
                    if t > 0 else ks_two_sample(pre[:, pi], pre[:, pi])
                w = float("nan")
            else:
                ks = ks_two_sample(pre[:, pi], lim["values"][:, pi])
                w = width
            rows.append({"n": n, "t": t, "ks_statistic": ks.statistic, "p_value": ks.p_value,
                         "mean_bracket_width": w})
    rep.table("ks", rows)
    at_T = [r for r in rows if r["t"] == probes[-1]]
    if degenerate:
        crit = KS_CRIT_1PCT / math.sqrt(cfg.replicas)
        rep.check("degenerate walk matches Frechet at largest n", at_T[-1]["ks_statistic"] < crit,
                  statistic=at_T[-1]["ks_statistic"], threshold=crit)
    if len(at_T) >= 2:
        first, last = at_T[0], at_T[-1]
        rep.check("KS distance decreases from smallest to largest n",
                  last["ks_statistic"] < first["ks_statistic"],
                  ks_smallest_n=first["ks_statistic"], ks_largest_n=last["ks_statistic"])
    return rep


def run_disprove(cfg: ExperimentConfig) -> Report:
    rep = Report(cfg)
    tail, v, T = cfg.tail, cfg.v, cfg.T
    rows = []
    blocks = {}
    for di, delta in enumerate(cfg.delta_grid):
        b = _limit_block(cfg, rep, delta, di, [T])
        blocks[delta] = b
        rows.append({"delta": delta,
                     "frac_upper_negative": float(np.mean(b["upper"] < 0)),
                     "frac_lower_negative": float(np.mean(b["lower"] < 0)),
                     "mean_bracket_width": float(np.mean(b["upper"] - b["lower"])),
                     "mean_points": float(np.mean(b["points"]))})
    rep.table("brackets", rows)
    rep.check("no limit sample has U < 0", all(r["frac_upper_negative"] == 0 for r in rows),
              fractions=[r["frac_upper_negative"] for r in rows])

    p = prob_conjecture_negative(cfg.c, v, cfg.a)
    chunk = 1_000_000
    sizes = [chunk] * (cfg.mc_draws // chunk) + ([cfg.mc_draws % chunk] if cfg.mc_draws % chunk else [])
    labels = _streams(cfg, "mc")
    rep.stream("monte-carlo theta+vZ (replica = chunk)", labels)
    negatives = 0
    for i, size in enumerate(sizes):
        negatives += _k_mc_negative(cfg.seed, labels, tail, v, size, i)
    mc = negatives / cfg.mc_draws
    sigma = math.sqrt(p * (1 - p) / cfg.mc_draws)
    z = (mc - p) / sigma
    rep.table("conjecture_probability", [{"quadrature": p, "monte_carlo": mc, "draws": cfg.mc_draws,
                                          "binomial_sigma": sigma, "z": z}])
    rep.check("P(theta + vB(1) < 0) > 0.01", p > 0.01, value=p, threshold=0.01)
    rep.check("quadrature agrees with Monte Carlo within 3 sigma", abs(z) <= 3.0, z=z)

    finest = min(cfg.delta_grid)
    labels = _streams(cfg, "conjecture")
    rep.stream("theta+vB(1)", labels)
    conj = map_array(partial(_k_conjecture, cfg.seed, labels, tail, v), cfg.replicas, cfg.workers)
    lower = blocks[finest]["lower"]
    ks = ks_two_sample(lower, conj)
    rep.table("ks_limit_vs_conjecture", [{"delta": finest, **ks.to_dict()}])
    rep.check("limit law differs from theta + vB(1)", ks.p_value < 1e-3, p_value=ks.p_value,
              threshold=1e-3)

    labels = _streams(cfg, "compare")
    rep.stream("coupled comparison", labels)
    cmp = np.asarray(map_replicas(partial(_k_compare, cfg.seed, labels, tail, v, T, finest),
                                  cfg.replicas, cfg.workers), dtype=float)
    strict = int(np.count_nonzero(cmp[:, 0] < cmp[:, 1]))
    rep.table("coupled_comparison", [{"delta": finest, "draws": cfg.replicas, "strict": strict,
                                      "resamples": int(cmp[:, 2].sum()),
                                      "min_gap": float(np.min(cmp[:, 1] - cmp[:, 0]))}])
    rep.check("L < max j + v sup B in every draw", strict == cfg.replicas, strict=strict,
              draws=cfg.replicas)
    return rep


def run_frechet_check(cfg: ExperimentConfig) -> Report:
    rep = Report(cfg)
    law = TailLaw(cfg.c * cfg.T, cfg.a)
    rows = []
    for gi, n in enumerate(cfg.n_grid):
        labels = _streams(cfg, gi)
        rep.stream(f"max eta (n={n})", labels)
        xs = map_array(partial(_k_max_eta, cfg.seed, labels, cfg.walk(n)), cfg.replicas, cfg.workers)
        ks = ks_one_sample(xs, lambda x: frechet_cdf(x, law))
        rows.append({"n": n, **ks.to_dict()})
    rep.table("frechet_ks", rows)
    crit = KS_CRIT_1PCT / math.sqrt(cfg.replicas)
    rep.check("Frechet KS below 1% critical value at largest n", rows[-1]["statistic"] < crit,
              statistic=rows[-1]["statistic"], threshold=crit)
    return rep


def run_donsker_check(cfg: ExperimentConfig) -> Report:
    rep = Report(cfg)
    sigma = cfg.v * math.sqrt(cfg.T)
    rows = []
    for gi, n in enumerate(cfg.n_grid):
        labels = _streams(cfg, gi)
        rep.stream(f"walk (n={n})", labels)
        xs = map_array(partial(_k_terminal, cfg.seed, labels, cfg.walk(n)), cfg.replicas, cfg.workers)
        ks = ks_one_sample(xs, lambda x: normal_cdf(x, sigma))
        rows.append({"n": n, **ks.to_dict()})
    rep.table("donsker_ks", rows)
    crit = KS_CRIT_1PCT / math.sqrt(cfg.replicas)
    rep.check("Donsker KS below 1% critical value at largest n", rows[-1]["statistic"] < crit,
              statistic=rows[-1]["statistic"], threshold=crit)
    return rep


def _box_rows(counts: np.ndarray, boxes, tail: TailLaw, R: int, **extra):
    rows = []
    for (s, x), col in zip(boxes, counts.T):
        mean = float(tail.tail_mass(x)) * s
        observed = float(np.mean(col))
        z = (observed - mean) / math.sqrt(mean / R)
        rows.append({**extra, "s": s, "x": x, "expected": mean, "mean_count": observed, "z": z})
    return rows


def run_prm_check(cfg: ExperimentConfig) -> Report:
    rep = Report(cfg)
    boxes = [(float(s) * cfg.T, float(x)) for s, x in cfg.boxes]
    if any(s > cfg.T for s, _ in boxes):
        raise ConfigError("box time extents must not exceed T")
    labels = _streams(cfg, "prm")
    rep.stream("poisson random measure", labels)
    counts = np.asarray(map_replicas(partial(_k_prm_counts, cfg.seed, labels, cfg.tail, cfg.T, boxes),
                                     cfg.replicas, cfg.workers), dtype=float)
    prm_rows = _box_rows(counts, boxes, cfg.tail, cfg.replicas)
    rep.table("prm_boxes", prm_rows)
    rep.check("PRM box means within 3 sigma", all(abs(r["z"]) < 3 for r in prm_rows),
              z=[r["z"] for r in prm_rows])
    emp_rows = []
    for gi, n in enumerate(cfg.n_grid):
        labels = _streams(cfg, "empirical", gi)
        rep.stream(f"empirical measure (n={n})", labels)
        counts = np.asarray(map_replicas(partial(_k_emp_counts, cfg.seed, labels, cfg.walk(n), boxes),
                                         cfg.replicas, cfg.workers), dtype=float)
        emp_rows += _box_rows(counts, boxes, cfg.tail, cfg.replicas, n=n)
    rep.table("empirical_boxes", emp_rows)
    n_max = cfg.n_grid[-1]
    last = [r for r in emp_rows if r["n"] == n_max]
    rep.check("empirical box means within 3 sigma at largest n", all(abs(r["z"]) < 3 for r in last),
              z=[r["z"] for r in last])
    return rep


def run_theorem2_demo(cfg: ExperimentConfig) -> Report:
    rep = Report(cfg)
    params = DemoParams(horizon=cfg.T)
    rows = [theorem2_demo_step(int(n), params) for n in cfg.n_grid]
    rep.table("theorem2", rows)
    rep.check("bound <= majorant for every n", all(r["bound"] <= r["majorant"] for r in rows),
              bounds=[r["bound"] for r in rows], majorants=[r["majorant"] for r in rows])
    if len(rows) >= 2:
        lo, hi = min(rows, key=lambda r: r["n"]), max(rows, key=lambda r: r["n"])
        rep.check("bound halves from smallest to largest n", hi["bound"] < lo["bound"] / 2,
                  bound_smallest_n=lo["bound"], bound_largest_n=hi["bound"])
    f0 = demo_limit_function(params)
    scale = f0.sup_norm()
    if max(cfg.n_grid) >= 10_000:
        top = max(rows, key=lambda r: r["n"])
        rep.check("bound at largest n below 1% of sup|f_0|", top["bound"] < 0.01 * scale,
                  bound=top["bound"], threshold=0.01 * scale)
    nu0 = demo_limit_measure(params)
    g = F_path(f0, nu0)
    ident = skorokhod_upper_bound(g, g, TimeChange.identity(cfg.T))
    rep.check("identity instance has zero bound", ident == 0.0, bound=ident)
    return rep


def run_coupling_identity(cfg: ExperimentConfig) -> Report:
    rep = Report(cfg)
    rows = []
    for gi, n in enumerate(cfg.n_grid):
        labels = _streams(cfg, gi)
        rep.stream(f"walk (n={n})", labels)
        bad = map_array(partial(_k_coupling, cfg.seed, labels, cfg.walk(n)), cfg.replicas, cfg.workers)
        rows.append({"n": n, "replicas": cfg.replicas, "replicas_with_mismatch": int(np.count_nonzero(bad)),
                     "mismatched_times": int(bad.sum())})
    rep.table("coupling", rows)
    rep.check("running maximum equals F(walk, atoms) bit for bit",
              all(r["mismatched_times"] == 0 for r in rows),
              mismatches=[r["mismatched_times"] for r in rows])
    return rep


RUNNERS = {
    "convergence": run_convergence,
    "disprove": run_disprove,
    "frechet-check": run_frechet_check,
    "donsker-check": run_donsker_check,
    "prm-check": run_prm_check,
    "theorem2-demo": run_theorem2_demo,
    "coupling-identity": run_coupling_identity,
}


def run_marginal_checks(cfg: ExperimentConfig) -> Report:
    """Dispatch for the three marginal checks (donsker, prm, frechet)."""
    if cfg.experiment not in ("donsker-check", "prm-check", "frechet-check"):
        raise ConfigError(f"{cfg.experiment} is not a marginal check")
    return RUNNERS[cfg.experiment](cfg)


def run(cfg: ExperimentConfig, write: bool = True) -> Report:
    started = time.perf_counter()
    rep = RUNNERS[cfg.experiment](cfg)
    if write:
        path = rep.write(cfg.output_dir)
        timing = {"experiment": cfg.experiment, "wall_clock_seconds": time.perf_counter() - started,
                  "workers": cfg.workers}
        (path.parent / "timing.json").write_text(json.dumps(timing, indent=2) + "\n")
    return rep
