"""Config-driven experiment runner and deterministic emitters.

Each experiment kind reproduces one limit statement as a seeded, replicated
run with named verdicts. Reports are deterministic functions of the config:
replica seeds are derived from the global seed, aggregation is order
independent, floats are canonicalized to 12 significant digits, and wall
clock telemetry is kept out of the report payload (it goes to a separate
sidecar file at emit time).
"""
from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import lattice as lat
from . import rng
from . import tree as tr
from . import variational as va
from ._parallel import parallel_map
from .measures import (
    DiscreteMeasure,
    Grid,
    GriddedDensity,
    kl_divergence,
    pushforward,
    pushforward_positive,
    total_variation,
    wasserstein,
    wasserstein_extended,
)
from .weights import WeightFunction, constant, weight_from_json, weight_to_json

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "ConfigError",
    "EXPERIMENT_KINDS",
    "run",
    "emit",
    "selftest_report",
    "wasserstein_lp_oracle",
    "measure_selftest_checks",
]

Z99 = 2.5758293035489004

EXPERIMENT_KINDS = (
    "tree-convergence",
    "tree-variational",
    "lattice-supercritical-zero",
    "lattice-length-ratio",
    "concavity-derivative",
    "measure-selftest",
)

_TREE_KINDS = {"tree-convergence", "tree-variational"}
_LATTICE_KINDS = {"lattice-supercritical-zero", "lattice-length-ratio"}

# Calibration constants for statistical verdicts. The limit statements fix
# only directions; the numeric levels below were calibrated on desk-scale
# runs (d=2, default seeds) and are echoed into every report.
DEFAULT_THRESHOLDS: dict[str, dict[str, float]] = {
    "tree-convergence": {"final_mean_w": 0.08},
    "tree-variational": {"ci_half_width": 0.02},
    "lattice-supercritical-zero": {"final_zero_fraction": 0.95},
    "lattice-length-ratio": {},
    "concavity-derivative": {"derivative_gap": 1e-4, "midpoint_tol": 1e-9},
    "measure-selftest": {},
}


class ConfigError(ValueError):
    """Invalid experiment config; lists every violated field."""

    def __init__(self, violations: list[str]):
        super().__init__("invalid experiment config:\n  - " + "\n  - ".join(violations))
        self.violations = violations


@dataclass
class ExperimentConfig:
    kind: str
    weight_spec: dict = field(default_factory=lambda: {"kind": "analytic", "name": "uniform"})
    d: int = 2
    n_list: tuple = (20,)
    xi: tuple = (1.0, 0.0)
    replicas: int = 2
    seed: int = 0
    box_factor: float = 2.0
    output_dir: str = "fpp-lab-out"
    psi_spec: dict | None = None
    h_grid: tuple = tuple(round(0.1 * k, 10) for k in range(1, 11))
    budget: int | None = None
    thresholds: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError([f"unknown field {k!r}" for k in sorted(unknown)])
        cfg = cls(**{k: v for k, v in obj.items()})
        cfg.normalize()
        cfg.validate()
        return cfg

    def normalize(self) -> None:
        self.n_list = tuple(self.n_list)
        self.xi = tuple(float(c) for c in self.xi)
        self.h_grid = tuple(float(h) for h in self.h_grid)
        merged = dict(DEFAULT_THRESHOLDS.get(self.kind, {}))
        merged.update(self.thresholds or {})
        self.thresholds = merged

    def validate(self) -> None:
        errors: list[str] = []
        if self.kind not in EXPERIMENT_KINDS:
            errors.append(f"kind: {self.kind!r} is not one of {list(EXPERIMENT_KINDS)}")
            raise ConfigError(errors)
        try:
            weight_from_json(self.weight_spec)
        except Exception as exc:  # noqa: BLE001 - reported as a field violation
            errors.append(f"weight_spec: {exc}")
        if self.psi_spec is not None:
            try:
                weight_from_json(self.psi_spec)
            except Exception as exc:  # noqa: BLE001
                errors.append(f"psi_spec: {exc}")
        if not isinstance(self.d, int) or self.d < 2:
            errors.append(f"d: must be an integer >= 2 (got {self.d!r})")
        if self.kind != "measure-selftest":
            if not self.n_list:
                errors.append("n_list: must be nonempty")
            elif any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
                errors.append(f"n_list: must be strictly increasing (got {list(self.n_list)})")
            elif any(n <= 0 for n in self.n_list):
                errors.append("n_list: entries must be positive")
            elif self.kind in _TREE_KINDS and any(int(n) != n for n in self.n_list):
                errors.append("n_list: tree experiments require integer depths")
        if self.kind in _LATTICE_KINDS or self.kind == "concavity-derivative":
            norm = math.sqrt(sum(c * c for c in self.xi))
            if len(self.xi) != self.d:
                errors.append(f"xi: must have {self.d} coordinates")
            elif abs(norm - 1.0) > 1e-9:
                errors.append(f"xi: must be a unit vector (norm={norm!r})")
        min_replicas = 2 if self.kind in (*_TREE_KINDS, *_LATTICE_KINDS, "concavity-derivative") else 1
        if not isinstance(self.replicas, int) or self.replicas < min_replicas:
            errors.append(f"replicas: must be an integer >= {min_replicas} for kind {self.kind!r}")
        if not isinstance(self.seed, int):
            errors.append("seed: must be an integer")
        if self.box_factor < 1.0:
            errors.append(f"box_factor: must be >= 1 (got {self.box_factor!r})")
        if self.kind == "concavity-derivative":
            if len(self.h_grid) < 2:
                errors.append("h_grid: need at least two points")
            elif any(b <= a for a, b in zip(self.h_grid, self.h_grid[1:])):
                errors.append("h_grid: must be strictly increasing")
            elif any(h < 0 for h in self.h_grid):
                errors.append("h_grid: lattice probes require nonnegative h")
        if self.budget is not None and (not isinstance(self.budget, int) or self.budget < 1):
            errors.append("budget: must be a positive integer")
        if errors:
            raise ConfigError(errors)

    def tau(self) -> WeightFunction:
        return weight_from_json(self.weight_spec)

    def psi(self) -> WeightFunction:
        return weight_from_json(self.psi_spec) if self.psi_spec else constant(1.0)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "weight_spec": self.weight_spec,
            "d": self.d,
            "n_list": list(self.n_list),
            "xi": list(self.xi),
            "replicas": self.replicas,
            "seed": self.seed,
            "box_factor": self.box_factor,
            "output_dir": str(self.output_dir),
            "psi_spec": self.psi_spec,
            "h_grid": list(self.h_grid),
            "budget": self.budget,
            "thresholds": self.thresholds,
        }


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    aggregates: list[dict]
    verdicts: list[dict]
    extras: dict = field(default_factory=dict)
    telemetry: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v["passed"] for v in self.verdicts)

    def payload(self) -> dict:
        """The deterministic report body (telemetry stays out)."""
        return {
            "kind": self.kind,
            "config": self.config,
            "aggregates": self.aggregates,
            "verdicts": self.verdicts,
            "extras": self.extras,
        }


def _verdict(rule: str, passed: bool, detail: str) -> dict:
    return {"rule": rule, "passed": bool(passed), "detail": detail}


def _canonical(obj: Any) -> Any:
    """Round floats to 12 significant digits, recursively (byte-stable output)."""
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return repr(obj)
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.floating,)):
        return _canonical(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _ci(values: np.ndarray) -> tuple[float, float, float, float]:
    mean = float(values.mean())
    sd = float(values.std(ddof=1)) if values.size > 1 else 0.0
    half = Z99 * sd / math.sqrt(values.size) if values.size > 1 else 0.0
    return mean, sd, mean - half, mean + half


# ---------------------------------------------------------------------------
# Workers (top level, picklable)
# ---------------------------------------------------------------------------


def _tree_conv_worker(args):
    d, seed, tau, n, budget, target = args
    env = tr.TreeEnvironment(d, seed, tau, max_depth=max(n, 1))
    try:
        record = tr.tree_minimum(env, n, budget=budget)
    except tr.BudgetExceededError:
        return None
    return wasserstein(record.nu_hat(), target)


def _lattice_zero_worker(args):
    dimension, seed, tau, n, xi, box_factor = args
    env = lat.LatticeEnvironment(dimension, seed, tau, lat.BoxSpec(expansion_factor=box_factor))
    _, rec = lat.passage_time_to_direction(env, n, xi)
    zero_fraction = rec.zero_count / rec.length if rec.length else 0.0
    return zero_fraction, rec.boundary_touched


def _lattice_ratio_worker(args):
    dimension, seed, tau, n, xi, box_factor = args
    env = lat.LatticeEnvironment(dimension, seed, tau, lat.BoxSpec(expansion_factor=box_factor))
    t, rec = lat.passage_time_to_direction(env, n, xi)
    mean_weight = float(np.mean(rec.weights)) if rec.length else 0.0
    return t / n, rec.length / n, mean_weight, rec.boundary_touched


# ---------------------------------------------------------------------------
# Experiment implementations
# ---------------------------------------------------------------------------


def _run_tree_convergence(cfg: ExperimentConfig, threads: int) -> ExperimentReport:
    tau = cfg.tau()
    minimizer = va.solve_minimizer(tau, cfg.d)
    target = minimizer.pushforward_measure(tau)
    aggregates = []
    means = []
    for n in cfg.n_list:
        n = int(n)
        # one seed per replica, shared across n: coupled environments make
        # the n-trend a paired comparison
        jobs = [
            (cfg.d, rng.derive_seed(cfg.seed, i), tau, n, cfg.budget, target)
            for i in range(cfg.replicas)
        ]
        results = parallel_map(_tree_conv_worker, jobs, threads=threads)
        ws = np.array([w for w in results if w is not None])
        failures = sum(1 for w in results if w is None)
        mean, sd, lo, hi = _ci(ws)
        means.append(mean)
        aggregates.append(
            {
                "n": n,
                "mean_w": mean,
                "sd_w": sd,
                "ci_lo": lo,
                "ci_hi": hi,
                "replicas": cfg.replicas,
                "failures": failures,
            }
        )
    decreasing = all(b < a for a, b in zip(means, means[1:]))
    threshold = cfg.thresholds["final_mean_w"]
    verdicts = [
        _verdict(
            "tree-convergence.mean-w-strictly-decreasing",
            decreasing,
            f"mean W over n_list: {[f'{m:.4f}' for m in means]}",
        ),
        _verdict(
            "tree-convergence.final-mean-w-threshold",
            means[-1] <= threshold,
            f"mean W at n={cfg.n_list[-1]} is {means[-1]:.4f} (calibrated threshold {threshold})",
        ),
    ]
    extras = {"minimizer": minimizer.to_json(), "target_atoms": len(target.locations)}
    return ExperimentReport(cfg.kind, cfg.to_json(), aggregates, verdicts, extras)


def _run_tree_variational(cfg: ExperimentConfig, threads: int) -> ExperimentReport:
    tau = cfg.tau()
    tc = va.tree_time_constant(tau, cfg.d)
    aggregates = []
    verdicts = []
    for n in cfg.n_list:
        n = int(n)
        mc = tr.tree_min_monte_carlo(
            cfg.d, tau, n, cfg.replicas, seed=cfg.seed, budget=cfg.budget, threads=threads
        )
        lo, hi = mc.ci99
        aggregates.append(
            {
                "n": n,
                "mean": mc.mean,
                "sd": mc.sd,
                "ci_lo": lo,
                "ci_hi": hi,
                "mu": tc.mu,
                "replicas": cfg.replicas,
                "failures": mc.failures,
            }
        )
    final = aggregates[-1]
    half = 0.5 * (final["ci_hi"] - final["ci_lo"])
    max_half = cfg.thresholds["ci_half_width"]
    verdicts.append(
        _verdict(
            "tree-variational.mu-inside-ci",
            final["ci_lo"] <= tc.mu <= final["ci_hi"],
            f"mu={tc.mu:.6f}, CI99 of T_n/n at n={final['n']} is [{final['ci_lo']:.6f}, {final['ci_hi']:.6f}]",
        )
    )
    verdicts.append(
        _verdict(
            "tree-variational.ci-half-width",
            half <= max_half,
            f"CI half-width {half:.6f} (required <= {max_half})",
        )
    )
    return ExperimentReport(cfg.kind, cfg.to_json(), aggregates, verdicts, {"optimizer": tc.to_json()})


def _run_lattice_supercritical_zero(cfg: ExperimentConfig, threads: int) -> ExperimentReport:
    tau = cfg.tau()
    aggregates = []
    means = []
    for n in cfg.n_list:
        jobs = [
            (cfg.d, rng.derive_seed(cfg.seed, i), tau, float(n), cfg.xi, cfg.box_factor)
            for i in range(cfg.replicas)
        ]
        results = parallel_map(_lattice_zero_worker, jobs, threads=threads)
        fratios = np.array([z for z, _ in results])
        boundary = sum(1 for _, b in results if b)
        mean, sd, lo, hi = _ci(fratios)
        means.append(mean)
        aggregates.append(
            {
                "n": float(n),
                "mean_zero_fraction": mean,
                "sd": sd,
                "ci_lo": lo,
                "ci_hi": hi,
                "replicas": cfg.replicas,
                "boundary_touched": boundary,
            }
        )
    increasing = all(b > a for a, b in zip(means, means[1:]))
    threshold = cfg.thresholds["final_zero_fraction"]
    f0 = tau.summarize().f0
    verdicts = [
        _verdict(
            "lattice-supercritical-zero.mean-increasing",
            increasing,
            f"mean zero-weight fraction over n_list: {[f'{m:.4f}' for m in means]}",
        ),
        _verdict(
            "lattice-supercritical-zero.final-threshold",
            means[-1] >= threshold,
            f"mean fraction at n={cfg.n_list[-1]} is {means[-1]:.4f} (calibrated threshold {threshold})",
        ),
    ]
    return ExperimentReport(cfg.kind, cfg.to_json(), aggregates, verdicts, {"f0": f0})


def _run_lattice_length_ratio(cfg: ExperimentConfig, threads: int) -> ExperimentReport:
    tau = cfg.tau()
    aggregates = []
    final_stats = None
    for n in cfg.n_list:
        jobs = [
            (cfg.d, rng.derive_seed(cfg.seed, i), tau, float(n), cfg.xi, cfg.box_factor)
            for i in range(cfg.replicas)
        ]
        results = parallel_map(_lattice_ratio_worker, jobs, threads=threads)
        t_over_n = np.array([r[0] for r in results])
        len_over_n = np.array([r[1] for r in results])
        mean_weights = np.array([r[2] for r in results])
        mu_hat = float(t_over_n.mean())
        mean_w = float(mean_weights.mean())
        prediction = mu_hat / mean_w if mean_w > 0 else math.inf
        delta = float(len_over_n.mean()) - prediction
        # bootstrap CI over replicas for the plug-in difference
        gen = np.random.default_rng(rng.derive_seed(cfg.seed, int(1000 * n), tag=97))
        boots = []
        r = len(results)
        for _ in range(2000):
            idx = gen.integers(0, r, size=r)
            m_t = t_over_n[idx].mean()
            m_w = mean_weights[idx].mean()
            boots.append(len_over_n[idx].mean() - (m_t / m_w if m_w > 0 else math.inf))
        lo, hi = np.quantile(boots, [0.005, 0.995])
        stats = {
            "n": float(n),
            "mean_length_ratio": float(len_over_n.mean()),
            "mu_hat": mu_hat,
            "mean_weight": mean_w,
            "ratio_prediction": prediction,
            "delta": delta,
            "delta_ci_lo": float(lo),
            "delta_ci_hi": float(hi),
            "replicas": cfg.replicas,
        }
        aggregates.append(stats)
        final_stats = stats
    verdicts = [
        _verdict(
            "lattice-length-ratio.identity-within-ci",
            final_stats["delta_ci_lo"] <= 0.0 <= final_stats["delta_ci_hi"],
            (
                f"at n={final_stats['n']}: mean |g|/n={final_stats['mean_length_ratio']:.4f}, "
                f"mu_hat/<t,nu_bar>={final_stats['ratio_prediction']:.4f}, "
                f"delta CI99 [{final_stats['delta_ci_lo']:.4f}, {final_stats['delta_ci_hi']:.4f}]"
            ),
        )
    ]
    return ExperimentReport(cfg.kind, cfg.to_json(), aggregates, verdicts)


def _run_concavity_derivative(cfg: ExperimentConfig, threads: int) -> ExperimentReport:
    tau = cfg.tau()
    psi = cfg.psi()
    gap_tol = cfg.thresholds["derivative_gap"]
    mid_tol = cfg.thresholds["midpoint_tol"]
    tree_report = va.tree_derivative_identity(tau, psi, cfg.d, cfg.h_grid, midpoint_tol=mid_tol)
    n = float(cfg.n_list[-1])
    lattice_report = va.lattice_concavity_probe(
        cfg.d,
        cfg.xi,
        tau,
        psi,
        cfg.h_grid,
        n,
        cfg.replicas,
        seed=cfg.seed,
        box_factor=cfg.box_factor,
        threads=threads,
    )
    aggregates = []
    for h, f, fd, ip in zip(
        tree_report.h_grid, tree_report.f_values, tree_report.fd_values, tree_report.inner_products
    ):
        aggregates.append({"side": "tree", "h": h, "f": f, "f_fd": fd, "inner_product": ip, "ci_half": 0.0})
    for h, f, c in zip(lattice_report.h_grid, lattice_report.f_values, lattice_report.ci_half):
        aggregates.append({"side": "lattice", "h": h, "f": f, "f_fd": math.nan, "inner_product": math.nan, "ci_half": c})
    verdicts = [
        _verdict(
            "concavity-derivative.tree-midpoint-concavity",
            tree_report.midpoint_violations == 0,
            f"{tree_report.midpoint_violations} violations beyond {mid_tol} on {len(tree_report.h_grid)} grid points",
        ),
        _verdict(
            "concavity-derivative.tree-derivative-identity",
            tree_report.max_derivative_gap <= gap_tol,
            f"max |f'_FD - <psi, minimizer>| = {tree_report.max_derivative_gap:.2e} (tol {gap_tol})",
        ),
        _verdict(
            "concavity-derivative.lattice-coupled-monotonicity",
            lattice_report.extras["monotone_violations"] == 0,
            f"{lattice_report.extras['monotone_violations']} sample-wise monotonicity violations",
        ),
        _verdict(
            "concavity-derivative.lattice-midpoint-concavity",
            lattice_report.midpoint_violations == 0,
            f"{lattice_report.midpoint_violations} midpoint violations beyond CI overlap",
        ),
    ]
    extras = {
        "tree_excluded_h": list(tree_report.excluded_h),
        "lattice_slopes": lattice_report.extras["slopes"],
    }
    return ExperimentReport(cfg.kind, cfg.to_json(), aggregates, verdicts, extras)


# ---------------------------------------------------------------------------
# Measures selftest: the oracle suite as a runnable experiment
# ---------------------------------------------------------------------------


def wasserstein_lp_oracle(a: DiscreteMeasure, b: DiscreteMeasure) -> float:
    """Brute-force optimal transport by linear programming over all plans.

    Independent of the quantile-merge implementation; exact simplex solve
    of min <|s-t|, P> subject to the marginal constraints.
    """
    from scipy.optimize import linprog

    xs = a.locations
    ys = b.locations
    wa = a.masses / a.total_mass
    wb = b.masses / b.total_mass
    cost = np.abs(xs[:, None] - ys[None, :]).ravel()
    n, m = xs.size, ys.size
    a_eq = []
    b_eq = []
    for i in range(n):
        row = np.zeros(n * m)
        row[i * m : (i + 1) * m] = 1.0
        a_eq.append(row)
        b_eq.append(wa[i])
    for j in range(m - 1):  # last column constraint is redundant
        row = np.zeros(n * m)
        row[j::m] = 1.0
        a_eq.append(row)
        b_eq.append(wb[j])
    res = linprog(cost, A_eq=np.array(a_eq), b_eq=np.array(b_eq), bounds=(0, None), method="highs-ds")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


def _random_prob_measure(gen: np.random.Generator, max_atoms: int = 5) -> DiscreteMeasure:
    k = int(gen.integers(1, max_atoms + 1))
    locs = gen.random(k)
    masses = gen.random(k) + 0.05
    return DiscreteMeasure(locs, masses / masses.sum())


def measure_selftest_checks(seed: int, lp_pairs: int = 200) -> list[dict]:
    """Exact oracle checks for the measure operations; returns check rows."""
    gen = np.random.default_rng(seed)
    rows: list[dict] = []

    err = 0.0
    for _ in range(lp_pairs):
        a = _random_prob_measure(gen)
        b = _random_prob_measure(gen)
        err = max(err, abs(wasserstein(a, b) - wasserstein_lp_oracle(a, b)))
    rows.append({"check": "wasserstein-vs-lp-oracle", "cases": lp_pairs, "max_error": err, "passed": err <= 1e-10})

    sym_err = 0.0
    tri_err = 0.0
    tv_gap = 0.0
    for _ in range(200):
        a, b, c = (_random_prob_measure(gen) for _ in range(3))
        sym_err = max(sym_err, abs(wasserstein(a, b) - wasserstein(b, a)))
        tri_err = max(tri_err, wasserstein(a, c) - (wasserstein(a, b) + wasserstein(b, c)))
        tv_gap = max(tv_gap, wasserstein(a, b) - total_variation(a, b))
    rows.append({"check": "wasserstein-symmetry", "cases": 200, "max_error": sym_err, "passed": sym_err == 0.0})
    rows.append({"check": "wasserstein-triangle", "cases": 200, "max_error": max(tri_err, 0.0), "passed": tri_err <= 1e-12})
    rows.append({"check": "wasserstein-below-tv", "cases": 200, "max_error": max(tv_gap, 0.0), "passed": tv_gap <= 1e-12})

    # shared-atom total variation bound
    bound_gap = 0.0
    for _ in range(200):
        i, j, k = (int(gen.integers(0, 6)) for _ in range(3))
        k = max(k, 1 if (i == 0 or j == 0) else k)
        shared = gen.random(k) if k else np.array([])
        va_ = np.concatenate([gen.random(i), shared])
        vb = np.concatenate([gen.random(j), shared])
        if va_.size == 0 or vb.size == 0:
            continue
        s1 = DiscreteMeasure.from_samples(va_)
        s2 = DiscreteMeasure.from_samples(vb)
        tv = total_variation(s1, s2)
        bound = k * abs(1.0 / (i + k) - 1.0 / (j + k)) + i / (i + k) + j / (j + k)
        bound_gap = max(bound_gap, 2 * tv - bound)
    rows.append({"check": "tv-shared-atom-bound", "cases": 200, "max_error": max(bound_gap, 0.0), "passed": bound_gap <= 1e-12})

    d0 = DiscreteMeasure.point(0.0)
    d1 = DiscreteMeasure.point(1.0)
    exact = (
        wasserstein(d0, d0) == 0.0
        and wasserstein(d0, d1) == 1.0
        and wasserstein_extended(DiscreteMeasure.point(0.0, 2.0), d1) == 2.0
        and total_variation(d0, d1) == 1.0
    )
    rows.append({"check": "metric-trivial-values", "cases": 4, "max_error": 0.0 if exact else 1.0, "passed": exact})

    grid = Grid.midpoint(4096)
    kl0 = kl_divergence(GriddedDensity.uniform(grid))
    two = np.where(grid.nodes < 0.5, 2.0, 0.0)
    kl2 = kl_divergence(GriddedDensity(grid, two))
    kl_err = max(abs(kl0), abs(kl2 - math.log(2.0)))
    rows.append({"check": "kl-closed-forms", "cases": 2, "max_error": kl_err, "passed": kl_err <= 1e-12})

    # merging atoms of equal image regroups the float sums, so the transfer
    # identity holds at ulp scale rather than bitwise
    push_err = 0.0
    tau = weight_from_json({"kind": "piecewise", "probs": [0.3, 0.3, 0.4], "values": [0.0, 0.5, 2.0]})
    for _ in range(50):
        m = _random_prob_measure(gen)
        lhs = pushforward(m, tau).integrate(lambda t: t * t + 1.0)
        rhs = m.integrate(lambda u: tau(u) ** 2 + 1.0)
        push_err = max(push_err, abs(lhs - rhs))
    rows.append({"check": "pushforward-integrate-identity", "cases": 50, "max_error": push_err, "passed": push_err <= 1e-12})

    plus_err = 0.0
    for _ in range(50):
        m = _random_prob_measure(gen)
        vals = tau.apply(m.locations)
        kept = vals != 0.0
        expected_mass = float(m.masses[kept].sum())
        got = pushforward_positive(m, tau).total_mass
        plus_err = max(plus_err, abs(got - expected_mass))
    rows.append({"check": "positive-pushforward-mass", "cases": 50, "max_error": plus_err, "passed": plus_err <= 1e-12})
    return rows


def _run_measure_selftest(cfg: ExperimentConfig, threads: int) -> ExperimentReport:
    rows = measure_selftest_checks(cfg.seed)
    verdicts = [
        _verdict(f"measure-selftest.{r['check']}", r["passed"], f"{r['cases']} cases, max error {r['max_error']:.3g}")
        for r in rows
    ]
    return ExperimentReport(cfg.kind, cfg.to_json(), rows, verdicts)


_RUNNERS = {
    "tree-convergence": _run_tree_convergence,
    "tree-variational": _run_tree_variational,
    "lattice-supercritical-zero": _run_lattice_supercritical_zero,
    "lattice-length-ratio": _run_lattice_length_ratio,
    "concavity-derivative": _run_concavity_derivative,
    "measure-selftest": _run_measure_selftest,
}


def run(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Execute one experiment; deterministic given (config, seed)."""
    config.normalize()
    config.validate()
    t0 = time.perf_counter()
    report = _RUNNERS[config.kind](config, threads)
    report.telemetry = {"wall_seconds": time.perf_counter() - t0, "threads": threads}
    return report


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------


def _csv_cell(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


# canonical aggregate columns per kind, used for header-only CSVs
_AGGREGATE_COLUMNS = {
    "tree-convergence": ["n", "mean_w", "sd_w", "ci_lo", "ci_hi", "replicas", "failures"],
    "tree-variational": ["n", "mean", "sd", "ci_lo", "ci_hi", "mu", "replicas", "failures"],
    "lattice-supercritical-zero": ["n", "mean_zero_fraction", "sd", "ci_lo", "ci_hi", "replicas", "boundary_touched"],
    "lattice-length-ratio": [
        "n", "mean_length_ratio", "mu_hat", "mean_weight", "ratio_prediction",
        "delta", "delta_ci_lo", "delta_ci_hi", "replicas",
    ],
    "concavity-derivative": ["side", "h", "f", "f_fd", "inner_product", "ci_half"],
    "measure-selftest": ["check", "cases", "max_error", "passed"],
    "selftest": ["check", "cases", "max_error", "passed"],
}


def emit(report: ExperimentReport, out_dir, formats: Sequence[str] = ("csv", "json")) -> list[Path]:
    """Write report artifacts with byte-stable formatting.

    report.json carries the deterministic payload (sorted keys, floats at 12
    significant digits); aggregates.csv the per-n table; telemetry.json the
    wall-clock sidecar, which is intentionally not deterministic.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if "json" in formats:
        path = out / "report.json"
        payload = _canonical(report.payload())
        path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
        written.append(path)
    if "csv" in formats:
        path = out / "aggregates.csv"
        rows = report.aggregates
        cols = list(rows[0].keys()) if rows else _AGGREGATE_COLUMNS.get(report.kind, ["value"])
        lines = [",".join(cols)]
        lines += [",".join(_csv_cell(_canonical(r.get(c))) for c in cols) for r in rows]
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
        vpath = out / "verdicts.csv"
        vlines = ["rule,passed,detail"]
        for v in report.verdicts:
            detail = v["detail"].replace(",", ";")
            vlines.append(f"{v['rule']},{_csv_cell(v['passed'])},{detail}")
        vpath.write_text("\n".join(vlines) + "\n")
        written.append(vpath)
    tpath = out / "telemetry.json"
    tpath.write_text(json.dumps(report.telemetry, sort_keys=True, indent=2) + "\n")
    return written


# ---------------------------------------------------------------------------
# Package selftest: measure oracles plus small search-oracle equivalences
# ---------------------------------------------------------------------------


def selftest_report(seed: int = 2024, threads: int = 1) -> ExperimentReport:
    """Measure oracle suite plus small lattice and tree oracle equivalences."""
    cfg = ExperimentConfig(kind="measure-selftest", seed=seed)
    cfg.normalize()
    report = _run_measure_selftest(cfg, threads)

    tau = weight_from_json({"kind": "analytic", "name": "uniform"})
    worst = 0.0
    for s in range(10):
        env = lat.LatticeEnvironment(2, rng.derive_seed(seed, s, tag=11), tau, lat.BoxSpec(half_width=1))
        for target in [(1, 1), (1, 0), (-1, -1), (0, 1)]:
            t_fast, _ = lat.passage_time(env, (0, 0), target)
            t_slow, _, _, _ = lat.brute_force_passage(env, (0, 0), target, 1)
            worst = max(worst, abs(t_fast - t_slow))
    report.aggregates.append({"check": "lattice-dijkstra-vs-enumeration", "cases": 40, "max_error": worst, "passed": worst < 1e-12})
    report.verdicts.append(
        _verdict("selftest.lattice-dijkstra-vs-enumeration", worst < 1e-12, f"3x3 boxes, 10 seeds, max error {worst:.3g}")
    )

    worst_tree = 0.0
    for s in range(10):
        env = tr.TreeEnvironment(2, rng.derive_seed(seed, s, tag=13), tau)
        a = tr.tree_minimum(env, 8)
        b = tr.enumerate_minimum(env, 8)
        worst_tree = max(worst_tree, abs(a.value - b.value) + (0.0 if a.leaf == b.leaf else 1.0))
    report.aggregates.append({"check": "tree-bb-vs-enumeration", "cases": 10, "max_error": worst_tree, "passed": worst_tree == 0.0})
    report.verdicts.append(
        _verdict("selftest.tree-bb-vs-enumeration", worst_tree == 0.0, f"depth 8, 10 seeds, max error {worst_tree:.3g}")
    )
    report.kind = "selftest"
    return report
