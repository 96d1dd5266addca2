"""Coupling functions tau: [0,1] -> [0, inf) and their perturbations.

A weight law is realized by composing a measurable function tau with uniform
variates: the edge (or vertex) weight is tau(U). Variants cover piecewise
constant atomic laws built from an interval partition, truncated countable
atomic laws, named analytic closed forms, quantile functions of piecewise
linear distribution functions, and additive shifts that act either
everywhere or only on the positive part (preserving the zero set exactly).

All evaluation goes through a single vectorized code path, so scalar and
array queries agree bitwise. Zero weights are always encoded as exact 0.0,
which keeps zero-edge counts and positive-part pushforwards unambiguous.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "WeightFunction",
    "PiecewiseConstant",
    "CountableAtoms",
    "Analytic",
    "InverseCdf",
    "Shifted",
    "Combined",
    "PositivePart",
    "WeightLawSummary",
    "evaluate",
    "summarize",
    "exact_atom_law",
    "shift",
    "scaled",
    "positive_indicator",
    "constant",
    "dense_rational_atoms",
    "weight_to_json",
    "weight_from_json",
]

_CONSTRUCTION_GRID = 100_000
DEFAULT_CAP = 1e9


@dataclass(frozen=True)
class WeightLawSummary:
    """Structural facts about the law of tau(U).

    ``f0`` is the probability of {tau = 0}, ``ess_inf`` the (grid or exact)
    essential infimum, ``atom_at_ess_inf`` its mass. ``gap_above_zero`` flags
    an interval (0, c) empty of support while mass exists at or above c.
    ``resolution`` is 0 for exact summaries, else the scan-grid spacing.
    """

    f0: float
    ess_inf: float
    atom_at_ess_inf: float
    gap_above_zero: bool
    estimated: bool
    resolution: float = 0.0


class WeightFunction:
    """Base class: deterministic map from [0,1] to weight values."""

    def _apply(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.size and (u.min() < 0.0 or u.max() > 1.0):
            raise ValueError("arguments to a weight function must lie in [0, 1]")
        return self._apply(u)

    def __call__(self, u: float) -> float:
        return float(self.apply(np.array([u], dtype=np.float64))[0])

    def lower_bound(self) -> float:
        """A true lower bound on the values of tau (used for search pruning)."""
        raise NotImplementedError

    def upper_bound(self) -> float:
        return math.inf

    def breakpoints(self) -> tuple[float, ...]:
        """Interior u-values where tau jumps; quadrature grids refine here."""
        return ()

    def summarize(self, grid_size: int = _CONSTRUCTION_GRID) -> WeightLawSummary:
        return _grid_summary(self, grid_size)

    def to_json(self) -> dict:
        raise TypeError(f"{type(self).__name__} has no JSON weight-spec form")


def _check_nonnegative_on_grid(tau: WeightFunction, grid_size: int = _CONSTRUCTION_GRID) -> None:
    u = np.linspace(0.0, 1.0, grid_size)
    vals = tau.apply(u)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ValueError("weight function must be nonnegative and finite on [0, 1]")


def _atom_summary(values: np.ndarray, probs: np.ndarray) -> WeightLawSummary:
    f0 = float(probs[values == 0.0].sum())
    support = values[probs > 0]
    sup_probs = probs[probs > 0]
    ess_inf = float(support.min())
    atom = float(sup_probs[support == ess_inf].sum())
    positive = support[support > 0]
    gap = positive.size > 0 and float(positive.min()) > 0.0
    return WeightLawSummary(f0, ess_inf, atom, gap, estimated=False)


class PiecewiseConstant(WeightFunction):
    """Constant on each interval of the partition induced by ``probs``.

    Interval i is [sum(probs[:i]), sum(probs[:i+1])) and carries values[i];
    a zero atom must be given as exact 0.0. Probabilities must sum to 1.
    """

    def __init__(self, probs: Sequence[float], values: Sequence[float]):
        probs_a = np.asarray(probs, dtype=np.float64)
        values_a = np.asarray(values, dtype=np.float64)
        if probs_a.ndim != 1 or probs_a.shape != values_a.shape or probs_a.size == 0:
            raise ValueError("probs and values must be matching nonempty sequences")
        if np.any(probs_a < 0):
            raise ValueError("interval probabilities must be nonnegative")
        total = probs_a.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"interval probabilities must sum to 1 (got {total!r})")
        if np.any(values_a < 0) or not np.all(np.isfinite(values_a)):
            raise ValueError("piecewise values must be nonnegative and finite")
        self.probs = probs_a / total
        self.values = values_a
        self._cum = np.cumsum(self.probs)
        self._cum[-1] = 1.0

    def _apply(self, u: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self._cum, u, side="right")
        idx = np.minimum(idx, self.values.size - 1)
        return self.values[idx]

    def lower_bound(self) -> float:
        return float(self.values[self.probs > 0].min())

    def upper_bound(self) -> float:
        return float(self.values[self.probs > 0].max())

    def breakpoints(self) -> tuple[float, ...]:
        return tuple(c for c in self._cum[:-1] if 0.0 < c < 1.0)

    def summarize(self, grid_size: int = _CONSTRUCTION_GRID) -> WeightLawSummary:
        return _atom_summary(self.values, self.probs)

    def atom_law(self) -> list[tuple[float, float]]:
        """The law of tau(U) as merged (value, probability) atoms."""
        out: dict[float, float] = {}
        for v, p in zip(self.values, self.probs):
            if p > 0:
                out[float(v)] = out.get(float(v), 0.0) + float(p)
        return sorted(out.items())

    def to_json(self) -> dict:
        return {"kind": "piecewise", "probs": [float(p) for p in self.probs], "values": [float(v) for v in self.values]}


def constant(c: float) -> PiecewiseConstant:
    """The constant weight function tau = c."""
    return PiecewiseConstant([1.0], [c])


class CountableAtoms(WeightFunction):
    """Truncation of a countable atomic law t_i * beta_i on interval I_i.

    The sequences define atom i with probability probs[i-1] and value
    betas[i-1] * ts[i-1]; index 0 is the zero atom with the leftover mass
    1 - sum(probs). Atoms beyond ``truncation`` are folded into the last
    kept atom and the folded probability is reported as ``folded_mass``.
    """

    def __init__(
        self,
        probs: Sequence[float],
        betas: Sequence[float],
        ts: Sequence[float],
        truncation: int = 64,
    ):
        probs_a = np.asarray(probs, dtype=np.float64)
        betas_a = np.asarray(betas, dtype=np.float64)
        ts_a = np.asarray(ts, dtype=np.float64)
        if not (probs_a.shape == betas_a.shape == ts_a.shape) or probs_a.ndim != 1 or probs_a.size == 0:
            raise ValueError("probs, betas, ts must be matching nonempty sequences")
        if np.any(probs_a <= 0) or np.any(probs_a >= 1):
            raise ValueError("atom probabilities must lie in (0, 1)")
        total = probs_a.sum()
        if total > 1.0 + 1e-12:
            raise ValueError("atom probabilities must sum to at most 1")
        if truncation < 1:
            raise ValueError("truncation index must be at least 1")
        m = min(truncation, probs_a.size)
        surrogate = float(np.sum(betas_a[:m] / np.log(1.0 / probs_a[:m])))
        if not math.isfinite(surrogate):
            raise ValueError("summability surrogate sum(beta_i / log(1/p_i)) is not finite")
        self.probs = probs_a
        self.betas = betas_a
        self.ts = ts_a
        self.truncation = m
        self.folded_mass = float(probs_a[m:].sum())
        kept_p = probs_a[:m].copy()
        kept_p[-1] += self.folded_mass
        values = betas_a[:m] * ts_a[:m]
        if np.any(values < 0):
            raise ValueError("atom values beta_i * t_i must be nonnegative")
        p0 = 1.0 - float(kept_p.sum())
        if p0 > 1e-15:
            self._pw = PiecewiseConstant(np.concatenate([[p0], kept_p]), np.concatenate([[0.0], values]))
        else:
            self._pw = PiecewiseConstant(kept_p / kept_p.sum(), values)

    def _apply(self, u: np.ndarray) -> np.ndarray:
        return self._pw._apply(u)

    def lower_bound(self) -> float:
        return self._pw.lower_bound()

    def upper_bound(self) -> float:
        return self._pw.upper_bound()

    def breakpoints(self) -> tuple[float, ...]:
        return self._pw.breakpoints()

    def summarize(self, grid_size: int = _CONSTRUCTION_GRID) -> WeightLawSummary:
        return self._pw.summarize(grid_size)

    def atom_law(self) -> list[tuple[float, float]]:
        return self._pw.atom_law()

    def to_json(self) -> dict:
        return {
            "kind": "countable",
            "probs": [float(p) for p in self.probs],
            "betas": [float(b) for b in self.betas],
            "ts": [float(t) for t in self.ts],
            "truncation": int(self.truncation),
        }


def _calkin_wilf(n: int) -> list[Fraction]:
    """First n terms of an enumeration of the positive rationals."""
    out = [Fraction(1, 1)]
    q = Fraction(1, 1)
    for _ in range(n - 1):
        q = 1 / (2 * (q.numerator // q.denominator) - q + 1)
        out.append(q)
    return out


def dense_rational_atoms(zero_mass: float = 0.25, truncation: int = 64, t_value: float = 2.0) -> CountableAtoms:
    """Atomic law whose positive support runs through the rationals.

    beta enumerates the positive rationals, t is the constant sequence
    ``t_value`` (kept within [1, 3]), and the probabilities decay like
    exp(-i^3 / s) with s scaled so the smallest kept mass stays above the
    float64 underflow threshold; the cubic-over-linear decay keeps the
    summability surrogate finite.
    """
    if not 0.0 <= zero_mass < 1.0:
        raise ValueError("zero_mass must lie in [0, 1)")
    if not 1.0 <= abs(t_value) <= 3.0:
        raise ValueError("t_value must have modulus in [1, 3]")
    i = np.arange(1, truncation + 1, dtype=np.float64)
    scale = max(1.0, truncation**3 / 600.0)
    logp = -(i**3) / scale
    p = np.exp(logp - logp.max())
    p = p / p.sum() * (1.0 - zero_mass)
    betas = np.array([float(q) for q in _calkin_wilf(truncation)])
    ts = np.full(truncation, float(t_value))
    return CountableAtoms(p, betas, ts, truncation=truncation)


class _AnalyticSpec:
    def __init__(self, fn, lower: float, upper: float, params: tuple[str, ...] = ()):
        self.fn = fn
        self.lower = lower
        self.upper = upper
        self.params = params


def _exp_quantile(u: np.ndarray, rate: float = 1.0, cap: float = DEFAULT_CAP) -> np.ndarray:
    out = np.full_like(u, cap)
    m = u < 1.0
    out[m] = -np.log1p(-u[m]) / rate
    return out


_ANALYTIC_REGISTRY: dict[str, _AnalyticSpec] = {
    "uniform": _AnalyticSpec(lambda u: u.copy(), 0.0, 1.0),
    "power": _AnalyticSpec(lambda u, k=2.0: u**k, 0.0, 1.0, params=("k",)),
    "affine": _AnalyticSpec(lambda u, a=0.0, b=1.0: a + b * u, 0.0, math.inf, params=("a", "b")),
    # quantile of the exponential law; the value at u = 1 is capped
    "exp": _AnalyticSpec(_exp_quantile, 0.0, math.inf, params=("rate", "cap")),
}


class Analytic(WeightFunction):
    """Named closed-form weight function from the built-in registry."""

    def __init__(self, name: str, **params):
        spec = _ANALYTIC_REGISTRY.get(name)
        if spec is None:
            raise ValueError(f"unknown analytic weight function {name!r}; known: {sorted(_ANALYTIC_REGISTRY)}")
        unknown = set(params) - set(spec.params)
        if unknown:
            raise ValueError(f"unknown parameters for {name!r}: {sorted(unknown)}")
        self.name = name
        self.params = {k: float(v) for k, v in params.items()}
        self._spec = spec
        _check_nonnegative_on_grid(self)

    def _apply(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(self._spec.fn(u, **self.params), dtype=np.float64)

    # registry entries hold lambdas; pickle by (name, params) instead
    def __getstate__(self):
        return {"name": self.name, "params": self.params}

    def __setstate__(self, state):
        self.__init__(state["name"], **state["params"])

    def lower_bound(self) -> float:
        if self.name == "affine":
            a = self.params.get("a", 0.0)
            b = self.params.get("b", 1.0)
            return min(a, a + b)
        return self._spec.lower

    def upper_bound(self) -> float:
        if self.name == "affine":
            a = self.params.get("a", 0.0)
            b = self.params.get("b", 1.0)
            return max(a, a + b)
        if self.name == "exp":
            return self.params.get("cap", DEFAULT_CAP)
        return self._spec.upper

    def to_json(self) -> dict:
        return {"kind": "analytic", "name": self.name, "params": dict(self.params)}


class InverseCdf(WeightFunction):
    """Quantile function of a piecewise-linear distribution function.

    ``cdf_points`` lists (t, F(t)) with both coordinates nondecreasing;
    repeated t values encode atoms, flat F stretches encode support gaps.
    Evaluation uses the right-continuous convention inf{t : F(t) >= u}.
    If F never reaches 1 the law is unbounded and u beyond the last point
    evaluates to ``cap``.
    """

    def __init__(self, cdf_points: Sequence[tuple[float, float]], cap: float = DEFAULT_CAP):
        pts = [(float(t), float(f)) for t, f in cdf_points]
        if not pts:
            raise ValueError("at least one CDF breakpoint is required")
        ts = np.array([t for t, _ in pts])
        fs = np.array([f for _, f in pts])
        if np.any(np.diff(ts) < 0) or np.any(np.diff(fs) < 0):
            raise ValueError("CDF breakpoints must be nondecreasing in t and F")
        if fs[0] < 0 or fs[-1] > 1.0 + 1e-12:
            raise ValueError("CDF values must lie in [0, 1]")
        if ts[0] < 0:
            raise ValueError("support must be nonnegative")
        self.ts = ts
        self.fs = np.minimum(fs, 1.0)
        self.cap = float(cap)
        self.unbounded = bool(self.fs[-1] < 1.0)

    def _apply(self, u: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.fs, u, side="left")
        out = np.empty_like(u)
        low = idx == 0
        high = idx >= self.fs.size
        mid = ~(low | high)
        out[low] = self.ts[0]
        out[high] = self.cap if self.unbounded else self.ts[-1]
        if np.any(mid):
            k = idx[mid]
            f0 = self.fs[k - 1]
            f1 = self.fs[k]
            t0 = self.ts[k - 1]
            t1 = self.ts[k]
            with np.errstate(invalid="ignore", divide="ignore"):
                frac = np.where(f1 > f0, (u[mid] - f0) / (f1 - f0), 1.0)
            out[mid] = t0 + frac * (t1 - t0)
        return out

    def lower_bound(self) -> float:
        return float(self.ts[0])

    def upper_bound(self) -> float:
        return self.cap if self.unbounded else float(self.ts[-1])

    def breakpoints(self) -> tuple[float, ...]:
        return tuple(float(f) for f in self.fs if 0.0 < f < 1.0)

    def to_json(self) -> dict:
        return {
            "kind": "inverse_cdf",
            "breakpoints": [[float(t), float(f)] for t, f in zip(self.ts, self.fs)],
            "cap": self.cap,
        }


class Shifted(WeightFunction):
    """tau + h, either everywhere or only where tau is positive.

    ``add_positive`` mode preserves the zero set exactly: tau(u) = 0 before
    the shift iff after. Values may become negative for h < 0; the lattice
    rejects such environments while the tree permits them.
    """

    MODES = ("add", "add_positive")

    def __init__(self, base: WeightFunction, h: float, mode: str = "add"):
        if mode not in self.MODES:
            raise ValueError(f"mode must be one of {self.MODES}")
        self.base = base
        self.h = float(h)
        self.mode = mode

    def _apply(self, u: np.ndarray) -> np.ndarray:
        v = self.base._apply(u)
        if self.mode == "add":
            return v + self.h
        return np.where(v > 0.0, v + self.h, v)

    def lower_bound(self) -> float:
        lb = self.base.lower_bound()
        if self.mode == "add":
            return lb + self.h
        return min(0.0, lb + self.h)

    def upper_bound(self) -> float:
        ub = self.base.upper_bound()
        return ub + max(self.h, 0.0) if math.isfinite(ub) else ub

    def breakpoints(self) -> tuple[float, ...]:
        return self.base.breakpoints()

    def summarize(self, grid_size: int = _CONSTRUCTION_GRID) -> WeightLawSummary:
        law = exact_atom_law(self)
        if law is None:
            return _grid_summary(self, grid_size)
        values = np.array([v for v, _ in law])
        probs = np.array([p for _, p in law])
        return _atom_summary(values, probs)

    def atom_law(self) -> list[tuple[float, float]]:
        base_law = exact_atom_law(self.base)
        if base_law is None:
            raise TypeError("base weight function has no exact atom law")
        shifted: dict[float, float] = {}
        for v, p in base_law:
            w = v + self.h if (self.mode == "add" or v > 0.0) else v
            shifted[w] = shifted.get(w, 0.0) + p
        return sorted(shifted.items())

    def to_json(self) -> dict:
        return {"kind": "shift", "base": self.base.to_json(), "h": self.h, "mode": self.mode}


class Combined(WeightFunction):
    """Linear pencil tau + h * psi, for derivative and concavity probes."""

    def __init__(self, base: WeightFunction, direction: WeightFunction, h: float):
        self.base = base
        self.direction = direction
        self.h = float(h)

    def _apply(self, u: np.ndarray) -> np.ndarray:
        return self.base._apply(u) + self.h * self.direction._apply(u)

    def lower_bound(self) -> float:
        if self.h >= 0:
            return self.base.lower_bound() + self.h * self.direction.lower_bound()
        ub = self.direction.upper_bound()
        return self.base.lower_bound() + self.h * ub if math.isfinite(ub) else -math.inf

    def upper_bound(self) -> float:
        ub_b = self.base.upper_bound()
        ub_d = self.direction.upper_bound() if self.h >= 0 else self.direction.lower_bound()
        return ub_b + self.h * ub_d if math.isfinite(ub_b) and math.isfinite(ub_d) else math.inf

    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted(set(self.base.breakpoints()) | set(self.direction.breakpoints())))


class PositivePart(WeightFunction):
    """Indicator of {tau > 0}; the direction used by positive-shift probes."""

    def __init__(self, base: WeightFunction):
        self.base = base

    def _apply(self, u: np.ndarray) -> np.ndarray:
        return (self.base._apply(u) > 0.0).astype(np.float64)

    def lower_bound(self) -> float:
        return 0.0

    def upper_bound(self) -> float:
        return 1.0

    def breakpoints(self) -> tuple[float, ...]:
        return self.base.breakpoints()


def _grid_summary(tau: WeightFunction, grid_size: int) -> WeightLawSummary:
    u = np.linspace(0.0, 1.0, grid_size)
    vals = tau.apply(u)
    resolution = 1.0 / (grid_size - 1)
    f0 = float(np.mean(vals == 0.0))
    ess_inf = float(vals.min())
    atom = float(np.mean(vals == ess_inf))
    positive = vals[vals > 0.0]
    gap = positive.size > 0 and float(positive.min()) > 50.0 * resolution
    return WeightLawSummary(f0, ess_inf, atom, gap, estimated=True, resolution=resolution)


# -- module-level operations -------------------------------------------------


def exact_atom_law(tau: WeightFunction) -> list[tuple[float, float]] | None:
    """Merged (value, probability) atoms when the law is exactly atomic, else None."""
    law = getattr(tau, "atom_law", None)
    if law is None:
        return None
    try:
        return law()
    except TypeError:
        return None


def evaluate(tau: WeightFunction, u: float) -> float:
    """Evaluate tau at a point of [0,1]; rejects arguments outside."""
    return tau(u)


def summarize(tau: WeightFunction, grid_size: int = _CONSTRUCTION_GRID) -> WeightLawSummary:
    """Structural summary of the law of tau(U); exact for atomic variants."""
    return tau.summarize(grid_size)


def shift(tau: WeightFunction, h: float, mode: str = "add") -> Shifted:
    return Shifted(tau, h, mode)


def scaled(tau: WeightFunction, c: float) -> Combined:
    """The weight function c * tau."""
    if c < 0:
        raise ValueError("scaling factor must be nonnegative")
    return Combined(constant(0.0), tau, c)


def positive_indicator(tau: WeightFunction) -> PositivePart:
    return PositivePart(tau)


# -- JSON weight-spec schema ---------------------------------------------------


def weight_to_json(tau: WeightFunction) -> dict:
    return tau.to_json()


def weight_from_json(obj: dict) -> WeightFunction:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValueError("weight spec must be an object with a 'kind' field")
    kind = obj["kind"]
    if kind == "piecewise":
        return PiecewiseConstant(obj["probs"], obj["values"])
    if kind == "countable":
        return CountableAtoms(obj["probs"], obj["betas"], obj["ts"], truncation=obj.get("truncation", 64))
    if kind == "analytic":
        return Analytic(obj["name"], **obj.get("params", {}))
    if kind == "inverse_cdf":
        return InverseCdf([(t, f) for t, f in obj["breakpoints"]], cap=obj.get("cap", DEFAULT_CAP))
    if kind == "shift":
        return Shifted(weight_from_json(obj["base"]), obj["h"], obj.get("mode", "add"))
    raise ValueError(f"unknown weight spec kind {kind!r}")
