"""Finite atomic measures on the reals and gridded densities on [0,1].

Atomic measures store sorted, exactly-merged (location, mass) atoms: equal
locations are merged by exact float equality, never by epsilon, so that
zero-weight classification stays bit-exact. Wasserstein distances are
computed from the quantile representation by merging cumulative-mass
breakpoints, with no numeric quadrature.
"""
from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "DiscreteMeasure",
    "Grid",
    "GriddedDensity",
    "wasserstein",
    "wasserstein_extended",
    "total_variation",
    "kl_divergence",
    "pushforward",
    "pushforward_positive",
]

_MASS_TOL = 1e-9


class DiscreteMeasure:
    """Finite nonnegative atomic measure on the reals.

    Atoms are canonicalized at construction: sorted ascending with equal
    locations merged (exact float equality). The zero measure has no atoms.
    Instances are immutable.
    """

    __slots__ = ("locations", "masses", "total_mass")

    def __init__(self, locations: Sequence[float], masses: Sequence[float]):
        loc = np.asarray(locations, dtype=np.float64)
        mas = np.asarray(masses, dtype=np.float64)
        if loc.shape != mas.shape or loc.ndim != 1:
            raise ValueError("locations and masses must be 1-d and equal length")
        if np.any(mas <= 0.0):
            raise ValueError("all atom masses must be positive")
        if loc.size:
            order = np.argsort(loc, kind="stable")
            loc = loc[order]
            mas = mas[order]
            # merge runs of exactly equal locations
            keep = np.empty(loc.size, dtype=bool)
            keep[0] = True
            keep[1:] = loc[1:] != loc[:-1]
            idx = np.flatnonzero(keep)
            merged = np.add.reduceat(mas, idx)
            loc = loc[idx]
            mas = merged
        loc.flags.writeable = False
        mas.flags.writeable = False
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "masses", mas)
        object.__setattr__(self, "total_mass", float(mas.sum()))

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("DiscreteMeasure is immutable")

    def __reduce__(self):
        return (DiscreteMeasure, (np.asarray(self.locations), np.asarray(self.masses)))

    # -- constructors -------------------------------------------------------
    @classmethod
    def zero(cls) -> "DiscreteMeasure":
        return cls([], [])

    @classmethod
    def point(cls, location: float, mass: float = 1.0) -> "DiscreteMeasure":
        return cls([location], [mass])

    @classmethod
    def from_samples(cls, values: Sequence[float], scale: float | None = None) -> "DiscreteMeasure":
        """(1/n)-weighted empirical measure, or atoms of mass 1/scale."""
        vals = np.asarray(values, dtype=np.float64)
        if vals.size == 0:
            return cls.zero()
        w = 1.0 / (len(vals) if scale is None else scale)
        return cls(vals, np.full(vals.size, w))

    # -- basic queries -------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return self.locations.size == 0

    def mass_at(self, location: float) -> float:
        """Mass of the atom exactly at ``location`` (0.0 if absent)."""
        i = np.searchsorted(self.locations, location)
        if i < self.locations.size and self.locations[i] == location:
            return float(self.masses[i])
        return 0.0

    def mass_in(self, lo: float, hi: float) -> float:
        """Mass of the half-open interval [lo, hi)."""
        i = np.searchsorted(self.locations, lo, side="left")
        j = np.searchsorted(self.locations, hi, side="left")
        return float(self.masses[i:j].sum())

    def integrate(self, f: Callable[[float], float]) -> float:
        """Return sum of mass_i * f(location_i)."""
        apply = getattr(f, "apply", None)
        if apply is not None:
            vals = np.asarray(apply(self.locations), dtype=np.float64)
        else:
            vals = np.asarray([f(x) for x in self.locations], dtype=np.float64)
        return float(np.dot(self.masses, vals))

    def normalize(self) -> "DiscreteMeasure":
        """Rescale to a probability measure; the zero measure maps to itself."""
        if self.is_zero:
            return self
        return DiscreteMeasure(self.locations, self.masses / self.total_mass)

    def scaled(self, factor: float) -> "DiscreteMeasure":
        if self.is_zero or factor == 1.0:
            return self if factor == 1.0 else DiscreteMeasure(self.locations, self.masses * factor)
        return DiscreteMeasure(self.locations, self.masses * factor)

    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        return DiscreteMeasure(
            np.concatenate([self.locations, other.locations]),
            np.concatenate([self.masses, other.masses]),
        )

    def allclose(self, other: "DiscreteMeasure", tol: float = 1e-12) -> bool:
        if self.locations.size != other.locations.size:
            return False
        return bool(
            np.allclose(self.locations, other.locations, rtol=0, atol=tol)
            and np.allclose(self.masses, other.masses, rtol=tol, atol=tol)
        )

    def atoms(self) -> list[tuple[float, float]]:
        return [(float(x), float(m)) for x, m in zip(self.locations, self.masses)]

    def __repr__(self) -> str:
        if self.is_zero:
            return "DiscreteMeasure.zero()"
        return f"DiscreteMeasure({self.locations.size} atoms, mass={self.total_mass:.6g})"

    # -- serialization -------------------------------------------------------
    def csv_rows(self) -> list[str]:
        rows = ["location,mass"]
        rows += [f"{x:.12g},{m:.12g}" for x, m in zip(self.locations, self.masses)]
        return rows

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.csv_rows()) + "\n")


def _require_probability(m: DiscreteMeasure, name: str) -> None:
    if abs(m.total_mass - 1.0) > _MASS_TOL:
        raise ValueError(f"{name} must be a probability measure (mass={m.total_mass!r})")


def _quantile_profile(m: DiscreteMeasure) -> tuple[np.ndarray, np.ndarray]:
    """Atom locations and cumulative masses, with the last cum clamped to 1."""
    cum = np.cumsum(m.masses)
    cum[-1] = 1.0
    return m.locations, cum


def wasserstein(a: DiscreteMeasure, b: DiscreteMeasure) -> float:
    """Wasserstein-1 distance between probability measures.

    Computed exactly as the integral of the absolute difference of quantile
    functions, by merging the cumulative-mass breakpoints of both measures.
    Quantiles use the right-continuous inverse inf{t : F(t) >= u}.
    """
    _require_probability(a, "first argument")
    _require_probability(b, "second argument")
    la, ca = _quantile_profile(a)
    lb, cb = _quantile_profile(b)
    cuts = np.union1d(ca, cb)
    prev = 0.0
    total = 0.0
    for c in cuts:
        mid = 0.5 * (prev + c)
        qa = la[np.searchsorted(ca, mid, side="left")]
        qb = lb[np.searchsorted(cb, mid, side="left")]
        total += (c - prev) * abs(qa - qb)
        prev = c
    return total


def wasserstein_extended(a: DiscreteMeasure, b: DiscreteMeasure) -> float:
    """Metric |mass(a) - mass(b)| + W(normalized a, normalized b) on mass >= 1."""
    for m, name in ((a, "first argument"), (b, "second argument")):
        if m.total_mass < 1.0 - _MASS_TOL:
            raise ValueError(f"{name} must have total mass >= 1 (mass={m.total_mass!r})")
    return abs(a.total_mass - b.total_mass) + wasserstein(a.normalize(), b.normalize())


def total_variation(a: DiscreteMeasure, b: DiscreteMeasure) -> float:
    """Total variation distance: half-sum of |mass differences| over atoms."""
    _require_probability(a, "first argument")
    _require_probability(b, "second argument")
    support = np.union1d(a.locations, b.locations)
    pa = np.zeros(support.size)
    pb = np.zeros(support.size)
    ia = np.searchsorted(support, a.locations)
    ib = np.searchsorted(support, b.locations)
    pa[ia] = a.masses
    pb[ib] = b.masses
    return 0.5 * float(np.abs(pa - pb).sum())


def pushforward(m: DiscreteMeasure, tau) -> DiscreteMeasure:
    """Image measure under tau: each atom (u, w) maps to (tau(u), w)."""
    if m.is_zero:
        return m
    return DiscreteMeasure(tau.apply(m.locations), m.masses)


def pushforward_positive(m: DiscreteMeasure, tau) -> DiscreteMeasure:
    """Image measure under tau restricted to {u : tau(u) != 0} (bit-exact test)."""
    if m.is_zero:
        return m
    vals = np.asarray(tau.apply(m.locations), dtype=np.float64)
    keep = vals != 0.0
    if not np.any(keep):
        return DiscreteMeasure.zero()
    return DiscreteMeasure(vals[keep], m.masses[keep])


# ---------------------------------------------------------------------------
# Quadrature grids and densities with respect to Lebesgue measure on [0,1]
# ---------------------------------------------------------------------------


class Grid:
    """Midpoint quadrature nodes on [0,1], refined at supplied breakpoints.

    Each cell between consecutive breakpoints is subdivided into equal
    subcells (at least one), and nodes sit at subcell midpoints with the
    subcell widths as quadrature weights.
    """

    __slots__ = ("nodes", "weights")

    DEFAULT_SIZE = 4096

    def __init__(self, nodes: np.ndarray, weights: np.ndarray):
        nodes = np.asarray(nodes, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        if nodes.shape != weights.shape or nodes.ndim != 1 or nodes.size == 0:
            raise ValueError("nodes and weights must be matching nonempty 1-d arrays")
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be positive")
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __setattr__(self, name, value):  # pragma: no cover
        raise AttributeError("Grid is immutable")

    def __reduce__(self):
        return (Grid, (np.asarray(self.nodes), np.asarray(self.weights)))

    @classmethod
    def midpoint(cls, size: int = DEFAULT_SIZE, breakpoints: Iterable[float] = ()) -> "Grid":
        cuts = sorted({0.0, 1.0, *(float(b) for b in breakpoints if 0.0 < float(b) < 1.0)})
        nodes: list[np.ndarray] = []
        weights: list[np.ndarray] = []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            width = hi - lo
            k = max(1, int(round(size * width)))
            sub = width / k
            nodes.append(lo + (np.arange(k) + 0.5) * sub)
            weights.append(np.full(k, sub))
        return cls(np.concatenate(nodes), np.concatenate(weights))

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    def integrate(self, values: np.ndarray) -> float:
        """Quadrature of node values against Lebesgue measure."""
        return float(np.dot(self.weights, values))

    def __repr__(self) -> str:
        return f"Grid({self.size} nodes)"


class GriddedDensity:
    """Probability density on [0,1] sampled on a quadrature grid.

    Represents measures absolutely continuous with respect to Lebesgue
    measure by their density values at the grid nodes; the quadrature of the
    density must equal 1 within 1e-10.
    """

    __slots__ = ("grid", "values")

    NORMALIZATION_TOL = 1e-10

    def __init__(self, grid: Grid, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != grid.nodes.shape:
            raise ValueError("density values must align with the grid nodes")
        if np.any(values < 0):
            raise ValueError("density values must be nonnegative")
        total = grid.integrate(values)
        if abs(total - 1.0) > self.NORMALIZATION_TOL:
            raise ValueError(f"density is not normalized: integral={total!r}")
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):  # pragma: no cover
        raise AttributeError("GriddedDensity is immutable")

    def __reduce__(self):
        return (GriddedDensity, (self.grid, np.asarray(self.values)))

    @classmethod
    def uniform(cls, grid: Grid | None = None) -> "GriddedDensity":
        grid = grid or Grid.midpoint()
        return cls(grid, np.ones(grid.size))

    def expectation(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        apply = getattr(f, "apply", None)
        vals = apply(self.grid.nodes) if apply is not None else f(self.grid.nodes)
        return float(np.dot(self.grid.weights, self.values * np.asarray(vals)))

    def mean(self) -> float:
        return float(np.dot(self.grid.weights, self.values * self.grid.nodes))

    def as_discrete(self) -> DiscreteMeasure:
        """Atomic approximation: node atoms carrying density * weight."""
        mass = self.values * self.grid.weights
        keep = mass > 0
        return DiscreteMeasure(self.grid.nodes[keep], mass[keep])

    def csv_rows(self) -> list[str]:
        rows = ["node,density"]
        rows += [f"{x:.12g},{v:.12g}" for x, v in zip(self.grid.nodes, self.values)]
        return rows

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.csv_rows()) + "\n")

    def __repr__(self) -> str:
        return f"GriddedDensity({self.grid.size} nodes)"


def kl_divergence(p: GriddedDensity) -> float:
    """Relative entropy of ``p`` with respect to Lebesgue measure on [0,1].

    Quadrature of rho*log(rho) over nodes with rho > 0; the 0*log(0) = 0
    convention makes zero-density nodes contribute nothing.
    """
    rho = p.values
    w = p.grid.weights
    pos = rho > 0
    r = rho[pos]
    return float(np.dot(w[pos], r * np.log(r)))
