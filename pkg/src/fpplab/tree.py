"""FPP on the rooted d-ary tree: exact minima over depth-n vertices.

Vertex uniforms come from chaining the stateless mixer along the path label
(sequence of child indices from the root), so a vertex value never depends
on anything but (seed, label). The depth-n minimum is found by depth-first
branch and bound in lexicographic label order: subtrees are pruned when the
partial sum plus (remaining depth) * (weight lower bound) cannot strictly
beat the incumbent, which also makes the returned leaf the lexicographically
smallest minimizer. Negative weights (after shifts) are allowed; the lower
bound then simply shifts down.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from . import rng
from .measures import DiscreteMeasure, pushforward
from .weights import WeightFunction

__all__ = [
    "TreeEnvironment",
    "TreeGeodesicRecord",
    "TreeMonteCarlo",
    "BudgetExceededError",
    "DEFAULT_NODE_BUDGET",
    "tree_minimum",
    "tree_empirical_measure",
    "tree_min_monte_carlo",
    "enumerate_minimum",
]

DEFAULT_NODE_BUDGET = 10**9
_BUDGET_ENV_VAR = "FPP_LAB_BUDGET"

# two-sided 99% normal quantile
Z99 = 2.5758293035489004


class BudgetExceededError(RuntimeError):
    """Search-node budget exhausted before the exact minimum was certified."""

    def __init__(self, budget: int, depth: int):
        super().__init__(f"node budget {budget} exceeded while solving depth {depth}")
        self.budget = budget
        self.depth = depth


def node_budget(override: int | None = None) -> int:
    if override is not None:
        return override
    raw = os.environ.get(_BUDGET_ENV_VAR)
    return int(raw) if raw else DEFAULT_NODE_BUDGET


class TreeEnvironment:
    """i.i.d. vertex weights tau(U_x) on the complete d-ary tree."""

    def __init__(self, arity: int, seed: int, tau: WeightFunction, max_depth: int = 64):
        if arity < 2:
            raise ValueError("tree arity must be at least 2")
        if max_depth < 1:
            raise ValueError("max_depth must be positive")
        self.arity = int(arity)
        self.seed = int(seed)
        self.tau = tau
        self.max_depth = int(max_depth)
        self._root_hash = rng.hash_chain(self.seed, ())

    def child_hash(self, h: int, child: int) -> int:
        return rng.mix64(h ^ (child + 1))

    def vertex_uniform(self, label: tuple[int, ...]) -> float:
        h = self._root_hash
        for c in label:
            if not 0 <= c < self.arity:
                raise ValueError(f"child index {c} out of range for arity {self.arity}")
            h = self.child_hash(h, c)
        return rng.to_unit(h)

    def vertex_weight(self, label: tuple[int, ...]) -> float:
        return self.tau(self.vertex_uniform(label))

    def path_values(self, label: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
        """Uniforms and weights of the ancestors 0 < y <= label, in root order."""
        h = self._root_hash
        us = np.empty(len(label))
        for k, c in enumerate(label):
            h = self.child_hash(h, c)
            us[k] = rng.to_unit(h)
        return us, self.tau.apply(us)


@dataclass(frozen=True)
class TreeGeodesicRecord:
    """The depth-n minimizer: leaf label, exact value, per-level values."""

    leaf: tuple[int, ...]
    value: float
    uniforms: tuple[float, ...]
    weights: tuple[float, ...]
    nodes_explored: int

    @property
    def depth(self) -> int:
        return len(self.leaf)

    def sigma_hat(self) -> DiscreteMeasure:
        return DiscreteMeasure.from_samples(self.uniforms)

    def nu_hat(self) -> DiscreteMeasure:
        return DiscreteMeasure.from_samples(self.weights)

    def to_json(self) -> dict:
        return {
            "leaf": list(self.leaf),
            "value": self.value,
            "depth": self.depth,
            "nodes_explored": self.nodes_explored,
        }


def tree_minimum(env: TreeEnvironment, n: int, budget: int | None = None) -> TreeGeodesicRecord:
    """Exact minimum of the ancestral weight sum over all depth-n vertices.

    Depth-first branch and bound; ties resolve to the lexicographically
    smallest leaf label. Raises BudgetExceededError when the node budget
    runs out rather than returning an uncertified value.
    """
    if not 1 <= n <= env.max_depth:
        raise ValueError(f"depth must lie in [1, {env.max_depth}]")
    b = env.tau.lower_bound()
    if not math.isfinite(b):
        raise ValueError("weight function must have a finite lower bound for pruning")
    limit = node_budget(budget)
    d = env.arity
    tau = env.tau
    child_hash = env.child_hash
    to_unit = rng.to_unit

    best_value = math.inf
    best_leaf: tuple[int, ...] | None = None
    path: list[int] = []
    explored = 0
    child_idx = np.arange(1, d + 1, dtype=np.uint64)
    us_buf = np.empty(d)

    def descend(depth: int, h: int, partial: float) -> None:
        nonlocal best_value, best_leaf, explored
        explored += 1
        if explored > limit:
            raise BudgetExceededError(limit, n)
        if depth == n:
            if partial < best_value:
                best_value = partial
                best_leaf = tuple(path)
            return
        rem = n - depth - 1
        hs = [child_hash(h, i) for i in range(d)]
        for i in range(d):
            us_buf[i] = to_unit(hs[i])
        ws = tau.apply(us_buf)
        for i in range(d):
            p2 = partial + float(ws[i])
            if p2 + rem * b < best_value:
                path.append(i)
                descend(depth + 1, hs[i], p2)
                path.pop()

    descend(0, env._root_hash, 0.0)
    if best_leaf is None:
        raise RuntimeError("search terminated without a leaf; lower bound inconsistent")
    us, ws = env.path_values(best_leaf)
    # left-to-right resummation is bitwise the DFS partial sum
    total = 0.0
    for w in ws:
        total += float(w)
    assert total == best_value
    return TreeGeodesicRecord(
        leaf=best_leaf,
        value=best_value,
        uniforms=tuple(float(u) for u in us),
        weights=tuple(float(w) for w in ws),
        nodes_explored=explored,
    )


def tree_empirical_measure(record: TreeGeodesicRecord) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    """(sigma_hat, nu_hat) of the minimizing leaf's ancestor line."""
    return record.sigma_hat(), record.nu_hat()


def enumerate_minimum(env: TreeEnvironment, n: int, max_leaves: int = 1 << 24) -> TreeGeodesicRecord:
    """Full enumeration oracle: evaluates all d^n leaves level by level.

    Independent of the branch-and-bound search; used to certify it. The
    leaf arrays are kept in lexicographic order so argmin matches the
    lexicographic tie rule.
    """
    if env.arity**n > max_leaves:
        raise ValueError(f"enumeration of {env.arity}**{n} leaves exceeds the cap {max_leaves}")
    d = env.arity
    h = np.array([env._root_hash], dtype=np.uint64)
    totals = np.zeros(1)
    for _ in range(n):
        h = rng.mix64_array(np.repeat(h, d) ^ np.tile(np.arange(1, d + 1, dtype=np.uint64), h.size))
        u = rng.to_unit_array(h)
        totals = np.repeat(totals, d) + env.tau.apply(u)
    j = int(np.argmin(totals))
    label = []
    jj = j
    for _ in range(n):
        label.append(jj % d)
        jj //= d
    label.reverse()
    leaf = tuple(label)
    us, ws = env.path_values(leaf)
    return TreeGeodesicRecord(
        leaf=leaf,
        value=float(totals[j]),
        uniforms=tuple(float(u) for u in us),
        weights=tuple(float(w) for w in ws),
        nodes_explored=int(totals.size),
    )


@dataclass(frozen=True)
class TreeMonteCarlo:
    """Replica statistics of the depth-n minimum per level."""

    arity: int
    depth: int
    replicas: int
    values: tuple[float, ...]
    failures: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def sd(self) -> float:
        if len(self.values) < 2:
            return 0.0
        return float(np.std(self.values, ddof=1))

    @property
    def ci99(self) -> tuple[float, float]:
        half = Z99 * self.sd / math.sqrt(max(1, len(self.values)))
        return (self.mean - half, self.mean + half)

    def csv_row(self) -> str:
        lo, hi = self.ci99
        return f"{self.depth},{self.mean:.12g},{self.sd:.12g},{lo:.12g},{hi:.12g}"


def _mc_worker(args) -> tuple[float | None, int]:
    arity, seed, tau, n, budget, max_depth = args
    env = TreeEnvironment(arity, seed, tau, max_depth=max_depth)
    try:
        record = tree_minimum(env, n, budget=budget)
    except BudgetExceededError:
        return None, 1
    return record.value / n, 0


def tree_min_monte_carlo(
    arity: int,
    tau: WeightFunction,
    n: int,
    replicas: int,
    seed: int,
    budget: int | None = None,
    threads: int = 1,
) -> TreeMonteCarlo:
    """Mean, SD, and 99% CI of the scaled minimum across independent seeds."""
    if replicas < 2:
        raise ValueError("at least 2 replicas are required for a CI")
    from ._parallel import parallel_map

    max_depth = max(n, 1)
    jobs = [
        (arity, rng.derive_seed(seed, i), tau, n, node_budget(budget), max_depth)
        for i in range(replicas)
    ]
    results = parallel_map(_mc_worker, jobs, threads=threads)
    values = tuple(v for v, _ in results if v is not None)
    failures = sum(f for _, f in results)
    return TreeMonteCarlo(arity=arity, depth=n, replicas=replicas, values=values, failures=failures)
