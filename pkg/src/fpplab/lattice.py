"""FPP on the integer lattice: environments, passage times, geodesics.

The environment is stateless: the uniform variate of an edge is a pure
function of (seed, canonical edge key), where the canonical key is the
lexicographically smaller endpoint plus the axis index. Passage times are
computed by Dijkstra inside a finite centered box with deterministic tie
breaking: among minimal-weight paths prefer fewer hops, then the
lexicographically smallest parent vertex. Geodesics are read back from the
Dijkstra parent pointers, so the reported passage time is bitwise the sum
of the reported edge weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from . import rng
from .measures import DiscreteMeasure
from .weights import WeightFunction

__all__ = [
    "BoxSpec",
    "LatticeEnvironment",
    "GeodesicRecord",
    "LengthExtremes",
    "SensitivityReport",
    "edge_key",
    "integer_point",
    "passage_time",
    "passage_time_to_direction",
    "geodesic_length_extremes",
    "boxed_sensitivity_check",
    "brute_force_passage",
]

EdgeKey = tuple[tuple[int, ...], int]


@dataclass(frozen=True)
class BoxSpec:
    """Finite truncation of the lattice: [-half_width, half_width]^d.

    When ``half_width`` is None it is derived per call as ceil(c * n) from
    the target distance n, with c = ``expansion_factor`` >= 1.
    """

    half_width: int | None = None
    expansion_factor: float = 2.0

    def __post_init__(self):
        if self.expansion_factor < 1.0:
            raise ValueError("expansion_factor must be at least 1")
        if self.half_width is not None and self.half_width < 1:
            raise ValueError("half_width must be a positive integer")

    def resolve(self, n: float | None = None) -> int:
        if self.half_width is not None:
            return self.half_width
        if n is None:
            raise ValueError("box has no explicit half_width and no target distance was given")
        return max(1, math.ceil(self.expansion_factor * n))


def integer_point(x: Sequence[float]) -> tuple[int, ...]:
    """The unique lattice point z with x in z + [0,1)^d (floor per coordinate)."""
    return tuple(int(math.floor(c)) for c in x)


def edge_key(p: Sequence[int], q: Sequence[int]) -> EdgeKey:
    """Canonical key of the edge {p, q}: (lexicographically smaller endpoint, axis)."""
    p = tuple(int(c) for c in p)
    q = tuple(int(c) for c in q)
    diff = [(i, qi - pi) for i, (pi, qi) in enumerate(zip(p, q)) if qi != pi]
    if len(diff) != 1 or abs(diff[0][1]) != 1:
        raise ValueError(f"{p} and {q} are not nearest neighbors")
    axis, step = diff[0]
    return (p if step == 1 else q, axis)


class _BoxArrays:
    """Realized uniforms and weights for all edges of a box."""

    __slots__ = ("half_width", "sizes", "strides", "uniforms", "weights")

    def __init__(self, env: "LatticeEnvironment", half_width: int):
        d = env.dimension
        side = 2 * half_width + 1
        sizes = np.full(d, side, dtype=np.int64)
        strides = np.ones(d, dtype=np.int64)
        for a in range(d - 2, -1, -1):
            strides[a] = strides[a + 1] * sizes[a + 1]
        nv = side**d
        idx = np.arange(nv, dtype=np.int64)
        coords = [(idx // strides[a]) % sizes[a] - half_width for a in range(d)]
        uniforms = np.empty((d, nv))
        weights = np.empty((d, nv))
        for a in range(d):
            cols = [c for c in coords] + [np.full(nv, a, dtype=np.int64)]
            u = rng.uniform_array(env.seed, cols)
            w = env.tau.apply(u)
            # edges leaving the box along axis a do not exist
            invalid = coords[a] + half_width == side - 1
            u[invalid] = np.nan
            w[invalid] = np.nan
            uniforms[a] = u
            weights[a] = w
        self.half_width = half_width
        self.sizes = sizes
        self.strides = strides
        self.uniforms = uniforms
        self.weights = weights

    def flat(self, point: Sequence[int]) -> int:
        i = 0
        for a, c in enumerate(point):
            if abs(c) > self.half_width:
                raise ValueError(f"point {tuple(point)} outside box of half-width {self.half_width}")
            i += (c + self.half_width) * self.strides[a]
        return int(i)

    def point(self, flat: int) -> tuple[int, ...]:
        return tuple(int((flat // self.strides[a]) % self.sizes[a] - self.half_width) for a in range(len(self.sizes)))


class LatticeEnvironment:
    """i.i.d. edge-weight environment tau(U_e) on Z^d, realized lazily in boxes."""

    def __init__(self, dimension: int, seed: int, tau: WeightFunction, box: BoxSpec = BoxSpec()):
        if dimension < 2:
            raise ValueError("lattice dimension must be at least 2")
        self.dimension = int(dimension)
        self.seed = int(seed)
        self.tau = tau
        self.box = box
        self._arrays: dict[int, _BoxArrays] = {}

    def edge_uniform(self, edge: EdgeKey) -> float:
        point, axis = edge
        self._check_edge(edge)
        return rng.uniform(self.seed, (*point, axis))

    def edge_weight(self, edge: EdgeKey) -> float:
        """Weight tau(U_e); deterministic across calls and thread interleavings."""
        return self.tau(self.edge_uniform(edge))

    def _check_edge(self, edge: EdgeKey) -> None:
        point, axis = edge
        if len(point) != self.dimension or not 0 <= axis < self.dimension:
            raise ValueError(f"malformed edge key {edge!r} for dimension {self.dimension}")
        if self.box.half_width is not None:
            w = self.box.half_width
            upper = list(point)
            upper[axis] += 1
            for p in (point, tuple(upper)):
                if any(abs(c) > w for c in p):
                    raise ValueError(f"edge {edge!r} outside box of half-width {w}")

    def realized(self, half_width: int) -> _BoxArrays:
        arrays = self._arrays.get(half_width)
        if arrays is None:
            arrays = _BoxArrays(self, half_width)
            self._arrays[half_width] = arrays
        return arrays


@dataclass(frozen=True)
class GeodesicRecord:
    """A lattice geodesic with its statistics and empirical measures."""

    source: tuple[int, ...]
    target: tuple[int, ...]
    vertices: tuple[tuple[int, ...], ...]
    edges: tuple[EdgeKey, ...]
    passage_time: float
    uniforms: tuple[float, ...]
    weights: tuple[float, ...]
    boundary_touched: bool
    n: float | None = None
    xi: tuple[float, ...] | None = None

    @property
    def length(self) -> int:
        return len(self.edges)

    @property
    def zero_count(self) -> int:
        return sum(1 for w in self.weights if w == 0.0)

    @property
    def positive_count(self) -> int:
        return self.length - self.zero_count

    @property
    def displacement(self) -> float:
        return math.sqrt(sum((t - s) ** 2 for s, t in zip(self.source, self.target)))

    # -- empirical measures ------------------------------------------------
    def nu(self) -> DiscreteMeasure:
        """Edge-weight atoms scaled by 1 / displacement."""
        if not self.edges:
            return DiscreteMeasure.zero()
        return DiscreteMeasure.from_samples(self.weights, scale=self.displacement)

    def nu_hat(self) -> DiscreteMeasure:
        """Uniform probability measure on the multiset of edge weights."""
        if not self.edges:
            return DiscreteMeasure.zero()
        return DiscreteMeasure.from_samples(self.weights)

    def nu_hat_plus(self) -> DiscreteMeasure:
        """Normalized measure of strictly nonzero edge weights (zero measure if none)."""
        positive = [w for w in self.weights if w != 0.0]
        if not positive:
            return DiscreteMeasure.zero()
        return DiscreteMeasure.from_samples(positive)

    def sigma(self) -> DiscreteMeasure:
        """Underlying-uniform atoms scaled by 1 / displacement."""
        if not self.edges:
            return DiscreteMeasure.zero()
        return DiscreteMeasure.from_samples(self.uniforms, scale=self.displacement)

    def sigma_hat(self) -> DiscreteMeasure:
        if not self.edges:
            return DiscreteMeasure.zero()
        return DiscreteMeasure.from_samples(self.uniforms)

    def csv_rows(self) -> list[str]:
        header = "step," + ",".join(f"x{a}" for a in range(len(self.source))) + ",u,tau"
        rows = [header]
        for k, (edge, u, w) in enumerate(zip(self.edges, self.uniforms, self.weights)):
            coords = ",".join(str(c) for c in edge[0])
            rows.append(f"{k},{coords},{u:.12g},{w:.12g}")
        return rows

    def summary(self) -> dict:
        out = {
            "source": list(self.source),
            "target": list(self.target),
            "passage_time": self.passage_time,
            "length": self.length,
            "zero_count": self.zero_count,
            "positive_count": self.positive_count,
            "boundary_touched": self.boundary_touched,
        }
        if self.n is not None:
            out["n"] = self.n
        if self.xi is not None:
            out["xi"] = list(self.xi)
        return out


@dataclass(frozen=True)
class LengthExtremes:
    """Extremes of geodesic length; n_max may be a flagged lower bound."""

    n_min: int
    n_max: int
    n_max_exact: bool
    geodesic_vertices: int


@dataclass(frozen=True)
class SensitivityReport:
    """Passage times under the configured box and the next larger one."""

    half_width_small: int
    half_width_large: int
    passage_time_small: float
    passage_time_large: float
    boundary_touched: bool

    @property
    def exact_agreement(self) -> bool:
        return self.passage_time_small == self.passage_time_large


# ---------------------------------------------------------------------------
# Dijkstra kernel: lexicographic (dist, hops, index) priorities, lex parents
# ---------------------------------------------------------------------------


@njit(cache=True)
def _dijkstra_kernel(weights, sizes, strides, nv, d, src, dst, finalize_ball):
    INF = np.inf
    dist = np.full(nv, INF)
    hops = np.full(nv, -1, dtype=np.int64)
    parent = np.full(nv, -1, dtype=np.int64)
    done = np.zeros(nv, dtype=np.bool_)
    cap = 1 << 14
    hd = np.empty(cap)
    hh = np.empty(cap, dtype=np.int64)
    hi = np.empty(cap, dtype=np.int64)
    m = 0
    dist[src] = 0.0
    hops[src] = 0
    hd[0] = 0.0
    hh[0] = 0
    hi[0] = src
    m = 1
    target_dist = INF
    while m > 0:
        d0 = hd[0]
        h0 = hh[0]
        i0 = hi[0]
        m -= 1
        hd[0] = hd[m]
        hh[0] = hh[m]
        hi[0] = hi[m]
        j = 0
        while True:
            l = 2 * j + 1
            if l >= m:
                break
            s = l
            r = l + 1
            if r < m and (
                hd[r] < hd[s]
                or (hd[r] == hd[s] and (hh[r] < hh[s] or (hh[r] == hh[s] and hi[r] < hi[s])))
            ):
                s = r
            if hd[s] < hd[j] or (
                hd[s] == hd[j] and (hh[s] < hh[j] or (hh[s] == hh[j] and hi[s] < hi[j]))
            ):
                hd[j], hd[s] = hd[s], hd[j]
                hh[j], hh[s] = hh[s], hh[j]
                hi[j], hi[s] = hi[s], hi[j]
                j = s
            else:
                break
        if done[i0]:
            continue
        if d0 > dist[i0] or (d0 == dist[i0] and h0 > hops[i0]):
            continue
        if target_dist < INF and d0 > target_dist:
            break
        done[i0] = True
        if i0 == dst:
            target_dist = d0
            if not finalize_ball:
                break
        for a in range(d):
            st = strides[a]
            ca = (i0 // st) % sizes[a]
            for direction in range(2):
                if direction == 0:
                    if ca + 1 >= sizes[a]:
                        continue
                    i1 = i0 + st
                    w = weights[a, i0]
                else:
                    if ca - 1 < 0:
                        continue
                    i1 = i0 - st
                    w = weights[a, i1]
                if done[i1]:
                    continue
                nd = d0 + w
                nh = h0 + 1
                if nd < dist[i1] or (nd == dist[i1] and nh < hops[i1]):
                    dist[i1] = nd
                    hops[i1] = nh
                    parent[i1] = i0
                    if m >= cap:
                        ncap = cap * 2
                        hd2 = np.empty(ncap)
                        hh2 = np.empty(ncap, dtype=np.int64)
                        hi2 = np.empty(ncap, dtype=np.int64)
                        hd2[:m] = hd[:m]
                        hh2[:m] = hh[:m]
                        hi2[:m] = hi[:m]
                        hd = hd2
                        hh = hh2
                        hi = hi2
                        cap = ncap
                    hd[m] = nd
                    hh[m] = nh
                    hi[m] = i1
                    j = m
                    m += 1
                    while j > 0:
                        p = (j - 1) // 2
                        if hd[j] < hd[p] or (
                            hd[j] == hd[p]
                            and (hh[j] < hh[p] or (hh[j] == hh[p] and hi[j] < hi[p]))
                        ):
                            hd[j], hd[p] = hd[p], hd[j]
                            hh[j], hh[p] = hh[p], hh[j]
                            hi[j], hi[p] = hi[p], hi[j]
                            j = p
                        else:
                            break
                elif nd == dist[i1] and nh == hops[i1] and (parent[i1] == -1 or i0 < parent[i1]):
                    parent[i1] = i0
    return dist, hops, parent, target_dist


def _run_dijkstra(arrays: _BoxArrays, src: int, dst: int, finalize_ball: bool):
    d = len(arrays.sizes)
    nv = int(np.prod(arrays.sizes))
    return _dijkstra_kernel(
        arrays.weights, arrays.sizes, arrays.strides, nv, d, src, dst, finalize_ball
    )


def _require_nonnegative(env: LatticeEnvironment) -> None:
    if env.tau.lower_bound() < 0.0:
        raise ValueError(
            "lattice passage times require nonnegative weights; negative shifts are only supported on the tree"
        )


def _build_record(
    env: LatticeEnvironment,
    arrays: _BoxArrays,
    parent: np.ndarray,
    t_value: float,
    src: int,
    dst: int,
    n: float | None = None,
    xi: tuple[float, ...] | None = None,
) -> GeodesicRecord:
    flat_path = [dst]
    while flat_path[-1] != src:
        prev = int(parent[flat_path[-1]])
        if prev < 0:
            raise RuntimeError("broken parent chain while reconstructing a geodesic")
        flat_path.append(prev)
    flat_path.reverse()
    points = [arrays.point(i) for i in flat_path]
    edges: list[EdgeKey] = []
    uniforms: list[float] = []
    weight_vals: list[float] = []
    for i0, i1 in zip(flat_path[:-1], flat_path[1:]):
        lo = min(i0, i1)
        step = abs(i1 - i0)
        axis = int(np.where(arrays.strides == step)[0][0])
        edges.append((arrays.point(lo), axis))
        uniforms.append(float(arrays.uniforms[axis, lo]))
        weight_vals.append(float(arrays.weights[axis, lo]))
    hw = arrays.half_width
    boundary = any(abs(c) == hw for p in points for c in p)
    return GeodesicRecord(
        source=points[0],
        target=points[-1],
        vertices=tuple(points),
        edges=tuple(edges),
        passage_time=float(t_value),
        uniforms=tuple(uniforms),
        weights=tuple(weight_vals),
        boundary_touched=boundary,
        n=n,
        xi=xi,
    )


def passage_time(
    env: LatticeEnvironment,
    source: Sequence[int],
    target: Sequence[int],
    half_width: int | None = None,
    n: float | None = None,
    xi: tuple[float, ...] | None = None,
) -> tuple[float, GeodesicRecord]:
    """Minimal path weight and a geodesic attaining it.

    T(x, x) = 0 with the empty path. Ties are broken by hop count and then
    by lexicographic parent, so the result is deterministic.
    """
    _require_nonnegative(env)
    source = tuple(int(c) for c in source)
    target = tuple(int(c) for c in target)
    if len(source) != env.dimension or len(target) != env.dimension:
        raise ValueError("source and target must match the environment dimension")
    if source == target:
        record = GeodesicRecord(
            source=source,
            target=target,
            vertices=(source,),
            edges=(),
            passage_time=0.0,
            uniforms=(),
            weights=(),
            boundary_touched=False,
            n=n,
            xi=xi,
        )
        return 0.0, record
    hw = half_width if half_width is not None else env.box.resolve(n)
    arrays = env.realized(hw)
    src = arrays.flat(source)
    dst = arrays.flat(target)
    dist, hops, parent, t_value = _run_dijkstra(arrays, src, dst, finalize_ball=False)
    if not math.isfinite(t_value):
        raise RuntimeError("target not reached inside the box")
    record = _build_record(env, arrays, parent, t_value, src, dst, n=n, xi=xi)
    return float(t_value), record


def passage_time_to_direction(
    env: LatticeEnvironment, n: float, xi: Sequence[float]
) -> tuple[float, GeodesicRecord]:
    """Passage time from the origin to the integer approximation of n * xi."""
    xi = tuple(float(c) for c in xi)
    norm = math.sqrt(sum(c * c for c in xi))
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"xi must be a unit vector (norm={norm!r})")
    if n <= 0:
        raise ValueError("n must be positive")
    target = integer_point([n * c for c in xi])
    origin = (0,) * env.dimension
    return passage_time(env, origin, target, half_width=env.box.resolve(n), n=n, xi=xi)


# ---------------------------------------------------------------------------
# Geodesic length extremes via the geodesic graph
# ---------------------------------------------------------------------------


def _geodesic_graph(arrays: _BoxArrays, dist_f, dist_r, t_value: float):
    """Directed edges u -> v with D(s,u) + w(u,v) + D(v,t) = T within tolerance."""
    tol = 1e-12 * max(1.0, abs(t_value))
    nv = dist_f.shape[0]
    on_geo = np.flatnonzero(np.abs(dist_f + dist_r - t_value) <= tol)
    on_set = set(int(i) for i in on_geo)
    d = len(arrays.sizes)
    adj: dict[int, list[int]] = {int(i): [] for i in on_geo}
    for i in on_geo:
        i = int(i)
        for a in range(d):
            st = int(arrays.strides[a])
            ca = (i // st) % int(arrays.sizes[a])
            if ca + 1 < int(arrays.sizes[a]):
                j = i + st
                if j in on_set:
                    w = arrays.weights[a, i]
                    if abs(dist_f[i] + w + dist_r[j] - t_value) <= tol:
                        adj[i].append(j)
                    if abs(dist_f[j] + w + dist_r[i] - t_value) <= tol:
                        adj[j].append(i)
    return adj


def _tarjan_scc(adj: dict[int, list[int]]) -> list[list[int]]:
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    sccs: list[list[int]] = []
    counter = [0]
    for root in adj:
        if root in index:
            continue
        work = [(root, 0)]
        while work:
            node, pi = work[-1]
            if pi == 0:
                index[node] = low[node] = counter[0]
                counter[0] += 1
                stack.append(node)
                on_stack.add(node)
            advanced = False
            neighbors = adj[node]
            while pi < len(neighbors):
                nxt = neighbors[pi]
                pi += 1
                if nxt not in index:
                    work[-1] = (node, pi)
                    work.append((nxt, 0))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if low[node] == index[node]:
                comp = []
                while True:
                    v = stack.pop()
                    on_stack.discard(v)
                    comp.append(v)
                    if v == node:
                        break
                sccs.append(comp)
            if work:
                parent_node = work[-1][0]
                low[parent_node] = min(low[parent_node], low[node])
    return sccs


def _longest_path_dag(adj: dict[int, list[int]], src: int, dst: int) -> int:
    indeg = {v: 0 for v in adj}
    for v, outs in adj.items():
        for w in outs:
            indeg[w] += 1
    order: list[int] = [v for v, k in indeg.items() if k == 0]
    dp = {v: (0 if v == src else -1) for v in adj}
    head = 0
    while head < len(order):
        v = order[head]
        head += 1
        for w in adj[v]:
            if dp[v] >= 0 and dp[v] + 1 > dp[w]:
                dp[w] = dp[v] + 1
            indeg[w] -= 1
            if indeg[w] == 0:
                order.append(w)
    return dp.get(dst, -1)


def geodesic_length_extremes(
    env: LatticeEnvironment,
    source: Sequence[int],
    target: Sequence[int],
    half_width: int | None = None,
) -> LengthExtremes:
    """Minimal and maximal geodesic length between two points.

    The minimum comes from the lexicographic (T, hops) Dijkstra. The maximum
    is a longest-path DP on the geodesic graph when it is acyclic; when
    zero-weight cycles occur, strongly connected components are contracted
    and the result is a flagged lower bound.
    """
    _require_nonnegative(env)
    source = tuple(int(c) for c in source)
    target = tuple(int(c) for c in target)
    if source == target:
        return LengthExtremes(0, 0, True, 1)
    hw = half_width if half_width is not None else env.box.resolve()
    arrays = env.realized(hw)
    src = arrays.flat(source)
    dst = arrays.flat(target)
    dist_f, hops_f, _, t_value = _run_dijkstra(arrays, src, dst, finalize_ball=True)
    dist_r, hops_r, _, t_back = _run_dijkstra(arrays, dst, src, finalize_ball=True)
    n_min = int(hops_f[dst])
    adj = _geodesic_graph(arrays, dist_f, dist_r, t_value)
    sccs = _tarjan_scc(adj)
    if all(len(c) == 1 for c in sccs):
        n_max = _longest_path_dag(adj, src, dst)
        if n_max < 0:
            n_max = n_min
        return LengthExtremes(n_min, int(n_max), True, len(adj))
    # contract strongly connected components; count only inter-component edges
    comp_of: dict[int, int] = {}
    for ci, comp in enumerate(sccs):
        for v in comp:
            comp_of[v] = ci
    cadj: dict[int, list[int]] = {ci: [] for ci in range(len(sccs))}
    for v, outs in adj.items():
        for w in outs:
            if comp_of[v] != comp_of[w]:
                cadj[comp_of[v]].append(comp_of[w])
    bound = _longest_path_dag(cadj, comp_of[src], comp_of[dst])
    n_max = max(n_min, int(bound)) if bound >= 0 else n_min
    return LengthExtremes(n_min, n_max, False, len(adj))


def boxed_sensitivity_check(env: LatticeEnvironment, n: float, xi: Sequence[float]) -> SensitivityReport:
    """Recompute the directional passage time with the box grown by one unit of c."""
    xi = tuple(float(c) for c in xi)
    c = env.box.expansion_factor
    hw_small = env.box.resolve(n)
    hw_large = max(hw_small + 1, math.ceil((c + 1.0) * n))
    target = integer_point([n * v for v in xi])
    origin = (0,) * env.dimension
    t_small, rec_small = passage_time(env, origin, target, half_width=hw_small, n=n, xi=xi)
    t_large, _ = passage_time(env, origin, target, half_width=hw_large, n=n, xi=xi)
    return SensitivityReport(
        half_width_small=hw_small,
        half_width_large=hw_large,
        passage_time_small=t_small,
        passage_time_large=t_large,
        boundary_touched=rec_small.boundary_touched,
    )


# ---------------------------------------------------------------------------
# Exhaustive oracle: enumerate every self-avoiding path inside a small box
# ---------------------------------------------------------------------------


def brute_force_passage(
    env: LatticeEnvironment,
    source: Sequence[int],
    target: Sequence[int],
    half_width: int,
    prune: bool = False,
) -> tuple[float, int, int, int]:
    """Minimum path weight by full self-avoiding path enumeration.

    Returns (T, min length, max length, number of optimal paths), where the
    optimum set uses exact float equality of path sums. Only usable on tiny
    boxes; this is the test oracle for the Dijkstra implementation. With
    ``prune`` the walk abandons prefixes whose sum strictly exceeds the
    incumbent; with nonnegative weights this still enumerates every optimal
    path, it just skips provably suboptimal continuations.
    """
    source = tuple(int(c) for c in source)
    target = tuple(int(c) for c in target)
    d = env.dimension
    arrays = env.realized(half_width)

    def weight_of(p: tuple[int, ...], q: tuple[int, ...]) -> float:
        key, axis = edge_key(p, q)
        return float(arrays.weights[axis, arrays.flat(key)])

    best: list[float] = [math.inf]
    lengths: dict[int, int] = {}

    def neighbors(p: tuple[int, ...]):
        for a in range(d):
            for s in (1, -1):
                q = list(p)
                q[a] += s
                if abs(q[a]) <= half_width:
                    yield tuple(q)

    visited = {source}

    def dfs(p: tuple[int, ...], hops: int, total: float):
        # the running sum is passed down, never un-added: float += / -= on a
        # shared accumulator would not round-trip exactly
        if prune and total > best[0]:
            return
        if p == target:
            if total < best[0]:
                best[0] = total
                lengths.clear()
                lengths[hops] = 1
            elif total == best[0]:
                lengths[hops] = lengths.get(hops, 0) + 1
            return
        for q in neighbors(p):
            if q in visited:
                continue
            visited.add(q)
            dfs(q, hops + 1, total + weight_of(p, q))
            visited.discard(q)

    if source == target:
        return 0.0, 0, 0, 1
    dfs(source, 0, 0.0)
    n_min = min(lengths)
    n_max = max(lengths)
    count = sum(lengths.values())
    return best[0], n_min, n_max, count
