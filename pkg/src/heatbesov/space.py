"""Finite metric measure spaces, ball volumes and fitted doubling geometry."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import minimum_spanning_tree, shortest_path

from .errors import DomainError

Edge = tuple[int, int, float]

# exponent step of the grid on which the comparison exponent n' is searched
N_PRIME_STEP = 0.25
CLOSED_BALL_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class MetricMeasureSpace:
    """A finite set of points with a metric matrix and positive point masses.

    Parameters
    ----------
    metric : array_like, shape (N, N)
        Symmetric distance matrix with zero diagonal.
    measure : array_like, shape (N,)
        Strictly positive point masses.
    edges : sequence of (u, v, w), optional
        Weighted graph edges carried along for building a Laplacian.
    coords : array_like, shape (N, d), optional
        Embedding coordinates, used only by function generators.
    validate : bool
        Check metric axioms (O(N^3) for the triangle inequality).
    """

    metric: np.ndarray
    measure: np.ndarray
    edges: tuple[Edge, ...] | None = None
    coords: np.ndarray | None = None
    name: str = "space"
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        metric = np.array(self.metric, dtype=float)
        measure = np.array(self.measure, dtype=float).reshape(-1)
        if metric.ndim != 2 or metric.shape[0] != metric.shape[1]:
            raise DomainError("metric must be a square matrix")
        if metric.shape[0] != measure.size or measure.size == 0:
            raise DomainError("metric and measure sizes disagree")
        if not np.all(np.isfinite(measure)) or np.any(measure <= 0):
            raise DomainError("measure weights must be finite and strictly positive")
        if self.validate:
            _check_metric(metric)
        metric.flags.writeable = False
        measure.flags.writeable = False
        object.__setattr__(self, "metric", metric)
        object.__setattr__(self, "measure", measure)
        if self.coords is not None:
            coords = np.array(self.coords, dtype=float).reshape(measure.size, -1)
            coords.flags.writeable = False
            object.__setattr__(self, "coords", coords)
        if self.edges is not None:
            object.__setattr__(
                self, "edges", tuple((int(u), int(v), float(w)) for u, v, w in self.edges)
            )

    @property
    def size(self) -> int:
        return self.measure.size

    @cached_property
    def diameter(self) -> float:
        return float(self.metric.max())

    @cached_property
    def min_distance(self) -> float:
        """Smallest positive distance (0 for a one-point space)."""
        off = self.metric[self.metric > 0]
        return float(off.min()) if off.size else 0.0

    @cached_property
    def total_measure(self) -> float:
        return float(self.measure.sum())

    @cached_property
    def distinct_distances(self) -> np.ndarray:
        return np.unique(self.metric[self.metric > 0])

    def ball_mask(self, r: float, closed: bool = False) -> np.ndarray:
        """Boolean matrix ``M[x, y] = y in B(x, r)``."""
        return self.metric <= r if closed else self.metric < r

    def volumes(self, r: float, closed: bool = False) -> np.ndarray:
        """Volumes ``|B(x, r)|`` for every centre ``x``."""
        return self.ball_mask(r, closed) @ self.measure

    @cached_property
    def ball_levels(self) -> "BallLevels":
        """Shared cache of closed balls at every distance level."""
        return BallLevels(self)

    def nearest(self, point: Sequence[float]) -> int:
        """Index of the point whose coordinates are closest to ``point``."""
        if self.coords is None:
            raise DomainError("space has no coordinates")
        d = np.linalg.norm(self.coords - np.asarray(point, dtype=float), axis=1)
        return int(np.argmin(d))


class BallLevels:
    """Closed balls at the distinct distance levels of a space.

    For ``r`` with ``levels[k - 1] < r <= levels[k]`` the open ball
    ``B(x, r)`` equals the closed ball of radius ``levels[k - 1]``, so
    ``k = level_index(r)`` identifies it. ``levels[0] = 0`` (the singleton).
    Masks, padded member lists and volumes are built on first use and kept.
    """

    def __init__(self, space: MetricMeasureSpace):
        self.space = space
        self.levels = np.concatenate([[0.0], space.distinct_distances])
        self._masks: dict[int, np.ndarray] = {}
        self._members: dict[int, np.ndarray] = {}
        self._volumes: dict[int, np.ndarray] = {}

    def level_index(self, radius) -> np.ndarray:
        return np.searchsorted(self.levels, np.asarray(radius, dtype=float), side="left")

    def mask(self, k: int) -> np.ndarray:
        """Indicator matrix (as floats) of the balls of level ``k``."""
        if k not in self._masks:
            self._masks[k] = (self.space.metric <= self.levels[k - 1]).astype(float)
        return self._masks[k]

    def members(self, k: int) -> np.ndarray:
        """Ball members as a padded ``(N, width)`` index array.

        Rows are padded with the centre itself, which always belongs to the ball.
        """
        if k not in self._members:
            inside = self.space.metric <= self.levels[k - 1]
            width = int(inside.sum(axis=1).max())
            idx = np.repeat(np.arange(self.space.size)[:, None], width, axis=1)
            for x, row in enumerate(inside):
                found = np.nonzero(row)[0]
                idx[x, : found.size] = found
            self._members[k] = idx
        return self._members[k]

    def volumes(self, k: int) -> np.ndarray:
        if k not in self._volumes:
            self._volumes[k] = self.space.volumes(self.levels[k - 1], closed=True)
        return self._volumes[k]


def _check_metric(metric: np.ndarray, rtol: float = 1e-12) -> None:
    n = metric.shape[0]
    if not np.all(np.isfinite(metric)):
        raise DomainError("metric has non-finite entries (disconnected graph?)")
    if not np.allclose(metric, metric.T, rtol=0, atol=0):
        raise DomainError("metric is not symmetric")
    if np.any(np.diag(metric) != 0):
        raise DomainError("metric diagonal must vanish")
    off = ~np.eye(n, dtype=bool)
    if np.any(metric[off] <= 0):
        raise DomainError("distinct points must have positive distance")
    scale = metric.max() if n > 1 else 1.0
    for z in range(n):
        via = metric[:, z, None] + metric[None, z, :]
        if np.any(metric > via + rtol * scale):
            raise DomainError(f"triangle inequality fails through point {z}")


def ball_volume(space: MetricMeasureSpace, x: int, r: float) -> float:
    """Measure of the open ball ``B(x, r) = {y : rho(x, y) < r}``."""
    if not 0 <= x < space.size:
        raise DomainError(f"point index {x} out of range")
    if not r > 0:
        raise DomainError("radius must be positive")
    row = space.metric[x]
    return float(space.measure[row < r].sum())


def d_weight(space: MetricMeasureSpace, t: float, sigma: float, x: int, y: int) -> float:
    """``(|B(x,t)| |B(y,t)|)^(-1/2) (1 + rho(x,y)/t)^(-sigma)``."""
    if not t > 0:
        raise DomainError("scale t must be positive")
    vx = ball_volume(space, x, t)
    vy = ball_volume(space, y, t)
    return (vx * vy) ** -0.5 * (1.0 + space.metric[x, y] / t) ** -sigma


def d_weight_matrix(space: MetricMeasureSpace, t: float, sigma: float) -> np.ndarray:
    """All ``D_{t,sigma}(x, y)`` as an N x N matrix."""
    if not t > 0:
        raise DomainError("scale t must be positive")
    v = space.volumes(t)
    return np.outer(v, v) ** -0.5 * (1.0 + space.metric / t) ** -sigma


@dataclass(frozen=True)
class GeometryProfile:
    """Doubling constants and dimension exponents measured on a radius grid.

    ``c0``, ``c2`` and the exponent scans use closed balls at the sampled radii;
    ``c1`` uses the open unit ball.
    """

    c0: float
    n: float
    n_prime: float
    c1: float
    c2: float
    diameter: float
    scaling_constant: float = 1.0
    comparison_constant: float = 1.0
    reverse_doubling_ok: bool = True
    degenerate: bool = False
    radius_grid: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["radius_grid"] = list(self.radius_grid)
        return d


def default_radius_grid(space: MetricMeasureSpace) -> np.ndarray:
    """Dyadic radii ``d_min * 2^k`` up to the diameter."""
    if space.size == 1:
        return np.array([1.0])
    k = int(math.floor(math.log2(space.diameter / space.min_distance) + 1e-12))
    return space.min_distance * 2.0 ** np.arange(k + 1)


def fit_geometry(
    space: MetricMeasureSpace, radius_grid: Sequence[float] | None = None
) -> GeometryProfile:
    """Fit ``c0, c1, c2, n, n'`` by exhaustive scans over the radius grid.

    ``n = log2(c0)``; ``n'`` is the smallest multiple of 0.25 in ``[0, n]`` for
    which ``|B(x,r)| <= C (1 + rho(x,y)/r)^n' |B(y,r)|`` holds on every sampled
    ``(x, y, r)`` with a constant no larger than ``max(c0, C_n)``.
    """
    grid = default_radius_grid(space) if radius_grid is None else np.asarray(radius_grid, float)
    grid = np.atleast_1d(grid)
    if grid.size == 0:
        raise DomainError("radius grid is empty")
    if np.any(grid <= 0):
        raise DomainError("radii must be positive")
    if space.size == 1:
        return GeometryProfile(
            c0=1.0, n=0.0, n_prime=0.0, c1=float(space.measure[0]), c2=float("nan"),
            diameter=0.0, reverse_doubling_ok=False, degenerate=True,
            radius_grid=tuple(float(r) for r in grid),
        )
    if np.any(grid > space.diameter * (1 + 1e-12)):
        raise DomainError("radii must not exceed the diameter")
    grid = np.sort(grid)

    # closed balls, with a relative slack so rounding in the metric does not
    # move boundary points in or out
    slack = 1 + CLOSED_BALL_RTOL
    vol = np.array([space.volumes(r * slack, closed=True) for r in grid])  # (R, N)
    vol2 = np.array([space.volumes(2 * r * slack, closed=True) for r in grid])
    ratio = vol2 / vol
    c0 = float(ratio.max())
    n = math.log2(c0)

    small = grid <= space.diameter / 3
    c2 = float(ratio[small].min()) if np.any(small) else float("nan")
    c1 = float(space.volumes(1.0).min())

    scaling = 1.0
    for i in range(grid.size):
        for j in range(i, grid.size):
            lam = grid[j] / grid[i]
            scaling = max(scaling, float(np.max(vol[j] / (lam**n * vol[i]))))

    def comparison(expo: float) -> float:
        worst = 0.0
        for r, v in zip(grid, vol):
            decay = (1.0 + space.metric / r) ** expo
            worst = max(worst, float(np.max(v[:, None] / (decay * v[None, :]))))
        return worst

    c_at_n = comparison(n)
    threshold = max(c0, c_at_n) * (1 + 1e-12)
    n_prime, c_prime = n, c_at_n
    for expo in np.arange(0.0, n, N_PRIME_STEP):
        c = comparison(float(expo))
        if c <= threshold:
            n_prime, c_prime = float(expo), c
            break

    return GeometryProfile(
        c0=c0, n=n, n_prime=n_prime, c1=c1, c2=c2, diameter=space.diameter,
        scaling_constant=scaling, comparison_constant=c_prime,
        reverse_doubling_ok=bool(np.isfinite(c2) and c2 > 1),
        radius_grid=tuple(float(r) for r in grid),
    )


# ---------------------------------------------------------------- generators


def _graph_metric(n: int, edges: Sequence[Edge], lengths: Sequence[float]) -> np.ndarray:
    rows = [u for u, _, _ in edges]
    cols = [v for _, v, _ in edges]
    g = coo_matrix((np.asarray(lengths, float), (rows, cols)), shape=(n, n)).tocsr()
    return shortest_path(g, directed=False)


def _measure_from(kind, n: int, default: float, edges: Sequence[Edge]) -> np.ndarray:
    if kind is None:
        return np.full(n, default)
    if isinstance(kind, str):
        if kind == "degree":
            deg = np.zeros(n)
            for u, v, w in edges:
                deg[u] += w
                deg[v] += w
            return deg
        if kind == "unit":
            return np.ones(n)
        raise DomainError(f"unknown measure kind {kind!r}")
    return np.broadcast_to(np.asarray(kind, float), (n,)).copy()


def path_space(n: int, spacing: float = 1.0, measure=None) -> MetricMeasureSpace:
    """Path on ``n`` points with step ``spacing``.

    Defaults discretise ``-d^2/dx^2``: point mass ``spacing`` and edge weight
    ``1/spacing``.  ``measure`` may be ``"unit"``, ``"degree"`` or an array.
    """
    if n < 1:
        raise DomainError("need at least one point")
    idx = np.arange(n)
    metric = np.abs(idx[:, None] - idx[None, :]) * float(spacing)
    edges = tuple((i, i + 1, 1.0 / spacing) for i in range(n - 1))
    return MetricMeasureSpace(
        metric, _measure_from(measure, n, spacing, edges), edges=edges,
        coords=(idx * spacing)[:, None], name=f"path{n}", validate=False,
    )


def cycle_space(n: int, spacing: float = 1.0, measure=None) -> MetricMeasureSpace:
    """Cycle on ``n >= 3`` points with the arc-length metric."""
    if n < 3:
        raise DomainError("a cycle needs at least three points")
    idx = np.arange(n)
    gap = np.abs(idx[:, None] - idx[None, :])
    metric = np.minimum(gap, n - gap) * float(spacing)
    edges = tuple((i, (i + 1) % n, 1.0 / spacing) for i in range(n))
    angle = 2 * np.pi * idx / n
    coords = np.column_stack([np.cos(angle), np.sin(angle)]) * n * spacing / (2 * np.pi)
    return MetricMeasureSpace(
        metric, _measure_from(measure, n, spacing, edges), edges=edges,
        coords=coords, name=f"cycle{n}", validate=False,
    )


def grid_space(n: int, m: int | None = None, spacing: float = 1.0, measure=None) -> MetricMeasureSpace:
    """``n x m`` lattice with the l1 metric, mass ``spacing^2`` and unit edges."""
    m = n if m is None else m
    ii, jj = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")
    lattice = np.column_stack([ii.ravel(), jj.ravel()])
    coords = lattice.astype(float) * spacing
    # integer offsets first, so every distance is an exact multiple of spacing
    metric = np.abs(lattice[:, None, :] - lattice[None, :, :]).sum(axis=2) * float(spacing)
    edges = []
    for i in range(n):
        for j in range(m):
            k = i * m + j
            if i + 1 < n:
                edges.append((k, k + m, 1.0))
            if j + 1 < m:
                edges.append((k, k + 1, 1.0))
    edges = tuple(edges)
    return MetricMeasureSpace(
        metric, _measure_from(measure, n * m, spacing**2, edges), edges=edges,
        coords=coords, name=f"grid{n}x{m}", validate=False,
    )


def random_geometric_space(
    n: int, radius: float = 0.3, seed: int = 0, dim: int = 2, measure=None
) -> MetricMeasureSpace:
    """Uniform points in the unit cube joined within ``radius``.

    A Euclidean minimum spanning tree is added so the graph is connected; the
    metric is the shortest-path length with Euclidean edge lengths.
    """
    rng = np.random.default_rng(seed)
    pts = rng.random((n, dim))
    eu = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    tree = minimum_spanning_tree(eu).tocoo()
    pairs = {(min(u, v), max(u, v)) for u, v in zip(tree.row, tree.col)}
    iu, ju = np.nonzero(np.triu(eu < radius, k=1))
    pairs |= set(zip(iu.tolist(), ju.tolist()))
    pairs = sorted(pairs)
    edges = tuple((u, v, 1.0) for u, v in pairs)
    metric = _graph_metric(n, edges, [eu[u, v] for u, v in pairs])
    return MetricMeasureSpace(
        metric, _measure_from(measure, n, 1.0, edges), edges=edges,
        coords=pts, name=f"rgg{n}", validate=False,
    )


def space_from_edges(
    edges: Sequence[Edge], measure: Sequence[float], name: str = "graph"
) -> MetricMeasureSpace:
    """Graph space whose metric is the shortest path with edge length ``1/w``."""
    measure = np.asarray(measure, float)
    n = measure.size
    for u, v, w in edges:
        if not (0 <= u < n and 0 <= v < n) or u == v:
            raise DomainError(f"invalid edge ({u}, {v})")
        if not w > 0:
            raise DomainError(f"edge ({u}, {v}) has non-positive weight {w}")
    metric = _graph_metric(n, edges, [1.0 / w for _, _, w in edges])
    if not np.all(np.isfinite(metric)):
        raise DomainError("edge list describes a disconnected graph; metric undefined")
    return MetricMeasureSpace(metric, measure, edges=tuple(edges), name=name)


def read_edge_list(path) -> list[Edge]:
    """Read ``u v weight`` lines; blank lines and ``#`` comments are skipped."""
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 3:
                raise DomainError(f"{path}:{lineno}: expected 'u v weight'")
            try:
                edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
            except ValueError as exc:
                raise DomainError(f"{path}:{lineno}: {exc}") from None
    return edges


def read_weights(path, size: int | None = None) -> np.ndarray:
    """Read ``index mu`` lines into a measure vector; every index must appear once."""
    found: dict[int, float] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 2:
                raise DomainError(f"{path}:{lineno}: expected 'index mu'")
            idx = int(parts[0])
            if idx in found:
                raise DomainError(f"{path}:{lineno}: index {idx} repeated")
            found[idx] = float(parts[1])
    n = len(found) if size is None else size
    if sorted(found) != list(range(n)):
        raise DomainError(f"{path}: indices must be exactly 0..{n - 1}")
    return np.array([found[i] for i in range(n)])


def space_from_files(edges_path, weights_path=None, name: str = "graph") -> MetricMeasureSpace:
    """Graph space from an edge-list file and an optional weights file (unit masses otherwise)."""
    edges = read_edge_list(edges_path)
    if weights_path is None:
        n = 1 + max((max(u, v) for u, v, _ in edges), default=0)
        measure = np.ones(n)
    else:
        measure = read_weights(weights_path)
    return space_from_edges(edges, measure, name=name)


def single_point_space(mass: float = 1.0) -> MetricMeasureSpace:
    """The one-point space (no edges, so its Laplacian is zero)."""
    return MetricMeasureSpace(np.zeros((1, 1)), [mass], edges=(), coords=[[0.0]], name="point")


def rescale_metric(space: MetricMeasureSpace, factor: float) -> MetricMeasureSpace:
    """Same points, measure and edges with every distance multiplied by ``factor``."""
    if not factor > 0:
        raise DomainError("metric scale must be positive")
    return MetricMeasureSpace(
        space.metric * factor, space.measure, edges=space.edges, coords=space.coords,
        name=space.name, validate=False,
    )
