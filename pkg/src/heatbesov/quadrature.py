"""Integration of heat-semigroup quantities over ``t in (0, 1]`` against ``dt/t``.

The interval is split into dyadic blocks ``[4^-l, 4^{1-l}]`` (further cut at
``t = d^2`` for every distance ``d < 1`` so that ball-dependent integrands
are smooth on each piece). Each piece is integrated by Gauss-Legendre in
``log t`` with adaptive bisection. The remaining ``(0, 4^-L]`` is handled by
two-sided closed-form bounds built from the spectral expansion.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AccuracyError, DomainError
from .spectral import SelfAdjointOperator

Integrand = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class QuadratureGrid:
    """Quadrature settings for the continuous norms.

    Parameters
    ----------
    nodes : int
        Gauss-Legendre nodes per interval (in ``log t``).
    tol : float
        Relative bound on the truncated ``(0, 4^-L]`` contribution; blocks are
        added until the tail estimate falls below ``tol`` times the norm.
    quad_rtol : float
        Relative error target of the adaptive rule on ``[4^-L, 1]``.
    max_blocks : int
        Largest admissible ``L``.
    breakpoints : bool
        Cut pieces at ``t = d^2`` for the distances ``d < 1`` of the space.
    sup_refinements : int
        Most node-density doublings spent on a supremum over ``t``.
    """

    nodes: int = 8
    tol: float = 1e-10
    quad_rtol: float = 1e-11
    max_blocks: int = 200
    breakpoints: bool = True
    max_breakpoints: int = 2000
    max_intervals: int = 50000
    zoom_levels: int = 4
    zoom_points: int = 33
    max_zoom_brackets: int = 64
    sup_refinements: int = 4

    def __post_init__(self):
        if self.nodes < 1 or self.max_blocks < 1:
            raise DomainError("quadrature needs at least one node and one block")
        if not (self.tol > 0 and self.quad_rtol > 0):
            raise DomainError("quadrature tolerances must be positive")


@functools.lru_cache(maxsize=32)
def gauss_legendre(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on ``[-1, 1]``, computed once per size."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def dyadic_truncation(op: SelfAdjointOperator) -> int:
    """Smallest ``J`` such that ``phi(2^-j sqrt(L))`` vanishes for ``j > J``."""
    lam = op.spectral_radius
    if lam <= 0:
        return 0
    return max(0, math.ceil(math.log2(math.sqrt(lam))) + 1)


class HeatSampler:
    """Cached samples of ``F_t = (tL)^m exp(-tL) f`` for one function.

    Also holds the ball structure needed by weight-dependent integrands: for
    ``t`` in a piece, ``B(x, sqrt t)`` is the closed ball of radius
    ``levels[k - 1]`` where ``k`` counts the distance levels below ``sqrt t``.
    """

    def __init__(self, op: SelfAdjointOperator, f: np.ndarray, m: int):
        self.op = op
        self.space = op.space
        self.m = int(m)
        self.f = np.asarray(f, dtype=float)
        if self.f.shape != (op.size,):
            raise DomainError("function does not match the space size")
        self.coeffs = op.coefficients(self.f)
        self._cache: dict[float, int] = {}  # t -> column of the sample store
        self._store = np.empty((op.size, 0))
        self._stored = 0
        self.balls = self.space.ball_levels
        self.levels = self.balls.levels

    def values(self, ts: np.ndarray) -> np.ndarray:
        """``F_t(x)`` as an array of shape ``(N, len(ts))``."""
        ts = np.asarray(ts, dtype=float).ravel()
        if ts.size == 0:
            return np.zeros((self.op.size, 0))
        if ts.size == 1 and float(ts[0]) in self._cache:
            return self._store[:, [self._cache[float(ts[0])]]]
        uniq, inverse = np.unique(ts, return_inverse=True)
        cols = np.array([self._cache.get(float(t), -1) for t in uniq], dtype=int)
        missing = np.nonzero(cols < 0)[0]
        if missing.size:
            tm = uniq[missing]
            lt = np.outer(self.op.eigenvalues, tm)
            gain = lt**self.m * np.exp(-lt)
            block = self.op.eigenvectors @ (gain * self.coeffs[:, None])
            base = self._stored
            end = base + missing.size
            if end > self._store.shape[1]:
                grown = np.empty((self.op.size, max(2 * self._store.shape[1], end, 64)))
                grown[:, :base] = self._store[:, :base]
                self._store = grown
            self._store[:, base:end] = block
            for j, t in enumerate(tm):
                self._cache[float(t)] = base + j
            cols[missing] = base + np.arange(missing.size)
            self._stored = end
        return self._store[:, cols[inverse]]

    @property
    def samples(self) -> int:
        """Number of distinct ``t`` at which ``F_t`` has been computed."""
        return self._stored

    def lowpass(self) -> np.ndarray:
        """``exp(-L) f``."""
        return self.op.synthesize(np.exp(-self.op.eigenvalues) * self.coeffs)

    @functools.cached_property
    def _leading_terms(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        lam = self.op.eigenvalues
        terms = np.abs(self.op.eigenvectors * self.coeffs)
        a_m = terms @ lam**self.m
        a_m1 = terms @ lam ** (self.m + 1)
        lead = np.abs(self.op.synthesize(lam**self.m * self.coeffs))
        return a_m, a_m1, lead

    def small_time_bounds(self, tau: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-point ``(b, a)`` with ``t^m b <= |F_t| <= t^m a`` for ``t <= tau``.

        Uses ``|F_t - t^m L^m f| <= t^{m+1} sum_k lambda_k^{m+1} |c_k e_k|``.
        """
        a_m, a_m1, lead = self._leading_terms
        upper = np.minimum(a_m, lead + tau * a_m1)
        lower = np.maximum(0.0, lead - tau * a_m1)
        return lower, upper

    def level_index(self, ts: np.ndarray) -> np.ndarray:
        return self.balls.level_index(np.sqrt(np.asarray(ts, dtype=float)))

    def ball_mask(self, k: int) -> np.ndarray:
        return self.balls.mask(k)

    def ball_members(self, k: int) -> np.ndarray:
        return self.balls.members(k)

    def volumes(self, k: int) -> np.ndarray:
        """``|B(x, sqrt t)|`` for every ``x`` and any ``t`` of level ``k``."""
        return self.balls.volumes(k)


def block_pieces(grid: QuadratureGrid, levels: np.ndarray, L: int) -> list[tuple[float, float]]:
    """Pieces of ``[4^-L, 1]``: dyadic blocks cut at ``t = d^2`` for ``d < 1``."""
    edges = {4.0**-l for l in range(L + 1)}
    if grid.breakpoints:
        sq = levels[(levels > 0) & (levels < 1)] ** 2
        sq = sq[sq > 4.0**-L]
        if sq.size > grid.max_breakpoints:
            sq = sq[np.linspace(0, sq.size - 1, grid.max_breakpoints).astype(int)]
        edges |= set(sq.tolist())
    e = sorted(edges)
    return [(e[i], e[i + 1]) for i in range(len(e) - 1)]


def breakpoints_complete(grid: QuadratureGrid, levels: np.ndarray, L: int) -> bool:
    """Whether :func:`block_pieces` cuts at every ``d^2`` inside ``(4^-L, 1)``."""
    if not grid.breakpoints:
        return False
    sq = levels[(levels > 0) & (levels < 1)] ** 2
    return int(np.sum(sq > 4.0**-L)) <= grid.max_breakpoints


class LogIntegrator:
    """Adaptive Gauss-Legendre integration of a vector integrand in ``log t``.

    The integrand maps an array of ``t`` to values of shape ``(ncomp, len(t))``.
    Each interval is integrated with the rule on the whole interval and on its
    two halves; the halves estimate is kept and their difference is the error.
    A bisected interval hands its half estimates to its children, so every
    refinement costs two rule applications per child.
    """

    def __init__(self, integrand: Integrand, grid: QuadratureGrid):
        self.integrand = integrand
        self.grid = grid
        self.x, self.w = gauss_legendre(grid.nodes)
        self.evaluations = 0
        self.intervals: list[tuple[float, float]] = []  # in log t
        self.est: list[np.ndarray] = []
        self.err: list[np.ndarray] = []
        self._halves: list[tuple[np.ndarray, np.ndarray]] = []

    def _apply(self, logs: list[tuple[float, float]]) -> np.ndarray:
        """Rule estimates on every interval, shape ``(len(logs), ncomp)``."""
        a = np.array([iv[0] for iv in logs])
        b = np.array([iv[1] for iv in logs])
        v = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * self.x[None, :]
        vals = np.asarray(self.integrand(np.exp(v.ravel())), dtype=float)
        self.evaluations += v.size
        vals = vals.reshape(vals.shape[0], len(logs), self.x.size)
        return (0.5 * (b - a))[:, None] * np.einsum("cin,n->ic", vals, self.w)

    def _rule(self, logs: list[tuple[float, float]], whole: list[np.ndarray | None]) -> None:
        """Append intervals, computing whole-interval estimates where missing."""
        need = [i for i, w in enumerate(whole) if w is None]
        halves = []
        for a, b in logs:
            c = 0.5 * (a + b)
            halves += [(a, c), (c, b)]
        both = self._apply(halves + [logs[i] for i in need])
        k = 2 * len(logs)
        fresh = iter(both[k:])
        for i, iv in enumerate(logs):
            w = whole[i] if whole[i] is not None else next(fresh)
            left, right = both[2 * i], both[2 * i + 1]
            self.intervals.append(iv)
            self.est.append(left + right)
            self.err.append(np.abs(w - left - right))
            self._halves.append((left, right))

    def add(self, pieces: list[tuple[float, float]]) -> None:
        logs = [(math.log(a), math.log(b)) for a, b in pieces]
        self._rule(logs, [None] * len(logs))

    def refine(self, atol: float = 0.0) -> np.ndarray:
        """Bisect until the summed error meets ``quad_rtol``; return the integral.

        A component is accepted once its error is below
        ``quad_rtol * |I| + quad_rtol * 1e-3 * max|I| + atol``.
        """
        rtol = self.grid.quad_rtol
        while True:
            est = np.array(self.est)
            err = np.array(self.err)
            total = est.sum(axis=0)
            scale = np.abs(total).max() if total.size else 0.0
            target = rtol * np.abs(total) + rtol * 1e-3 * scale + atol + 1e-300
            excess = err.sum(axis=0) > target
            if not np.any(excess):
                return total
            ratio = (err[:, excess] / target[excess]).max(axis=1)
            widths = np.array([b - a for a, b in self.intervals])
            split = np.nonzero((ratio >= 1.0 / len(self.intervals)) & (widths > 1e-9))[0]
            if split.size == 0:
                return total
            if len(self.intervals) + split.size > self.grid.max_intervals:
                raise AccuracyError(
                    "adaptive t-quadrature exceeded its interval budget; "
                    "loosen quad_rtol or raise max_intervals"
                )
            new, whole = [], []
            for i in split:
                a, b = self.intervals[i]
                c = 0.5 * (a + b)
                new += [(a, c), (c, b)]
                whole += list(self._halves[i])
            drop = set(split.tolist())
            keep = [i for i in range(len(self.intervals)) if i not in drop]
            self.intervals = [self.intervals[i] for i in keep]
            self.est = [self.est[i] for i in keep]
            self.err = [self.err[i] for i in keep]
            self._halves = [self._halves[i] for i in keep]
            self._rule(new, whole)


GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_maximize(
    func: Integrand, comps: np.ndarray, lo: np.ndarray, hi: np.ndarray, xatol: float = 1e-10
) -> np.ndarray:
    """Golden-section maxima of ``func(exp(v))[comps[k]]`` over ``v in [lo[k], hi[k]]``.

    All searches advance together, so each step is a single call of
    ``func`` at one ``t`` per search. Returns the best value seen per search.
    """
    comps = np.asarray(comps, dtype=int)
    a, b = np.array(lo, dtype=float), np.array(hi, dtype=float)
    k = np.arange(comps.size)

    def f(v):
        return np.asarray(func(np.exp(v)), dtype=float)[comps, k]

    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    best = np.maximum(fc, fd)
    while np.max(b - a) > xatol:
        left = fc >= fd  # maximum lies in [a, d]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = np.where(left, b - GOLDEN * (b - a), d)
        d_new = np.where(left, c, a + GOLDEN * (b - a))
        fresh = f(np.where(left, c_new, d_new))
        fc, fd = np.where(left, fresh, fd), np.where(left, fc, fresh)
        c, d = c_new, d_new
        best = np.maximum(best, fresh)
    return best


def sample_supremum(
    func: Integrand,
    pieces: list[tuple[float, float]],
    grid: QuadratureGrid,
    per_piece: bool = False,
) -> tuple[np.ndarray, bool]:
    """Supremum over ``t`` in the pieces of a vector function of ``t``.

    A ``p``-norm of ``F_t`` has kinks wherever a component of ``F_t`` changes
    sign, so a lobe narrower than the node spacing can hide between two
    samples that both lie on a rising flank. The pieces are therefore split
    into ``2^k`` equal parts in ``log t`` for ``k = 0, 1, ...`` until two
    doublings in a row raise no supremum by more than ``grid.quad_rtol``
    relative, or ``grid.sup_refinements`` doublings were spent. Only the
    first pass polishes every maximum; later passes polish a bracket only
    when one of its samples beats the supremum found so far.

    Parameters
    ----------
    per_piece : bool
        Return the supremum on every piece separately instead of overall.

    Returns
    -------
    sup : ndarray
        Shape ``(ncomp,)``, or ``(ncomp, len(pieces))`` with ``per_piece``.
    zoomed : bool
        False when there were too many distinct brackets to refine.
    """
    best, zoomed = _sample_pieces(func, pieces, grid, per_piece)
    stable = 0
    for k in range(1, grid.sup_refinements + 1):
        parts = 2**k
        sub = []
        for a, b in pieces:
            e = np.exp(np.linspace(math.log(a), math.log(b), parts + 1))
            e[0], e[-1] = a, b
            sub.extend(zip(e[:-1], e[1:]))
        floor = np.repeat(best, parts, axis=1) if per_piece else best
        fine, ok = _sample_pieces(func, sub, grid, per_piece, floor)
        if per_piece:
            fine = fine.reshape(fine.shape[0], len(pieces), parts).max(axis=2)
        zoomed = zoomed and ok
        gain = np.max((fine - best) / np.maximum(np.abs(best), np.finfo(float).tiny), initial=0.0)
        best = np.maximum(best, fine)
        stable = stable + 1 if gain <= grid.quad_rtol else 0
        if stable == 2:
            break
    return best, zoomed


def _sample_pieces(
    func: Integrand,
    pieces: list[tuple[float, float]],
    grid: QuadratureGrid,
    per_piece: bool = False,
    floor: np.ndarray | None = None,
) -> tuple[np.ndarray, bool]:
    """One pass of :func:`sample_supremum` at a fixed node density.

    Samples the Gauss-Legendre nodes and both ends (nudged inside) of every
    piece. A maximum is live when it is positive and beats ``floor`` (same
    shape as the result). With at most ``grid.max_zoom_brackets`` live maxima
    each one is polished by golden-section search inside its bracket;
    otherwise the distinct brackets are zoomed on with a few levels of dense
    sampling.
    """
    x, _ = gauss_legendre(grid.nodes)
    per = grid.nodes + 2
    logs = []
    for a, b in pieces:
        la, lb = math.log(a), math.log(b)
        nudge = 1e-13 * max(1.0, abs(la), abs(lb))
        logs.append(np.concatenate([[la + nudge], 0.5 * (la + lb) + 0.5 * (lb - la) * x, [lb - nudge]]))
    logs = np.concatenate(logs)
    vals = np.asarray(func(np.exp(logs)), dtype=float)
    ncomp, npieces = vals.shape[0], len(pieces)
    blocks = vals.reshape(ncomp, npieces, per)
    if per_piece:
        best = blocks.max(axis=2)
        arg = blocks.argmax(axis=2) + per * np.arange(npieces)[None, :]
    else:
        best = vals.max(axis=1)[:, None]
        arg = vals.argmax(axis=1)[:, None]

    def bracket(j: int) -> tuple[float, float]:
        first, last = (j // per) * per, (j // per) * per + per - 1
        return logs[max(j - 1, first)], logs[min(j + 1, last)]

    def piece_of(j: int) -> int:
        return j // per if per_piece else 0

    if floor is None:
        live = np.argwhere(best > 0)
    else:
        floor = np.reshape(floor, best.shape)
        live = np.argwhere((best > 0) & (best > floor * (1 + grid.quad_rtol)))
    zoomed = True
    if 0 < len(live) <= grid.max_zoom_brackets:
        brackets = np.array([bracket(int(arg[c, i])) for c, i in live])
        polished = golden_maximize(func, live[:, 0], brackets[:, 0], brackets[:, 1])
        best[live[:, 0], live[:, 1]] = np.maximum(best[live[:, 0], live[:, 1]], polished)
    elif len(live):
        peaks = np.unique(arg[live[:, 0], live[:, 1]]).tolist()
        if len(peaks) > grid.max_zoom_brackets:
            zoomed = False
            peaks = []
        for j in peaks:
            lo, hi = bracket(j)
            col = piece_of(j)
            members = np.nonzero((arg[:, col] == j) & (best[:, col] > 0))[0]
            for _ in range(grid.zoom_levels):
                if hi <= lo:
                    break
                v = np.linspace(lo, hi, grid.zoom_points)
                zv = np.asarray(func(np.exp(v)), dtype=float)
                best[:, col] = np.maximum(best[:, col], zv.max(axis=1))
                k = int(np.argmax((zv[members] / best[members, col, None]).max(axis=0)))
                step = (hi - lo) / (grid.zoom_points - 1)
                lo, hi = max(lo, v[k] - step), min(hi, v[k] + step)
    return (best if per_piece else best[:, 0]), zoomed
