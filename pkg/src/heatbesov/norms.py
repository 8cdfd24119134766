"""Besov and Triebel-Lizorkin quasi-norms in dyadic, heat and area form.

Discrete norms aggregate the bands ``phi(2^-j sqrt L) f`` for ``j = 1..J``
plus the low-pass ``phi0(sqrt L) f``. Continuous norms integrate
``F_t = (tL)^m exp(-tL) f`` over ``t in (0, 1]`` against ``dt/t``; see
:mod:`heatbesov.quadrature` for the integration scheme.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import AccuracyError, DomainError
from .filters import SpectralFilter, make_littlewood_pair
from .quadrature import (
    HeatSampler,
    LogIntegrator,
    QuadratureGrid,
    block_pieces,
    dyadic_truncation,
    breakpoints_complete,
    sample_supremum,
)
from .space import GeometryProfile, MetricMeasureSpace, fit_geometry
from .spectral import SelfAdjointOperator, apply_multiplier

FLAVORS = ("classical", "nonclassical")
FAMILIES = ("besov", "triebel")
CONE_CHUNK = 2_000_000  # gathered entries per block in the q = inf cone maximum


def default_m(s: float) -> int:
    """Smallest integer ``m`` with ``m > max(s/2, 0)``."""
    return int(math.floor(max(s / 2.0, 0.0))) + 1


def _exponent(value, name: str) -> float:
    if isinstance(value, str):
        value = math.inf if value.strip().lower() in ("inf", "infinity") else float(value)
    value = float(value)
    if not value > 0:
        raise DomainError(f"exponent {name} must lie in (0, inf]")
    return value


@dataclass(frozen=True)
class NormParams:
    """Smoothness ``s``, exponents ``p, q`` and heat order ``m`` of a norm.

    ``m`` defaults to the smallest integer above ``max(s/2, 0)``; an override
    must still exceed that bound. Triebel-Lizorkin norms require ``p < inf``.
    """

    s: float
    p: float
    q: float
    m: int | None = None
    flavor: str = "classical"
    family: str = "besov"

    def __post_init__(self):
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "p", _exponent(self.p, "p"))
        object.__setattr__(self, "q", _exponent(self.q, "q"))
        if self.flavor not in FLAVORS:
            raise DomainError(f"flavor must be one of {FLAVORS}")
        if self.family not in FAMILIES:
            raise DomainError(f"family must be one of {FAMILIES}")
        m = default_m(self.s) if self.m is None else self.m
        if int(m) != m or m < 1 or not m > max(self.s / 2, 0):
            raise DomainError(f"heat order m={m} must be an integer > max(s/2, 0)")
        object.__setattr__(self, "m", int(m))
        if self.family == "triebel" and math.isinf(self.p):
            raise DomainError("Triebel-Lizorkin norms need p < inf")

    def with_family(self, family: str) -> "NormParams":
        return NormParams(self.s, self.p, self.q, self.m, self.flavor, family)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class NormResult:
    """A norm value with its decomposition and accuracy metadata.

    ``lower``/``upper`` bracket the value using the two-sided bound on the
    truncated small-time range; ``tail_estimate = upper - lower``. For
    ``q = inf`` the continuous norms are suprema over sampled scales, hence
    lower bounds of the exact supremum (``sup_lower_bound`` is set).
    """

    value: float
    low: float
    high: float
    lower: float
    upper: float
    tail_estimate: float = 0.0
    L: int = 0
    J: int = 0
    evaluations: int = 0
    sup_lower_bound: bool = False
    zoomed: bool = True
    params: dict = field(default_factory=dict)


def lp_norm(f, p, space: MetricMeasureSpace) -> float:
    """``(sum_x |f(x)|^p mu_x)^(1/p)``, or ``max |f|`` for ``p = inf``."""
    p = _exponent(p, "p")
    a = np.abs(np.asarray(f, dtype=float))
    if math.isinf(p):
        return float(a.max()) if a.size else 0.0
    return float(np.sum(a**p * space.measure) ** (1.0 / p))


def _lq(values: np.ndarray, q: float, axis: int = 0) -> np.ndarray:
    values = np.abs(values)
    if values.shape[axis] == 0:
        shape = list(values.shape)
        del shape[axis]
        return np.zeros(shape)
    if math.isinf(q):
        return values.max(axis=axis)
    return np.sum(values**q, axis=axis) ** (1.0 / q)


def _volume_weight(vol: np.ndarray, s: float, n: float) -> np.ndarray:
    """``vol^(-s/n)``; requires a positive dimension unless ``s = 0``."""
    if s == 0:
        return np.ones_like(vol)
    if not n > 0:
        raise DomainError("nonclassical weights need a positive dimension n")
    return vol ** (-s / n)


def _dimension(params: NormParams, op: SelfAdjointOperator, geom: GeometryProfile | None) -> float:
    if params.flavor == "classical" or params.s == 0:
        return 0.0 if geom is None else geom.n
    geom = fit_geometry(op.space) if geom is None else geom
    if not geom.n > 0:
        raise DomainError("nonclassical norms need a positive dimension n")
    return geom.n


# ------------------------------------------------------------ discrete norms


def _dyadic_bands(op, phi0, phi, f, J: int, from_zero: bool):
    f = np.asarray(f, dtype=float)
    low = apply_multiplier(op, phi0, 1.0, f)
    start = 0 if from_zero else 1
    bands = [(j, apply_multiplier(op, phi, 2.0**-j, f)) for j in range(start, J + 1)]
    return low, bands


def _discrete(f, params, phi0, phi, op, geom, family, from_zero, full_output):
    if phi0 is None or phi is None:
        phi0, phi = make_littlewood_pair()
    space = op.space
    n = _dimension(params, op, geom)
    J = dyadic_truncation(op)
    low_f, bands = _dyadic_bands(op, phi0, phi, f, J, from_zero)
    s, p, q = params.s, params.p, params.q
    if params.flavor == "classical":
        low_w = np.ones(space.size)
        weights = [np.full(space.size, 2.0 ** (j * s)) for j, _ in bands]
    else:
        low_w = _volume_weight(space.volumes(1.0), s, n)
        weights = [_volume_weight(space.volumes(2.0**-j), s, n) for j, _ in bands]
    low = lp_norm(low_w * low_f, p, space)
    if not bands:
        high = 0.0
    elif family == "besov":
        high = float(_lq(np.array([lp_norm(w * b, p, space) for w, (_, b) in zip(weights, bands)]), q))
    else:
        stack = np.array([w * b for w, (_, b) in zip(weights, bands)])
        high = lp_norm(_lq(stack, q, axis=0), p, space)
    value = low + high
    if not full_output:
        return value
    return NormResult(value, low, high, value, value, 0.0, 0, J, 0, params=params.to_dict())


def besov_norm(
    f, params: NormParams, phi0: SpectralFilter | None = None, phi: SpectralFilter | None = None,
    op: SelfAdjointOperator | None = None, geom: GeometryProfile | None = None,
    *, full_output: bool = False,
):
    """Dyadic Besov quasi-norm (classical ``2^{js}`` or ball-volume weights).

    Filters default to :func:`heatbesov.filters.make_littlewood_pair`.
    """
    if op is None:
        raise DomainError("an operator is required")
    return _discrete(f, params, phi0, phi, op, geom, "besov", False, full_output)


def triebel_norm(
    f, params: NormParams, phi0: SpectralFilter | None = None, phi: SpectralFilter | None = None,
    op: SelfAdjointOperator | None = None, geom: GeometryProfile | None = None,
    *, sum_from_zero: bool = False, full_output: bool = False,
):
    """Dyadic Triebel-Lizorkin quasi-norm: ``L^p`` of the pointwise ``l^q`` over bands.

    The band sum starts at ``j = 1``; ``sum_from_zero`` also includes
    ``phi(sqrt L) f`` with weight ``2^0`` (classical flavor only).
    """
    if op is None:
        raise DomainError("an operator is required")
    if math.isinf(params.p):
        raise DomainError("Triebel-Lizorkin norms need p < inf")
    from_zero = sum_from_zero and params.flavor == "classical"
    return _discrete(f, params, phi0, phi, op, geom, "triebel", from_zero, full_output)


# ---------------------------------------------------------- continuous norms


class _HeatIntegrand:
    """Integrands of the heat, Triebel heat and area norms at arrays of ``t``."""

    def __init__(self, kind: str, sampler: HeatSampler, params: NormParams, n: float):
        self.kind = kind
        self.sampler = sampler
        self.params = params
        self.n = n
        self.space = sampler.space

    def _weight(self, t: float, k: int) -> np.ndarray | float:
        if self.params.flavor == "classical":
            return t ** (-self.params.s / 2.0)
        return _volume_weight(self.sampler.volumes(k), self.params.s, self.n)

    def weighted(self, ts: np.ndarray) -> np.ndarray:
        """``w(x, t) |F_t(x)|`` with shape ``(N, len(ts))``."""
        ts = np.asarray(ts, dtype=float)
        F = np.abs(self.sampler.values(ts))
        if self.params.flavor == "classical":
            return F * ts[None, :] ** (-self.params.s / 2.0)
        ks = self.sampler.level_index(ts)
        for k in np.unique(ks):
            cols = ks == k
            F[:, cols] *= self._weight(0.0, int(k))[:, None]
        return F

    def __call__(self, ts: np.ndarray) -> np.ndarray:
        """Integrand values: ``G(t)`` to be integrated against ``dt/t``.

        For ``q = inf`` this returns the function whose supremum is taken.
        """
        q, p = self.params.q, self.params.p
        g = self.weighted(ts)
        if self.kind == "besov":
            if math.isinf(p):
                norms = g.max(axis=0)
            else:
                norms = (self.space.measure @ g**p) ** (1.0 / p)
            return (norms if math.isinf(q) else norms**q)[None, :]
        if self.kind == "triebel":
            return g if math.isinf(q) else g**q
        return self._cone(ts, g)

    def _cone(self, ts: np.ndarray, g: np.ndarray) -> np.ndarray:
        q = self.params.q
        mu = self.space.measure
        ks = self.sampler.level_index(ts)
        out = np.empty_like(g)
        for k in np.unique(ks):
            cols = np.nonzero(ks == k)[0]
            block = g[:, cols]
            if k == 1:  # every ball B(x, sqrt t) is {x}
                out[:, cols] = block if math.isinf(q) else block**q
                continue
            if math.isinf(q):
                nbrs = self.sampler.ball_members(int(k))
                chunk = max(1, CONE_CHUNK // nbrs.size)
                for i in range(0, cols.size, chunk):
                    out[:, cols[i : i + chunk]] = block[:, i : i + chunk][nbrs].max(axis=1)
            else:
                mask = self.sampler.ball_mask(int(k))
                vol = self.sampler.volumes(int(k))
                out[:, cols] = (mask @ (block**q * mu[:, None])) / vol[:, None]
        return out

    def tail(self, tau: float) -> tuple[np.ndarray, np.ndarray]:
        """Lower/upper bounds of the ``(0, tau]`` part per component.

        Requires ``tau <= d_min^2`` so every ball at those scales is a point.
        For ``q < inf`` these bound the integral of ``G``; for ``q = inf`` they
        bound the supremum.
        """
        s, p, q, m = self.params.s, self.params.p, self.params.q, self.params.m
        lo, hi = self.sampler.small_time_bounds(tau)
        if self.params.flavor == "classical":
            w = np.ones(self.space.size)
            e = m - s / 2.0
        else:
            w = _volume_weight(self.space.measure, s, self.n)
            e = float(m)
        bounds = []
        for amp in (lo, hi):
            a = w * amp
            if self.kind == "besov":
                a = np.array([lp_norm(a, p, self.space)])
            if math.isinf(q):
                bounds.append(a * tau**e)
            else:
                bounds.append(a**q * tau ** (q * e) / (q * e))
        return bounds[0], bounds[1]


def _combine(kind: str, total: np.ndarray, q: float, p: float, space) -> float:
    """Outer aggregation of integrated (or supremum) components."""
    total = np.maximum(total, 0.0)
    inner = total if math.isinf(q) else total ** (1.0 / q)
    if kind == "besov":
        return float(inner[0])
    return lp_norm(inner, p, space)


def _area_supremum(integrand: _HeatIntegrand, pieces, grid: QuadratureGrid):
    """``sup_t max_{y in B(x, sqrt t)} h_y(t)`` with ``h_y(t) = w(y,t) |F_t(y)|``.

    Swapping the two suprema gives ``max_y sup {h_y(t) : t > rho(x,y)^2}``.
    Every ``rho^2 < 1`` is a piece boundary, so per-piece suprema of ``h_y``
    and their suffix maxima answer all pairs at once.
    """
    per_piece, zoomed = sample_supremum(integrand.weighted, pieces, grid, per_piece=True)
    npts = per_piece.shape[0]
    suffix = np.maximum.accumulate(per_piece[:, ::-1], axis=1)[:, ::-1]
    suffix = np.hstack([suffix, np.zeros((npts, 1))])
    starts = np.array([a for a, _ in pieces])
    first = np.searchsorted(starts, integrand.space.metric**2, side="left")  # [x, y]
    return suffix[np.arange(npts)[None, :], first].max(axis=1), zoomed


def _absolute_floor(kind: str, eps: float, p: float, q: float, space) -> float:
    """Integral error per component that moves the norm by at most about ``eps``.

    An error ``d`` in every component changes the Triebel-Lizorkin outer
    norm by about ``d^(1/q) |M|^(1/p)`` and the Besov value by ``d^(1/q)``.
    """
    if kind != "besov" and math.isfinite(p):
        eps = eps / max(1.0, space.total_measure) ** (1.0 / p)
    return eps**q


def _first_block(space: MetricMeasureSpace, op: SelfAdjointOperator) -> int:
    L = 1
    if space.size > 1 and space.min_distance < 1:
        L = max(L, math.ceil(math.log(1.0 / space.min_distance**2, 4) - 1e-12))
    if op.spectral_radius > 1:
        L = max(L, math.ceil(math.log(op.spectral_radius, 4)))
    return L


def _continuous(kind, f, params, op, geom, grid, sampler, full_output):
    if op is None:
        raise DomainError("an operator is required")
    grid = QuadratureGrid() if grid is None else grid
    if kind != "besov" and math.isinf(params.p):
        raise DomainError("Triebel-Lizorkin norms need p < inf")
    space = op.space
    n = _dimension(params, op, geom)
    if sampler is None:
        sampler = HeatSampler(op, f, params.m)
    elif sampler.m != params.m or sampler.op is not op:
        raise DomainError("sampler was built for a different operator or heat order")
    s, p, q = params.s, params.p, params.q

    low_w = (
        np.ones(space.size) if params.flavor == "classical"
        else _volume_weight(space.volumes(1.0), s, n)
    )
    low = lp_norm(low_w * sampler.lowpass(), p, space)
    integrand = _HeatIntegrand(kind, sampler, params, n)
    is_sup = math.isinf(q)

    L = min(_first_block(space, op), grid.max_blocks)
    pieces = block_pieces(grid, sampler.levels, L)
    zoomed = True
    if is_sup and kind == "area" and breakpoints_complete(grid, sampler.levels, L):
        body, zoomed = _area_supremum(integrand, pieces, grid)
    elif is_sup:
        body, zoomed = sample_supremum(integrand, pieces, grid)
        evaluations = sampler.samples
    else:
        integ = LogIntegrator(integrand, grid)
        integ.add(pieces)
        atol = _absolute_floor(kind, grid.quad_rtol * low, p, q, space)
        body = integ.refine(atol)
    while True:
        tau = 4.0**-L
        t_lo, t_hi = integrand.tail(tau)
        if is_sup:
            lower = _combine(kind, np.maximum(body, t_lo), q, p, space)
            upper = _combine(kind, np.maximum(body, t_hi), q, p, space)
            high = lower
        else:
            lower = _combine(kind, body + t_lo, q, p, space)
            upper = _combine(kind, body + t_hi, q, p, space)
            high = _combine(kind, body + 0.5 * (t_lo + t_hi), q, p, space)
        tail_est = upper - lower
        if tail_est <= grid.tol * (low + high):
            break
        if L >= grid.max_blocks:
            raise AccuracyError(
                f"small-time tail {tail_est:.3e} exceeds tol*norm after {L} blocks; "
                "raise max_blocks or loosen tol"
            )
        new = [(4.0 ** -(L + 1), 4.0**-L)]
        L += 1
        if is_sup:
            extra, ok = sample_supremum(integrand, new, grid)
            body = np.maximum(body, extra)
            zoomed = zoomed and ok
        else:
            integ.add(new)
            body = integ.refine(atol)
    evaluations = sampler.samples
    value = low + high
    if not full_output:
        return value
    return NormResult(
        value=value, low=low, high=high, lower=low + lower, upper=low + upper,
        tail_estimate=tail_est, L=L, J=dyadic_truncation(op), evaluations=evaluations,
        sup_lower_bound=is_sup, zoomed=zoomed, params=params.to_dict(),
    )


def besov_heat_norm(
    f, params: NormParams, op: SelfAdjointOperator | None = None,
    geom: GeometryProfile | None = None, grid: QuadratureGrid | None = None,
    *, sampler: HeatSampler | None = None, full_output: bool = False,
):
    """``||W_1 e^{-L} f||_p + (int_0^1 ||w_t (tL)^m e^{-tL} f||_p^q dt/t)^{1/q}``.

    ``w_t = t^{-s/2}`` (classical) or ``|B(., sqrt t)|^{-s/n}`` (nonclassical);
    ``W_1`` is 1 or ``|B(., 1)|^{-s/n}``.
    """
    return _continuous("besov", f, params, op, geom, grid, sampler, full_output)


def triebel_heat_norm(
    f, params: NormParams, op: SelfAdjointOperator | None = None,
    geom: GeometryProfile | None = None, grid: QuadratureGrid | None = None,
    *, sampler: HeatSampler | None = None, full_output: bool = False,
):
    """``||W_1 e^{-L} f||_p + || (int_0^1 |w_t (tL)^m e^{-tL} f|^q dt/t)^{1/q} ||_p``."""
    return _continuous("triebel", f, params, op, geom, grid, sampler, full_output)


def triebel_area_norm(
    f, params: NormParams, op: SelfAdjointOperator | None = None,
    geom: GeometryProfile | None = None, grid: QuadratureGrid | None = None,
    *, sampler: HeatSampler | None = None, full_output: bool = False,
):
    """Lusin area version of :func:`triebel_heat_norm`.

    At each ``x`` the ``t``-integrand is the average of ``|w(y,t) F_t(y)|^q``
    over ``y`` in ``B(x, sqrt t)`` (``w(y, t) = |B(y, sqrt t)|^{-s/n}`` in the
    nonclassical flavor).
    """
    return _continuous("area", f, params, op, geom, grid, sampler, full_output)


# --------------------------------------------------------- maximal functions


def peetre_maximal(
    f, phi, t: float, a: float, gamma: float = 0.0,
    op: SelfAdjointOperator | None = None, space: MetricMeasureSpace | None = None,
    *, values: np.ndarray | None = None,
) -> np.ndarray:
    """``sup_y |B(y,t)|^gamma |phi(t sqrt L) f(y)| / (1 + rho(x,y)/t)^a``.

    ``values`` may carry a precomputed ``phi(t sqrt L) f`` (then ``phi`` and
    ``f`` are ignored).
    """
    if not t > 0:
        raise DomainError("scale t must be positive")
    if not a >= 0:
        raise DomainError("decay exponent a must be non-negative")
    space = op.space if space is None else space
    g = apply_multiplier(op, phi, t, f) if values is None else np.asarray(values, float)
    num = space.volumes(t) ** gamma * np.abs(g)
    with np.errstate(over="ignore"):  # an infinite decay factor correctly gives 0
        decay = (1.0 + space.metric / t) ** a
    return (num[None, :] / decay).max(axis=1)


def hl_maximal(f, space: MetricMeasureSpace) -> np.ndarray:
    """Uncentred Hardy-Littlewood maximal function over all balls.

    Every ball is a closed prefix of some centre's distance-sorted points
    (ties kept together), so the supremum is exact.
    """
    a = np.abs(np.asarray(f, dtype=float))
    n = space.size
    out = np.zeros(n)
    mu = space.measure
    for z in range(n):
        row = space.metric[z]
        order = np.argsort(row, kind="stable")
        sd = row[order]
        mass = np.cumsum(mu[order])
        total = np.cumsum((a * mu)[order])
        # index of the last member of each tie group
        ends = np.nonzero(np.append(sd[1:] != sd[:-1], True))[0]
        avg = total[ends] / mass[ends]
        suffix = np.maximum.accumulate(avg[::-1])[::-1]
        group = np.searchsorted(ends, np.arange(n))
        out[order] = np.maximum(out[order], suffix[group])
    return out
