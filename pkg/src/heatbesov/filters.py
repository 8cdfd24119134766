"""Even spectral filters with derivative jets, and the seminorm built on them.

Every filter is stored through a *jet function* ``jet(x, K)`` returning the
derivatives of orders ``0..K`` at points ``x >= 0`` as an array of shape
``(K + 1, len(x))``. Evaluation at negative arguments uses the even extension.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import minimize_scalar
from scipy.special import comb

from .errors import ConstructionError, DomainError

JetFn = Callable[[np.ndarray, int], np.ndarray]

# closed-form derivative orders for bump constructions; higher orders use
# Richardson-extrapolated central differences of the top closed-form order
ANALYTIC_ORDER = 4
MAX_BUMP_ORDER = 6
FD_STEP = 1e-4
# exp(-1/x) underflows to subnormals below this; treat the step as flat there
STEP_CUTOFF = 1.0 / 700.0
# argument beyond which the Gaussian factor is below 1e-390 and the seminorm
# contribution of heat filters is negligible
HEAT_SEMINORM_CAP = 30.0
PLATEAU = 2.0**0.75


@dataclass(frozen=True, eq=False)
class SpectralFilter:
    """Even real filter with derivative access and support metadata.

    Parameters
    ----------
    name : str
        Tag used in reports.
    jet_fn : callable
        ``jet_fn(x, K)`` for ``x >= 0`` returning derivatives ``0..K``.
    support : (float, float)
        ``[lo, hi]`` on the half-line; ``hi = inf`` for unbounded support.
    vanishing_order : float
        Largest ``k`` with ``lambda^{-2k} phi`` bounded near 0 (``inf`` when
        the support avoids 0).
    analytic_order, max_order : float
        Orders served in closed form, and the highest order served at all.
    """

    name: str
    jet_fn: JetFn
    support: tuple[float, float]
    vanishing_order: float = 0.0
    analytic_order: float = math.inf
    max_order: float = math.inf
    parity: str = "even"

    def jet(self, x: np.ndarray, order: int) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        if np.any(x < 0):
            raise DomainError("jets are taken on the half-line x >= 0")
        if order > self.analytic_order:
            raise DomainError(f"{self.name}: closed form stops at order {self.analytic_order}")
        return self.jet_fn(x, order)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        out = self.jet_fn(np.abs(lam).ravel(), 0)[0].reshape(lam.shape)
        return float(out) if out.ndim == 0 else out

    def _signed(self, order: int, lam: np.ndarray) -> np.ndarray:
        a = np.abs(lam)
        d = self.jet_fn(a, order)[order]
        return d if order % 2 == 0 else np.sign(lam) * d

    def derivative(self, nu: int, lam):
        """``nu``-th derivative of the even extension at ``lam``."""
        if nu < 0 or nu > self.max_order:
            raise DomainError(f"{self.name}: derivative order {nu} not available")
        lam_arr = np.asarray(lam, dtype=float)
        flat = lam_arr.ravel()
        if nu <= self.analytic_order:
            out = self._signed(nu, flat)
        else:
            base = int(self.analytic_order)
            out = _richardson(lambda z: self._signed(base, z), nu - base, flat)
        out = out.reshape(lam_arr.shape)
        return float(out) if out.ndim == 0 else out


def _central(f: Callable, d: int, x: np.ndarray, h: float) -> np.ndarray:
    if d == 1:
        return (f(x + h) - f(x - h)) / (2 * h)
    if d == 2:
        return (f(x + h) - 2 * f(x) + f(x - h)) / h**2
    raise DomainError("central differences are provided for orders 1 and 2")


def _richardson(f: Callable, d: int, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    coarse = _central(f, d, x, h)
    fine = _central(f, d, x, h / 2)
    return (4 * fine - coarse) / 3


# ------------------------------------------------------------- jet algebra


def _leibniz(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    for k in range(a.shape[0]):
        for i in range(k + 1):
            out[k] += comb(k, i, exact=True) * a[i] * b[k - i]
    return out


def _divide(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    q = np.zeros_like(a)
    for k in range(a.shape[0]):
        acc = a[k].copy()
        for i in range(k):
            acc -= comb(k, i, exact=True) * q[i] * b[k - i]
        q[k] = acc / b[0]
    return q


def _dilate(fn: JetFn, c) -> JetFn:
    """Jet of ``x -> fn(c x)``; ``c`` may be a per-point array."""

    def jet(x, order):
        cc = np.broadcast_to(np.asarray(c, float), x.shape)
        base = fn(cc * x, order)
        powers = cc[None, :] ** np.arange(order + 1)[:, None]
        return base * powers

    return jet


def _shift_scale(fn: JetFn, alpha: float, beta: float) -> JetFn:
    """Jet of ``x -> fn(alpha x + beta)`` on real ``alpha x + beta``."""

    def jet(x, order):
        base = fn(alpha * x + beta, order)
        return base * (alpha ** np.arange(order + 1))[:, None]

    return jet


@lru_cache(maxsize=None)
def _exp_inv_polys(order: int) -> tuple[Polynomial, ...]:
    """``P_k`` with ``d^k/dx^k exp(-1/x) = P_k(1/x) exp(-1/x)``."""
    polys = [Polynomial([1.0])]
    u2 = Polynomial([0.0, 0.0, 1.0])
    for _ in range(order):
        p = polys[-1]
        polys.append(u2 * (p - p.deriv()))
    return tuple(polys)


def _exp_inv_jet(x: np.ndarray, order: int) -> np.ndarray:
    """Jet of ``s(x) = exp(-1/x)`` for ``x > 0``."""
    u = 1.0 / x
    e = np.exp(-u)
    return np.array([p(u) * e for p in _exp_inv_polys(order)])


def smooth_step_jet(x: np.ndarray, order: int) -> np.ndarray:
    """Jet of the smooth step ``g(x) = s(x) / (s(x) + s(1 - x))``.

    ``g = 0`` on ``x <= 0``, ``g = 1`` on ``x >= 1``, and ``g`` is ``C^inf``.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((order + 1, x.size))
    out[0, x >= 1 - STEP_CUTOFF] = 1.0
    mid = (x > STEP_CUTOFF) & (x < 1 - STEP_CUTOFF)
    if np.any(mid):
        xm = x[mid]
        a = _exp_inv_jet(xm, order)
        b = _exp_inv_jet(1 - xm, order) * ((-1.0) ** np.arange(order + 1))[:, None]
        out[:, mid] = _divide(a, a + b)
    return out


def _one_minus(fn: JetFn) -> JetFn:
    def jet(x, order):
        out = -fn(x, order)
        out[0] += 1.0
        return out

    return jet


def _gauss_poly_jet(base: Polynomial, sign: float) -> JetFn:
    """Jet of ``base(x) exp(sign x^2)`` via ``P -> P' + 2 sign x P``."""

    def jet(x, order):
        polys = [base]
        two_x = Polynomial([0.0, 2.0 * sign])
        for _ in range(order):
            polys.append(polys[-1].deriv() + two_x * polys[-1])
        with np.errstate(over="ignore"):
            g = np.exp(sign * x**2)
        return np.array([p(x) * g for p in polys])

    return jet


# ------------------------------------------------------------ constructions


def _cutoff_jet() -> JetFn:
    """``h = 1`` on ``[0, 1]``, ``h = 0`` on ``[2, inf)``."""
    return _one_minus(_shift_scale(smooth_step_jet, 1.0, -1.0))


def _band_jet() -> JetFn:
    """``h(x) - h(2x)``: positive exactly on ``(1/2, 2)``."""
    h = _cutoff_jet()
    h2 = _dilate(h, 2.0)
    return lambda x, order: h(x, order) - h2(x, order)


def make_littlewood_pair() -> tuple[SpectralFilter, SpectralFilter]:
    """Low-pass ``phi0`` and band-pass ``phi`` for the dyadic norms.

    ``phi0 = 1`` on ``[0, 2^{3/4}]`` with support ``[0, 2]``; ``phi = 1`` on
    ``[2^{-3/4}, 2^{3/4}]`` with support ``[1/2, 2]``. Both plateaus give the
    lower bound ``c = 1``.
    """
    width_hi = 2.0 - PLATEAU
    lo_edge = 2.0**-0.75
    fall = _one_minus(_shift_scale(smooth_step_jet, 1.0 / width_hi, -PLATEAU / width_hi))
    rise = _shift_scale(smooth_step_jet, 1.0 / (lo_edge - 0.5), -0.5 / (lo_edge - 0.5))
    phi0 = SpectralFilter("littlewood-low", fall, (0.0, 2.0), 0.0, ANALYTIC_ORDER, MAX_BUMP_ORDER)
    band = lambda x, order: _leibniz(rise(x, order), fall(x, order))  # noqa: E731
    phi = SpectralFilter("littlewood-band", band, (0.5, 2.0), math.inf, ANALYTIC_ORDER, MAX_BUMP_ORDER)
    return phi0, phi


def make_partition_pair() -> tuple[SpectralFilter, SpectralFilter]:
    """Telescoping pair ``psi0 = h``, ``psi = h - h(2.)`` summing to 1."""
    psi0 = SpectralFilter("partition-low", _cutoff_jet(), (0.0, 2.0), 0.0, ANALYTIC_ORDER, MAX_BUMP_ORDER)
    psi = SpectralFilter("partition-band", _band_jet(), (0.5, 2.0), math.inf, ANALYTIC_ORDER, MAX_BUMP_ORDER)
    return psi0, psi


def make_heat_pair(m: int) -> tuple[SpectralFilter, SpectralFilter]:
    """``omega0 = exp(-x^2)`` and ``omega = x^{2m} exp(-x^2)``.

    ``omega(sqrt(t) sqrt(lambda)) = (t lambda)^m exp(-t lambda)``, so applying
    ``omega`` at scale ``sqrt(t)`` realises ``(tL)^m exp(-tL)``.
    """
    if int(m) != m or m < 1:
        raise DomainError("heat filter order m must be a positive integer")
    m = int(m)
    omega0 = SpectralFilter("heat-low", _gauss_poly_jet(Polynomial([1.0]), -1.0), (0.0, math.inf))
    mono = Polynomial([0.0] * (2 * m) + [1.0])
    omega = SpectralFilter(f"heat-band(m={m})", _gauss_poly_jet(mono, -1.0), (0.0, math.inf), float(m))
    return omega0, omega


def normalize_to_partition(
    omega0: SpectralFilter, omega: SpectralFilter, check_grid: np.ndarray | None = None
) -> tuple[SpectralFilter, SpectralFilter]:
    """Return ``(psi0, psi)`` with ``psi0 omega0 + sum_{j>=1} psi(2^-j .) omega(2^-j .) = 1``.

    ``psi = eta / zeta`` where ``eta = h - h(2.)`` and
    ``zeta(x) = sum_{l in Z} (eta omega)(2^-l x)`` is dilation invariant, so
    ``sum_{j in Z} (psi omega)(2^-j x) = 1`` for ``x > 0``. The low part is
    ``psi0 = theta / omega0`` with ``theta = 1 - (psi omega)(x/2)`` on
    ``[0, 2)`` and ``theta = 0`` beyond, which is the ``j <= 0`` remainder of
    the two-sided sum. ``omega`` must be positive on ``(0, inf)`` and
    ``omega0`` positive on ``[0, 2]``.
    """
    eta = _band_jet()

    def eta_omega(x, order):
        return _leibniz(eta(x, order), omega.jet_fn(x, order))

    def zeta(x, order):
        out = np.zeros((order + 1, x.size))
        pos = x > 0
        if np.any(pos):
            k = np.floor(np.log2(x[pos]))
            for off in (-1.0, 0.0, 1.0):
                out[:, pos] += _dilate(eta_omega, 2.0 ** -(k + off))(x[pos], order)
        return out

    def psi_jet(x, order):
        out = np.zeros((order + 1, x.size))
        inside = (x > 0.5) & (x < 2.0)
        if np.any(inside):
            xi = x[inside]
            z = zeta(xi, order)
            if np.any(z[0] <= 0):
                raise ConstructionError("normaliser zeta vanished inside the band")
            out[:, inside] = _divide(eta(xi, order), z)
        return out

    def psi_omega(x, order):
        return _leibniz(psi_jet(x, order), omega.jet_fn(x, order))

    half = _dilate(psi_omega, 0.5)
    inv_gauss = _gauss_poly_jet(Polynomial([1.0]), 1.0)

    def psi0_jet(x, order):
        out = np.zeros((order + 1, x.size))
        low = x < 2.0
        if np.any(low):
            xl = x[low]
            theta = -half(xl, order)
            theta[0] += 1.0
            w0 = omega0.jet_fn(xl, order)
            if np.any(w0[0] <= 0):
                raise ConstructionError("omega0 vanishes on the low band")
            out[:, low] = _divide(theta, w0)
        return out

    grid = np.linspace(0.5, 2.0, 301)[1:-1] if check_grid is None else np.asarray(check_grid)
    grid = grid[(grid > 0.5) & (grid < 2.0)]
    if grid.size and np.any(zeta(grid, 0)[0] <= 0):
        raise ConstructionError("normaliser zeta is not positive on the band")

    order = int(min(ANALYTIC_ORDER, omega.analytic_order, omega0.analytic_order))
    top = int(min(MAX_BUMP_ORDER, omega.max_order, omega0.max_order))
    tag = omega.name
    psi0 = SpectralFilter(f"normalized-low[{tag}]", psi0_jet, (0.0, 2.0), 0.0, order, top)
    psi = SpectralFilter(f"normalized-band[{tag}]", psi_jet, (0.5, 2.0), math.inf, order, top)
    return psi0, psi


def zero_filter() -> SpectralFilter:
    return SpectralFilter("zero", lambda x, order: np.zeros((order + 1, x.size)), (0.0, 0.0), math.inf)


def constant_filter(value: float = 1.0) -> SpectralFilter:
    def jet(x, order):
        out = np.zeros((order + 1, x.size))
        out[0] = value
        return out

    return SpectralFilter(f"constant({value})", jet, (0.0, math.inf))


_HEAT_TAG = re.compile(r"^(heat|normalized-heat)\((\d+)\)$")


def filters_from_tag(tag: str) -> tuple[SpectralFilter, SpectralFilter]:
    """Resolve ``littlewood``, ``partition``, ``heat(m)`` or ``normalized-heat(m)``."""
    tag = tag.strip()
    if tag == "littlewood":
        return make_littlewood_pair()
    if tag == "partition":
        return make_partition_pair()
    match = _HEAT_TAG.match(tag)
    if match:
        pair = make_heat_pair(int(match.group(2)))
        return pair if match.group(1) == "heat" else normalize_to_partition(*pair)
    raise DomainError(f"unknown filter tag {tag!r}")


# ----------------------------------------------------------------- seminorm


def seminorm(
    phi: SpectralFilter, N: int, n: float, include_zero: bool = False, grid_size: int = 4000
) -> float:
    """``sup_{lambda >= 0, 1 <= nu <= N} (1 + lambda)^{N+n+1} |phi^{(nu)}(lambda)|``.

    The supremum is located on a dense grid mixing linear and logarithmic
    spacing, then refined by bounded scalar maximisation around the best
    grid points. Unbounded filters are scanned on ``[0, 30]``; beyond that the
    Gaussian factor makes every term smaller than ``1e-300``.

    Parameters
    ----------
    include_zero : bool
        Also include ``nu = 0`` in the supremum.
    """
    if int(N) != N or N < 1:
        raise DomainError("seminorm order N must be a positive integer")
    if N > phi.max_order:
        raise DomainError(f"{phi.name}: derivatives available only up to order {phi.max_order}")
    lo, hi = phi.support
    if hi <= lo:
        return 0.0
    hi = min(hi, HEAT_SEMINORM_CAP)
    pts = np.unique(np.concatenate([
        np.linspace(lo, hi, grid_size),
        lo + np.geomspace(1e-6, hi - lo, grid_size // 2),
    ]))
    pts = pts[(pts >= lo) & (pts <= hi)]
    expo = N + n + 1
    best = 0.0
    for nu in range(0 if include_zero else 1, N + 1):
        def objective(lam, nu=nu):
            return (1 + lam) ** expo * np.abs(phi.derivative(nu, lam))

        vals = objective(pts)
        top = np.argsort(vals)[-3:]
        best = max(best, float(vals.max()))
        for i in top:
            a, b = pts[max(i - 1, 0)], pts[min(i + 1, pts.size - 1)]
            if b <= a or vals[i] == 0:
                continue
            res = minimize_scalar(
                lambda z: -float(objective(z)), bounds=(a, b), method="bounded",
                options={"xatol": 1e-12},
            )
            best = max(best, -float(res.fun))
    return best
