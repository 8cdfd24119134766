"""Graph Laplacians, spectral functional calculus and heat-kernel diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NumericError
from .space import GeometryProfile, MetricMeasureSpace

HOLDER_GRID = tuple(round(0.1 * k, 1) for k in range(1, 21))
DEFAULT_HEAT_TIMES = (1e-3, 1e-2, 1e-1, 1.0)
# rate reported when no off-diagonal sample constrains the Gaussian envelope
GAUSSIAN_RATE_CAP = 100.0


@dataclass(frozen=True, eq=False)
class SelfAdjointOperator:
    """Non-negative operator stored through a mu-orthonormal eigenbasis.

    ``eigenvectors[:, k]`` is ``e_k`` with ``sum_x e_j(x) e_k(x) mu_x = delta_jk``.
    """

    space: MetricMeasureSpace
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    matrix: np.ndarray | None = None
    disconnected: bool = False

    @property
    def spectral_radius(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    def coefficients(self, f: np.ndarray) -> np.ndarray:
        """Spectral coefficients ``<f, e_k>_mu`` (works column-wise on 2-D input)."""
        f = np.asarray(f, dtype=float)
        mu = self.space.measure if f.ndim == 1 else self.space.measure[:, None]
        return self.eigenvectors.T @ (mu * f)

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return self.eigenvectors @ coeffs

    def apply(self, f: np.ndarray) -> np.ndarray:
        """``L f`` evaluated through the eigenpairs."""
        c = self.coefficients(f)
        lam = self.eigenvalues if c.ndim == 1 else self.eigenvalues[:, None]
        return self.synthesize(lam * c)

    def kernel_from_values(self, values: np.ndarray) -> np.ndarray:
        """Kernel ``sum_k values[k] e_k(x) e_k(y)``, symmetrised."""
        k = (self.eigenvectors * values) @ self.eigenvectors.T
        return 0.5 * (k + k.T)


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Kernel of ``T`` with ``(T f)(x) = sum_y K(x, y) f(y) mu_y``."""

    values: np.ndarray
    scale: float
    tag: str = ""

    def apply(self, f: np.ndarray, measure: np.ndarray) -> np.ndarray:
        return self.values @ (measure * np.asarray(f, dtype=float))


@dataclass(frozen=True)
class HeatDiagnostics:
    """Envelope fits of the small-time heat-kernel conditions.

    ``positivity_defect`` is the magnitude of the most negative kernel entry
    (0 when every entry is non-negative).
    """

    C_star: float
    c_star: float
    alpha: float
    holder_constant: float
    markov_defect: float
    positivity_defect: float
    t_grid: tuple[float, ...] = ()
    holder_pairs: int = 0
    holder_sampled: bool = False
    holder_curve: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "C_star": self.C_star, "c_star": self.c_star, "alpha": self.alpha,
            "holder_constant": self.holder_constant, "markov_defect": self.markov_defect,
            "positivity_defect": self.positivity_defect, "t_grid": list(self.t_grid),
            "holder_pairs": self.holder_pairs, "holder_sampled": self.holder_sampled,
        }


def operator_from_matrix(space: MetricMeasureSpace, matrix: np.ndarray) -> SelfAdjointOperator:
    """Diagonalise a mu-self-adjoint non-negative matrix ``L``.

    ``mu_x L[x, y]`` must be symmetric. The similarity ``A = M^{1/2} L M^{-1/2}``
    is symmetric, so ``eigh`` gives an orthonormal basis which ``M^{-1/2}``
    maps to a mu-orthonormal one.
    """
    matrix = np.asarray(matrix, dtype=float)
    n = space.size
    if matrix.shape != (n, n):
        raise DomainError("operator matrix has the wrong shape")
    root = np.sqrt(space.measure)
    sym = root[:, None] * matrix / root[None, :]
    if not np.allclose(sym, sym.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(sym).max())):
        raise DomainError("operator is not self-adjoint with respect to the measure")
    sym = 0.5 * (sym + sym.T)
    lam, u = np.linalg.eigh(sym)
    scale = max(1.0, float(np.abs(lam).max()))
    if lam[0] < -1e-9 * scale:
        raise DomainError(f"operator has a negative eigenvalue {lam[0]:.3e}")
    lam = np.clip(lam, 0.0, None)
    # fix the sign of each eigenvector so results do not depend on LAPACK choices
    pivot = np.argmax(np.abs(u), axis=0)
    u = u * np.sign(u[pivot, np.arange(n)])
    vecs = u / root[:, None]
    lam.flags.writeable = False
    vecs.flags.writeable = False
    nullity = int(np.sum(lam <= 1e-10 * scale))
    return SelfAdjointOperator(space, lam, vecs, matrix, disconnected=nullity > 1)


def build_graph_laplacian(
    space: MetricMeasureSpace, edges: Sequence[tuple[int, int, float]] | None = None
) -> SelfAdjointOperator:
    """Operator ``(L f)(x) = mu_x^{-1} sum_{y ~ x} w_xy (f(x) - f(y))``.

    ``edges`` defaults to the edges carried by ``space``. Each undirected pair
    must be listed once.
    """
    edges = space.edges if edges is None else edges
    if edges is None:
        raise DomainError("no edges given and the space carries none")
    n = space.size
    w = np.zeros((n, n))
    seen = set()
    for u, v, weight in edges:
        u, v = int(u), int(v)
        if not (0 <= u < n and 0 <= v < n) or u == v:
            raise DomainError(f"invalid edge ({u}, {v})")
        if not weight > 0:
            raise DomainError(f"edge ({u}, {v}) has non-positive weight {weight}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise DomainError(f"edge {key} listed twice")
        seen.add(key)
        w[u, v] = w[v, u] = float(weight)
    lap = (np.diag(w.sum(axis=1)) - w) / space.measure[:, None]
    return operator_from_matrix(space, lap)


def _filter_values(phi: Callable, arg: np.ndarray) -> np.ndarray:
    vals = np.asarray(phi(arg), dtype=float)
    vals = np.broadcast_to(vals, arg.shape).astype(float)
    if not np.all(np.isfinite(vals)):
        raise NumericError("filter evaluation produced non-finite values")
    return vals


def multiplier_values(op: SelfAdjointOperator, phi: Callable, t: float) -> np.ndarray:
    """``phi(t sqrt(lambda_k))`` for every eigenvalue."""
    if not t > 0:
        raise DomainError("scale t must be positive")
    return _filter_values(phi, t * np.sqrt(op.eigenvalues))


def apply_multiplier(op: SelfAdjointOperator, phi: Callable, t: float, f: np.ndarray) -> np.ndarray:
    """``phi(t sqrt(L)) f = sum_k phi(t sqrt(lambda_k)) <f, e_k>_mu e_k``."""
    vals = multiplier_values(op, phi, t)
    c = op.coefficients(f)
    return op.synthesize((vals if c.ndim == 1 else vals[:, None]) * c)


def multiplier_kernel(op: SelfAdjointOperator, phi: Callable, t: float) -> KernelMatrix:
    """Kernel of ``phi(t sqrt(L))``."""
    vals = multiplier_values(op, phi, t)
    return KernelMatrix(op.kernel_from_values(vals), float(t), getattr(phi, "name", ""))


def heat_kernel(op: SelfAdjointOperator, t: float) -> KernelMatrix:
    """Kernel ``p(t, x, y)`` of ``exp(-t L)``."""
    if not t > 0:
        raise DomainError("time t must be positive")
    return KernelMatrix(op.kernel_from_values(np.exp(-t * op.eigenvalues)), float(t), "heat")


def diagnose_heat(
    op: SelfAdjointOperator,
    space: MetricMeasureSpace | None = None,
    geom: GeometryProfile | None = None,
    t_grid: Sequence[float] = DEFAULT_HEAT_TIMES,
    max_pairs: int = 2000,
    seed: int = 0,
) -> HeatDiagnostics:
    """Fit the Gaussian bound, Hoelder exponent and Markov defect of ``exp(-tL)``.

    The Gaussian envelope takes ``C* = 2 max |p| sqrt(V_x V_y)`` and the largest
    ``c*`` for which the bound holds at every sample. The Hoelder exponent is
    the largest ``alpha`` in ``{0.1, ..., 2.0}`` whose constant stays within a
    factor 2 of the constant at ``alpha = 0.1``; pairs ``(y, y')`` with
    ``rho(y, y') <= sqrt(t)`` are exhaustive up to ``max_pairs`` per scale and a
    seeded sample beyond. ``geom`` is accepted for interface symmetry and
    unused: every quantity is measured directly.
    """
    space = op.space if space is None else space
    t_grid = tuple(float(t) for t in t_grid)
    if not t_grid:
        raise DomainError("t grid is empty")
    if any(not 0 < t <= 1 for t in t_grid):
        raise DomainError("heat diagnostics use times in (0, 1]")
    rho = space.metric
    mu = space.measure
    kernels, vols = [], []
    markov = 0.0
    most_negative = 0.0
    for t in t_grid:
        p = heat_kernel(op, t).values
        kernels.append(p)
        vols.append(space.volumes(math.sqrt(t)))
        markov = max(markov, float(np.max(np.abs(p @ mu - 1.0))))
        most_negative = min(most_negative, float(p.min()))

    # Gaussian envelope in log coordinates: v = log(|p| sqrt(VxVy)), u = rho^2/t
    with np.errstate(divide="ignore"):
        logs = [np.log(np.abs(p) * np.sqrt(np.outer(v, v))) for p, v in zip(kernels, vols)]
    c0 = math.exp(max(float(np.max(v)) for v in logs))
    log_c = math.log(2.0 * c0)
    rate = math.inf
    for t, v in zip(t_grid, logs):
        u = rho**2 / t
        mask = u > 0
        if np.any(mask):
            rate = min(rate, float(np.min((log_c - v[mask]) / u[mask])))
    rate = GAUSSIAN_RATE_CAP if not math.isfinite(rate) else min(rate, GAUSSIAN_RATE_CAP)
    C_star = 2.0 * c0

    rng = np.random.default_rng(seed)
    curve = {a: 0.0 for a in HOLDER_GRID}
    pairs_used, sampled = 0, False
    for t, p, vol in zip(t_grid, kernels, vols):
        yy, yp = np.nonzero((rho <= math.sqrt(t)) & (rho > 0))
        if yy.size > max_pairs:
            pick = np.sort(rng.choice(yy.size, max_pairs, replace=False))
            yy, yp = yy[pick], yp[pick]
            sampled = True
        if yy.size == 0:
            continue
        pairs_used += yy.size
        # diff[x, i] = p(t, x, yy_i) - p(t, x, yp_i)
        diff = np.abs(p[:, yy] - p[:, yp])
        with np.errstate(divide="ignore"):
            logd = (
                np.log(diff)
                + 0.5 * (np.log(vol)[:, None] + np.log(vol[yy])[None, :])
                + rate * rho[:, yy] ** 2 / t
            )
        logr = np.log(rho[yy, yp] / math.sqrt(t))
        for a in HOLDER_GRID:
            curve[a] = max(curve[a], float(np.exp(np.max(logd - a * logr[None, :]))))
    if pairs_used == 0:
        alpha, hconst = 2.0, 0.0
    else:
        base = curve[HOLDER_GRID[0]]
        alpha = max(a for a in HOLDER_GRID if curve[a] <= 2.0 * base * (1 + 1e-12))
        hconst = curve[alpha]
    return HeatDiagnostics(
        C_star=C_star, c_star=rate, alpha=alpha, holder_constant=hconst,
        markov_defect=markov, positivity_defect=max(0.0, -most_negative),
        t_grid=t_grid, holder_pairs=pairs_used, holder_sampled=sampled, holder_curve=curve,
    )
