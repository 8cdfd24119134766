"""Independent brute-force re-implementation of every norm, for small spaces.

Shares no code with the package: the eigenproblem is solved in generalised
form with scipy, spectral sums are explicit Python loops, ball volumes are
enumerated, and t-integrals use scipy's adaptive QUADPACK rule in
``v = log t`` split at every ``t = d^2``.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg
from scipy.integrate import quad
from scipy.optimize import minimize_scalar


class Oracle:
    def __init__(self, metric, measure, edges, n_dim):
        self.rho = np.asarray(metric, float)
        self.mu = np.asarray(measure, float)
        self.N = len(self.mu)
        self.n_dim = n_dim
        W = np.zeros((self.N, self.N))
        for u, v, w in edges:
            W[u, v] += w
            W[v, u] += w
        D = np.diag(W.sum(axis=1))
        lam, vecs = scipy.linalg.eigh(D - W, np.diag(self.mu))
        self.lam = [max(0.0, float(x)) for x in lam]
        self.vecs = vecs  # mu-orthonormal columns
        dists = sorted({float(d) for d in self.rho.ravel() if 0 < d < 1})
        self.breaks = [math.log(d * d) for d in dists]

    # ---- primitives (explicit loops)
    def coeff(self, f, k):
        return sum(f[x] * self.vecs[x, k] * self.mu[x] for x in range(self.N))

    def multiplier(self, g, f):
        """sum_k g(lambda_k) <f, e_k> e_k(x) for every x."""
        c = [self.coeff(f, k) for k in range(self.N)]
        return [sum(g(self.lam[k]) * c[k] * self.vecs[x, k] for k in range(self.N)) for x in range(self.N)]

    def vol(self, x, r):
        return sum(self.mu[y] for y in range(self.N) if self.rho[x, y] < r)

    def lp(self, vals, p):
        if math.isinf(p):
            return max(abs(v) for v in vals)
        return sum(abs(v) ** p * self.mu[x] for x, v in enumerate(vals)) ** (1 / p)

    def lq(self, vals, q):
        if math.isinf(q):
            return max(abs(v) for v in vals) if vals else 0.0
        return sum(abs(v) ** q for v in vals) ** (1 / q)

    def wvol(self, x, r, s):
        return 1.0 if s == 0 else self.vol(x, r) ** (-s / self.n_dim)

    # ---- discrete norms
    def discrete(self, f, s, p, q, flavor, family, phi0, phi):
        lam_max = max(self.lam)
        J = 0 if lam_max <= 0 else max(0, math.ceil(math.log2(math.sqrt(lam_max))) + 1)
        low_f = self.multiplier(lambda l: phi0(math.sqrt(l)), f)
        if flavor == "classical":
            low = self.lp(low_f, p)
        else:
            low = self.lp([self.wvol(x, 1.0, s) * low_f[x] for x in range(self.N)], p)
        bands = []
        for j in range(1, J + 1):
            b = self.multiplier(lambda l, j=j: phi(2.0**-j * math.sqrt(l)), f)
            if flavor == "classical":
                b = [2.0 ** (j * s) * v for v in b]
            else:
                b = [self.wvol(x, 2.0**-j, s) * b[x] for x in range(self.N)]
            bands.append(b)
        if not bands:
            return low
        if family == "besov":
            return low + self.lq([self.lp(b, p) for b in bands], q)
        return low + self.lp([self.lq([b[x] for b in bands], q) for x in range(self.N)], p)

    # ---- continuous norms
    def F(self, t, f, m):
        return self.multiplier(lambda l: (t * l) ** m * math.exp(-t * l), f)

    def weighted(self, t, f, m, s, flavor):
        Ft = self.F(t, f, m)
        if flavor == "classical":
            return [t ** (-s / 2) * abs(v) for v in Ft]
        return [self.wvol(x, math.sqrt(t), s) * abs(Ft[x]) for x in range(self.N)]

    def _segments(self):
        pts = [-math.inf] + self.breaks + [0.0]
        return list(zip(pts[:-1], pts[1:]))

    def _integrate(self, g):
        total = 0.0
        for a, b in self._segments():
            val, _ = quad(lambda v: g(math.exp(v)) if v > -700 else 0.0, a, b, epsabs=0, epsrel=1e-13, limit=500)
            total += val
        return total

    def _sup(self, g):
        best = 0.0
        for a, b in self._segments():
            lo = max(a, -80.0)
            nudge = 1e-13 * max(1.0, abs(lo), abs(b))
            grid = np.linspace(lo + nudge, b - nudge, 801)
            vals = np.array([g(math.exp(v)) for v in grid])
            best = max(best, float(vals.max()))
            padded = np.concatenate([[-math.inf], vals, [-math.inf]])
            peaks = [i for i in range(801) if vals[i] >= padded[i] and vals[i] >= padded[i + 2]]
            for i in sorted(peaks, key=lambda i: -vals[i])[:3]:
                res = minimize_scalar(
                    lambda v: -g(math.exp(v)), bounds=(grid[max(i - 1, 0)], grid[min(i + 1, 800)]),
                    method="bounded", options={"xatol": 1e-12},
                )
                best = max(best, -res.fun)
        return best

    def low_heat(self, f, s, p, flavor):
        e = self.multiplier(lambda l: math.exp(-l), f)
        if flavor == "nonclassical":
            e = [self.wvol(x, 1.0, s) * e[x] for x in range(self.N)]
        return self.lp(e, p)

    def heat(self, f, s, p, q, m, flavor, family):
        low = self.low_heat(f, s, p, flavor)
        if family == "besov":
            g = lambda t: self.lp(self.weighted(t, f, m, s, flavor), p)  # noqa: E731
            high = self._sup(g) if math.isinf(q) else self._integrate(lambda t: g(t) ** q) ** (1 / q)
            return low + high
        per_x = []
        for x in range(self.N):
            g = lambda t, x=x: self.weighted(t, f, m, s, flavor)[x]  # noqa: E731
            per_x.append(self._sup(g) if math.isinf(q) else self._integrate(lambda t: g(t) ** q) ** (1 / q))
        return low + self.lp(per_x, p)

    def area(self, f, s, p, q, m, flavor):
        low = self.low_heat(f, s, p, flavor)
        per_x = []
        for x in range(self.N):
            def cone(t, x=x):
                w = self.weighted(t, f, m, s, flavor)
                r = math.sqrt(t)
                ys = [y for y in range(self.N) if self.rho[x, y] < r]
                if math.isinf(q):
                    return max(w[y] for y in ys)
                return sum(w[y] ** q * self.mu[y] for y in ys) / self.vol(x, r)

            per_x.append(self._sup(cone) if math.isinf(q) else self._integrate(cone) ** (1 / q))
        return low + self.lp(per_x, p)
