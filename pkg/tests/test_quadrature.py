"""The log-t quadrature, the heat sampler and the supremum search."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heatbesov.errors import DomainError
from heatbesov.quadrature import (
    HeatSampler,
    LogIntegrator,
    QuadratureGrid,
    block_pieces,
    dyadic_truncation,
    golden_maximize,
    sample_supremum,
)


def _scalar(fn):
    return lambda ts: np.atleast_2d(fn(np.asarray(ts, dtype=float)))


def test_grid_validation():
    with pytest.raises(DomainError):
        QuadratureGrid(nodes=0)
    with pytest.raises(DomainError):
        QuadratureGrid(tol=0.0)


def test_dyadic_truncation(path3, point):
    # [DERIVED] sqrt(3) / 2^J < 1/2 first at J = 2
    assert dyadic_truncation(path3.op) == 2
    assert dyadic_truncation(point.op) == 0


def test_block_pieces_cover_the_range(path4):
    pieces = block_pieces(QuadratureGrid(), path4.space.ball_levels.levels, 3)
    assert pieces[0][0] == 4.0**-3 and pieces[-1][1] == 1.0
    assert all(a < b for a, b in pieces)
    assert all(pieces[i][1] == pieces[i + 1][0] for i in range(len(pieces) - 1))
    # [DERIVED] spacing 0.3 puts a cut at t = 0.09
    assert any(b == pytest.approx(0.09) for _, b in pieces)
    plain = block_pieces(QuadratureGrid(breakpoints=False), path4.space.ball_levels.levels, 3)
    assert len(plain) == 3


@pytest.mark.parametrize("k", [0.5, 1.0, 3.0])
def test_power_integral(k):
    # [DERIVED] int_a^1 t^k dt/t = (1 - a^k) / k
    integ = LogIntegrator(_scalar(lambda t: t**k), QuadratureGrid())
    integ.add([(1e-3, 0.1), (0.1, 1.0)])
    assert integ.refine()[0] == pytest.approx((1 - 1e-3**k) / k, rel=1e-12)


def test_oscillatory_integral_refines():
    # [DERIVED] int_0^1 sin(50 s) ds with s = t
    integ = LogIntegrator(_scalar(lambda t: t * np.sin(50 * t)), QuadratureGrid(quad_rtol=1e-12))
    integ.add([(1e-12, 1.0)])
    assert integ.refine()[0] == pytest.approx((1 - math.cos(50)) / 50, rel=1e-9)
    assert integ.evaluations > 100


def test_golden_maximize():
    f = _scalar(lambda t: -(np.log(t) + 1.0) ** 2)
    best = golden_maximize(f, np.array([0]), np.array([-3.0]), np.array([2.0]))
    assert best[0] == pytest.approx(0.0, abs=1e-18)


def test_supremum_finds_a_lobe_between_nodes():
    # the second lobe peaks between two coarse nodes that both sit lower
    # than the first lobe, so only a denser pass sees it
    def fn(t):
        v = np.log(t)
        return np.exp(-((v + 3) ** 2)) + 1.5 * np.exp(-(((v + 1.0) / 0.2) ** 2))

    # [DERIVED] dense sampling in log t
    dense = fn(np.exp(np.linspace(-1.2, -0.8, 400_001))).max()
    pieces = [(math.exp(-6), 1.0)]
    coarse, _ = sample_supremum(_scalar(fn), pieces, QuadratureGrid(sup_refinements=0))
    sup, zoomed = sample_supremum(_scalar(fn), pieces, QuadratureGrid())
    assert coarse[0] < 1.1
    assert zoomed
    assert sup[0] == pytest.approx(dense, rel=1e-10)


def test_supremum_per_piece():
    pieces = [(0.01, 0.1), (0.1, 1.0)]
    sup, _ = sample_supremum(_scalar(lambda t: t), pieces, QuadratureGrid(), per_piece=True)
    np.testing.assert_allclose(sup[0], [0.1, 1.0], rtol=1e-11)


@given(c=st.floats(-4.0, -0.1))
def test_supremum_of_a_parabola(c):
    fn = _scalar(lambda t: 2.0 - (np.log(t) - c) ** 2)
    sup, _ = sample_supremum(fn, [(math.exp(-5), 1.0)], QuadratureGrid())
    assert sup[0] == pytest.approx(2.0, rel=1e-12)


# ------------------------------------------------------------------ sampler


def test_sampler_matches_spectral_formula(path4, rng):
    f = rng.standard_normal(4)
    op = path4.op
    smp = HeatSampler(op, f, 2)
    ts = np.array([0.01, 0.2, 0.01])
    got = smp.values(ts)
    coef = op.coefficients(f)
    for i, t in enumerate(ts):
        lt = t * op.eigenvalues
        np.testing.assert_allclose(got[:, i], op.synthesize(lt**2 * np.exp(-lt) * coef), atol=1e-12)
    assert smp.samples == 2


def test_sampler_lowpass(path4, rng):
    f = rng.standard_normal(4)
    op = path4.op
    expected = op.synthesize(np.exp(-op.eigenvalues) * op.coefficients(f))
    np.testing.assert_allclose(HeatSampler(op, f, 1).lowpass(), expected)


def test_small_time_bounds_enclose(path4, rng):
    f = rng.standard_normal(4)
    smp = HeatSampler(path4.op, f, 1)
    tau = 1e-3
    lo, hi = smp.small_time_bounds(tau)
    for t in np.geomspace(1e-7, tau, 20):
        v = np.abs(smp.values([t])[:, 0]) / t
        assert np.all(lo <= v * (1 + 1e-10) + 1e-14)
        assert np.all(v <= hi * (1 + 1e-10) + 1e-14)


def test_sampler_rejects_wrong_size(path4):
    with pytest.raises(DomainError):
        HeatSampler(path4.op, np.ones(3), 1)
