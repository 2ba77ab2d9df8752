import math

import numpy as np
import pytest

from fourier_accountant import FourierAccountant
from fourier_accountant.accountant import (
    CompositionPlan,
    compose,
    delta_estimate,
    delta_lower,
    delta_upper,
    epsilon_for_delta,
    plancherel_delta,
    sweep_compositions,
    tail_weights,
)
from fourier_accountant import spectral
from fourier_accountant.comparators import gaussian_analytic_delta
from fourier_accountant.errors import BadParameter, TargetUnreachable
from fourier_accountant.grid_pld import DiscretePld, Direction, Grid, RawPld, Side, discretize
from fourier_accountant.mechanisms import Binomial, Gaussian, RandomizedResponse, SubsampledGaussian

from .oracles import brute_force_delta, exact_delta, random_discrete_plan

rng = np.random.default_rng(3)


def test_exact_delta_matches_brute_force():
    for _ in range(20):
        _, factors, infs = random_discrete_plan(rng, max_mechs=2, max_k=2, max_atoms=5)
        for d in Direction:
            for eps in (0.0, 0.4):
                assert exact_delta(factors[d], eps, infs[d]) == pytest.approx(
                    brute_force_delta(factors[d], eps, infs[d]), abs=1e-14)


def test_compose_rr_example():
    g = Grid(4.0, 2 ** 8)
    c = math.log(3)
    rr = discretize(RawPld([c, -c], [0.75, 0.25]), g, Side.RIGHT)
    out = compose(CompositionPlan(((rr, 2),)))
    idx = np.flatnonzero(out.masses > 1e-12)
    assert idx.size == 3
    np.testing.assert_allclose(out.masses[idx], [0.0625, 0.375, 0.5625], atol=1e-13)


def test_delta_estimate_and_tail_weights():
    g = Grid(2.0, 8)
    w = tail_weights(g, 0.5)
    x = g.points()
    np.testing.assert_allclose(w, np.where(x > 0.5, 1 - np.exp(0.5 - x), 0.0))
    m = np.zeros(8)
    m[7] = 0.5
    m[4] = 0.5
    d = DiscretePld(g, m, 0.1)
    assert delta_estimate(d, 0.5) == pytest.approx(0.1 + 0.5 * (1 - math.exp(0.5 - 1.5)))


def test_plancherel_matches_direct_sum():
    g = Grid(3.0, 2 ** 10)
    m = rng.random(g.n)
    m /= m.sum()
    w = tail_weights(g, 0.7)
    got = plancherel_delta(spectral.pld_spectrum(m), spectral.pld_spectrum(w), g.n)
    assert got == pytest.approx(float(np.dot(m, w)), rel=1e-12)


def test_sandwich_on_random_plans():
    for _ in range(25):
        entries, factors, infs = random_discrete_plan(rng)
        acc = FourierAccountant(8.0, 2 ** 12).fit(entries)
        for eps in (0.0, 0.3, 1.0):
            b = acc.delta(eps)
            ref = max(exact_delta(factors[d], eps, infs[d]) for d in Direction)
            assert b.lower - 1e-12 <= ref <= b.upper + 1e-12
            assert b.upper - b.lower <= b.budget.total() + 1e-10


def test_exact_lattice_has_zero_discretisation():
    # RR atoms land on the grid once dx divides c_p
    c = math.log(0.6 / 0.4)
    acc = FourierAccountant(64 * c, 128).fit([(RandomizedResponse(0.6), 20)])
    b = acc.delta(1.0)
    assert b.budget.discretisation == 0.0
    assert b.upper - b.lower <= b.budget.total() + 1e-15
    off = FourierAccountant(8.0, 128).fit([(RandomizedResponse(0.6), 20)]).delta(1.0)
    assert off.budget.discretisation > 0


@pytest.mark.parametrize("sigma,k", [(2.0, 1), (2.0, 4), (1.0, 16)])
def test_gaussian_interval_contains_analytic(sigma, k):
    acc = FourierAccountant(12.0, 2 ** 16).fit([(Gaussian(sigma), k)])
    for eps in (0.5, 1.0, 2.0):
        b = acc.delta(eps)
        ref = gaussian_analytic_delta(sigma, k, eps)
        assert b.lower <= ref <= b.upper


def test_low_memory_mode_agrees():
    plan = [(Binomial(100, 0.5), 5), (Gaussian(3.0), 2), (RandomizedResponse(0.6), 3)]
    full = FourierAccountant(10.0, 2 ** 14, low_memory=False).fit(plan)
    lean = FourierAccountant(10.0, 2 ** 14, low_memory=True).fit(plan)
    for eps in (0.0, 0.5, 1.5):
        a, b = full.delta(eps), lean.delta(eps)
        assert b.upper == pytest.approx(a.upper, rel=1e-10, abs=1e-16)
        assert b.lower == pytest.approx(a.lower, rel=1e-10, abs=1e-16)


def test_threads_preserve_order():
    acc = FourierAccountant(6.0, 2 ** 12).fit([(Binomial(50, 0.4), 4)])
    eps = [1.2, 0.1, 0.8, 0.0, 2.0]
    serial = acc.deltas(eps)
    parallel = acc.deltas(eps, threads=3)
    assert [b.eps for b in parallel] == eps
    assert [b.upper for b in parallel] == [b.upper for b in serial]


def test_sweep_matches_independent_runs():
    spec = [(RandomizedResponse(0.55), 1), (Gaussian(4.0), 1)]
    ks = [1, 2, 5, 9, 10, 30]
    swept = sweep_compositions(spec, ks, 1.0, grid=Grid(10.0, 2 ** 14))
    for k, b in zip(ks, swept):
        ref = FourierAccountant(10.0, 2 ** 14).fit([(s, c * k) for s, c in spec]).delta(1.0)
        assert b.upper == pytest.approx(ref.upper, abs=1e-12)
        assert b.lower == pytest.approx(ref.lower, abs=1e-12)
        assert b.budget.total() == pytest.approx(ref.budget.total(), rel=1e-12)


def test_epsilon_inversion():
    acc = FourierAccountant(10.0, 2 ** 14).fit([(Binomial(200, 0.5), 10)])
    for target in (1e-3, 1e-5):
        eps = acc.epsilon(target)
        assert acc.delta(eps).upper <= target
        assert acc.delta(max(eps - 1e-4, 0.0)).upper > target
    assert epsilon_for_delta([(Binomial(200, 0.5), 10)], 1e-3, grid=Grid(10.0, 2 ** 14)) == pytest.approx(
        acc.epsilon(1e-3))
    with pytest.raises(TargetUnreachable):
        FourierAccountant(1.0, 2 ** 10).fit([(Gaussian(0.3), 10)]).epsilon(1e-9)


def test_functional_api_and_errors():
    plan = [(Binomial(100, 0.5), 3)]
    g = Grid(6.0, 2 ** 12)
    up = delta_upper(plan, 1.0, grid=g)
    lo = delta_lower(plan, 1.0, grid=g)
    assert up.upper == lo.upper and lo.lower <= up.upper
    with pytest.raises(BadParameter):
        FourierAccountant(6.0, 2 ** 10).delta(1.0)
    with pytest.raises(BadParameter):
        FourierAccountant(6.0, 2 ** 10).fit([])
    with pytest.raises(BadParameter):
        FourierAccountant(6.0, 2 ** 10).fit([(Gaussian(1.0), 0)])
    with pytest.raises(BadParameter):
        FourierAccountant(6.0, 2 ** 10, sides=("left",)).fit(plan)
    with pytest.raises(BadParameter):
        FourierAccountant(6.0, 2 ** 10).fit(plan).delta(-1.0)
    with pytest.raises(BadParameter):
        FourierAccountant().fit(plan)
    with pytest.raises(BadParameter):
        FourierAccountant(6.0, 2 ** 10).fit(plan).sweep([3, 2], 1.0)


def test_right_only_and_asymmetric_directions():
    plan = [(Binomial(30, 0.3, 2), 4)]
    both = FourierAccountant(8.0, 2 ** 13).fit(plan)
    assert len(both.directions_) == 2
    right = FourierAccountant(8.0, 2 ** 13, sides=("right",)).fit(plan)
    a, b = both.delta(0.5), right.delta(0.5)
    assert a.upper == pytest.approx(b.upper, rel=1e-14)
    assert b.lower == 0.0
    xy = Binomial(30, 0.3, 2).raw_pld(Direction.X_OVER_Y)
    yx = Binomial(30, 0.3, 2).raw_pld(Direction.Y_OVER_X)
    ref = max(exact_delta([(r.losses, r.masses)] * 4, 0.5, [r.infinity_mass] * 4) for r in (xy, yx))
    assert a.lower <= ref <= a.upper


def test_subsampled_gaussian_bounds_bracket_fine_grid():
    spec = [(SubsampledGaussian(0.1, 1.0), 10)]
    coarse = FourierAccountant(10.0, 2 ** 14).fit(spec).delta(1.0)
    fine = FourierAccountant(10.0, 2 ** 18).fit(spec).delta(1.0)
    assert coarse.lower <= fine.upper and fine.lower <= coarse.upper
    assert fine.width < coarse.width


def test_tilt_sandwich_with_wraparound():
    # k-fold sums reach past the window, so the tilted wrap term is exercised
    local = np.random.default_rng(11)
    for _ in range(15):
        entries, factors, infs = random_discrete_plan(local, L=16.0, max_k=4)
        for t in (0.0, 0.5, 1.5):
            acc = FourierAccountant(4.0, 2 ** 11, tilt=t).fit(entries)
            for eps in (0.0, 0.5, 1.5):
                b = acc.delta(eps)
                ref = max(exact_delta(factors[d], eps, infs[d]) for d in Direction)
                assert b.lower - 1e-12 <= ref <= b.upper + 1e-12


def test_tilt_tracks_small_deltas():
    # nonnegative linear convolution has no cancellation, so it is accurate deep in the tail
    g = Grid(4.0, 2 ** 12)
    m, k = Binomial(200, 0.5, 1), 10
    p = m.grid_pld(g, Direction.X_OVER_Y, Side.RIGHT).masses
    c = p.copy()
    for _ in range(k - 1):
        c = np.convolve(c, p)
    x = -k * g.L + np.arange(c.size) * g.dx
    acc = FourierAccountant(g.L, g.n, tilt=2.0).fit([(m, k)])
    plain = FourierAccountant(g.L, g.n).fit([(m, k)])
    for eps in (1.0, 2.0, 2.5):
        sel = x > eps + 1e-12
        ref = float(np.sum(c[sel] * -np.expm1(eps - x[sel])))
        b = acc.delta(eps)
        assert b.estimate == pytest.approx(ref, rel=1e-8)
        assert b.lower <= ref <= b.upper
        assert plain.delta(eps).estimate == pytest.approx(b.estimate, rel=1e-6)


def test_tilt_low_memory_and_sweep_agree():
    mechs = [(Binomial(100, 0.5, 1), 4), (RandomizedResponse(0.55), 3)]
    a = FourierAccountant(6.0, 2 ** 12, tilt=1.0).fit(mechs)
    lean = FourierAccountant(6.0, 2 ** 12, tilt=1.0, low_memory=True).fit(mechs)
    for eps in (0.2, 1.0):
        assert lean.delta(eps).upper == pytest.approx(a.delta(eps).upper, rel=1e-12)
    swept = a.sweep([1, 2, 3], 0.5)
    for k, b in zip([1, 2, 3], swept):
        one = FourierAccountant(6.0, 2 ** 12, tilt=1.0).fit([(s, c * k) for s, c in mechs]).delta(0.5)
        assert b.upper == pytest.approx(one.upper, rel=1e-9)
        assert b.lower == pytest.approx(one.lower, rel=1e-9)


def test_tilt_validation():
    with pytest.raises(BadParameter):
        FourierAccountant(4.0, 64, tilt=-1.0).fit([(RandomizedResponse(0.6), 2)])
    with pytest.raises(BadParameter):
        FourierAccountant(4.0, 64, tilt=500.0).fit([(RandomizedResponse(0.6), 2)])
    # the composed tilted masses would overflow
    with pytest.raises(BadParameter):
        FourierAccountant(100.0, 256, tilt=6.0).fit([(RandomizedResponse(0.99), 200)]).delta(1.0)
