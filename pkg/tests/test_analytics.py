"""Closed-form statistics: forced MIE, Born measure, cumulants,
distribution, DIE, asymptotics, winding functions."""

import math

import numpy as np
import pytest
import scipy.integrate

from miestat.analytics import (
    WindingSpec,
    _winding_integral,
    asymptotic_cumulant,
    born_measure,
    cgf_cumulant,
    cumulant_set,
    die,
    forced_mie,
    forced_mie_curve,
    forced_mie_derivative,
    forced_mie_vn_limit,
    lognormal_density,
    mie_cumulant,
    mie_distribution,
    winding_continued,
    winding_direct,
)
from miestat.cft import CFTParams, dedekind_eta, theta_winding

LOG2 = math.log(2.0)


def params(g=1.0, n=1.0, zeta=0.3):
    return CFTParams(g=g, n=n, zeta=zeta)


# ---------------------------------------------------------------------------
# forced MIE


def test_forced_mie_two_path_at_n2():
    # the log1p-stabilized route must equal the literal ratio of cylinder
    # partition functions (1/(1-n)) log(Z_n / Z_1^n)
    for zeta in (0.05, 0.3, 0.7):
        for dphi in (0.0, 0.8, 2.2, math.pi):
            p = params(n=2.0, zeta=zeta)
            z1 = theta_winding(p.nome(1.0), p.g, dphi) / dedekind_eta(p.nome(1.0))
            z2 = theta_winding(p.nome(2.0), p.g, dphi) / dedekind_eta(p.nome(2.0))
            literal = math.log(z2 / z1**2) / (1.0 - 2.0)
            assert forced_mie(p, dphi) == pytest.approx(literal, abs=1e-10)


def test_vn_limit_matches_finite_difference():
    step = 1e-4
    for zeta in (0.05, 0.3, 0.8):
        for dphi in (0.3, 1.5, math.pi - 0.2, math.pi):
            p = params(zeta=zeta)
            upper = forced_mie(params(n=1.0 + step, zeta=zeta), dphi)
            lower = forced_mie(params(n=1.0 - step, zeta=zeta), dphi)
            fd = 0.5 * (upper + lower)
            assert forced_mie_vn_limit(p, dphi) == pytest.approx(fd, abs=1e-6)
            assert forced_mie(p, dphi) == forced_mie_vn_limit(p, dphi)


def test_forced_mie_periodic_even_nonnegative():
    p = params(g=0.7, n=1.0, zeta=0.2)
    for dphi in (0.0, 0.5, 1.7, 3.0):
        base = forced_mie(p, dphi)
        assert base >= 0.0
        assert forced_mie(p, dphi + 2 * math.pi) == pytest.approx(base, rel=1e-10)
        assert forced_mie(p, -dphi) == pytest.approx(base, rel=1e-10)
        assert forced_mie(p, 2 * math.pi - dphi) == pytest.approx(base, rel=1e-10)


def test_bell_pair_value_at_pi():
    # mismatch pi shares one Bell pair as the regions decouple: f -> log 2
    # from above, and already at zeta = 0.02 the value sits in (0, log 2 + eps]
    prev = None
    for zeta in (0.1, 0.01, 0.001):
        val = forced_mie(params(zeta=zeta), math.pi)
        assert val > 0.0
        if prev is not None:
            assert abs(val - LOG2) < abs(prev - LOG2)
        prev = val
    assert forced_mie(params(zeta=1e-3), math.pi) == pytest.approx(LOG2, abs=1e-6)
    v = forced_mie_vn_limit(params(zeta=0.02), math.pi)
    assert 0.0 < v < LOG2 + 1e-3
    assert abs(v - LOG2) < 2e-3


def test_forced_mie_small_zeta_zero_mismatch_scaling():
    # f(0) vanishes like zeta^{2g} times a slowly varying log.  The
    # amplitude convention matters: with the chord constant kept in the
    # nome, the coefficient is 4g (zeta/16)^{2g} log(16/zeta), which the
    # theta part reproduces directly (at g >= 1 same-order eta corrections
    # shift the prefactor, so only the exponent is universal there).
    for g in (0.5, 1.0):
        zs = np.array([1e-6, 1e-5, 1e-4])
        vals = np.array([forced_mie(params(g=g, zeta=z), 0.0) for z in zs])
        assert np.all(np.diff(vals) > 0)  # vanishing toward zeta -> 0
        slope = np.polyfit(np.log(zs), np.log(vals / np.log(16.0 / zs)), 1)[0]
        assert slope == pytest.approx(2.0 * g, rel=0.01)
    refined = 4 * 0.5 * (1e-6 / 16.0) ** 1.0 * math.log(16.0 / 1e-6)
    assert forced_mie(params(g=0.5, zeta=1e-6), 0.0) == pytest.approx(
        refined, rel=0.10)


def test_forced_mie_grows_toward_merging_regions():
    vals = [forced_mie(params(zeta=z), 0.0) for z in (0.9, 0.99, 0.999)]
    assert vals[0] < vals[1] < vals[2]


def test_forced_mie_derivative_matches_central_differences():
    eps = 1e-6
    for n in (1.0, 2.0, 3.0):
        for zeta in (0.05, 0.4):
            p = params(n=n, zeta=zeta)
            for dphi in (0.4, 1.2, 2.5):
                fd = (forced_mie(p, dphi + eps) - forced_mie(p, dphi - eps)) / (2 * eps)
                assert forced_mie_derivative(p, dphi) == pytest.approx(
                    fd, rel=5e-5, abs=1e-12)


def test_forced_mie_curve_shape():
    curve = forced_mie_curve(params(zeta=0.1), num=257)
    assert len(curve.samples) == 257
    dphi, value, deriv = map(np.array, zip(*curve.samples))
    assert dphi[0] == 0.0 and dphi[-1] == pytest.approx(math.pi)
    assert np.all(np.diff(value) >= -1e-12 * value[-1])
    # interior derivative strictly positive, endpoint derivatives tiny
    assert np.all(deriv[1:-1] > 0.0)
    assert abs(deriv[0]) < 1e-9 * deriv[1:-1].max()
    assert abs(deriv[-1]) < 1e-9 * deriv[1:-1].max()


# ---------------------------------------------------------------------------
# Born measure


def test_born_measure_normalized_on_random_params():
    rng = np.random.default_rng(12)
    for _ in range(10):
        g = float(rng.uniform(0.3, 2.5))
        zeta = float(rng.uniform(0.01, 0.95))
        p = params(g=g, zeta=zeta)
        val, err = scipy.integrate.quad(
            lambda d: born_measure(p, d), -math.pi, math.pi, limit=200)
        assert err < 1e-9
        assert val == pytest.approx(1.0, abs=1e-8)


def test_born_measure_closed_form_normalization():
    # the full-period theta integral is sqrt(2 pi h / g) exactly
    for g, zeta in ((1.0, 0.3), (0.5, 0.05), (2.0, 0.8)):
        p = params(g=g, zeta=zeta)
        norm = math.sqrt(2.0 * math.pi * p.h / g)
        for dphi in (0.0, 1.0, 2.8):
            expect = theta_winding(p.nome(1.0), g, dphi) / norm
            assert born_measure(p, dphi) == pytest.approx(expect, rel=1e-10)


def test_born_measure_peaked_at_zero():
    p = params(zeta=0.2)
    grid = np.linspace(0.0, math.pi, 40)
    dens = [born_measure(p, d) for d in grid]
    assert np.argmax(dens) == 0


def test_born_measure_gaussian_at_small_zeta():
    p = params(zeta=1e-4)
    sigma = math.sqrt(p.h / p.g)
    ratio = born_measure(p, 2.0 * sigma) / born_measure(p, 0.0)
    assert ratio == pytest.approx(math.exp(-2.0), rel=0.05)


# ---------------------------------------------------------------------------
# cumulants


def test_moment_route_matches_cgf_route():
    for g, n, zeta in ((1.0, 1.0, 0.3), (0.5, 2.0, 0.1), (2.0, 1.0, 0.6)):
        p = params(g=g, n=n, zeta=zeta)
        for order in (2, 3):
            assert mie_cumulant(p, order) == pytest.approx(
                cgf_cumulant(p, order), rel=1e-6)


def test_cumulant_set_consistency():
    p = params(g=0.8, n=2.0, zeta=0.25)
    cs = cumulant_set(p)
    assert cs.kappa1 == pytest.approx(mie_cumulant(p, 1), rel=1e-12)
    assert cs.kappa2 >= 0.0 and cs.kappa1 >= 0.0
    assert cs.kappa3 == pytest.approx(mie_cumulant(p, 3), rel=1e-12)
    assert cs.kappa4 == pytest.approx(mie_cumulant(p, 4), rel=1e-12)


def test_cumulant_order_validation():
    with pytest.raises(ValueError):
        mie_cumulant(params(), 5)
    with pytest.raises(ValueError):
        mie_cumulant(params(), 0)
    with pytest.raises(ValueError):
        cgf_cumulant(params(), 4)


def test_variance_dies_relative_to_mean_toward_unity_zeta():
    # as the unmeasured regions merge the measure concentrates
    r = [mie_cumulant(params(zeta=z), 2) / mie_cumulant(params(zeta=z), 1)
         for z in (0.5, 0.9, 0.99)]
    assert r[0] > r[1] > r[2]


def test_cumulant_scaling_collapse_deep_asymptotics():
    # kappa_l / (zeta^{g/2} / sqrt(log 1/zeta)) flat to 2% per decade
    zs = np.array([1e-9, 1e-8, 1e-7])
    scale = zs**0.5 / np.sqrt(np.log(1.0 / zs))
    for order in (1, 2, 3):
        k = np.array([mie_cumulant(params(zeta=z), order) for z in zs])
        ratios = k / scale
        dev = np.abs(ratios / ratios.mean() - 1.0).max()
        assert dev < 0.02, (order, ratios)


def test_moment_closure_against_distribution():
    # integrating S P(S) dS over the support must reproduce kappa_1, and
    # the centered square must reproduce kappa_2 — an independent route
    # through the root-finder and analytic Jacobian
    p = params(zeta=0.1)
    f0 = forced_mie(p, 0.0)
    fpi = forced_mie(p, math.pi)
    span = fpi - f0

    def moment(weight):
        def left(t):
            s = f0 + t * t
            return weight(s) * float(mie_distribution(p, [s]).density[0]) * 2 * t

        def right(t):
            s = fpi - t * t
            return weight(s) * float(mie_distribution(p, [s]).density[0]) * 2 * t

        def mid(s):
            return weight(s) * float(mie_distribution(p, [s]).density[0])

        cut = 0.1 * span
        total = scipy.integrate.quad(left, 0, math.sqrt(cut), epsrel=1e-7)[0]
        total += scipy.integrate.quad(mid, f0 + cut, fpi - cut, epsrel=1e-7)[0]
        total += scipy.integrate.quad(right, 0, math.sqrt(cut), epsrel=1e-7)[0]
        return total

    k1 = mie_cumulant(p, 1)
    assert moment(lambda s: s) == pytest.approx(k1, rel=1e-4)
    assert moment(lambda s: (s - k1) ** 2) == pytest.approx(
        mie_cumulant(p, 2), rel=1e-4)


# ---------------------------------------------------------------------------
# DIE


def test_die_dominates_born_mean_at_small_zeta():
    for zeta in (1e-4, 1e-3, 1e-2):
        p = params(zeta=zeta)
        assert die(p) >= mie_cumulant(p, 1)


def test_die_log_scaling_constant_per_parameter_set():
    # DIE * log(1/zeta) settles to a constant for each (n, g); the slow
    # log-in-log drift stays under 3% across two decades
    for n, g in ((1.0, 1.0), (2.0, 0.5), (1.0, 2.0)):
        vals = np.array([die(params(g=g, n=n, zeta=z)) * math.log(1.0 / z)
                         for z in (1e-8, 1e-7, 1e-6)])
        assert np.abs(vals / vals.mean() - 1.0).max() < 0.03, (n, g)


def test_die_constant_collapses_across_parameters():
    # the per-parameter constants are (1+n)/(2gn) times one universal
    # zeta function, so rescaling by 2gn/(1+n) collapses every combo
    vals = []
    for n, g in ((1.0, 1.0), (2.0, 0.5), (1.0, 2.0), (2.0, 1.0)):
        d = die(params(g=g, n=n, zeta=1e-6))
        vals.append(d * 2.0 * g * n / (1.0 + n))
    vals = np.array(vals)
    assert np.abs(vals / vals.mean() - 1.0).max() < 0.01


# ---------------------------------------------------------------------------
# distribution


def test_distribution_normalizes():
    for zeta in (0.02, 0.2):
        p = params(zeta=zeta)
        lo = forced_mie(p, 0.0)
        hi = forced_mie(p, math.pi)
        grid = np.linspace(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo), 31)
        curve = mie_distribution(p, grid)
        assert 0.99 < curve.norm < 1.01
        assert np.all(curve.density >= 0.0)


def test_distribution_bimodal_at_small_zeta():
    p = params(zeta=0.02)
    lo = forced_mie(p, 0.0)
    hi = forced_mie(p, math.pi)
    span = hi - lo
    interior = mie_distribution(
        p, np.linspace(lo + 0.1 * span, hi - 0.1 * span, 41)).density
    edges = mie_distribution(
        p, [lo + 1e-5 * span, hi - 1e-5 * span]).density
    # integrable divergences at both support ends dwarf the interior dip
    assert edges[0] > 20 * interior.min()
    assert edges[1] > 20 * interior.min()


def test_distribution_rejects_out_of_support():
    p = params(zeta=0.3)
    hi = forced_mie(p, math.pi)
    with pytest.raises(ValueError, match="not bracketed"):
        mie_distribution(p, [hi + 0.1])
    with pytest.raises(ValueError, match="not bracketed"):
        mie_distribution(p, [1e-12])  # below f(0) at this zeta
    with pytest.raises(ValueError):
        mie_distribution(params(n=2.0), [0.1])


def test_distribution_square_root_edge_fit():
    p = params(zeta=1e-3)
    lo = forced_mie(p, 0.0)
    hi = forced_mie(p, math.pi)
    grid = np.geomspace(max(lo * 3, 1e-9), hi - 1e-7, 25)
    curve = mie_distribution(p, grid)
    fit = curve.right_sqrt
    assert fit["exponent"] == pytest.approx(-0.5, abs=0.05)
    assert fit["amplitude"] > 0.0


def test_lognormal_regime_shape():
    # in zeta^{2g} << S << 1 the analytic density has log-normal shape:
    # the log-log slopes agree to a percent and the amplitude offset is a
    # slowly varying O(1) factor across the window (convergence of the
    # amplitude itself toward 1 is logarithmic in zeta and far from
    # complete at any computable zeta)
    p = params(zeta=1e-6)
    s = np.geomspace(1e-4, 1e-2, 7)
    analytic = np.array([float(mie_distribution(p, [v]).density[0]) for v in s])
    closed = np.array([lognormal_density(p, v) for v in s])
    slope_a = np.polyfit(np.log(s), np.log(analytic), 1)[0]
    slope_c = np.polyfit(np.log(s), np.log(closed), 1)[0]
    assert slope_a == pytest.approx(slope_c, rel=0.03)
    ratio = analytic / closed
    assert np.all((0.4 < ratio) & (ratio < 1.3))
    assert ratio.max() / ratio.min() < 1.15


def test_lognormal_fit_metadata():
    p = params(zeta=1e-3)
    lo = forced_mie(p, 0.0)
    hi = forced_mie(p, math.pi)
    curve = mie_distribution(p, np.geomspace(lo * 3, hi * 0.5, 20))
    fit = curve.left_lognormal
    assert fit is not None
    assert fit["sigma2"] > 0.0
    assert fit["sigma2_closed_form"] == pytest.approx(
        4.0 * p.g * math.log(1.0 / p.zeta), rel=1e-12)
    assert fit["mu"] < 0.0


# ---------------------------------------------------------------------------
# asymptotic law


def test_asymptotic_branch_selection():
    assert "n > 1/(2l)" in asymptotic_cumulant(1, 1.0, 1.0, 1e-5).branch
    assert "n = 1/(2l)" in asymptotic_cumulant(1, 0.5, 1.0, 1e-5).branch
    assert "n < 1/(2l)" in asymptotic_cumulant(2, 0.2, 1.0, 1e-5).branch


def test_asymptotic_boundary_branch_is_pure_power():
    # at n = 1/(2l) the scaling value is zeta^{g/2} with no log correction
    for g in (0.5, 1.0):
        a = asymptotic_cumulant(1, 0.5, g, 1e-6)
        b = asymptotic_cumulant(1, 0.5, g, 1e-8)
        assert a.scaling / b.scaling == pytest.approx(
            (1e-6 / 1e-8) ** (g / 2.0), rel=1e-10)


def test_asymptotic_integral_tracks_full_cumulant():
    # l=1, n=1: the controlling integral is proportional to the full
    # kappa_1 with a zeta-independent constant
    ratios = []
    for zeta in (1e-8, 1e-6, 1e-4):
        full = mie_cumulant(params(zeta=zeta), 1)
        ratios.append(asymptotic_cumulant(1, 1.0, 1.0, zeta).integral / full)
    ratios = np.array(ratios)
    assert np.abs(ratios / ratios.mean() - 1.0).max() < 0.01


def test_asymptotic_third_branch_slope():
    # 0 < n < 1/(2l): integral scales as zeta^{2 g n l (1 - n l)}
    n, l, g = 0.2, 2, 1.0
    zs = np.array([1e-9, 1e-8, 1e-7])
    vals = np.array([asymptotic_cumulant(l, n, g, z).integral for z in zs])
    slope = np.polyfit(np.log(zs), np.log(vals), 1)[0]
    assert slope == pytest.approx(2.0 * g * n * l * (1.0 - n * l), rel=0.02)


def test_asymptotic_warns_outside_validity():
    with pytest.warns(UserWarning):
        asymptotic_cumulant(1, 1.0, 1.0, 0.3)


# ---------------------------------------------------------------------------
# winding functions


def test_winding_spec_validation():
    with pytest.raises(ValueError):
        WindingSpec(k1=0, k2=0, n=1.0, g=1.0, h=2.0)
    with pytest.raises(ValueError):
        WindingSpec(k1=-1, k2=1, n=1.0, g=1.0, h=2.0)
    with pytest.raises(ValueError):
        WindingSpec(k1=1, k2=0, n=0.0, g=1.0, h=2.0)


def test_winding_scalar_reduction():
    # k1=1, k2=0, n=1: the reflection collapses to T = 1/2, so the lattice
    # sum is a theta sum at coupling g/2 and zero mismatch
    for g, h in ((1.0, 2.0), (0.5, 2 * math.pi), (2.0, 1.0)):
        spec = WindingSpec(k1=1, k2=0, n=1.0, g=g, h=h)
        q1 = math.exp(-2.0 * math.pi**2 / h)
        assert winding_direct(spec, w_max=60) == pytest.approx(
            theta_winding(q1, g / 2.0, 0.0), rel=1e-12)


def test_winding_quadratic_form_pattern():
    # inverse coupling matrix has closed blocks: (n+1) on the k1 diagonal,
    # 2n on the k2 diagonal, n everywhere off-diagonal
    cases = ((2, 1, 2.0), (1, 1, 3.0), (2, 2, 2.0))
    for k1, k2, n in cases:
        d = k1 + k2
        pattern = np.full((d, d), n)
        for i in range(k1):
            pattern[i, i] = n + 1.0
        for i in range(k1, d):
            pattern[i, i] = 2.0 * n
        t_oracle = np.linalg.inv(pattern)
        g, h = 1.0, 2.0
        lam = 2.0 * math.pi**2 * n / h
        rng = np.arange(-25, 26)
        w = np.stack(np.meshgrid(*([rng] * d), indexing="ij"), axis=-1)
        quad = np.einsum("...i,ij,...j->...", w, t_oracle, w)
        oracle = float(np.exp(-lam * g * quad).sum())
        spec = WindingSpec(k1=k1, k2=k2, n=n, g=g, h=h)
        assert winding_direct(spec, w_max=25) == pytest.approx(oracle, rel=1e-10)


def test_winding_direct_matches_continued():
    spec = WindingSpec(k1=1, k2=1, n=2.0, g=1.0, h=2.0)
    assert winding_direct(spec, w_max=40) == pytest.approx(
        winding_continued(spec), rel=1e-8)


def test_winding_normalization_consistency():
    # with no winding products the continued-form integral is exactly 1
    for g, h, n in ((1.0, 2.0, 1.0), (0.5, 2 * math.pi, 2.0)):
        assert _winding_integral(0, 0, n, g, h) == pytest.approx(1.0, rel=1e-10)


def test_winding_decreases_with_coupling():
    vals = [winding_direct(WindingSpec(k1=1, k2=1, n=2.0, g=g, h=2.0), w_max=40)
            for g in (0.5, 1.0, 2.0)]
    assert vals[0] > vals[1] > vals[2]


def test_winding_truncation_guard():
    from miestat.errors import ConvergenceError
    spec = WindingSpec(k1=1, k2=0, n=1.0, g=0.05, h=2 * math.pi)
    with pytest.raises(ConvergenceError):
        winding_direct(spec, w_max=1)
