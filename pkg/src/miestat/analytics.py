"""Closed-form statistics of measurement-induced entanglement.

Everything here is built from two cylinder partition-function ingredients
(`miestat.cft`): the winding theta sum and the Dedekind eta product, with
nome q_n = exp(-2 pi^2 n / h(zeta)).  The forced entropy at boundary
mismatch delta_phi is

    MIE_F = (1/(1-n)) log( Z_{C(n),dphi} / Z_{C(1),dphi}^n ),

and all moments are taken against the Born weight
p(dphi) = Z_{C(1),dphi} / int_0^{2pi} Z_{C(1),dphi'} d dphi'.

The n = 1 (von Neumann) branch is always the analytic n-derivative, never
the 1/(1-n) quotient evaluated near n = 1.  Cancellations between the
q^{1/24} prefactors and the Gaussian winding prefactors are carried out
symbolically, so the small-zeta regime (where both partition functions
agree to ~15 digits) stays accurate; see the log1p bookkeeping in
`forced_mie` and `forced_mie_vn_limit`.
"""

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .cft import TWO_PI, CFTParams, _theta_terms, theta_winding
from .errors import ConvergenceError

__all__ = [
    "ForcedMieCurve",
    "CumulantSet",
    "DistributionCurve",
    "AsymptoticCumulant",
    "WindingSpec",
    "forced_mie",
    "forced_mie_vn_limit",
    "forced_mie_derivative",
    "forced_mie_curve",
    "born_measure",
    "mie_cumulant",
    "cgf_cumulant",
    "cumulant_set",
    "die",
    "mie_distribution",
    "lognormal_density",
    "asymptotic_cumulant",
    "winding_direct",
    "winding_continued",
]


# ---------------------------------------------------------------------------
# quadrature helper


def _quad(fn, a, b, points=None, epsrel=1e-10):
    """Adaptive quadrature with the module-wide failure policy.

    scipy's IntegrationWarning is demoted to a hard check on the reported
    absolute error; a tolerance miss raises ConvergenceError instead of
    silently returning a noisy value.
    """
    if a == b:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = quad(fn, a, b, epsabs=0.0, epsrel=epsrel, limit=200,
                        points=points)
    if err > 100.0 * epsrel * abs(val) + 1e-13:
        raise ConvergenceError(
            f"quadrature on [{a:.4g}, {b:.4g}] reported error {err:.2e} "
            f"against value {val:.6e}")
    return val


def _lambda1(h):
    # lam_n = -ln q_n = 2 pi^2 n / h; replica n multiplies this base value.
    return 2.0 * math.pi**2 / h


@lru_cache(maxsize=4096)
def _eta_log_sum(lam):
    """A(lam) = sum_m log(1 - e^{-lam m}), i.e. log eta(q) - log q^{1/24}."""
    mmax = max(1, int(math.ceil(46.0 / lam)) + 1)
    if mmax > 10_000_000:
        raise ConvergenceError(f"eta series needs {mmax} terms at lam={lam!r}")
    qm = np.exp(-lam * np.arange(1.0, mmax + 1))
    return float(np.log1p(-qm).sum())


@lru_cache(maxsize=4096)
def _eta_tilt_sum(lam):
    """sum_m m e^{-lam m} / (1 - e^{-lam m}), the eta part of -d/dn at n=1."""
    mmax = max(1, int(math.ceil(46.0 / lam)) + 1)
    if mmax > 10_000_000:
        raise ConvergenceError(f"eta series needs {mmax} terms at lam={lam!r}")
    m = np.arange(1.0, mmax + 1)
    qm = np.exp(-lam * m)
    return float((m * qm / (1.0 - qm)).sum())


def _subleading(rel):
    # sum of all winding terms but the leading one (which is exactly 1),
    # kept separate so log theta can go through log1p without cancellation
    return float(np.sort(rel)[:-1].sum())


# ---------------------------------------------------------------------------
# forced MIE and its delta_phi derivative


def forced_mie(params, delta_phi):
    """Forced MIE at boundary mismatch delta_phi (2pi-periodic, even).

    For n != 1 the q^{1/24} and leading-winding Gaussian factors of
    Z_{C(n)} and Z_{C(1)}^n cancel exactly (lam_n = n lam_1), leaving only
    log1p terms; n = 1 dispatches to the analytic derivative limit.
    """
    if params.n == 1:
        return forced_mie_vn_limit(params, delta_phi)
    g, n = params.g, params.n
    lam1 = _lambda1(params.h)
    x = delta_phi / TWO_PI
    _, rel1, _ = _theta_terms(lam1, g, x)
    _, reln, _ = _theta_terms(n * lam1, g, x)
    bracket = (n * _eta_log_sum(lam1) - _eta_log_sum(n * lam1)
               + math.log1p(_subleading(reln)) - n * math.log1p(_subleading(rel1)))
    val = bracket / (1.0 - n)
    return val if val > 0.0 else 0.0


def forced_mie_vn_limit(params, delta_phi):
    """von Neumann forced MIE: the analytic n -> 1 limit of `forced_mie`.

    Term-wise differentiation of log eta(q_n) and log theta(q_n, dphi) with
    dq_n/dn = -(2 pi^2 / h) q_n gives

        E_1 + log(1 + R) - lam_1 * RL / (1 + R),

    E_1 the eta part, R the subleading winding weight and RL its
    log-derivative sum.  Agrees with a central finite difference in n to
    better than 1e-6 (asserted in the test suite).
    """
    g = params.g
    lam1 = _lambda1(params.h)
    u, rel, xr = _theta_terms(lam1, g, delta_phi / TWO_PI)
    t0 = float(rel.sum())
    rl = -float((g * (u * u - xr * xr) * rel).sum())
    e1 = -_eta_log_sum(lam1) + lam1 * _eta_tilt_sum(lam1)
    val = e1 + math.log1p(_subleading(rel)) - lam1 * rl / t0
    return val if val > 0.0 else 0.0


def forced_mie_derivative(params, delta_phi):
    """d(forced MIE)/d(delta_phi), term-wise analytic.

    Writing Theta_k = sum_w u^k e^{-g lam u^2}, the von Neumann branch is
    (g lam_1)^2/pi * (T1 T2 - T3 T0)/T0^2 and the general-n branch is
    g n lam_1 / (pi (1-n)) * (T1/T0 |_{lam_1} - T1/T0 |_{lam_n}); both are
    cross-checked against central differences in the tests.
    """
    g, n = params.g, params.n
    lam1 = _lambda1(params.h)
    x = delta_phi / TWO_PI
    u, rel, _ = _theta_terms(lam1, g, x)
    t0 = float(rel.sum())
    t1 = float((u * rel).sum())
    if n == 1:
        t2 = float((u * u * rel).sum())
        t3 = float((u**3 * rel).sum())
        return (g * lam1) ** 2 / math.pi * (t1 * t2 - t3 * t0) / t0**2
    un, reln, _ = _theta_terms(n * lam1, g, x)
    r1 = t1 / t0
    rn = float((un * reln).sum()) / float(reln.sum())
    return g * n * lam1 / (math.pi * (1.0 - n)) * (r1 - rn)


@dataclass
class ForcedMieCurve:
    """Monotonicity-verified samples of forced MIE on [0, pi].

    Construction fails (ConvergenceError) if the sampled values ever
    decrease beyond roundoff or the endpoint derivatives fail to vanish;
    downstream the curve seeds the distribution's bisection brackets.
    """

    params: CFTParams
    delta_phi: np.ndarray
    value: np.ndarray
    derivative: np.ndarray

    @property
    def samples(self):
        return list(zip(self.delta_phi, self.value, self.derivative))


def forced_mie_curve(params, num=513):
    d = np.linspace(0.0, math.pi, num)
    v = np.array([forced_mie(params, x) for x in d])
    dv = np.array([forced_mie_derivative(params, x) for x in d])
    scale = max(abs(v[-1]), 1e-30)
    if np.any(np.diff(v) < -1e-12 * scale):
        raise ConvergenceError(
            f"forced MIE is not monotone on [0, pi] at {params!r}")
    dscale = max(1.0, float(np.abs(dv).max()))
    if abs(dv[0]) > 1e-9 * dscale or abs(dv[-1]) > 1e-9 * dscale:
        raise ConvergenceError("forced-MIE derivative fails to vanish at an endpoint")
    return ForcedMieCurve(params, d, v, dv)


# ---------------------------------------------------------------------------
# Born measure over boundary conditions


@lru_cache(maxsize=512)
def _born_norm(g, h):
    """int_0^{2pi} theta(q_1, g, dphi) d dphi, adaptive to 1e-10, cached."""
    q1 = math.exp(-_lambda1(h))
    sig = math.sqrt(h / g)
    hint = min(6.0 * sig, 0.9 * math.pi)
    val = 2.0 * _quad(lambda d: theta_winding(q1, g, d), 0.0, math.pi,
                      points=[hint])
    return val


def born_measure(params, delta_phi):
    """p(delta_phi): the Born weight of a boundary mismatch.

    Ratio form theta / int theta; the normalisation integral is computed
    once per (g, h) and cached, so int_0^{2pi} p = 1 by construction.
    """
    q1 = math.exp(-_lambda1(params.h))
    return theta_winding(q1, params.g, delta_phi) / _born_norm(params.g, params.h)


# ---------------------------------------------------------------------------
# cumulants


def _split_point(g, h):
    # the measure decays like exp(-g dphi^2 / 2h); keep a dedicated panel
    # for the last stretch into pi where forced MIE bends sharply
    return math.pi - min(math.pi / 2.0, 30.0 * h / (g * math.pi))


def _expectation(params, func):
    """E_p[func] = int_0^{2pi} p(dphi) func(dphi) d dphi, folded onto [0, pi].

    For zeta < 1e-3 the integration runs in u = dphi / sqrt(h/g) so the
    shrinking Gaussian peak of p is resolved on an O(1) interval.
    """
    g, h = params.g, params.h
    norm = _born_norm(g, h)
    q1 = math.exp(-_lambda1(h))

    def weighted(d):
        return 2.0 * theta_winding(q1, g, d) / norm * func(d)

    s = _split_point(g, h)
    if params.zeta < 1e-3:
        sig = math.sqrt(h / g)
        total = (_quad(lambda uu: sig * weighted(uu * sig), 0.0, s / sig)
                 + _quad(lambda uu: sig * weighted(uu * sig), s / sig, math.pi / sig))
    else:
        total = _quad(weighted, 0.0, s) + _quad(weighted, s, math.pi)
    return total


def mie_cumulant(params, order):
    """MIE cumulant kappa_l, l in {1..4}, via central moments of forced MIE.

    kappa_1 = mu_1', kappa_2 = mu_2, kappa_3 = mu_3,
    kappa_4 = mu_4 - 3 mu_2^2.
    """
    if order not in (1, 2, 3, 4):
        raise ValueError(f"cumulant order must be 1..4, got {order!r}")
    f = lambda d: forced_mie(params, d)
    k1 = _expectation(params, f)
    if order == 1:
        return k1
    if order == 2:
        return _expectation(params, lambda d: (f(d) - k1) ** 2)
    if order == 3:
        return _expectation(params, lambda d: (f(d) - k1) ** 3)
    mu2 = _expectation(params, lambda d: (f(d) - k1) ** 2)
    mu4 = _expectation(params, lambda d: (f(d) - k1) ** 4)
    return mu4 - 3.0 * mu2 * mu2


@dataclass(frozen=True)
class CumulantSet:
    """kappa_1..kappa_4 of the MIE distribution at fixed params."""

    params: CFTParams
    kappa1: float
    kappa2: float
    kappa3: float
    kappa4: float

    def __post_init__(self):
        if self.kappa1 < 0.0 or self.kappa2 < 0.0:
            raise ValueError(
                f"mean/variance of an entropy must be non-negative, got "
                f"kappa1={self.kappa1!r} kappa2={self.kappa2!r}")


def cumulant_set(params):
    f = lambda d: forced_mie(params, d)
    k1 = _expectation(params, f)
    mu2 = _expectation(params, lambda d: (f(d) - k1) ** 2)
    mu3 = _expectation(params, lambda d: (f(d) - k1) ** 3)
    mu4 = _expectation(params, lambda d: (f(d) - k1) ** 4)
    return CumulantSet(params, k1, mu2, mu3, mu4 - 3.0 * mu2 * mu2)


def cgf_cumulant(params, order, delta=1e-3):
    """kappa_2 or kappa_3 from the replica cumulant generating function.

    Verification path (the production route is `mie_cumulant`): evaluates
    C(k) = log E_p[e^{k (1-n) MIE_F}] literally on a fixed composite
    Gauss-Legendre grid, then finite-differences at k in {+-delta, +-2delta}
    with Richardson extrapolation for kappa_2.  Extended precision keeps the
    stencil noise ~1e-9 absolute.  At n = 1 the exponent is k * MIE_F.
    """
    if order not in (2, 3):
        raise ValueError(f"CGF path supports orders 2 and 3, got {order!r}")
    g, h, n = params.g, params.h, params.n
    w = min(math.pi / 2.0, 30.0 * h / (g * math.pi))
    edges = np.unique(np.concatenate([
        np.linspace(0.0, math.pi - w, 40),
        math.pi - w + w * np.linspace(0.0, 1.0, 25) ** 2,
    ]))
    xg, wg = np.polynomial.legendre.leggauss(32)
    nodes, wts = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (b - a) * xg + 0.5 * (a + b))
        wts.append(0.5 * (b - a) * wg)
    nodes = np.concatenate(nodes)
    wts = np.concatenate(wts)

    q1 = math.exp(-_lambda1(h))
    pv = np.array([theta_winding(q1, g, d) for d in nodes]) * wts
    pv = (pv / pv.sum()).astype(np.longdouble)
    fv = np.array([forced_mie(params, d) for d in nodes]).astype(np.longdouble)
    scale = np.longdouble(1.0) if n == 1 else np.longdouble(1.0 - n)

    def cgf(k):
        return np.log((pv * np.exp((np.longdouble(k) * scale) * fv)).sum())

    d = np.longdouble(delta)
    if order == 2:
        d1 = (cgf(d) + cgf(-d)) / d**2
        d2 = (cgf(2 * d) + cgf(-2 * d)) / (2 * d) ** 2
        return float((4.0 * d1 - d2) / 3.0 / scale**2)
    k3 = (cgf(2 * d) - cgf(-2 * d) - 2.0 * (cgf(d) - cgf(-d))) / (2.0 * d**3)
    return float(k3 / scale**3)


def die(params):
    """Disentanglement-averaged MIE: (1/2pi) int_0^{2pi} MIE_F d dphi.

    The uniform (rather than Born) weight upweights near-pi mismatches, so
    DIE >= kappa_1 at small zeta and falls off only like 1/log(1/zeta).
    """
    f = lambda d: forced_mie(params, d)
    s = _split_point(params.g, params.h)
    val = (_quad(f, 0.0, s) + _quad(f, s, math.pi)) / math.pi
    return val if val > 0.0 else 0.0


# ---------------------------------------------------------------------------
# full distribution of MIE (von Neumann branch)


@dataclass
class DistributionCurve:
    """P(S) sampled on a grid inside the open support (MIE_F(0), MIE_F(pi)).

    `norm` is the numerical integral of the density over the full support,
    with sqrt substitutions absorbing the integrable divergence at each
    edge; the tail dictionaries record the fitted left log-normal and right
    square-root divergence in place of the unrepresentable singularities.
    """

    params: CFTParams
    s: np.ndarray
    density: np.ndarray
    norm: float
    left_lognormal: dict | None
    right_sqrt: dict

    def __post_init__(self):
        if np.any(self.density < 0.0):
            raise ValueError("distribution density must be non-negative")
        if not 0.98 <= self.norm <= 1.02:
            raise ConvergenceError(
                f"distribution mass {self.norm:.6f} outside [0.98, 1.02]")


def _bisect_mie(params, curve, target, tol=1e-12):
    """Unique root of forced_mie = target on (0, pi), seeded by the curve."""
    v = curve.value
    if not v[0] < target < v[-1]:
        raise ValueError(
            f"S={target!r} outside the open forced-MIE range "
            f"({v[0]!r}, {v[-1]!r}); root not bracketed")
    idx = int(np.searchsorted(v, target))
    lo = float(curve.delta_phi[max(idx - 1, 0)])
    hi = float(curve.delta_phi[min(idx, len(v) - 1)])
    flo = forced_mie(params, lo) - target
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fmid = forced_mie(params, mid) - target
        if (flo <= 0.0) == (fmid <= 0.0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _density_at(params, curve, s_val):
    root = _bisect_mie(params, curve, s_val)
    deriv = forced_mie_derivative(params, root)
    if abs(deriv) < 1e-14:
        raise ValueError(
            f"|dMIE/d dphi| = {abs(deriv):.2e} at S={s_val!r}: grid point "
            "too close to a support endpoint")
    # factor 2: the mirror root 2pi - dphi* carries equal Born weight
    return 2.0 * born_measure(params, root) / abs(deriv), root


def mie_distribution(params, s_grid):
    """Analytic distribution P(S) of post-measurement entanglement, n = 1.

    Each S is inverted through the monotone forced-MIE curve by bisection
    (|d dphi| < 1e-12) and weighted by the Born measure over the two mirror
    roots: P(S) = 2 p(dphi*) / |dMIE_F/d dphi|.
    """
    if params.n != 1:
        raise ValueError("the closed-form distribution is the n = 1 branch")
    curve = forced_mie_curve(params)
    s_grid = np.atleast_1d(np.asarray(s_grid, dtype=float))
    dens = np.empty_like(s_grid)
    for i, s_val in enumerate(s_grid):
        dens[i], _ = _density_at(params, curve, s_val)

    f0, fpi = curve.value[0], curve.value[-1]
    span = fpi - f0
    guard = 1e-6 * span
    norm = _support_mass(params, curve, f0, fpi)
    left = _left_lognormal_fit(params, curve, f0, fpi, guard)
    right = _right_sqrt_fit(params, curve, f0, fpi, guard)
    return DistributionCurve(params, s_grid, dens, norm, left, right)


def _support_mass(params, curve, f0, fpi):
    """int P(S) dS over (f0, fpi), divergent edges tamed by S = edge -+ t^2.

    This is the end-to-end normalisation check: root-finding, the analytic
    Jacobian and the mirror factor all have to cooperate for it to hit 1.
    """
    span = fpi - f0
    pdf = lambda s_val: _density_at(params, curve, s_val)[0]
    cut = 0.1 * span
    left = _quad(lambda t: 2.0 * t * pdf(f0 + t * t), 0.0, math.sqrt(cut),
                 epsrel=3e-7)
    mid = _quad(pdf, f0 + cut, fpi - cut, epsrel=3e-7)
    right = _quad(lambda t: 2.0 * t * pdf(fpi - t * t), 0.0, math.sqrt(cut),
                  epsrel=3e-7)
    return left + mid + right


def _left_lognormal_fit(params, curve, f0, fpi, guard):
    # fit inside the window zeta^{2g} << S << 1 where the log-normal holds
    lo = max(3.0 * (f0 + guard), 20.0 * params.zeta ** (2.0 * params.g))
    hi = 0.2 * fpi
    if not 3.0 * lo < hi:
        return None
    s_fit = np.geomspace(lo, hi, 12)
    p_fit = np.array([_density_at(params, curve, s)[0] for s in s_fit])
    if np.any(p_fit <= 0.0):
        return None
    # log-normal ansatz: ln(P S) quadratic in ln S
    c2, c1, _ = np.polyfit(np.log(s_fit), np.log(p_fit * s_fit), 2)
    if c2 >= 0.0:
        return None
    sigma2 = -0.5 / c2
    g, zeta = params.g, params.zeta
    return {
        "mu": c1 * sigma2,
        "sigma2": sigma2,
        "mu_closed_form": 2.0 * g * math.log(zeta),
        "sigma2_closed_form": 4.0 * g * math.log(1.0 / zeta),
    }


def _right_sqrt_fit(params, curve, f0, fpi, guard):
    eps = np.geomspace(3.0 * guard, 0.1 * (fpi - f0), 12)
    p_fit = np.array([_density_at(params, curve, fpi - e)[0] for e in eps])
    slope, _ = np.polyfit(np.log(eps), np.log(p_fit), 1)
    amplitude = float(np.exp(np.mean(np.log(p_fit) + 0.5 * np.log(eps))))
    return {"amplitude": amplitude, "exponent": float(slope)}


def lognormal_density(params, s):
    """Small-S closed form of P(S): log-normal with a mirror-doubled weight.

    Valid in the window zeta^{2g} << S << 1; the variance is
    4 g log(1/zeta) and the log-mean 2 g ln zeta.
    """
    g, zeta = params.g, params.zeta
    logz = math.log(1.0 / zeta)
    s = np.asarray(s, dtype=float)
    return (1.0 / np.sqrt(2.0 * math.pi * g * logz) / s
            * np.exp(-((np.log(s) - 2.0 * g * math.log(zeta)) ** 2)
                     / (8.0 * g * logz)))


# ---------------------------------------------------------------------------
# small-zeta asymptotics


@dataclass(frozen=True)
class AsymptoticCumulant:
    """Controlling integral and scaling-law value for kappa_l at small zeta."""

    integral: float
    scaling: float
    branch: str


def asymptotic_cumulant(l, n, g, zeta):
    """One-dimensional controlling integral for kappa_l plus its scaling law.

    The integrand is the Gaussian Born peak times the l-th power of the
    leading winding bracket B = (e^{-n a} - n e^{-a})/(1 - n) with
    a = (2 g pi^2 / h)(1 - dphi/pi); at n = 1, B = (1 + a) e^{-a}.  The
    scaling value follows the three branches in n relative to 1/(2l).
    """
    if not zeta < 1e-2:
        warnings.warn(
            f"asymptotic cumulant outside its validity range (zeta={zeta!r} "
            ">= 1e-2)", stacklevel=2)
    from .cft import h_of_zeta

    h = h_of_zeta(zeta)
    a0 = 2.0 * g * math.pi**2 / h

    if n == 1:
        bracket = lambda a: (1.0 + a) * math.exp(-a)
    else:
        bracket = lambda a: (math.exp(-n * a) - n * math.exp(-a)) / (1.0 - n)

    def integrand(d):
        return math.exp(-g * d * d / (2.0 * h)) * bracket(a0 * (1.0 - d / math.pi)) ** l

    integral = _quad(integrand, 0.0, math.pi, epsrel=1e-11) / math.sqrt(h)

    nl = n * l
    if n > 0.5 / l:
        branch = "n > 1/(2l)"
        scaling = zeta ** (g / 2.0) / math.sqrt(math.log(1.0 / zeta))
    elif n == 0.5 / l:
        branch = "n = 1/(2l)"
        scaling = zeta ** (g / 2.0)
    else:
        branch = "n < 1/(2l)"
        scaling = zeta ** (2.0 * g * nl * (1.0 - nl))
    return AsymptoticCumulant(integral, scaling, branch)


# ---------------------------------------------------------------------------
# generalized winding sums (replica cross-check)


@dataclass(frozen=True)
class WindingSpec:
    """Replica winding configuration: k1 n-sheeted and k2 single-sheet factors."""

    k1: int
    k2: int
    n: float
    g: float
    h: float

    def __post_init__(self):
        if self.k1 < 0 or self.k2 < 0 or self.k1 != int(self.k1) or self.k2 != int(self.k2):
            raise ValueError("k1, k2 must be non-negative integers")
        if self.k1 + self.k2 < 1:
            raise ValueError("need at least one winding factor (k1 + k2 >= 1)")
        if not (self.n > 0 and self.g > 0 and self.h > 0):
            raise ValueError("n, g, h must be positive")


def winding_direct(spec, w_max):
    """Truncated lattice sum sum_{w in Z^{k1+k2}} q_n^{g w^T T w}.

    T comes from reflecting mu = (1,...,1, 1/sqrt(n),...,1/sqrt(n)) onto the
    last axis and reading off the top-left block of the reflection: with
    R = I - 2 gamma gamma^T/<gamma,gamma>, gamma = mu - |mu| e_last,
    T = Lambda^T M^T M Lambda for M = R[:d,:d].
    """
    if w_max < 1:
        raise ValueError(f"w_max must be >= 1, got {w_max!r}")
    k1, k2, n = spec.k1, spec.k2, spec.n
    d = k1 + k2
    if d > 4:
        raise ValueError(f"direct sum limited to k1 + k2 <= 4, got {d}")
    rootn = 1.0 / math.sqrt(n)
    mu = np.concatenate([np.ones(k1), np.full(k2 + 1, rootn)])
    gamma = mu.copy()
    gamma[-1] -= np.linalg.norm(mu)
    refl = np.eye(d + 1) - 2.0 * np.outer(gamma, gamma) / gamma.dot(gamma)
    m = refl[:d, :d]
    lam_diag = np.concatenate([np.ones(k1), np.full(k2, rootn)])
    t_mat = (m * lam_diag).T @ (m * lam_diag)

    lam_n = spec.n * _lambda1(spec.h)
    axes = np.meshgrid(*(np.arange(-w_max, w_max + 1),) * d, indexing="ij")
    w = np.stack([a.ravel() for a in axes]).astype(float)
    quad_form = np.einsum("iw,ij,jw->w", w, t_mat, w)
    terms = np.exp(-lam_n * spec.g * quad_form)
    total = float(terms.sum())
    shell = float(terms[(np.abs(w) == w_max).any(axis=0)].sum())
    if shell > 1e-12 * total:
        raise ConvergenceError(
            f"outermost winding shell carries {shell / total:.2e} of the sum; "
            f"increase w_max from {w_max}")
    return total


def _winding_integral(k1, k2, n, g, h):
    lam1 = _lambda1(h)
    q1 = math.exp(-lam1)
    qn = math.exp(-n * lam1)

    def integrand(d):
        val = math.exp(-g * d * d / (2.0 * h))
        if k2:
            val *= theta_winding(q1, g, d) ** k2
        if k1:
            val *= theta_winding(qn, g, d) ** k1
        return val

    pref = math.sqrt((n * k1 + k2 + 1) * g / (TWO_PI * h))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = quad(integrand, -np.inf, np.inf, epsabs=0.0,
                        epsrel=1e-12, limit=400)
    if err > 1e-8 * abs(val):
        raise ConvergenceError(
            f"winding integral error {err:.2e} against value {val:.6e}")
    return pref * val


def winding_continued(spec):
    """Winding function by its continued (integral) representation.

    sqrt((n k1 + k2 + 1) g / (2 pi h)) * int dphi e^{-g dphi^2/2h}
    theta(q_1)^{k2} theta(q_n)^{k1}; agrees with `winding_direct` on integer
    (k1, k2) — the Poisson-resummation identity behind the replica counting.
    """
    return _winding_integral(spec.k1, spec.k2, spec.n, spec.g, spec.h)
