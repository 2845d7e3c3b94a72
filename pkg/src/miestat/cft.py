"""Ring geometry and the special functions behind the cylinder partition sums.

Conventions used throughout the package: the four boundaries
0 <= x1 < x2 < x3 < x4 < L cut the ring into half-open arcs

    A = [x1, x2),  B1 = [x2, x3),  C = [x3, x4),  B2 = [x4, L) + [0, x1),

with A and C unmeasured.  The cross-ratio zeta is built from chord
lengths w_ij = (L/pi) sin(pi x_ij / L), and every analytic quantity
depends on the geometry only through the cylinder length h(zeta).
All functions here are pure.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError

TWO_PI = 2.0 * math.pi


def _agm(a, b):
    """Arithmetic-geometric mean of two non-negative reals."""
    for _ in range(64):
        if abs(a - b) <= 4e-16 * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return 0.5 * (a + b)


def elliptic_k(k):
    """Complete elliptic integral K(k) in the modulus convention.

    Uses K(k) = pi / (2 agm(1, sqrt(1-k^2))), accurate to machine
    precision for 0 <= k < 1.
    """
    if not 0.0 <= k < 1.0:
        raise ValueError(f"elliptic_k requires 0 <= k < 1, got {k!r}")
    return math.pi / (2.0 * _agm(1.0, math.sqrt((1.0 - k) * (1.0 + k))))


@dataclass(frozen=True)
class RingGeometry:
    """Four marked sites on a ring of L sites.

    Regions are half-open: A = [x1,x2), B1 = [x2,x3), C = [x3,x4),
    B2 = [x4,L) plus [0,x1).  A and C are the unmeasured intervals.
    """

    L: int
    x1: int
    x2: int
    x3: int
    x4: int

    def __post_init__(self):
        for name in ("L", "x1", "x2", "x3", "x4"):
            v = getattr(self, name)
            if int(v) != v:
                raise ValueError(f"{name} must be an integer site index, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.L <= 0:
            raise ValueError("ring size L must be positive")
        if not (0 <= self.x1 < self.x2 < self.x3 < self.x4 < self.L):
            raise ValueError(
                "boundaries must satisfy 0 <= x1 < x2 < x3 < x4 < L, got "
                f"({self.x1}, {self.x2}, {self.x3}, {self.x4}) on L={self.L}"
            )

    @property
    def sites_a(self):
        return list(range(self.x1, self.x2))

    @property
    def sites_b1(self):
        return list(range(self.x2, self.x3))

    @property
    def sites_c(self):
        return list(range(self.x3, self.x4))

    @property
    def sites_b2(self):
        return list(range(self.x4, self.L)) + list(range(0, self.x1))

    @property
    def measured_sites(self):
        """All of B in ascending site order (the sampling order contract)."""
        return sorted(self.sites_b1 + self.sites_b2)

    def shifted(self, delta):
        """The same labeled configuration rotated by `delta` sites.

        The canonical form anchors x1 at the start of region A, so a
        rotation is representable iff the ring seam lands in a measured
        block: either nothing wraps, or the wrap sits in B2 (unchanged
        labels), or in B1 (then A/C and B1/B2 swap roles, which leaves
        every observable invariant).  A seam inside A or C would scramble
        measured and unmeasured labels, so that raises.
        """
        xs = [(x + delta) % self.L for x in (self.x1, self.x2, self.x3, self.x4)]
        for r in (0, 2, 1, 3):
            rot = xs[r:] + xs[:r]
            if rot[0] < rot[1] < rot[2] < rot[3]:
                if r % 2:
                    raise ValueError(
                        f"rotation by {delta} puts the ring origin inside "
                        "an unmeasured region; labels cannot be preserved")
                return RingGeometry(self.L, *rot)
        raise ValueError(f"rotation by {delta} degenerates the geometry")


def cross_ratio(geom):
    """Conformal cross-ratio zeta = (w12 w34)/(w13 w24) in (0,1).

    w_ij are ring chords; the (L/pi) prefactors cancel in the ratio, so
    only |sin(pi x_ij / L)| enters.  Invariant under common rotations of
    the four points and under reflection of the ring.
    """
    L = float(geom.L)

    def chord(xi, xj):
        return abs(math.sin(math.pi * ((xj - xi) % L) / L))

    w12 = chord(geom.x1, geom.x2)
    w34 = chord(geom.x3, geom.x4)
    w13 = chord(geom.x1, geom.x3)
    w24 = chord(geom.x2, geom.x4)
    if min(w12, w34, w13, w24) == 0.0:
        raise ValueError("degenerate geometry: coincident boundary points")
    z = (w12 * w34) / (w13 * w24)
    if not 0.0 < z < 1.0:
        raise ValueError(f"cross-ratio fell outside (0,1): {z!r}")
    return z


@dataclass(frozen=True)
class CFTParams:
    """Continuum parameter bundle: Luttinger g, Renyi index n, cross-ratio zeta."""

    g: float
    n: float
    zeta: float

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError(f"Luttinger parameter g must be positive, got {self.g!r}")
        if not self.n > 0:
            raise ValueError(f"Renyi index n must be positive, got {self.n!r}")
        if not 0.0 < self.zeta < 1.0:
            raise ValueError(f"cross-ratio must lie in (0,1), got {self.zeta!r}")

    @property
    def h(self):
        return h_of_zeta(self.zeta)

    def nome(self, replica_n=None):
        """q_n = exp(-2 pi^2 n / h); n defaults to the bundle's Renyi index."""
        n = self.n if replica_n is None else replica_n
        return math.exp(-2.0 * math.pi**2 * n / self.h)


@dataclass(frozen=True)
class BoundaryMismatch:
    """Dirichlet mismatch between the two measured arcs, stored in [0, 2pi)."""

    delta_phi: float

    def __post_init__(self):
        object.__setattr__(self, "delta_phi", float(self.delta_phi) % TWO_PI)

    @property
    def folded(self):
        """Representative in [0, pi]; everything downstream is even about pi."""
        d = self.delta_phi
        return TWO_PI - d if d > math.pi else d


def h_of_zeta(zeta):
    """Length of the Dirichlet cylinder: h = 2 pi K(k)/K(k').

    The modulus is k = (1 - sqrt(1-zeta))/(1 + sqrt(1-zeta)), computed
    in the cancellation-free form zeta/(1+sqrt(1-zeta))^2, and the
    ratio of elliptic integrals is taken as a single AGM quotient,

        h = 2 pi agm(1, k) / agm(1, k'),   k' = sqrt(1-k^2),

    which neither overflows nor loses accuracy at either end of (0,1).
    Strictly increasing, with h(zeta) h(1-zeta) = pi^2 and
    h -> pi^2 / log(16/zeta) as zeta -> 0.
    """
    if not 0.0 < zeta < 1.0:
        raise ValueError(f"h_of_zeta requires 0 < zeta < 1, got {zeta!r}")
    k = zeta / (1.0 + math.sqrt(1.0 - zeta)) ** 2
    kp = math.sqrt((1.0 + k) * (1.0 - k))
    return TWO_PI * _agm(1.0, k) / _agm(1.0, kp)


def theta_winding(q, g, delta_phi, representation=None):
    """Winding sum  sum_{w in Z} q^{g (w + delta_phi/2pi)^2}.

    Even, 2pi-periodic, maximal at delta_phi = 0.  With lam = -ln q the
    direct sum is used when lam >= pi; otherwise the Poisson-resummed
    dual converges far faster:

        sqrt(pi/(g lam)) [1 + 2 sum_{m>=1} e^{-pi^2 m^2/(g lam)} cos(m delta_phi)].

    Both representations truncate once omitted terms are < e^-47 of the
    leading one.  `representation` may force "direct" or "poisson".
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"theta_winding requires 0 < q < 1, got {q!r}")
    if not g > 0:
        raise ValueError(f"theta_winding requires g > 0, got {g!r}")
    lam = -math.log(q)
    if representation is None:
        representation = "direct" if lam >= math.pi else "poisson"
    if representation == "direct":
        u, rel, xr = _theta_terms(lam, g, delta_phi / TWO_PI)
        return math.exp(-g * lam * xr * xr) * float(rel.sum())
    if representation == "poisson":
        a = g * lam
        mmax = int(math.ceil(math.sqrt(47.0 * a) / math.pi)) + 1
        m = np.arange(1.0, mmax + 1)
        tail = np.exp(-math.pi**2 * m * m / a) * np.cos(m * delta_phi)
        return math.sqrt(math.pi / a) * (1.0 + 2.0 * float(tail.sum()))
    raise ValueError(f"unknown representation {representation!r}")


def _theta_terms(lam, g, x):
    """Terms of the direct winding sum, scaled by its largest one.

    For x reduced to xr in [-1/2, 1/2] returns (u, rel, xr) with
    u = w + xr over the truncation window and rel = e^{-g lam (u^2 - xr^2)},
    so every entry is in (0, 1] and sum(rel) = theta * e^{+g lam xr^2}.
    The same arrays drive the log-derivative sums in the analytics.
    """
    xr = x - round(x)
    wmax = int(math.ceil(abs(xr) + math.sqrt(47.0 / (g * lam)))) + 1
    w = np.arange(-wmax, wmax + 1, dtype=float)
    u = w + xr
    rel = np.exp(-g * lam * (u * u - xr * xr))
    return u, rel, xr


def dedekind_eta(q):
    """Dedekind eta  q^{1/24} prod_{m>=1} (1 - q^m).

    The product truncates at the first factor within 1e-16 of 1.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"dedekind_eta requires 0 < q < 1, got {q!r}")
    lam = -math.log(q)
    mmax = max(1, int(math.ceil(16.0 * math.log(10.0) / lam)) + 1)
    if mmax > 10_000_000:
        raise ConvergenceError(f"eta product would need {mmax} factors at q={q!r}")
    m = np.arange(1.0, mmax + 1)
    return q ** (1.0 / 24.0) * float(np.prod(1.0 - np.exp(-lam * m)))


def _log_eta_series(lam):
    """sum_m log(1 - e^{-lam m}), truncated like dedekind_eta (log form)."""
    mmax = max(1, int(math.ceil(46.0 / lam)) + 1)
    m = np.arange(1.0, mmax + 1)
    return float(np.log1p(-np.exp(-lam * m)).sum())


def z_cylinder(params, replica_n, delta_phi):
    """Dirichlet-cylinder partition function with mismatch delta_phi.

    Z_{C(n), delta_phi} = eta(q_n)^{-1} theta_winding(q_n, g, delta_phi)
    with nome q_n = exp(-2 pi^2 n / h(zeta)).
    """
    if not replica_n > 0:
        raise ValueError(f"replica index must be positive, got {replica_n!r}")
    q = params.nome(replica_n)
    return theta_winding(q, params.g, delta_phi) / dedekind_eta(q)
