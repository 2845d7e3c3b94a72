"""Exact Gaussian-state simulation of projective charge measurements.

The XX chain's half-filled ground state is Gaussian, so the full
post-measurement physics lives in the two-point function
C_ij = <c_i^dag c_j>.  Measuring the charge on site a collapses C by a
rank-1 update (outcome 1: C - C_{.a} C_{a.}/C_aa, outcome 0 with the
complementary denominator), and entanglement entropies of any block come
from the eigenvalues of the restricted matrix.

Two implementations of the same trajectory sampler coexist on purpose:
`sample_trajectory` applies the textbook site-by-site update to the full
L x L matrix, while `TrajectoryEngine` runs a left-looking blocked
elimination over the measured sites only (rank-1 cascade regrouped into
GEMM panels, ~20x faster at L=600).  They consume identical random
streams — exactly one rng.random() per measured site — and the test suite
holds them to 1e-10 agreement on replayed outcomes.

`statevector_oracle` is the many-body cross-check at L <= 12: Slater
determinants of the filled Fermi sea (boundary condition fixed by fermion
parity), literal projector strings, and Schmidt-decomposed entropies.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .errors import ImpossibleOutcomeError

DEFAULT_TOL = 1e-12


def ground_state_correlation(L, filling=0.5):
    """Ground-state correlation matrix of the XX ring at a given filling.

    C_ij = sin(pi filling (i-j)) / (L sin(pi (i-j)/L)), C_ii = filling.
    The closed form already encodes the parity-correct boundary sector.
    """
    if L % 2 or L <= 0:
        raise ValueError(f"need a positive even chain length, got {L!r}")
    i = np.arange(L)
    d = i[:, None] - i[None, :]
    off = d != 0
    C = np.full((L, L), float(filling))
    C[off] = np.sin(np.pi * filling * d[off]) / (L * np.sin(np.pi * d[off] / L))
    return C


def measure_site(C, site, outcome, tol=DEFAULT_TOL):
    """Projective charge measurement on one site (pure function).

    Rank-1 collapse of the correlation matrix; the measured row/column is
    zeroed and its diagonal pinned to the exact outcome.  The result is
    re-symmetrized to stop drift over long measurement cascades.
    """
    d = C[site, site]
    prob = d if outcome else 1.0 - d
    if prob <= tol:
        raise ImpossibleOutcomeError(
            f"outcome {outcome} on site {site} has Born probability "
            f"{prob:.3e} <= {tol:g}")
    c = C[:, site].copy()
    if outcome:
        Cn = C - np.outer(c, c / d)
    else:
        Cn = C + np.outer(c, c / (1.0 - d))
    Cn[site, :] = 0.0
    Cn[:, site] = 0.0
    Cn[site, site] = float(outcome)
    return 0.5 * (Cn + Cn.T)


@dataclass(frozen=True)
class MeasurementRecord:
    """Outcome bit string of one trajectory, in measurement order."""

    sites: tuple
    outcomes: tuple
    log_born_prob: float

    def __post_init__(self):
        if len(self.sites) != len(self.outcomes):
            raise ValueError("sites and outcomes must pair up")
        if len(set(self.sites)) != len(self.sites):
            raise ValueError("each measured site must appear exactly once")
        if self.log_born_prob > 0.0:
            raise ValueError(f"log Born probability {self.log_born_prob!r} > 0")

    @property
    def pairs(self):
        return list(zip(self.sites, self.outcomes))


@dataclass(frozen=True)
class TrajectoryResult:
    record: MeasurementRecord
    entropies: dict
    geometry: object = None

    def __post_init__(self):
        for n, s in self.entropies.items():
            if s < -1e-10:
                raise ValueError(f"negative entropy {s!r} at renyi index {n}")


def _draw_outcome(p1, rng, forced, uniform, tol):
    """One outcome + its Born factor under the shared draw-stream contract."""
    if forced is not None:
        o = int(forced)
        pb = p1 if o else 1.0 - p1
        if pb <= tol:
            raise ImpossibleOutcomeError(
                f"forced outcome {o} has Born probability {pb:.3e} <= {tol:g}")
        return o, pb
    if uniform:
        o = 1 if rng.random() < 0.5 else 0
        pb = p1 if o else 1.0 - p1
        if pb <= 0.0:
            raise ImpossibleOutcomeError(
                f"uniform outcome {o} hit an exactly impossible projector")
        return o, pb
    o = 1 if rng.random() < p1 else 0
    return o, (p1 if o else 1.0 - p1)


def sample_trajectory(C, measured_sites, rng=None, outcomes=None,
                      uniform=False, tol=DEFAULT_TOL):
    """Measure the listed sites sequentially; returns (record, final C).

    Outcomes are Born-sampled from the current, already-collapsed matrix
    (one rng.random() per site); `outcomes` forces a fixed bit string
    instead, and `uniform=True` draws each bit fair-coin for
    disentanglement averaging.  Deterministic given the rng state.
    """
    sites = list(measured_sites)
    if len(set(sites)) != len(sites):
        raise ValueError("measured_sites contains duplicates")
    if outcomes is not None and len(outcomes) != len(sites):
        raise ValueError("outcomes must align with measured_sites")
    if outcomes is None and not uniform and rng is None:
        raise ValueError("Born sampling needs an rng")
    Cw = np.array(C, dtype=float, copy=True)
    out = []
    logp = 0.0
    for k, a in enumerate(sites):
        p1 = min(max(Cw[a, a], 0.0), 1.0)
        forced = None if outcomes is None else outcomes[k]
        o, pb = _draw_outcome(p1, rng, forced, uniform, tol)
        logp += math.log(pb)
        Cw = measure_site(Cw, a, o, tol=tol)
        out.append(o)
    record = MeasurementRecord(tuple(sites), tuple(out), min(logp, 0.0))
    return record, Cw


def _entropy_from_eigs(lam, n):
    lam = np.clip(lam, 0.0, 1.0)
    if n == 1.0:
        with np.errstate(all="ignore"):
            terms = (np.where(lam > 0.0, lam * np.log(lam), 0.0)
                     + np.where(lam < 1.0, (1.0 - lam) * np.log1p(-lam), 0.0))
        return float(-terms.sum())
    return float(np.log(lam**n + (1.0 - lam) ** n).sum() / (1.0 - n))


def entanglement_entropy(C, region, renyi_n=1.0):
    """Entanglement entropy of a site block from the correlation spectrum.

    n = 1: -sum lam ln lam + (1-lam) ln(1-lam); otherwise
    sum ln(lam^n + (1-lam)^n) / (1-n), eigenvalues clipped into [0, 1].
    """
    region = list(region)
    if not region:
        raise ValueError("region must be nonempty")
    if not renyi_n > 0:
        raise ValueError(f"Renyi index must be positive, got {renyi_n!r}")
    block = C[np.ix_(region, region)]
    lam = np.linalg.eigvalsh(0.5 * (block + block.T))
    return max(_entropy_from_eigs(lam, float(renyi_n)), 0.0)


# ---------------------------------------------------------------------------
# blocked trajectory engine


def _blocked_trajectory(C0p, nb, rng=None, outcomes=None, uniform=False,
                        tol=DEFAULT_TOL, panel=48):
    """Left-looking panel elimination of the first nb (measured) sites.

    Equivalent to nb successive measure_site calls on the permuted matrix,
    but the trailing block only sees one symmetric GEMM update per panel.
    Within a panel, column t is brought up to date against the panel's own
    earlier pivots before its diagonal is read.  Division is by the raw
    pivot d (outcome 1) or d - 1 (outcome 0), matching the rank-1 updates.
    """
    C = C0p.copy()
    size = C.shape[0]
    out = np.empty(nb, dtype=np.int8)
    logp = 0.0
    for start in range(0, nb, panel):
        k = min(panel, nb - start)
        W = np.zeros((size - start, k))
        inv_piv = np.empty(k)
        for m in range(k):
            t = start + m
            col = C[start:, t].copy()
            if m:
                col -= W[:, :m] @ (W[m, :m] * inv_piv[:m])
            dd = col[m]
            p1 = 0.0 if dd < 0.0 else (1.0 if dd > 1.0 else dd)
            forced = None if outcomes is None else outcomes[t]
            o, pb = _draw_outcome(p1, rng, forced, uniform, tol)
            logp += math.log(pb)
            out[t] = o
            W[:, m] = col
            inv_piv[m] = 1.0 / (dd if o else dd - 1.0)
        tail = W[k:, :]
        C[start + k:, start + k:] -= (tail * inv_piv) @ tail.T
    return out, min(logp, 0.0), C[nb:, nb:]


class TrajectoryEngine:
    """Reusable Born sampler for one measurement geometry.

    Permutes the ground-state matrix to [B (ascending), A, C] once, then
    each trajectory runs the blocked elimination and reads region-A
    entropies straight off the trailing block.
    """

    def __init__(self, geometry, filling=0.5, panel=48):
        self.geometry = geometry
        self.b_sites = list(geometry.measured_sites)
        a_sites = list(geometry.sites_a)
        c_sites = list(geometry.sites_c)
        perm = self.b_sites + a_sites + c_sites
        if len(perm) != geometry.L:
            raise ValueError("geometry regions do not tile the ring")
        C0 = ground_state_correlation(geometry.L, filling)
        self.c0 = np.ascontiguousarray(C0[np.ix_(perm, perm)])
        self.nb = len(self.b_sites)
        self.a_len = len(a_sites)
        self.panel = panel

    def sample(self, rng=None, renyi=(1.0,), outcomes=None, uniform=False,
               tol=DEFAULT_TOL):
        out, logp, block = _blocked_trajectory(
            self.c0, self.nb, rng=rng, outcomes=outcomes, uniform=uniform,
            tol=tol, panel=self.panel)
        CA = block[:self.a_len, :self.a_len]
        lam = np.linalg.eigvalsh(0.5 * (CA + CA.T))
        ents = {float(n): max(_entropy_from_eigs(lam, float(n)), 0.0)
                for n in renyi}
        record = MeasurementRecord(tuple(self.b_sites),
                                   tuple(int(o) for o in out), logp)
        return TrajectoryResult(record, ents, self.geometry)


# ---------------------------------------------------------------------------
# statevector oracle (L <= 12)


def _slater_modes(L, filling):
    """Filled plane-wave modes with the parity-matched boundary condition.

    Antiperiodic when the particle number is even, periodic when odd, so
    the Fermi sea is unique and reproduces the closed-form C_ij.
    """
    N = int(round(L * filling))
    if N % 2 == 0:
        ks = 2.0 * np.pi * (np.arange(L) + 0.5) / L
    else:
        ks = 2.0 * np.pi * np.arange(L) / L
    ks = np.sort(((ks + np.pi) % (2.0 * np.pi)) - np.pi)
    order = np.argsort(-np.cos(ks), kind="stable")
    filled = ks[order[:N]]
    j = np.arange(L)
    return np.exp(1j * np.outer(j, filled)) / math.sqrt(L)


@lru_cache(maxsize=8)
def _ground_statevector(L, filling):
    """Amplitudes <bits|psi_0> over the full 2^L basis (Slater determinants)."""
    U = _slater_modes(L, filling)
    N = U.shape[1]
    amp = np.zeros(2**L, dtype=complex)
    for occ in combinations(range(L), N):
        amp[sum(1 << s for s in occ)] = np.linalg.det(U[list(occ), :])
    return amp


def statevector_oracle(geometry, outcomes, renyi=(1.0, 2.0, 3.0), filling=0.5):
    """Exact many-body check: projector string applied to the ground state.

    Returns (born_prob, {renyi_n: S_A}) for the outcome string on the
    geometry's measured sites (ascending order).  Entropies come from the
    Schmidt decomposition after regrouping region-A bit positions to the
    front — sign-free at fixed particle number with contiguous regions.
    """
    L = geometry.L
    if L > 12:
        raise ValueError(f"statevector oracle capped at L = 12, got {L}")
    sites = list(geometry.measured_sites)
    if len(outcomes) != len(sites):
        raise ValueError("outcomes must align with the measured sites")
    amp = _ground_statevector(L, filling)
    idx = np.arange(2**L)
    mask = np.ones(2**L, dtype=bool)
    for s, o in zip(sites, outcomes):
        mask &= ((idx >> s) & 1) == o
    psi = np.where(mask, amp, 0.0)
    prob = float(np.vdot(psi, psi).real)
    if prob < 1e-14:
        return prob, {float(n): float("nan") for n in renyi}
    psi = psi / math.sqrt(prob)

    region = list(geometry.sites_a)
    rest = [s for s in range(L) if s not in region]
    new_order = region + rest
    psi2 = np.zeros_like(psi)
    for b in np.nonzero(np.abs(psi) > 0.0)[0]:
        nb = 0
        for pos, s in enumerate(new_order):
            if (b >> s) & 1:
                nb |= 1 << pos
        psi2[nb] = psi[b]
    # region bits are now the low bits: rows = environment, cols = region
    M = psi2.reshape(2 ** (L - len(region)), 2 ** len(region)).T
    lam = np.linalg.svd(M, compute_uv=False) ** 2
    lam = lam[lam > 1e-16]
    ents = {}
    for n in renyi:
        n = float(n)
        if n == 1.0:
            ents[n] = float(-(lam * np.log(lam)).sum())
        else:
            ents[n] = float(np.log((lam**n).sum()) / (1.0 - n))
    return prob, ents
