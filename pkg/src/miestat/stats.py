"""Monte-Carlo estimators for the trajectory harness.

Unbiased k-statistics for the low cumulants (plug-in kappa_3 is visibly
biased at the sample sizes we run), delete-1 jackknife errors computed
from power sums in O(N), and the two-scale histogram used for the
distribution figures (linear bins for the bulk, log bins for the
log-normal left tail).
"""

import numpy as np


def k_statistics(values):
    """Unbiased cumulant estimates (k1, k2, k3) of a 1-d sample.

    k1 = mean, k2 = N/(N-1) m2, k3 = N^2 m3 / ((N-1)(N-2)) with m_k the
    central sample moments.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 3:
        raise ValueError(f"k-statistics need at least 3 samples, got {n}")
    m = x.mean()
    d = x - m
    m2 = (d * d).mean()
    m3 = (d**3).mean()
    return (float(m), float(n / (n - 1.0) * m2),
            float(n * n * m3 / ((n - 1.0) * (n - 2.0))))


def _loo_k_stats(x):
    """Leave-one-out (k1, k2, k3) for every deletion, via power-sum updates."""
    n = x.size
    s1 = x.sum() - x
    s2 = (x * x).sum() - x * x
    s3 = (x**3).sum() - x**3
    m = n - 1.0
    mean = s1 / m
    mu2 = s2 / m - mean**2
    mu3 = s3 / m - 3.0 * mean * s2 / m + 2.0 * mean**3
    k1 = mean
    k2 = m / (m - 1.0) * mu2
    k3 = m * m * mu3 / ((m - 1.0) * (m - 2.0))
    return k1, k2, k3


def jackknife_errors(values):
    """Delete-1 jackknife standard errors for (k1, k2, k3).

    SE = sqrt((N-1)/N sum_i (theta_i - theta_bar)^2); exact-enumeration
    reports bypass this (their errors are identically zero).
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 4:
        raise ValueError(f"jackknife needs at least 4 samples, got {n}")
    errs = []
    for loo in _loo_k_stats(x):
        dev = loo - loo.mean()
        errs.append(float(np.sqrt((n - 1.0) / n * (dev * dev).sum())))
    return tuple(errs)


def entropy_histogram(values, lin_bins=64, log_bins=32, log_hi=0.1):
    """Two-scale histogram of entropy samples.

    Linear part: `lin_bins` bins spanning the observed range, density
    normalized per bin width so its mass is exactly 1.  Log part:
    `log_bins` geometric bins over [min positive S, log_hi], density
    against the *total* sample count so both parts estimate the same P(S).
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("cannot histogram an empty sample")
    lo, hi = float(x.min()), float(x.max())
    if hi <= lo:
        hi = lo + max(1e-12, abs(lo) * 1e-12)
    edges = np.linspace(lo, hi, lin_bins + 1)
    counts, _ = np.histogram(x, edges)
    widths = np.diff(edges)
    out = {
        "linear": {
            "edges": edges.tolist(),
            "counts": counts.tolist(),
            "density": (counts / (x.size * widths)).tolist(),
        },
        "log": None,
    }
    pos = x[x > 0.0]
    if pos.size and float(pos.min()) < log_hi:
        ledges = np.geomspace(float(pos.min()), log_hi, log_bins + 1)
        lcounts, _ = np.histogram(pos, ledges)
        lwidths = np.diff(ledges)
        out["log"] = {
            "edges": ledges.tolist(),
            "counts": lcounts.tolist(),
            "density": (lcounts / (x.size * lwidths)).tolist(),
        }
    return out
