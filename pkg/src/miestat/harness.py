"""Sweep orchestration: geometries, trajectories, statistics, reports.

A sweep resolves its zeta targets into integer ring geometries, runs the
requested engines per point (analytic closed forms and/or Born-sampled
lattice trajectories), and packs everything into StatReports that the CLI
flattens into a fixed-schema CSV and a bit-stable JSON document.

Reproducibility contract: trajectory i of a run seeded with s uses
np.random.default_rng((s, i)), so worker-parallel and sequential execution
produce identical reports (a single reducer reassembles results in index
order).
"""

import json
import math
import os
import time
from dataclasses import dataclass, field
from itertools import product
from multiprocessing import Pool

import numpy as np

from . import __version__
from .analytics import (
    _quad,
    _split_point,
    cumulant_set,
    die,
    forced_mie,
    mie_distribution,
)
from .cft import CFTParams, RingGeometry, cross_ratio
from .errors import ConvergenceError, ImpossibleOutcomeError
from .lattice import TrajectoryEngine, statevector_oracle
from .stats import entropy_histogram, jackknife_errors, k_statistics

WORKER_ENV = "MIESTAT_WORKERS"


# ---------------------------------------------------------------------------
# geometry resolution


def solve_geometry(L, zeta_target, block=None):
    """Integer ring geometry x = (0, a, a+s, 2a+s) hitting a zeta target.

    With |A| = |C| = a the cross-ratio closed form collapses to
    sin^2(pi a / L) / sin^2(pi (a+s) / L).  When `block` pins a, only the
    separation s is scanned (the minimal scheme); otherwise both are
    scanned and, among candidates within 2% of the target, the one
    maximizing the smallest region min(a, s, L-2a-s) wins — short regions
    are what finite-size corrections bite first.
    """
    if not 0.0 < zeta_target < 1.0:
        raise ValueError(f"zeta target must lie in (0, 1), got {zeta_target!r}")
    best = None  # (within_tol, min_region, -|log zeta error|, a, s)
    a_values = (block,) if block else range(1, (L - 2) // 2 + 1)
    for a in a_values:
        s_max = L - 2 * a - 1
        if s_max < 1:
            continue
        s = np.arange(1, s_max + 1)
        zeta = (np.sin(np.pi * a / L) / np.sin(np.pi * (a + s) / L)) ** 2
        err = np.abs(np.log(zeta) - math.log(zeta_target))
        j = int(np.argmin(err))
        shortest = min(a, int(s[j]), L - 2 * a - int(s[j]))
        key = (err[j] < math.log(1.02), shortest, -err[j], a, int(s[j]))
        if best is None or key > best:
            best = key
    if best is None:
        raise ValueError(f"no valid geometry on a ring of L={L}")
    _, _, _, a, s = best
    geom = RingGeometry(L=L, x1=0, x2=a, x3=a + s, x4=2 * a + s)
    return geom, cross_ratio(geom)


def resolve_points(config):
    """Config -> list of (geometry, achieved zeta) sweep points."""
    if config.has_explicit_geometry:
        geom = RingGeometry(L=config.L, x1=config.x1, x2=config.x2,
                            x3=config.x3, x4=config.x4)
        return [(geom, cross_ratio(geom))]
    if not config.zetas:
        raise ValueError("config needs either x1..x4 or a zetas list")
    return [solve_geometry(config.L, z, config.block) for z in config.zetas]


# ---------------------------------------------------------------------------
# report containers


@dataclass(frozen=True)
class CumulantRow:
    """One CSV row: cumulants of one engine at one (zeta, g, n) point."""

    zeta: float
    g: float
    n: float
    engine: str
    kappa1: float
    kappa2: float
    kappa3: float
    err1: float = 0.0
    err2: float = 0.0
    err3: float = 0.0


@dataclass
class StatReport:
    """Everything measured at one sweep point."""

    zeta: float
    g: float
    geometry: RingGeometry
    seed: int
    trajectories: int
    rows: list = field(default_factory=list)
    histograms: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    wall_time: float = 0.0  # in-memory only; kept out of the bit-stable files

    def as_mapping(self):
        geom = self.geometry
        out = {
            "zeta": self.zeta,
            "g": self.g,
            "geometry": {"L": geom.L, "x1": geom.x1, "x2": geom.x2,
                         "x3": geom.x3, "x4": geom.x4},
            "seed": self.seed,
            "trajectories": self.trajectories,
            "rows": [vars(r).copy() for r in self.rows],
            "histograms": self.histograms,
            "curves": self.curves,
            "errors": self.errors,
        }
        return out


# ---------------------------------------------------------------------------
# trajectory fan-out

_POOL_ENGINE = None


def _pool_init(engine, seed, renyi, uniform):
    global _POOL_ENGINE
    _POOL_ENGINE = (engine, seed, renyi, uniform)


def _pool_run(indices):
    engine, seed, renyi, uniform = _POOL_ENGINE
    out = []
    for idx in indices:
        out.append((idx, _one_trajectory(engine, seed, idx, renyi, uniform)))
    return out


def _one_trajectory(engine, seed, idx, renyi, uniform):
    # Uniform mode proposes fair-coin strings and rejects the (conserved
    # particle number makes some strings exactly impossible) infeasible
    # ones, which is precisely a uniform draw over feasible strings — the
    # same ensemble the exhaustive path averages over.  Each retry gets
    # its own deterministic stream so parallel and sequential runs agree.
    for attempt in range(1000):
        key = (seed, idx) if attempt == 0 else (seed, idx, attempt)
        try:
            res = engine.sample(np.random.default_rng(key), renyi=renyi,
                                uniform=uniform)
            return res.entropies
        except ImpossibleOutcomeError:
            if not uniform:
                raise
    raise ConvergenceError(
        f"uniform trajectory {idx} rejected 1000 proposals in a row")


def worker_count():
    """Worker processes to use: env override, else auto-detect."""
    env = os.environ.get(WORKER_ENV)
    if env:
        count = int(env)
        if count < 1:
            raise ValueError(f"{WORKER_ENV} must be >= 1, got {env!r}")
        return count
    return os.cpu_count() or 1


def sample_entropies(engine, seed, count, renyi, uniform=False, workers=None):
    """count trajectories keyed (seed, index) -> {n: ndarray of entropies}.

    Fans out across a process pool when workers > 1; the reducer orders by
    index, so the result is identical either way.
    """
    if workers is None:
        workers = worker_count()
    indices = list(range(count))
    if workers <= 1 or count < 4 * workers:
        _pool_init(engine, seed, tuple(renyi), uniform)
        gathered = _pool_run(indices)
    else:
        chunks = [indices[k::workers] for k in range(workers)]
        with Pool(workers, initializer=_pool_init,
                  initargs=(engine, seed, tuple(renyi), uniform)) as pool:
            gathered = [item for part in pool.map(_pool_run, chunks)
                        for item in part]
    gathered.sort(key=lambda item: item[0])
    return {float(n): np.array([ents[float(n)] for _, ents in gathered])
            for n in renyi}


def exhaustive_entropies(engine, renyi, uniform=False):
    """All 2^{|B|} outcome strings with exact weights (tiny rings only).

    Returns {n: (values, weights)}; Born weights come from the forced-mode
    log-probability, uniform weights are 2^-|B|.
    """
    nb = engine.nb
    if nb > 20:
        raise ValueError(f"exhaustive enumeration over 2^{nb} strings refused")
    values = {float(n): [] for n in renyi}
    weights = []
    for bits in product((0, 1), repeat=nb):
        try:
            res = engine.sample(renyi=renyi, outcomes=bits)
        except Exception:
            continue  # Born-impossible string carries zero weight
        weights.append(0.5**nb if uniform else math.exp(res.record.log_born_prob))
        for n in renyi:
            values[float(n)].append(res.entropies[float(n)])
    w = np.array(weights)
    if not uniform and abs(w.sum() - 1.0) > 1e-8:
        raise ConvergenceError(f"exhaustive Born weights sum to {w.sum()!r}")
    return {n: (np.array(v), w) for n, v in values.items()}


def _weighted_cumulants(values, weights):
    w = weights / weights.sum()
    m = float((w * values).sum())
    d = values - m
    mu2 = float((w * d * d).sum())
    mu3 = float((w * d**3).sum())
    return m, mu2, mu3


# ---------------------------------------------------------------------------
# sweep drivers


def _analytic_rows(zeta, g, renyi):
    rows = []
    for n in renyi:
        cs = cumulant_set(CFTParams(g=g, n=float(n), zeta=zeta))
        rows.append(CumulantRow(zeta, g, float(n), "analytic",
                                cs.kappa1, cs.kappa2, cs.kappa3))
    return rows


def _lattice_rows(config, geom, zeta, uniform=False, engine_name="lattice"):
    engine = TrajectoryEngine(geom, filling=config.filling)
    rows = []
    samples = None
    if config.exhaustive:
        table = exhaustive_entropies(engine, config.renyi, uniform=uniform)
        for n in config.renyi:
            vals, w = table[float(n)]
            k1, k2, k3 = _weighted_cumulants(vals, w)
            # exact enumeration: estimator errors are identically zero
            rows.append(CumulantRow(zeta, config.luttinger_g, float(n),
                                    engine_name, k1, k2, k3))
    else:
        samples = sample_entropies(engine, config.seed, config.trajectories,
                                   config.renyi, uniform=uniform)
        for n in config.renyi:
            x = samples[float(n)]
            k1, k2, k3 = k_statistics(x)
            e1, e2, e3 = jackknife_errors(x)
            rows.append(CumulantRow(zeta, config.luttinger_g, float(n),
                                    engine_name, k1, k2, k3, e1, e2, e3))
    return rows, samples


def run_sweep(config):
    """Cumulant sweep over the resolved parameter points.

    Engine failures at a point are recorded in that report's `errors`
    mapping and the sweep moves on.
    """
    reports = []
    for geom, zeta in resolve_points(config):
        t0 = time.perf_counter()
        report = StatReport(zeta=zeta, g=config.luttinger_g, geometry=geom,
                            seed=config.seed, trajectories=config.trajectories)
        if config.engines in ("analytic", "both"):
            try:
                report.rows.extend(
                    _analytic_rows(zeta, config.luttinger_g, config.renyi))
            except Exception as exc:  # surfaced per point, sweep continues
                report.errors["analytic"] = f"{type(exc).__name__}: {exc}"
        if config.engines in ("lattice", "both"):
            try:
                rows, _ = _lattice_rows(config, geom, zeta)
                report.rows.extend(rows)
            except Exception as exc:
                report.errors["lattice"] = f"{type(exc).__name__}: {exc}"
        report.wall_time = time.perf_counter() - t0
        reports.append(report)
    return reports


def run_distribution(config):
    """Histogram of sampled S against the analytic distribution curve (n=1)."""
    points = resolve_points(config)
    if len(points) != 1:
        raise ValueError("distribution runs take exactly one parameter point")
    geom, zeta = points[0]
    t0 = time.perf_counter()
    report = StatReport(zeta=zeta, g=config.luttinger_g, geometry=geom,
                        seed=config.seed, trajectories=config.trajectories)
    engine = TrajectoryEngine(geom, filling=config.filling)
    samples = sample_entropies(engine, config.seed, config.trajectories, (1.0,))
    x = samples[1.0]
    k1, k2, k3 = k_statistics(x)
    e1, e2, e3 = jackknife_errors(x)
    report.rows.append(CumulantRow(zeta, config.luttinger_g, 1.0, "lattice",
                                   k1, k2, k3, e1, e2, e3))
    hist = entropy_histogram(x)
    report.histograms["1.0"] = hist

    params = CFTParams(g=config.luttinger_g, n=1.0, zeta=zeta)
    try:
        centers = _curve_grid(hist, params)
        curve = mie_distribution(params, centers)
        report.curves["1.0"] = {
            "s": curve.s.tolist(),
            "density": curve.density.tolist(),
            "norm": curve.norm,
            "left_lognormal": curve.left_lognormal,
            "right_sqrt": curve.right_sqrt,
        }
    except Exception as exc:
        report.errors["analytic"] = f"{type(exc).__name__}: {exc}"
    report.wall_time = time.perf_counter() - t0
    return report


def _curve_grid(hist, params):
    """Histogram bin centers that sit strictly inside the analytic support."""
    f0 = forced_mie(params, 0.0)
    fpi = forced_mie(params, math.pi)
    guard = 1e-6 * (fpi - f0)
    edges = np.array(hist["linear"]["edges"])
    centers = 0.5 * (edges[1:] + edges[:-1])
    if hist["log"] is not None:
        ledges = np.array(hist["log"]["edges"])
        centers = np.concatenate([centers, np.sqrt(ledges[1:] * ledges[:-1])])
    centers = centers[(centers > f0 + guard) & (centers < fpi - guard)]
    return np.unique(centers)


def _uniform_moments(params):
    """Mean and central moments of forced MIE under the flat measure."""
    f = lambda d: forced_mie(params, d)
    s = _split_point(params.g, params.h)
    mean = die(params)
    mu2 = (_quad(lambda d: (f(d) - mean) ** 2, 0.0, s)
           + _quad(lambda d: (f(d) - mean) ** 2, s, math.pi)) / math.pi
    mu3 = (_quad(lambda d: (f(d) - mean) ** 3, 0.0, s)
           + _quad(lambda d: (f(d) - mean) ** 3, s, math.pi)) / math.pi
    return mean, mu2, mu3


def run_die(config):
    """Disentanglement-averaged entanglement: uniform outcomes vs die()."""
    reports = []
    for geom, zeta in resolve_points(config):
        t0 = time.perf_counter()
        report = StatReport(zeta=zeta, g=config.luttinger_g, geometry=geom,
                            seed=config.seed, trajectories=config.trajectories)
        if config.engines in ("analytic", "both"):
            for n in config.renyi:
                try:
                    params = CFTParams(g=config.luttinger_g, n=float(n), zeta=zeta)
                    mean, mu2, mu3 = _uniform_moments(params)
                    report.rows.append(CumulantRow(
                        zeta, config.luttinger_g, float(n), "analytic-die",
                        mean, mu2, mu3))
                except Exception as exc:
                    report.errors["analytic"] = f"{type(exc).__name__}: {exc}"
        if config.engines in ("lattice", "both"):
            try:
                rows, samples = _lattice_rows(config, geom, zeta, uniform=True,
                                              engine_name="lattice-uniform")
                report.rows.extend(rows)
                if samples is not None:
                    report.histograms["1.0"] = entropy_histogram(
                        samples[min(samples)])
            except Exception as exc:
                report.errors["lattice"] = f"{type(exc).__name__}: {exc}"
        report.wall_time = time.perf_counter() - t0
        reports.append(report)
    return reports


def exhaustive_statevector_average(geom, renyi=(1.0,), filling=0.5):
    """Born-weighted mean entropies from the L <= 12 many-body oracle."""
    sites = geom.measured_sites
    total = {float(n): 0.0 for n in renyi}
    mass = 0.0
    for bits in product((0, 1), repeat=len(sites)):
        p, ents = statevector_oracle(geom, bits, renyi=renyi, filling=filling)
        if p < 1e-14:
            continue
        mass += p
        for n in renyi:
            total[float(n)] += p * ents[float(n)]
    return {n: v / mass for n, v in total.items()}, mass


# ---------------------------------------------------------------------------
# emission

CSV_HEADER = "zeta,g,n,engine,kappa1,kappa2,kappa3,err1,err2,err3"
SCHEMA_LINE = "# miestat-report v1"


def _csv_text(reports):
    lines = [SCHEMA_LINE, CSV_HEADER]
    for rep in reports:
        for r in rep.rows:
            lines.append(",".join([
                repr(r.zeta), repr(r.g), repr(r.n), r.engine,
                repr(r.kappa1), repr(r.kappa2), repr(r.kappa3),
                repr(r.err1), repr(r.err2), repr(r.err3)]))
    return "\n".join(lines) + "\n"


def _json_text(reports, config):
    doc = {
        "schema": "miestat-report",
        "schema_version": 1,
        "package_version": __version__,
        "seed": config.seed,
        "config": config.to_mapping(),
        "reports": [rep.as_mapping() for rep in reports],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def emit_report(reports, config, out=None, fmt=None):
    """Write the sweep's CSV and/or JSON files; returns the paths written.

    Identical inputs produce byte-identical files: floats are serialized
    via repr, JSON keys are sorted, and volatile metadata (wall time) is
    never written.
    """
    fmt = fmt or config.format
    out = out if out is not None else (config.out or ".")
    root, ext = os.path.splitext(out)
    if ext.lower() in (".csv", ".json"):
        targets = {ext.lower().lstrip("."): out}
        os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    else:
        os.makedirs(out, exist_ok=True)
        targets = {kind: os.path.join(out, f"report.{kind}")
                   for kind in ("csv", "json")}
    written = []
    if fmt in ("csv", "both") and "csv" in targets:
        with open(targets["csv"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_csv_text(reports))
        written.append(targets["csv"])
    if fmt in ("json", "both") and "json" in targets:
        with open(targets["json"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_json_text(reports, config))
        written.append(targets["json"])
    if not written:
        raise ValueError(f"nothing to write for format {fmt!r} at {out!r}")
    return written
