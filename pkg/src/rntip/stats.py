"""
Mode paths, time-to-tip distributions, Kramers estimates and power-law fits.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy import stats as sps
from scipy.integrate import quad, solve_ivp
from scipy.optimize import minimize_scalar

from .core import SystemParams, Trajectory
from .errors import (
    ConfigError,
    DegenerateError,
    IllConditionedError,
    InsufficientSamplesError,
    NoEscapesError,
    NotConvergedError,
)
from .mpp import mpp_field, normalized_action, symmetry_map
from .sde import TIPPED, TRACKED, Ensemble, SimConfig, run_ensemble

MIN_SAMPLES = 30
KDE_GRID = 512


def silverman_bandwidth(samples) -> float:
    x = np.asarray(samples, dtype=float)
    sd = x.std(ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return 0.9 * spread * x.size ** -0.2


def _kde(x, h):
    def density(g):
        g = np.atleast_1d(g)
        return np.exp(-0.5 * ((g[:, None] - x[None, :]) / h) ** 2).sum(axis=1)
    return density


def kde_mode(samples, min_samples: int = MIN_SAMPLES, grid: int = KDE_GRID) -> float:
    """Argmax of a Gaussian KDE with Silverman's bandwidth.

    Grid scan over [min, max], then golden-section search around the best
    grid point.
    """
    x = np.asarray(samples, dtype=float)
    x = x[np.isfinite(x)]
    if x.size < min_samples:
        raise InsufficientSamplesError(f"{x.size} samples, need at least {min_samples}")
    h = silverman_bandwidth(x)
    if h == 0.0:
        return float(x[0])
    f = _kde(x, h)
    g = np.linspace(x.min(), x.max(), grid)
    dens = f(g)
    i = int(np.argmax(dens))
    if i == 0 or i == grid - 1:
        return float(g[i])
    res = minimize_scalar(lambda v: -f(v)[0], bracket=(g[i - 1], g[i], g[i + 1]),
                          method="golden", options={"xtol": 1e-10})
    return float(res.x)


@dataclass(frozen=True)
class ModePath:
    t: np.ndarray
    y: np.ndarray
    x_mode: np.ndarray
    bandwidth_rule: str = "silverman"
    source: str = ""

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("t", "y", "x_mode"))
            for row in zip(self.t, self.y, self.x_mode):
                w.writerow([repr(float(v)) for v in row])


def mode_path(ensemble: Ensemble, outcome: str = TIPPED, every: int = 1,
              min_samples: int = MIN_SAMPLES) -> ModePath:
    """KDE mode of the stored x-values at each stored time (absolute time).

    Times where fewer than ``min_samples`` paths of the chosen outcome are
    still finite (not yet diverged) are skipped.
    """
    if ensemble.paths is None:
        raise ConfigError("ensemble has no stored paths")
    sel = ensemble.paths[ensemble.outcomes == outcome]
    if sel.shape[0] < min_samples:
        raise InsufficientSamplesError(
            f"{sel.shape[0]} {outcome} paths, need at least {min_samples}")
    ts, ys, ms = [], [], []
    for k in range(0, sel.shape[1], every):
        col = sel[:, k]
        col = col[np.isfinite(col)]
        if col.size < min_samples:
            continue
        ts.append(ensemble.path_t[k])
        ys.append(ensemble.path_y[k])
        ms.append(kde_mode(col, min_samples))
    if not ts:
        raise InsufficientSamplesError("no time with enough finite paths")
    return ModePath(np.array(ts), np.array(ys), np.array(ms),
                    source=f"seed={ensemble.config.seed},outcome={outcome}")


def fd_bins(samples) -> np.ndarray:
    """Freedman-Diaconis edges: width 2 IQR n^(-1/3), B = ceil(range / width)
    equal bins over [min, max].  Quartiles by linear interpolation."""
    x = np.asarray(samples, dtype=float)
    if x.size < 4:
        raise InsufficientSamplesError("need at least 4 samples")
    q75, q25 = np.percentile(x, [75, 25])
    if q75 - q25 <= 0:
        raise DegenerateError("zero interquartile range")
    return np.histogram_bin_edges(x, bins="fd")


def relative_l2_error(d1, d2) -> float:
    d1 = np.asarray(d1, dtype=float)
    return float(np.linalg.norm(d1 - np.asarray(d2, dtype=float)) / np.linalg.norm(d1))


@dataclass
class TipDistribution:
    params: SystemParams
    samples: np.ndarray
    bin_edges: np.ndarray
    counts: np.ndarray
    expected_time: float
    converged: bool
    err: float
    ks_p: float
    N_total: int
    M_total: int
    rounds: int
    history: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "r": self.params.r,
            "sigma1": self.params.sigma1,
            "N_total": self.N_total,
            "M_total": self.M_total,
            "bins": self.bin_edges.tolist(),
            "counts": self.counts.tolist(),
            "mean_tau": self.expected_time,
            "err": self.err,
            "ks_p": self.ks_p,
            "converged": self.converged,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary())


def compare_replicates(t1, t2):
    """(Err, KS p-value, edges) for two equal-size replicates.

    B comes from the Freedman-Diaconis rule on the first replicate; both are
    then binned with B equal bins over their common range.
    """
    n_bins = fd_bins(t1).size - 1
    lo, hi = min(t1.min(), t2.min()), max(t1.max(), t2.max())
    edges = np.linspace(lo, hi, n_bins + 1)
    d1, _ = np.histogram(t1, edges)
    d2, _ = np.histogram(t2, edges)
    ks = sps.ks_2samp(t1, t2)
    return relative_l2_error(d1, d2), float(ks.pvalue), edges


def converge_tip_distribution(config: SimConfig, max_rounds: int = 6, err_tol: float = 0.1,
                              significance: float = 0.05, workers: int = 1,
                              log=None) -> TipDistribution:
    """Replicate-comparison loop on the first-passage times.

    Round 1 simulates two replicates of N realizations on disjoint streams.
    Each later round doubles N: the union of the previous two replicates
    becomes replicate 1 and a fresh set of streams replicate 2.  The loop
    stops once Err < ``err_tol`` and the two-sample KS test does not reject
    at ``significance``.
    """
    n = config.n_realizations
    next_stream = config.first_stream

    def fresh(count):
        nonlocal next_stream
        ens = run_ensemble(replace(config, n_realizations=count, first_stream=next_stream,
                                   store_paths=False), workers=workers)
        next_stream += count
        if ens.M == 0:
            raise NoEscapesError(f"no realization tipped out of {count}")
        return ens

    rep1 = fresh(n)
    history = []
    for rnd in range(1, max_rounds + 1):
        rep2 = fresh(rep1.N)
        t1, t2 = rep1.tip_times(), rep2.tip_times()
        err, ks_p, _ = compare_replicates(t1, t2)
        merged = rep1.merge(rep2)
        history.append({"round": rnd, "N": rep1.N, "M1": rep1.M, "M2": rep2.M,
                        "err": err, "ks_p": ks_p})
        if log is not None:
            log(history[-1])
        ok = err < err_tol and ks_p >= significance
        if ok or rnd == max_rounds:
            samples = merged.tip_times()
            edges = fd_bins(samples)
            counts, _ = np.histogram(samples, edges)
            result = TipDistribution(
                params=config.params, samples=samples, bin_edges=edges, counts=counts,
                expected_time=float(samples.mean()), converged=ok, err=err, ks_p=ks_p,
                N_total=merged.N, M_total=merged.M, rounds=rnd, history=history,
            )
            if not ok:
                raise NotConvergedError(
                    f"Err={err:.3g}, KS p={ks_p:.3g} after {rnd} rounds", result)
            return result
        rep1 = merged


@dataclass(frozen=True)
class TipTimeEstimate:
    params: SystemParams
    mean: float
    std_err: float
    M: int
    N: int


def estimate_tip_time(config: SimConfig, min_escapes: int = 200, max_realizations: int = 2_000_000,
                      chunk: int | None = None, workers: int = 1) -> TipTimeEstimate:
    """Mean first-passage time, simulating chunks until ``min_escapes`` tips."""
    chunk = chunk or config.n_realizations
    ens = None
    start = config.first_stream
    while ens is None or (ens.M < min_escapes and ens.N < max_realizations):
        part = run_ensemble(replace(config, n_realizations=chunk, first_stream=start,
                                    store_paths=False), workers=workers)
        start += chunk
        ens = part if ens is None else ens.merge(part)
        if ens.M:
            rate = ens.M / ens.N
            chunk = int(min(max(chunk, 1.1 * (min_escapes - ens.M) / rate),
                            max_realizations - ens.N)) or 1
    if ens.M < 2:
        raise NoEscapesError(f"{ens.M} tips in {ens.N} realizations")
    tt = ens.tip_times()
    return TipTimeEstimate(config.params, float(tt.mean()), float(tt.std(ddof=1) / np.sqrt(tt.size)),
                           ens.M, ens.N)


class KramersTime(NamedTuple):
    time: float
    exponent: float


def kramers_time(delta_v: float, sigma: float) -> KramersTime:
    """Arrhenius time exp(2 dV / sigma^2); ``time`` is inf on overflow."""
    if sigma <= 0:
        raise ConfigError("sigma must be positive")
    expo = 2.0 * delta_v / sigma ** 2
    with np.errstate(over="ignore"):
        return KramersTime(float(np.exp(expo)), float(expo))


def case_barriers() -> tuple[float, float]:
    """Barrier heights of the frozen systems at y = 0 and y = 3.

    V' = -f with f = (x + y)^2 - 1; the stable point is x = -1 - y and the
    barrier top x = 1 - y.
    """
    out = []
    for y in (0.0, 3.0):
        dv, _ = quad(lambda x: 1.0 - (x + y) ** 2, -1.0 - y, 1.0 - y)
        out.append(dv)
    return out[0], out[1]


CASE12_ACTION = 16.0 / 3.0


def case12_action(sigma1: float = 0.25, case: int = 1, half_span: float = 12.0,
                  dt: float = 0.005) -> float:
    """Normalised action of the instanton inside an invariant plane.

    The arc p = 2(1 - u^2)/sigma1^2 (u = x + y) is followed by integrating
    the full (x, p, y) field from near the stable point, then
    :func:`normalized_action` is applied to the samples.
    """
    params = SystemParams(1.0, sigma1)
    u0 = np.tanh(-half_span)
    z0 = np.array([u0, 2.0 * (1.0 - u0 ** 2) / sigma1 ** 2, 0.0])
    t = np.linspace(-half_span, half_span, int(round(2 * half_span / dt)) + 1)
    sol = solve_ivp(lambda s, z: mpp_field(z, params), (t[0], t[-1]), z0, method="DOP853",
                    rtol=1e-12, atol=1e-14, t_eval=t)
    z = sol.y.T
    if case == 2:
        z = symmetry_map(z)[::-1]
    elif case != 1:
        raise ConfigError("case must be 1 or 2")
    traj = Trajectory(t, z, params, kind="mpp", labels=("x", "p", "y"))
    return normalized_action(traj, params, label=f"case{case}").value


@dataclass(frozen=True)
class PowerLawFit:
    a: float
    b: float
    r_value: float
    residuals: np.ndarray
    data: np.ndarray

    def summary(self, r: float | None = None) -> dict:
        return {"r": r, "points": self.data.tolist(), "a": self.a, "b": self.b,
                "residual": float(np.sqrt(np.mean(self.residuals ** 2)))}


def power_law_fit(sigma1, tau) -> PowerLawFit:
    """Fit tau = a (1/sigma1^2)^b by least squares in log-log coordinates."""
    s = np.asarray(sigma1, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if s.size < 3 or s.size != tau.size:
        raise ConfigError("need at least three (sigma1, tau) pairs")
    if np.any(s <= 0) or np.any(tau <= 0):
        raise ConfigError("power-law data must be positive")
    if np.ptp(s) == 0:
        raise IllConditionedError("all sigma1 values are equal")
    lx, ly = np.log(1.0 / s ** 2), np.log(tau)
    fit = sps.linregress(lx, ly)
    resid = ly - (fit.intercept + fit.slope * lx)
    return PowerLawFit(float(np.exp(fit.intercept)), float(fit.slope), float(fit.rvalue),
                       resid, np.column_stack([s, tau]))
