"""
Euler-Maruyama Monte Carlo for dx = ((x + y)^2 - 1) dt + sigma1 dW.

The ramp value y carries no noise, so it is computed once per
configuration and shared by every realization.  A realization tips when it
crosses the deterministic stable manifold of (-2, 3) (the threshold curve)
and then runs off past ``x_max``.  Each realization draws its increments
from its own counter-based Philox stream keyed by ``(seed, stream_id)``, so
results do not depend on batching or on the number of workers.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numba
import numpy as np
from numpy.random import Generator, Philox, SeedSequence
from scipy.integrate import solve_ivp

from .core import X_MAX, Y_START, SystemParams
from .errors import ConfigError

TIPPED, TRACKED, INDETERMINATE = "tipped", "tracked", "indeterminate"
_OUTCOMES = (TIPPED, TRACKED, INDETERMINATE)


@dataclass(frozen=True)
class SimConfig:
    params: SystemParams
    t_span: tuple = (0.0, 30.0)
    dt: float = 1e-3
    x0: float = -1.0
    y0: float = Y_START
    seed: int = 0
    n_realizations: int = 1000
    #: keep every ``stride``-th sample of stored paths
    stride: int = 10
    x_max: float = X_MAX
    store_paths: bool = False
    #: stream id of the first realization; lets replicates use disjoint streams
    first_stream: int = 0
    #: "rk4" steps the ramp ODE with dt; "closed_form" uses the logistic solution
    y_mode: str = "rk4"

    def __post_init__(self):
        t0, tf = self.t_span
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not tf > t0:
            raise ConfigError("t_span must satisfy t_f > t_0")
        if self.n_realizations < 1:
            raise ConfigError("n_realizations must be >= 1")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if not 0.0 <= self.y0 <= 3.0:
            raise ConfigError("y0 must lie in [0, 3]")
        if self.seed < 0 or self.first_stream < 0:
            raise ConfigError("seed and stream ids must be non-negative")
        if self.y_mode not in ("rk4", "closed_form"):
            raise ConfigError(f"unknown y_mode {self.y_mode!r}")

    @property
    def n_steps(self) -> int:
        return int(round((self.t_span[1] - self.t_span[0]) / self.dt))

    def times(self) -> np.ndarray:
        return self.t_span[0] + self.dt * np.arange(self.n_steps + 1)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.to_dict()
        d["t_span"] = list(self.t_span)
        return d


def em_step(x, y, params: SystemParams, dt: float, dW):
    """One Euler-Maruyama step."""
    return x + ((x + y) ** 2 - 1.0) * dt + params.sigma1 * dW


def ramp_samples(y0: float, r: float, dt: float, n_steps: int, mode: str = "rk4") -> np.ndarray:
    """y on the time grid, from y(t0) = y0."""
    if mode == "closed_form":
        t = dt * np.arange(n_steps + 1)
        e = np.exp(3.0 * r * t)
        return 3.0 * y0 * e / (3.0 - y0 + y0 * e)
    return _ramp_rk4(float(y0), float(r), float(dt), int(n_steps))


@numba.njit(cache=True)
def _ramp_rk4(y0, r, dt, n):
    out = np.empty(n + 1)
    y = y0
    out[0] = y
    for i in range(n):
        k1 = r * y * (3.0 - y)
        k2 = r * (y + 0.5 * dt * k1) * (3.0 - y - 0.5 * dt * k1)
        k3 = r * (y + 0.5 * dt * k2) * (3.0 - y - 0.5 * dt * k2)
        k4 = r * (y + dt * k3) * (3.0 - y - dt * k3)
        y = y + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        out[i + 1] = y
    return out


@dataclass(frozen=True)
class ThresholdCurve:
    """Deterministic stable manifold of (-2, 3) as x_threshold(y).

    Below the lowest computed y the curve is continued by its end value,
    or by -inf when the backward orbit ran off to x = -inf (r > 4/3).
    """

    y: np.ndarray
    x: np.ndarray
    params: SystemParams
    below: float

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        out = np.interp(y, self.y, self.x)
        return np.where(y < self.y[0], self.below, out)


def threshold_curve(params: SystemParams, delta: float = 1e-6, y_min: float = 1e-15) -> ThresholdCurve:
    """Integrate backward from (-2 + delta*2/(3r + 2), 3 - delta), i.e. along
    the stable eigendirection (-2/(3r + 2), 1) of (-2, 3)."""
    r = params.r

    def rhs(t, z):
        u = z[0] + z[1]
        return [-(u * u - 1.0), -r * z[1] * (3.0 - z[1])]

    def bottom(t, z):
        return z[1] - y_min

    bottom.terminal = True

    def away(t, z):
        return abs(z[0]) - X_MAX

    away.terminal = True
    z0 = [-2.0 + delta * 2.0 / (3.0 * r + 2.0), 3.0 - delta]
    sol = solve_ivp(rhs, (0.0, 200.0 / r), z0, method="DOP853", rtol=1e-10, atol=1e-12,
                    events=[bottom, away], max_step=0.05)
    x, y = sol.y[0][::-1], sol.y[1][::-1]
    x = np.append(x, -2.0)
    y = np.append(y, 3.0)
    below = -np.inf if sol.t_events[1].size and x[0] < 0 else float(x[0])
    return ThresholdCurve(y, x, params, below)


@numba.njit(cache=True, nogil=True)
def _em_batch(z, yseq, xthr, x0, dt, sigma, x_max, stride, store):
    nb, nt = z.shape
    sq = np.sqrt(dt)
    tcross = np.full(nb, -1)
    diverged = np.zeros(nb, np.bool_)
    xf = np.empty(nb)
    n_keep = nt // stride + 1
    paths = np.full((nb if store else 0, n_keep), np.nan)
    for b in range(nb):
        x = x0
        if store:
            paths[b, 0] = x
        for n in range(nt):
            y = yseq[n]
            x = x + ((x + y) ** 2 - 1.0) * dt + sigma * (sq * z[b, n])
            if tcross[b] < 0 and x > xthr[n + 1]:
                tcross[b] = n + 1
            if store and (n + 1) % stride == 0:
                paths[b, (n + 1) // stride] = x
            if x > x_max:
                diverged[b] = True
                break
        xf[b] = x
    return tcross, diverged, xf, paths


def em_path(x0: float, y: np.ndarray, dW: np.ndarray, params: SystemParams, dt: float) -> np.ndarray:
    """Full Euler-Maruyama path for given ramp samples and Brownian increments."""
    return _em_path(float(x0), np.ascontiguousarray(y, dtype=float),
                    np.ascontiguousarray(dW, dtype=float), params.sigma1, float(dt))


@numba.njit(cache=True)
def _em_path(x0, y, dW, sigma, dt):
    out = np.empty(dW.size + 1)
    x = x0
    out[0] = x
    for n in range(dW.size):
        x = x + ((x + y[n]) ** 2 - 1.0) * dt + sigma * dW[n]
        out[n + 1] = x
    return out


def stream_normals(seed: int, stream_id: int, n: int) -> np.ndarray:
    """Standard normals of realization ``stream_id``."""
    return Generator(Philox(SeedSequence([seed, stream_id]))).standard_normal(n)


@dataclass
class Realization:
    stream_id: int
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    outcome: str
    first_passage_time: float | None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("t", "x", "y"))
            for row in zip(self.t, self.x, self.y):
                w.writerow([repr(float(v)) for v in row])


@dataclass
class Ensemble:
    """Outcomes of realizations ``stream_ids``, ordered by stream id."""

    config: SimConfig
    stream_ids: np.ndarray
    outcomes: np.ndarray
    t_cross: np.ndarray
    x_final: np.ndarray
    paths: np.ndarray | None = None
    path_t: np.ndarray | None = None
    path_y: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return int(self.stream_ids.size)

    @property
    def M(self) -> int:
        return int(np.sum(self.outcomes == TIPPED))

    @property
    def n_indeterminate(self) -> int:
        return int(np.sum(self.outcomes == INDETERMINATE))

    @property
    def p_tip(self) -> float:
        return self.M / self.N

    def tip_times(self) -> np.ndarray:
        return self.t_cross[self.outcomes == TIPPED]

    def mask(self, outcome: str) -> np.ndarray:
        return self.outcomes == outcome

    def realization(self, i: int) -> Realization:
        if self.paths is None:
            raise ValueError("paths were not stored; rerun with store_paths=True")
        tc = self.t_cross[i]
        return Realization(int(self.stream_ids[i]), self.path_t, self.paths[i], self.path_y,
                           str(self.outcomes[i]), None if np.isnan(tc) else float(tc))

    def merge(self, other: "Ensemble") -> "Ensemble":
        """Union of two ensembles with disjoint streams (paths are dropped)."""
        if set(self.stream_ids.tolist()) & set(other.stream_ids.tolist()):
            raise ValueError("ensembles share stream ids")
        ids = np.concatenate([self.stream_ids, other.stream_ids])
        order = np.argsort(ids, kind="stable")
        cat = lambda a, b: np.concatenate([a, b])[order]  # noqa: E731
        return Ensemble(self.config, ids[order], cat(self.outcomes, other.outcomes),
                        cat(self.t_cross, other.t_cross), cat(self.x_final, other.x_final))

    def summary(self) -> dict:
        return {
            "N": self.N,
            "M": self.M,
            "indeterminate": self.n_indeterminate,
            "p_tip": self.p_tip,
            "config": self.config.to_dict(),
            "seed": self.config.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary())

    def first_passage_csv(self, path) -> None:
        tipped = self.outcomes == TIPPED
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("stream_id", "t_cross"))
            for sid, tc in zip(self.stream_ids[tipped], self.t_cross[tipped]):
                w.writerow([int(sid), repr(float(tc))])


def _prepare(config: SimConfig):
    n = config.n_steps
    yseq = ramp_samples(config.y0, config.params.r, config.dt, n, config.y_mode)
    xthr = threshold_curve(config.params)(yseq)
    return yseq, xthr


def _classify(diverged, crossed, xf, y_final):
    out = np.full(diverged.size, INDETERMINATE, dtype="<U13")
    out[diverged & crossed] = TIPPED
    track = ~diverged & (np.abs(xf + 4.0) < 0.5) & (abs(y_final - 3.0) < 1e-3)
    out[track] = TRACKED
    return out


def run_ensemble(config: SimConfig, workers: int = 1, batch: int = 256) -> Ensemble:
    """Simulate ``config.n_realizations`` realizations starting at ``config.first_stream``.

    Batches may run on several threads (the kernel releases the GIL); they
    are merged in stream order so the result is independent of ``workers``.
    """
    n = config.n_steps
    yseq, xthr = _prepare(config)
    ids = np.arange(config.first_stream, config.first_stream + config.n_realizations)
    chunks = [ids[i:i + batch] for i in range(0, ids.size, batch)]
    sigma = config.params.sigma1

    def work(chunk):
        z = np.empty((chunk.size, n))
        for k, sid in enumerate(chunk):
            z[k] = stream_normals(config.seed, int(sid), n)
        return _em_batch(z, yseq, xthr, config.x0, config.dt, sigma, config.x_max,
                         config.stride, config.store_paths)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]

    tc_idx = np.concatenate([p[0] for p in parts])
    diverged = np.concatenate([p[1] for p in parts])
    xf = np.concatenate([p[2] for p in parts])
    crossed = tc_idx >= 0
    t_cross = np.where(crossed, config.t_span[0] + tc_idx * config.dt, np.nan)
    outcomes = _classify(diverged, crossed, xf, yseq[-1])
    ens = Ensemble(config, ids, outcomes, t_cross, xf,
                   meta={"threshold_at_start": float(xthr[0])})
    if config.store_paths:
        ens.paths = np.concatenate([p[3] for p in parts])
        ens.path_t = config.times()[::config.stride]
        ens.path_y = yseq[::config.stride]
    return ens


def simulate_realization(config: SimConfig, stream_id: int) -> Realization:
    """Single realization on stream ``stream_id``; samples are strided."""
    one = SimConfig(**{**config.__dict__, "n_realizations": 1, "first_stream": stream_id,
                       "store_paths": True})
    ens = run_ensemble(one)
    return ens.realization(0)
