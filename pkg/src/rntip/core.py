"""
Deterministic compactified ramp system.

The nonautonomous equation dx/dt = (x + y(t))^2 - 1 with the tanh ramp
y(t) = (3/2)(1 + tanh(3rt/2)) is made autonomous by treating y as a state
variable::

    dx/dt = (x + y)^2 - 1
    dy/dt = r y (3 - y)

States are plain arrays ordered ``(x, y)``.  The saddles sit at (-1, 0) and
(-2, 3); for r below the critical rate 4/3 a solution started at (-1, 0)
end-point tracks to the attractor (-4, 3), above it x blows up.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import expit

from .errors import ConfigError, NoBracketError

#: ramp rate at which the saddles (-1, 0) and (-2, 3) are connected
R_CRITICAL = 4.0 / 3.0
#: y value of the ramp at t = -10 for r = 1; every run starts here
Y_START = 2.80729e-13
#: x above this is treated as having tipped to infinity
X_MAX = 1.0e3
#: radius of the neighbourhood of (-4, 3) that counts as tracking
TRACK_RADIUS = 1.0e-3
ATTRACTOR = np.array([-4.0, 3.0])


@dataclass(frozen=True)
class SystemParams:
    """Ramp rate ``r`` and noise strength ``sigma1`` on x."""

    r: float
    sigma1: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.r) or self.r <= 0:
            raise ConfigError(f"ramp rate must be positive, got r={self.r}")
        if not np.isfinite(self.sigma1) or self.sigma1 < 0:
            raise ConfigError(f"noise strength must be >= 0, got sigma1={self.sigma1}")

    @property
    def deterministic(self) -> bool:
        return self.sigma1 == 0.0

    def to_dict(self) -> dict:
        return {"r": self.r, "sigma1": self.sigma1}


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped states, one row of ``states`` per entry of ``t``.

    ``labels`` names the state columns, e.g. ``("x", "y")`` or
    ``("x", "p", "y")``.
    """

    t: np.ndarray
    states: np.ndarray
    params: SystemParams
    kind: str = "deterministic"
    labels: tuple = ("x", "y")
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2 or states.shape[0] != t.size:
            raise ValueError("states must have one row per time sample")
        if states.shape[1] != len(self.labels):
            raise ValueError("one label per state column required")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        t.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "states", states)

    def __len__(self):
        return self.t.size

    def column(self, name: str) -> np.ndarray:
        return self.states[:, self.labels.index(name)]

    @property
    def x(self) -> np.ndarray:
        return self.column("x")

    @property
    def y(self) -> np.ndarray:
        return self.column("y")

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("t",) + tuple(self.labels))
            for ti, row in zip(self.t, self.states):
                writer.writerow([repr(float(ti))] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, params: SystemParams, kind: str = "deterministic") -> "Trajectory":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = np.array([[float(v) for v in row] for row in reader])
        return cls(rows[:, 0], rows[:, 1:], params, kind=kind, labels=tuple(header[1:]))


def ramp(t, r: float):
    """Ramp value (3/2)(1 + tanh(3rt/2)), written as 3*expit(3rt) so that
    the far-past tail keeps full relative precision."""
    if r <= 0:
        raise ConfigError("ramp rate must be positive")
    return 3.0 * expit(3.0 * r * np.asarray(t, dtype=float))


def ramp_time(y, r: float):
    """Inverse of :func:`ramp`: the time at which the ramp reaches ``y``."""
    y = np.asarray(y, dtype=float)
    return np.log(y / (3.0 - y)) / (3.0 * r)


def drift2(point, r: float) -> np.ndarray:
    """Vector field of the compactified system at ``point = (x, y)``."""
    x, y = point[0], point[1]
    return np.array([(x + y) ** 2 - 1.0, r * y * (3.0 - y)])


def frozen_equilibria(y):
    """(stable, unstable) x-equilibria of the system with y held fixed."""
    y = np.asarray(y, dtype=float)
    return -1.0 - y, 1.0 - y


def integrate_deterministic(
    start: Sequence[float],
    params: SystemParams,
    t_span=(0.0, 30.0),
    rtol: float = 1e-8,
    atol: float = 1e-10,
    max_step: float = np.inf,
    x_max: float = X_MAX,
    track_radius: float = TRACK_RADIUS,
    n_eval: int | None = None,
) -> Trajectory:
    """Integrate the compactified system with an embedded RK4(5) pair.

    ``atol`` applies to x.  y starts many orders of magnitude below any
    sensible absolute tolerance, so its tolerance is scaled by the start
    value; otherwise the ramp timing drifts.

    Stops at the end of ``t_span``, when x exceeds ``x_max`` or when the
    state comes within ``track_radius`` of (-4, 3).  The reason is stored in
    ``meta["event"]`` as ``"diverged"``, ``"tracked"`` or ``"span_end"``.
    """
    start = np.asarray(start, dtype=float)
    if start.shape != (2,):
        raise ConfigError("start must be a pair (x, y)")
    if not 0.0 <= start[1] <= 3.0:
        raise ConfigError("y must lie in [0, 3]")
    r = params.r

    def rhs(t, z):
        u = z[0] + z[1]
        return [u * u - 1.0, r * z[1] * (3.0 - z[1])]

    def diverged(t, z):
        return z[0] - x_max

    diverged.terminal = True
    diverged.direction = 1

    def arrived(t, z):
        return np.hypot(z[0] - ATTRACTOR[0], z[1] - ATTRACTOR[1]) - track_radius

    arrived.terminal = True
    arrived.direction = -1

    atol_y = atol * min(1.0, start[1]) if start[1] > 0 else atol
    t_eval = None
    if n_eval is not None:
        t_eval = np.linspace(t_span[0], t_span[1], n_eval)
    sol = solve_ivp(
        rhs, t_span, start, method="RK45", rtol=rtol, atol=[atol, atol_y],
        max_step=max_step, events=[diverged, arrived], t_eval=t_eval,
    )
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message}")
    t, z = sol.t, sol.y.T
    if sol.t_events[0].size:
        event = "diverged"
    elif sol.t_events[1].size:
        event = "tracked"
    else:
        event = "span_end"
    if event != "span_end" and t_eval is not None:
        # t_eval stops short of the terminal event; append the event state
        t_ev = sol.t_events[0 if event == "diverged" else 1][0]
        z_ev = sol.y_events[0 if event == "diverged" else 1][0]
        if t.size == 0 or t_ev > t[-1]:
            t = np.append(t, t_ev)
            z = np.vstack([z, z_ev])
    meta = {"event": event, "rtol": rtol, "atol": atol, "integrator": "RK45",
            "x_max": x_max, "track_radius": track_radius}
    return Trajectory(t, z, params, kind="deterministic", labels=("x", "y"), meta=meta)


def classify_deterministic(
    trajectory: Trajectory, x_max: float = X_MAX, track_radius: float = TRACK_RADIUS
) -> str:
    """``"tips"``, ``"tracks"`` or ``"indeterminate"`` (span too short)."""
    x, y = trajectory.final[0], trajectory.final[1]
    # event location is only accurate to the root finder's tolerance
    if x >= x_max * (1.0 - 1e-9):
        return "tips"
    if np.hypot(x - ATTRACTOR[0], y - ATTRACTOR[1]) <= track_radius * (1.0 + 1e-9):
        return "tracks"
    return "indeterminate"


@dataclass(frozen=True)
class CriticalRateResult:
    r_lo: float
    r_hi: float
    r_est: float
    iterations: int

    def to_json(self) -> str:
        return json.dumps(
            {"r_lo": self.r_lo, "r_hi": self.r_hi, "r_est": self.r_est,
             "iterations": self.iterations}
        )


def _outcome_at(r, start, t_span, rtol, atol):
    traj = integrate_deterministic(start, SystemParams(r), t_span=t_span, rtol=rtol, atol=atol)
    outcome = classify_deterministic(traj)
    if outcome == "indeterminate":
        raise NoBracketError(f"outcome at r={r} is indeterminate; lengthen t_span")
    return outcome


def find_critical_rate(
    interval=(1.0, 2.0),
    tol: float = 1e-3,
    start=(-1.0, Y_START),
    t_span=(0.0, 60.0),
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> CriticalRateResult:
    """Bisect on r between a tracking and a tipping endpoint.

    The returned bracket ``[r_lo, r_hi]`` has width at most ``tol`` and keeps
    the endpoint outcomes of ``interval`` (normally: r_lo tracks, r_hi tips).
    """
    lo, hi = map(float, interval)
    if not 0 < lo < hi:
        raise ConfigError("interval must satisfy 0 < lo < hi")
    f_lo = _outcome_at(lo, start, t_span, rtol, atol)
    f_hi = _outcome_at(hi, start, t_span, rtol, atol)
    if f_lo == f_hi:
        raise NoBracketError(f"both ends of [{lo}, {hi}] give '{f_lo}'")
    iterations = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _outcome_at(mid, start, t_span, rtol, atol) == f_lo:
            lo = mid
        else:
            hi = mid
        iterations += 1
    return CriticalRateResult(lo, hi, 0.5 * (lo + hi), iterations)
