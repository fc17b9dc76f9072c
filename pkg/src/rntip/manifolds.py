"""
Invariant manifolds of the saddles and the tipping heteroclinic.

W^u(S1) is traced by seeding points on a small quarter circle of its linear
(unstable) subspace and shooting each one forward until it first meets the
plane y = -x.  W^s(S2) is the image of W^u(S1) under :func:`symmetry_map`
combined with time reversal; it can also be shot backward from the stable
subspace of S2 as an independent check.  The two section curves cross at
y = 3/2 and the orbit through the crossing point connects S1 to S2.

Seeds are parameterised by ``theta`` in [0, 1], the fraction of the quarter
arc: theta = 0 is the direction inside the invariant plane (y = 0 for S1,
y = 3 for S2, p > 0) and theta = 1 the direction inside p = 0.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq, root

from .core import R_CRITICAL, X_MAX, SystemParams, Trajectory
from .errors import (
    ConfigError,
    DegenerateError,
    MultipleIntersectionsError,
    NoIntersectionError,
    NumericalError,
    SupercriticalError,
)
from .mpp import S1, S2, ActionValue, linearize_saddle, mpp_field, normalized_action, symmetry_map

SEED_RADIUS = 1e-3
SEED_COUNT = 64
MAX_GAP = 0.01
# tight tolerances: shooting near saddles amplifies local error
RTOL = 1e-11
ATOL = 1e-13


def _check_subcritical(params: SystemParams):
    if params.r > R_CRITICAL * (1.0 + 1e-12):
        raise SupercriticalError(
            f"r = {params.r} exceeds the critical rate 4/3; no connecting orbit is guaranteed"
        )


def _arc_basis(saddle: str, params: SystemParams):
    """Unit directions (plane-limb, p=0-limb) of the quarter arc at a saddle."""
    if saddle == "S1":
        info = linearize_saddle(S1, params)
        lam, vec = info.subspace("unstable")
    elif saddle == "S2":
        info = linearize_saddle(S2, params)
        lam, vec = info.subspace("stable")
    else:
        raise ConfigError(f"unknown saddle {saddle!r}")
    # the eigenvector with a p-component is the invariant-plane limb
    i_plane = int(np.argmax(np.abs(vec[1])))
    a = vec[:, i_plane].copy()
    b = vec[:, 1 - i_plane].copy()
    a *= np.sign(a[1])  # p > 0
    b *= np.sign(b[2]) if saddle == "S1" else -np.sign(b[2])  # into 0 < y < 3
    a /= np.linalg.norm(a)
    b /= np.linalg.norm(b)
    return info.location, a, b


@dataclass(frozen=True)
class SeedCurve:
    """Points on a quarter circle of radius ``radius`` in a saddle's linear subspace."""

    points: np.ndarray
    thetas: np.ndarray
    radius: float
    saddle: str
    params: SystemParams

    @property
    def count(self) -> int:
        return len(self.thetas)

    def plane_residual(self) -> np.ndarray:
        """Residual of the span-plane equation 4(x+1) - sigma1^2 p + 8y/(3r+2) = 0.

        Only meaningful for seeds at S1; the plane contains both unstable
        eigenvectors.
        """
        s2, r = self.params.sigma1 ** 2, self.params.r
        x, p, y = self.points.T
        return 4.0 * (x + 1.0) - s2 * p + 8.0 * y / (3.0 * r + 2.0)

    def sphere_residual(self) -> np.ndarray:
        centre = S1 if self.saddle == "S1" else S2
        return np.sum((self.points - centre) ** 2, axis=1) - self.radius ** 2


def seed_points(thetas, params: SystemParams, radius: float = SEED_RADIUS, saddle: str = "S1"):
    centre, a, b = _arc_basis(saddle, params)
    e2 = b - (b @ a) * a
    e2 /= np.linalg.norm(e2)
    phi_max = np.arccos(np.clip(a @ b, -1.0, 1.0))
    phi = np.asarray(thetas, dtype=float)[:, None] * phi_max
    pts = centre + radius * (np.cos(phi) * a + np.sin(phi) * e2)
    # pin the limbs exactly onto their invariant planes
    th = np.asarray(thetas)
    pts[th == 0.0, 2] = centre[2]
    pts[th == 1.0, 1] = 0.0
    return pts


def seed_unstable(params: SystemParams, radius: float = SEED_RADIUS, count: int = SEED_COUNT) -> SeedCurve:
    """``count`` seeds evenly spaced in angle on the arc of W^u(S1)'s tangent plane."""
    if not 1e-4 <= radius <= 1e-2:
        raise ConfigError("seed radius must lie in [1e-4, 1e-2]")
    if count < 2:
        raise ConfigError("need at least two seeds")
    thetas = np.linspace(0.0, 1.0, count)
    return SeedCurve(seed_points(thetas, params, radius, "S1"), thetas, radius, "S1", params)


def seed_stable(params: SystemParams, radius: float = SEED_RADIUS, count: int = SEED_COUNT) -> SeedCurve:
    if not 1e-4 <= radius <= 1e-2:
        raise ConfigError("seed radius must lie in [1e-4, 1e-2]")
    thetas = np.linspace(0.0, 1.0, count)
    return SeedCurve(seed_points(thetas, params, radius, "S2"), thetas, radius, "S2", params)


@dataclass
class Shot:
    """Outcome of one shot: ``status`` is ``"crossed"``, ``"escaped"`` or ``"timeout"``."""

    status: str
    hit: np.ndarray | None
    t_hit: float | None
    solution: object = None

    @property
    def crossed(self) -> bool:
        return self.status == "crossed"


def shoot_to_section(
    seed,
    params: SystemParams,
    direction: str = "forward",
    t_max: float = 200.0,
    x_max: float = X_MAX,
    p_max: float = 1e6,
    rtol: float = RTOL,
    atol: float = ATOL,
    dense_output: bool = False,
) -> Shot:
    """Integrate from ``seed`` until the orbit first meets the plane x + y = 0."""
    seed = np.asarray(seed, dtype=float)
    sign = {"forward": 1.0, "backward": -1.0}[direction]
    g0 = seed[0] + seed[2]

    def rhs(t, z):
        return mpp_field(z, params)

    def section(t, z):
        return z[0] + z[2]

    section.terminal = True
    # approach the plane from the seed's side; solve_ivp reads the direction
    # in integration order, so no time-sign flip here
    section.direction = 1.0 if g0 < 0 else -1.0

    def escape(t, z):
        return min(x_max - abs(z[0]), p_max - abs(z[1]))

    escape.terminal = True

    sol = solve_ivp(
        rhs, (0.0, sign * t_max), seed, method="DOP853", rtol=rtol, atol=atol,
        events=[section, escape], dense_output=dense_output,
    )
    if sol.t_events[0].size:
        hit = sol.y_events[0][0].copy()
        t_hit = float(sol.t_events[0][0])
        # polish on the dense output if the event root is loose
        if abs(hit[0] + hit[2]) > 1e-10 and sol.sol is not None:
            t_lo, t_hi = sorted((sol.t[-2], t_hit))
            t_hit = brentq(lambda t: section(t, sol.sol(t)), t_lo, t_hi, xtol=1e-15)
            hit = sol.sol(t_hit)
        return Shot("crossed", hit, t_hit, sol)
    if sol.t_events[1].size:
        return Shot("escaped", None, None, sol)
    return Shot("timeout", None, None, sol)


class ManifoldShooter:
    """Maps a seed angle ``theta`` to the first hit of a manifold on y = -x.

    ``source="unstable"`` shoots W^u(S1) forward.  ``source="stable"`` gives
    W^s(S2): either the symmetry image of the unstable shot
    (``method="symmetry"``) or a backward shot from S2's stable subspace
    (``method="shooting"``).
    """

    def __init__(self, params: SystemParams, source: str = "unstable", method: str = "symmetry",
                 radius: float = SEED_RADIUS, rtol: float = RTOL, atol: float = ATOL):
        if source not in ("unstable", "stable"):
            raise ConfigError(f"unknown manifold {source!r}")
        if method not in ("symmetry", "shooting"):
            raise ConfigError(f"unknown method {method!r}")
        self.params = params
        self.source = source
        self.method = method
        self.radius = radius
        self.rtol = rtol
        self.atol = atol
        self.n_shots = 0

    def __call__(self, theta: float) -> np.ndarray | None:
        self.n_shots += 1
        th = np.array([theta])
        if self.source == "unstable" or self.method == "symmetry":
            seed = seed_points(th, self.params, self.radius, "S1")[0]
            shot = shoot_to_section(seed, self.params, "forward", rtol=self.rtol, atol=self.atol)
            if not shot.crossed:
                return None
            return shot.hit if self.source == "unstable" else symmetry_map(shot.hit)
        seed = seed_points(th, self.params, self.radius, "S2")[0]
        shot = shoot_to_section(seed, self.params, "backward", rtol=self.rtol, atol=self.atol)
        return shot.hit if shot.crossed else None


@dataclass
class SectionCurve:
    """Ordered hits of a manifold on the section plane y = -x.

    ``points`` holds the full (x, p, y) states; the section is
    parameterised by (y, p).  Seeds whose orbit never reached the plane are
    dropped from ``points`` and counted in ``n_no_crossing``.
    """

    thetas: np.ndarray
    points: np.ndarray
    source: str
    params: SystemParams
    n_seeds: int
    n_no_crossing: int
    shooter: Callable | None = field(default=None, repr=False)

    @property
    def momentum_scale(self) -> float:
        """Gaps are measured in (y, sigma1^2 p); the section geometry is
        sigma1-independent in these coordinates."""
        return self.params.sigma1 ** 2 if self.params.sigma1 > 0 else 1.0

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 2]

    @property
    def p(self) -> np.ndarray:
        return self.points[:, 1]

    @property
    def no_crossing_fraction(self) -> float:
        return self.n_no_crossing / self.n_seeds

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("y", "p", "x"))
            for x, p, y in self.points:
                writer.writerow([repr(float(y)), repr(float(p)), repr(float(x))])

    def primary_branch(self, jump: float = 0.1) -> np.ndarray:
        """Indices of the connected piece that starts at the invariant-plane
        limb (theta = 0) and along which y is monotone."""
        if len(self.points) == 0 or self.thetas[0] != 0.0:
            return np.array([], dtype=int)
        yp = self.points[:, [2, 1]] * [1.0, self.momentum_scale]
        gaps = np.linalg.norm(np.diff(yp, axis=0), axis=1)
        n = len(self.points)
        for i, g in enumerate(gaps):
            if g > jump:
                n = i + 1
                break
        dy = np.diff(self.y[:n])
        sgn = np.sign(dy[0]) if dy.size else 0.0
        for i, d in enumerate(dy):
            if np.sign(d) != sgn:
                n = i + 1
                break
        return np.arange(n)


def _build_curve(shooter: ManifoldShooter, count: int, max_gap: float,
                 min_dtheta: float = 1e-10, max_points: int = 20000) -> SectionCurve:
    scale = shooter.params.sigma1 ** 2 if shooter.params.sigma1 > 0 else 1.0
    hits = {}
    for th in np.linspace(0.0, 1.0, count):
        hits[float(th)] = shooter(th)
    n_seeds = count
    while len(hits) < max_points:
        thetas = sorted(hits)
        new = []
        for a, b in zip(thetas[:-1], thetas[1:]):
            if b - a <= min_dtheta:
                continue
            ha, hb = hits[a], hits[b]
            if ha is None and hb is None:
                continue
            if ha is None or hb is None:
                new.append(0.5 * (a + b))
            elif np.hypot(ha[2] - hb[2], scale * (ha[1] - hb[1])) > max_gap:
                new.append(0.5 * (a + b))
        if not new:
            break
        for th in new[: max_points - len(hits)]:
            hits[th] = shooter(th)
        n_seeds += len(new)
    thetas = np.array(sorted(hits))
    keep = np.array([hits[t] is not None for t in thetas])
    points = np.array([hits[t] for t in thetas if hits[t] is not None]).reshape(-1, 3)
    return SectionCurve(
        thetas=thetas[keep],
        points=points,
        source=shooter.source,
        params=shooter.params,
        n_seeds=len(thetas),
        n_no_crossing=int(np.sum(~keep)),
        shooter=shooter,
    )


def section_curve_unstable(params: SystemParams, radius: float = SEED_RADIUS,
                           count: int = SEED_COUNT, max_gap: float = MAX_GAP) -> SectionCurve:
    """First hits of W^u(S1) on y = -x, refined until neighbours are within ``max_gap``."""
    _check_subcritical(params)
    linearize_saddle(S1, params)  # raises on 3r = 2
    return _build_curve(ManifoldShooter(params, "unstable", radius=radius), count, max_gap)


def section_curve_stable(params: SystemParams, radius: float = SEED_RADIUS,
                         count: int = SEED_COUNT, max_gap: float = MAX_GAP,
                         method: str = "symmetry", unstable: SectionCurve | None = None) -> SectionCurve:
    """First hits of W^s(S2) on y = -x (backward in time).

    With ``method="symmetry"`` an already computed unstable curve is mapped
    over directly.
    """
    _check_subcritical(params)
    linearize_saddle(S2, params)
    shooter = ManifoldShooter(params, "stable", method=method, radius=radius)
    if method == "symmetry" and unstable is not None:
        return SectionCurve(
            thetas=unstable.thetas.copy(),
            points=symmetry_map(unstable.points),
            source="stable",
            params=params,
            n_seeds=unstable.n_seeds,
            n_no_crossing=unstable.n_no_crossing,
            shooter=shooter,
        )
    return _build_curve(shooter, count, max_gap)


@dataclass(frozen=True)
class Intersection:
    point: np.ndarray
    theta_unstable: float
    theta_stable: float
    #: (y, p) mismatch of the two shots at the solution
    residual: float

    @property
    def y(self) -> float:
        return float(self.point[2])

    @property
    def p(self) -> float:
        return float(self.point[1])


def _branch_interp(curve: SectionCurve):
    idx = curve.primary_branch()
    if idx.size < 2:
        raise NoIntersectionError(f"{curve.source} curve has no usable primary branch")
    y, p, th = curve.y[idx], curve.p[idx], curve.thetas[idx]
    order = np.argsort(y)
    y, p, th = y[order], p[order], th[order]
    keep = np.concatenate([[True], np.diff(y) > 0])
    y, p, th = y[keep], p[keep], th[keep]
    return PchipInterpolator(y, p), PchipInterpolator(y, th), (y[0], y[-1]), idx


def find_intersection(curve_u: SectionCurve, curve_s: SectionCurve, refine: bool = True,
                      endpoint_tol: float = 1e-6, n_grid: int = 4001) -> Intersection:
    """Locate the unique crossing of the primary branches of the two curves.

    Interpolants of p(y) on each branch give a first estimate by bracketing
    the sign change of their difference.  With ``refine`` the estimate is
    polished by solving hit_u(theta_u) = hit_s(theta_s) directly on the shots.
    """
    pu, thu, (ulo, uhi), iu = _branch_interp(curve_u)
    ps, ths, (slo, shi), is_ = _branch_interp(curve_s)
    lo, hi = max(ulo, slo), min(uhi, shi)

    # branches that only touch at an end (r = 4/3: both meet on p = 0)
    ends_u = curve_u.points[iu[[0, -1]]]
    ends_s = curve_s.points[is_[[0, -1]]]
    for a in ends_u:
        for b in ends_s:
            if np.hypot(a[2] - b[2], a[1] - b[1]) < endpoint_tol:
                if hi - lo < endpoint_tol:
                    point = 0.5 * (a + b)
                    return Intersection(point, float(thu(a[2])), float(ths(b[2])),
                                        float(np.hypot(a[2] - b[2], a[1] - b[1])))

    if hi <= lo:
        raise NoIntersectionError("section curves do not overlap in y")
    grid = np.linspace(lo, hi, n_grid)
    gap = pu(grid) - ps(grid)
    roots = []
    for i in np.nonzero(np.sign(gap[:-1]) * np.sign(gap[1:]) <= 0)[0]:
        if gap[i] == 0.0:
            y0 = grid[i]
        elif gap[i + 1] == 0.0:
            continue
        else:
            y0 = brentq(lambda y: pu(y) - ps(y), grid[i], grid[i + 1], xtol=1e-14)
        if not roots or abs(y0 - roots[-1]) > 1e-9:
            roots.append(y0)
    if not roots:
        raise NoIntersectionError("no sign change of the p-gap between the curves")
    if len(roots) > 1:
        raise MultipleIntersectionsError(f"curves cross at y = {roots}")
    y0 = roots[0]
    t_u, t_s = float(thu(y0)), float(ths(y0))
    point = np.array([-y0, float(pu(y0)), y0])
    if not refine or curve_u.shooter is None or curve_s.shooter is None:
        return Intersection(point, t_u, t_s, float("nan"))

    def mismatch(th):
        a = curve_u.shooter(float(np.clip(th[0], 0.0, 1.0)))
        b = curve_s.shooter(float(np.clip(th[1], 0.0, 1.0)))
        if a is None or b is None:
            return np.array([1e3, 1e3])
        return np.array([a[2] - b[2], a[1] - b[1]])

    sol = root(mismatch, [t_u, t_s], method="hybr", options={"xtol": 1e-14})
    res = float(np.max(np.abs(mismatch(sol.x))))
    if not sol.success and res > 1e-9:
        raise NumericalError(f"intersection refinement failed: {sol.message}")
    hit = curve_u.shooter(float(sol.x[0]))
    return Intersection(np.asarray(hit), float(sol.x[0]), float(sol.x[1]), res)


@dataclass
class HeteroclinicOrbit:
    """Orbit from S1 to S2 through the section crossing (t = 0 at the crossing)."""

    trajectory: Trajectory
    intersection_point: np.ndarray
    action: ActionValue
    intersection: Intersection | None = None
    curves: tuple = ()

    @property
    def params(self) -> SystemParams:
        return self.trajectory.params

    def xy_projection(self):
        """(y, x) of the orbit, ordered by increasing y."""
        y, x = self.trajectory.y, self.trajectory.x
        order = np.argsort(y)
        return y[order], x[order]

    def x_at(self, y):
        yy, xx = self.xy_projection()
        return np.interp(y, yy, xx)

    def to_csv(self, path) -> None:
        self.trajectory.to_csv(path)

    def summary(self) -> dict:
        return {
            "r": self.params.r,
            "sigma1": self.params.sigma1,
            "y_star": float(self.intersection_point[2]),
            "p_star": float(self.intersection_point[1]),
            "action": self.action.value,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary())


def _half_orbit(z0, params, direction, saddle_pt, saddle_info, sample_dt,
                switch_radius, tail_radius, t_max, rtol, atol):
    sign = 1.0 if direction == "forward" else -1.0

    def rhs(t, z):
        return mpp_field(z, params)

    def near(t, z):
        return np.linalg.norm(z - saddle_pt) - switch_radius

    near.terminal = True
    near.direction = -1
    sol = solve_ivp(rhs, (0.0, sign * t_max), z0, method="DOP853", rtol=rtol, atol=atol,
                    events=[near], dense_output=True)
    if not sol.t_events[0].size:
        dmin = np.min(np.linalg.norm(sol.y.T - saddle_pt, axis=1))
        raise NumericalError(
            f"{direction} half-orbit came no closer than {dmin:.3g} to its saddle"
        )
    t_end = float(sol.t_events[0][0])
    n = max(int(np.ceil(abs(t_end) / sample_dt)), 2)
    ts = np.linspace(0.0, t_end, n + 1)
    zs = sol.sol(ts).T

    # continue analytically along the approach eigendirections
    lam, vec = saddle_info.eigenvalues, saddle_info.eigenvectors
    coeff = np.linalg.solve(vec, zs[-1] - saddle_pt)
    keep = lam * sign < 0
    dropped = float(np.linalg.norm(vec[:, ~keep] @ coeff[~keep]))
    lam_k, vec_k, c_k = lam[keep], vec[:, keep], coeff[keep]
    taus, tail = [], []
    k = 1
    while True:
        tau = sign * k * sample_dt
        z = saddle_pt + vec_k @ (c_k * np.exp(lam_k * tau))
        taus.append(t_end + tau)
        tail.append(z)
        if np.linalg.norm(z - saddle_pt) < tail_radius:
            break
        k += 1
    ts = np.concatenate([ts, taus])
    zs = np.vstack([zs, tail])
    return ts, zs, dropped


def heteroclinic(
    params: SystemParams,
    radius: float = SEED_RADIUS,
    count: int = SEED_COUNT,
    max_gap: float = MAX_GAP,
    method: str = "symmetry",
    sample_dt: float = 0.005,
    switch_radius: float = 1e-4,
    tail_radius: float = 1e-9,
    t_max: float = 100.0,
) -> HeteroclinicOrbit:
    """Build the S1 -> S2 connecting orbit and its normalised action.

    Each half is integrated from the crossing point until it is within
    ``switch_radius`` of its saddle and is then continued along the linear
    eigen-solution down to ``tail_radius``; the action tail beyond that is
    exponentially small.
    """
    _check_subcritical(params)
    if params.sigma1 <= 0:
        raise ConfigError("the connecting orbit needs sigma1 > 0")
    cu = section_curve_unstable(params, radius, count, max_gap)
    cs = section_curve_stable(params, radius, count, max_gap, method=method, unstable=cu)
    inter = find_intersection(cu, cs)
    z0 = inter.point
    info1 = linearize_saddle(S1, params)
    info2 = linearize_saddle(S2, params)
    tb, zb, drop_b = _half_orbit(z0, params, "backward", S1, info1, sample_dt,
                                 switch_radius, tail_radius, t_max, RTOL, ATOL)
    tf, zf, drop_f = _half_orbit(z0, params, "forward", S2, info2, sample_dt,
                                 switch_radius, tail_radius, t_max, RTOL, ATOL)
    t = np.concatenate([tb[::-1], tf[1:]])
    z = np.vstack([zb[::-1], zf[1:]])
    meta = {"integrator": "DOP853", "rtol": RTOL, "atol": ATOL, "sample_dt": sample_dt,
            "switch_radius": switch_radius, "tail_radius": tail_radius,
            "dropped_component": max(drop_b, drop_f)}
    traj = Trajectory(t, z, params, kind="mpp", labels=("x", "p", "y"), meta=meta)
    action = normalized_action(traj, params, label="case3")
    return HeteroclinicOrbit(traj, z0, action, inter, (cu, cs))
