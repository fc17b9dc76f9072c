import json

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from rntip.core import R_CRITICAL, SystemParams, drift2
from rntip.errors import (
    ConfigError,
    DegenerateError,
    MultipleIntersectionsError,
    NoIntersectionError,
    SupercriticalError,
)
from rntip.manifolds import (
    SectionCurve,
    find_intersection,
    heteroclinic,
    section_curve_stable,
    section_curve_unstable,
    seed_unstable,
    shoot_to_section,
)
from rntip.mpp import S1, S2, fw_action, invariant_plane_hamiltonian, symmetry_map


def test_seed_endpoints():
    params = SystemParams(1.0, 0.15)
    seeds = seed_unstable(params, 1e-3, 2)
    a, b = seeds.points
    assert a[2] == 0.0 and a[1] > 0
    assert b[1] == 0.0 and b[2] > 0
    for pt, direction in ((a, [0.005625, 1, 0]), (b, [-0.4, 0, 1])):
        d = pt - S1
        assert np.linalg.norm(d) == pytest.approx(1e-3, rel=1e-12)
        u = np.asarray(direction) / np.linalg.norm(direction)
        assert np.allclose(d / 1e-3, u, atol=1e-12)


def test_seed_residuals():
    seeds = seed_unstable(SystemParams(0.8, 0.3), 2e-3, 50)
    assert np.max(np.abs(seeds.plane_residual())) < 1e-12
    assert np.max(np.abs(seeds.sphere_residual())) < 1e-12
    assert np.all(seeds.points[:, 1] >= 0) and np.all(seeds.points[:, 2] >= 0)


def test_printed_plane_does_not_contain_eigenvector():
    # the span plane is 4(x+1) - s^2 p + 8y/(3r+2) = 0; the alternative
    # 4(x+1) - (s^2+4)p - 12ry/(3r+2) = 0 misses the eigenvector (s^2/4, 1, 0)
    s2, r = 0.15 ** 2, 1.0
    v = np.array([s2 / 4, 1.0, 0.0])
    assert abs(4 * v[0] - s2 * v[1] + 8 * v[2] / (3 * r + 2)) < 1e-15
    assert abs(4 * v[0] - (s2 + 4) * v[1] - 12 * r * v[2] / (3 * r + 2)) > 1.0


def test_seed_errors():
    with pytest.raises(DegenerateError):
        seed_unstable(SystemParams(2 / 3, 0.2))
    with pytest.raises(ConfigError):
        seed_unstable(SystemParams(1.0, 0.2), radius=0.1)
    with pytest.raises(ConfigError):
        seed_unstable(SystemParams(1.0, 0.2), count=1)


def test_shot_from_y0_limb_hits_origin_on_level_set():
    params = SystemParams(1.0, 0.25)
    seed = seed_unstable(params, 1e-3, 2).points[0]
    shot = shoot_to_section(seed, params)
    assert shot.crossed
    x, p, y = shot.hit
    assert y == 0.0 and abs(x) < 1e-10
    # [DERIVED] Hamiltonian conservation: -p + s^2 p^2 / 2 = h(seed), larger root
    h0 = invariant_plane_hamiltonian(seed, params)
    s2 = params.sigma1 ** 2
    assert p == pytest.approx((1 + np.sqrt(1 + 2 * s2 * h0)) / s2, rel=1e-9)


@pytest.mark.parametrize("r", [1.0, 1.1])
def test_shot_from_p0_limb_matches_planar_integration(r):
    # the deterministic limb does reach y = -x for these r; oracle: the planar system
    params = SystemParams(r, 0.25)
    seed = seed_unstable(params, 1e-3, 2).points[1]
    shot = shoot_to_section(seed, params)
    assert shot.crossed and shot.hit[1] == 0.0

    def ev(t, z):
        return z[0] + z[1]

    ev.terminal, ev.direction = True, 1
    sol = solve_ivp(lambda t, z: drift2(z, r), (0, 100), seed[[0, 2]], method="LSODA",
                    rtol=1e-12, atol=1e-14, events=ev)
    assert shot.hit[2] == pytest.approx(sol.y_events[0][0][1], abs=1e-7)


def test_section_curve_unstable_r1():
    params = SystemParams(1.0, 0.25)
    cu = section_curve_unstable(params)
    assert np.max(np.abs(cu.points[:, 0] + cu.points[:, 2])) < 1e-10
    idx = cu.primary_branch()
    y, p = cu.y[idx], cu.p[idx]
    assert y[0] == 0.0 and y[-1] > 1.5
    assert np.all(np.diff(y) > 0)
    gaps = np.hypot(np.diff(y), params.sigma1 ** 2 * np.diff(p))
    assert gaps.max() < 0.01
    assert cu.no_crossing_fraction == 0.0


def test_section_curve_near_critical_reaches_midline():
    cu = section_curve_unstable(SystemParams(R_CRITICAL - 1e-3, 0.25))
    assert cu.y[cu.primary_branch()].max() > 1.5


def test_stable_curve_symmetry_vs_shooting():
    params = SystemParams(1.0, 0.25)
    cu = section_curve_unstable(params, count=17, max_gap=10.0)
    by_sym = section_curve_stable(params, method="symmetry", unstable=cu)
    by_shot = section_curve_stable(params, count=17, max_gap=10.0, method="shooting")
    assert np.array_equal(by_sym.thetas, by_shot.thetas)
    assert np.max(np.abs(by_sym.points - by_shot.points)) < 1e-6
    assert np.max(np.abs(by_sym.points[:, 0] + by_sym.points[:, 2])) < 1e-10


def _synthetic(y, p, source):
    pts = np.column_stack([-y, p, y])
    return SectionCurve(np.linspace(0, 1, y.size), pts, source, SystemParams(1.0, 1.0), y.size, 0)


def test_find_intersection_synthetic():
    y = np.linspace(0, 2, 201)
    cu = _synthetic(y, 3 - y, "unstable")
    ys = np.linspace(3, 1, 201)
    assert find_intersection(cu, _synthetic(ys, ys, "stable"), refine=False).y == pytest.approx(1.5)
    with pytest.raises(MultipleIntersectionsError):
        find_intersection(cu, _synthetic(ys, 3 - ys + 0.001 * np.sin(20 * ys), "stable"), refine=False)
    with pytest.raises(NoIntersectionError):
        find_intersection(cu, _synthetic(ys, 5 + ys, "stable"), refine=False)


@pytest.mark.parametrize("r", [1.0, 0.5])
def test_intersection_on_midline(r, het_cache):
    het = het_cache(r, 0.25)
    assert abs(het.intersection_point[2] - 1.5) < 1e-6
    assert abs(het.intersection_point[0] + 1.5) < 1e-6


def test_intersection_at_critical_rate():
    het = heteroclinic(SystemParams(R_CRITICAL, 0.25))
    assert het.intersection_point[1] < 1e-3
    assert het.action.value < 1e-4


def test_supercritical():
    with pytest.raises(SupercriticalError):
        heteroclinic(SystemParams(1.5, 0.25))
    with pytest.raises(SupercriticalError):
        section_curve_unstable(SystemParams(1.4, 0.25))


def test_heteroclinic_invariants(het_r1):
    z = het_r1.trajectory.states
    assert np.linalg.norm(z[0] - S1) < 1e-6
    assert np.linalg.norm(z[-1] - S2) < 1e-6
    assert np.all(z[1:-1, 1] > 0)


def test_heteroclinic_symmetry(het_r1):
    # orbit is mapped onto itself by the involution with t -> -t
    t, z = het_r1.trajectory.t, het_r1.trajectory.states
    spline = CubicSpline(t, z)
    tt = np.linspace(-8, 8, 801)
    assert np.max(np.abs(symmetry_map(spline(-tt)) - spline(tt))) < 1e-5


def test_heteroclinic_radius_robust(het_r1):
    half = heteroclinic(SystemParams(1.0, 0.25), radius=5e-4)
    assert np.max(np.abs(half.intersection_point - het_r1.intersection_point)) < 1e-5


def test_action_decreases_with_r(het_cache):
    acts = [het_cache(r, 0.25).action.value for r in (0.5, 0.75, 1.0, 1.1)]
    assert np.all(np.diff(acts) < 0)


def test_fw_action_on_heteroclinic(het_cache):
    # [DERIVED] 0.054 / 0.15^2 = 2.4; consistency with the normalised action
    het = het_cache(1.0, 0.15)
    tr = het.trajectory
    fw = fw_action(tr.t, tr.x, tr.y, het.params)
    assert fw * 0.15 ** 2 == pytest.approx(het.action.value, rel=1e-3)
    assert fw == pytest.approx(2.4, rel=0.05)


def test_exports(het_r1, tmp_path):
    het_r1.to_csv(tmp_path / "orbit.csv")
    assert (tmp_path / "orbit.csv").read_text().splitlines()[0] == "t,x,p,y"
    het_r1.curves[0].to_csv(tmp_path / "sec.csv")
    rows = np.loadtxt(tmp_path / "sec.csv", delimiter=",", skiprows=1)
    assert (tmp_path / "sec.csv").read_text().splitlines()[0] == "y,p,x"
    assert np.array_equal(rows, het_r1.curves[0].points[:, [2, 1, 0]])
    rec = json.loads(het_r1.to_json())
    assert set(rec) == {"r", "sigma1", "y_star", "p_star", "action"}
