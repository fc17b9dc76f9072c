"""
Most-probable-path (instanton) equations in the limit of no noise on y.

With conjugate momentum p the action-minimising paths solve::

    dx/dt = (x + y)^2 - 1 + sigma1^2 p
    dp/dt = -2 (x + y) p
    dy/dt = r y (3 - y)

States are arrays ordered ``(x, p, y)``.  The plane p = 0 carries the
deterministic flow, and the planes y = 0 and y = 3 are invariant with a
conserved Hamiltonian.  The saddles of interest are ``S1 = (-1, 0, 0)``
and ``S2 = (-2, 0, 3)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .core import SystemParams, Trajectory
from .errors import ConfigError, DegenerateError, OffPlaneError, UnresolvedError

S1 = np.array([-1.0, 0.0, 0.0])
S2 = np.array([-2.0, 0.0, 3.0])


def mpp_field(z, params: SystemParams) -> np.ndarray:
    """Right-hand side at ``z``; works on a single state or a (3, n) stack."""
    x, p, y = z[0], z[1], z[2]
    u = x + y
    s2 = params.sigma1 ** 2
    return np.array([u * u - 1.0 + s2 * p, -2.0 * u * p, params.r * y * (3.0 - y)])


def mpp_jacobian(z, params: SystemParams) -> np.ndarray:
    x, p, y = z
    u = x + y
    return np.array([
        [2.0 * u, params.sigma1 ** 2, 2.0 * u],
        [-2.0 * p, -2.0 * u, -2.0 * p],
        [0.0, 0.0, params.r * (3.0 - 2.0 * y)],
    ])


def symmetry_map(z) -> np.ndarray:
    """Involution (x, p, y) -> (-x - 3, p, 3 - y).

    Combined with time reversal it maps solutions onto solutions and swaps
    S1 with S2.  Accepts a single state or an (n, 3) array of states.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    out[..., 0] = -z[..., 0] - 3.0
    out[..., 1] = z[..., 1]
    out[..., 2] = 3.0 - z[..., 2]
    return out


@dataclass(frozen=True)
class SaddleInfo:
    location: np.ndarray
    eigenvalues: np.ndarray
    #: one eigenvector per column, matching ``eigenvalues``
    eigenvectors: np.ndarray
    stable_dim: int
    unstable_dim: int

    def subspace(self, kind: str) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues and eigenvector columns of the ``"stable"`` or
        ``"unstable"`` subspace."""
        mask = self.eigenvalues < 0 if kind == "stable" else self.eigenvalues > 0
        return self.eigenvalues[mask], self.eigenvectors[:, mask]


def linearize_saddle(location, params: SystemParams, tol: float = 1e-12) -> SaddleInfo:
    """Eigen-decomposition of the linearisation at an equilibrium.

    On the plane p = 0 the Jacobian is block triangular and the eigenpairs
    are written down in closed form: ``2u`` along x, ``-2u`` along
    ``(-sigma1^2/(4u), 1, 0)`` and ``r(3 - 2y)`` along ``(-2u/(2u - lam), 0, 1)``
    with u = x + y.  At S1 this reproduces the unstable directions
    ``(sigma1^2/4, 1, 0)`` and ``(-2/(3r + 2), 0, 1)``.
    """
    z = np.asarray(location, dtype=float)
    if np.max(np.abs(mpp_field(z, params))) > tol:
        raise ConfigError(f"{z} is not an equilibrium")
    x, p, y = z
    if p != 0.0:
        lam, vec = np.linalg.eig(mpp_jacobian(z, params))
        lam, vec = lam.real, vec.real
    else:
        u = x + y
        lam3 = params.r * (3.0 - 2.0 * y)
        lam = np.array([2.0 * u, -2.0 * u, lam3])
        if np.isclose(lam3, 2.0 * u, atol=1e-12) or np.isclose(lam3, -2.0 * u, atol=1e-12):
            raise DegenerateError(f"eigenvalue collision at {z} (3r = 2)")
        vec = np.array([
            [1.0, -params.sigma1 ** 2 / (4.0 * u), -2.0 * u / (2.0 * u - lam3)],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ])
    return SaddleInfo(
        location=z,
        eigenvalues=lam,
        eigenvectors=vec,
        stable_dim=int(np.sum(lam < 0)),
        unstable_dim=int(np.sum(lam > 0)),
    )


def invariant_plane_hamiltonian(z, params: SystemParams, tol: float = 1e-12) -> float:
    """Conserved quantity ((x+y)^2 - 1) p + (sigma1^2 / 2) p^2 on y = 0 or y = 3."""
    z = np.asarray(z, dtype=float)
    x, p, y = z[0], z[1], z[2]
    on_plane = (np.abs(y) <= tol) | (np.abs(y - 3.0) <= tol)
    if not np.all(on_plane):
        raise OffPlaneError("Hamiltonian is only conserved on y = 0 or y = 3")
    return ((x + y) ** 2 - 1.0) * p + 0.5 * params.sigma1 ** 2 * p * p


def instanton_momentum(x, y, params: SystemParams):
    """Nonzero-momentum branch of the zero level set H = 0 in an invariant plane."""
    return 2.0 * (1.0 - (x + y) ** 2) / params.sigma1 ** 2


@dataclass(frozen=True)
class ActionValue:
    value: float
    path_label: str
    params: SystemParams
    quadrature_error: float = 0.0

    def to_json(self) -> str:
        return json.dumps({
            "case": self.path_label,
            "r": self.params.r,
            "sigma1": self.params.sigma1,
            "action": self.value,
            "quadrature_error": self.quadrature_error,
        })


def _trapezoid_with_error(f, t, rel_tol):
    fine = trapezoid(f, t)
    if t.size < 5:
        return fine, np.inf
    idx = np.arange(0, t.size, 2)
    if idx[-1] != t.size - 1:
        idx = np.append(idx, t.size - 1)
    coarse = trapezoid(f[idx], t[idx])
    err = abs(fine - coarse) / 3.0
    if err > rel_tol * max(abs(fine), 1e-300) and err > 1e-14:
        raise UnresolvedError(
            f"step halving changes the integral by {abs(fine - coarse):.3g} "
            f"(value {fine:.6g}); sample the path more finely"
        )
    return fine, err


def normalized_action(
    trajectory: Trajectory,
    params: SystemParams | None = None,
    label: str = "case3",
    rel_tol: float = 1e-3,
) -> ActionValue:
    """Integral of sigma1^4 p^2 dt over a sampled (x, p, y) path.

    Composite trapezoid on the given samples.  The error estimate compares
    against the rule on every second sample; if they differ by more than
    ``rel_tol`` relative, :class:`UnresolvedError` is raised.
    """
    params = params or trajectory.params
    p = trajectory.column("p")
    f = params.sigma1 ** 4 * p * p
    value, err = _trapezoid_with_error(f, trajectory.t, rel_tol)
    return ActionValue(float(value), label, params, float(err))


def fw_action(t, x, y, params: SystemParams, scheme: str = "central", rel_tol: float = 1e-3) -> float:
    """Freidlin-Wentzell cost of the x-component, int (dx/dt - f)^2 / sigma1^2 dt.

    ``dx/dt`` comes from finite differences of the samples: second-order
    ``np.gradient`` for ``scheme="central"``, first-order forward
    differences for ``scheme="forward"`` (raw Monte Carlo paths).
    """
    if params.sigma1 <= 0:
        raise ConfigError("the action is undefined for sigma1 = 0")
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if scheme == "central":
        xdot = np.gradient(x, t, edge_order=2)
        drift = (x + y) ** 2 - 1.0
        value, _ = _trapezoid_with_error((xdot - drift) ** 2, t, rel_tol)
    elif scheme == "forward":
        dt = np.diff(t)
        xdot = np.diff(x) / dt
        drift = (x[:-1] + y[:-1]) ** 2 - 1.0
        value = np.sum((xdot - drift) ** 2 * dt)
    else:
        raise ConfigError(f"unknown difference scheme {scheme!r}")
    return float(value / params.sigma1 ** 2)
