"""Immersed CMC surfaces from reduced trajectories.

The immersion is integrated along an L-shaped path: the t-leg along ``x = 0``
comes from the integrator's quadrature accumulators, the x-leg at frozen ``t``
is evaluated in closed form. For lam = H = 1/2 and phase point ``y(t)`` with

    A = p1^2 + q1^2 - p2^2 - q2^2,   B = 2 (p1 p2 + q1 q2),   M = p1 q2 - p2 q1,

the x-leg adds ``(2[A sin x + B (cos x - 1)], 2[B sin x - A (cos x - 1)], 4 M x)``.

Orientation: the first coordinate is the mirror image of the textbook
Weierstrass formula. With that choice shifting ``x -> x + tau`` acts on the
surface as the screw motion of :func:`helicoidal_transform` (rotation by
``+tau``, lift ``4 M tau``); the unmirrored formula realises the opposite
handedness. The mirror is an isometry, so metric and curvatures are unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .integrator import IntegratorConfig, Trajectory, integrate
from .phase import ModelParams, StateLike, angular_integral, as_vector, s1_rotate

FRAMES = ("base", "axis")


class UnsupportedParametersError(ValueError):
    pass


@dataclass(frozen=True)
class SpinorSample:
    psi1: complex
    psi2: complex

    @property
    def density(self) -> float:
        return abs(self.psi1) ** 2 + abs(self.psi2) ** 2


@dataclass
class ImmersionMesh:
    """Structured (t, x) grid of surface points, stored t-major.

    ``axis`` is the horizontal position of the screw axis in the mesh's own
    coordinates (the origin for meshes built in the ``"axis"`` frame).
    """

    t_values: np.ndarray
    x_values: np.ndarray
    points: np.ndarray
    faces: np.ndarray
    conformal_factor: np.ndarray
    gauss_curvature: np.ndarray
    axis: np.ndarray
    angular: float = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.t_values), len(self.x_values)

    @property
    def grid(self) -> np.ndarray:
        return self.points.reshape(*self.shape, 3)

    def triangles(self) -> np.ndarray:
        """Split each quad along its (i, j)-(i+1, j+1) diagonal."""
        f = self.faces
        return np.concatenate([f[:, [0, 1, 2]], f[:, [0, 2, 3]]])


def quad_faces(n_t: int, n_x: int) -> np.ndarray:
    i, j = np.meshgrid(np.arange(n_t - 1), np.arange(n_x - 1), indexing="ij")
    a = (i * n_x + j).ravel()
    return np.column_stack([a, a + 1, a + n_x + 1, a + n_x]).astype(np.int64)


def _require_canonical(params: ModelParams):
    if not params.is_canonical:
        raise UnsupportedParametersError(
            "closed-form immersion needs lam = H = 1/2; use field.induce_generic "
            f"for lam = {params.lam}, H = {params.mean_curvature}")


def psi_at(state: StateLike, x: float, params: ModelParams) -> SpinorSample:
    y = as_vector(state)
    phase = complex(math.cos(params.lam * x), math.sin(params.lam * x))
    return SpinorSample(complex(y[0], y[1]) * phase, complex(y[2], y[3]) * phase)


def conformal_factor(state: StateLike) -> float:
    y = as_vector(state)
    rho = float(y @ y)
    return 4.0 * rho * rho


def _profile_terms(states: np.ndarray):
    p1, p2, q1, q2 = states[..., 0], states[..., 1], states[..., 2], states[..., 3]
    a = p1**2 + q1**2 - p2**2 - q2**2
    b = 2.0 * (p1 * p2 + q1 * q2)
    m = p1 * q2 - p2 * q1
    return a, b, m


def x_leg(states: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Closed-form x-leg for every (state, x) pair; shape ``(n_states, n_x, 3)``."""
    states = np.atleast_2d(states)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    a, b, m = (v[:, None] for v in _profile_terms(states))
    sx, cx = np.sin(x)[None, :], np.cos(x)[None, :] - 1.0
    out = np.empty((len(states), len(x), 3))
    out[..., 0] = 2.0 * (a * sx + b * cx)
    out[..., 1] = 2.0 * (b * sx - a * cx)
    out[..., 2] = 4.0 * m * x[None, :]
    return out


def axis_position(state0: StateLike) -> np.ndarray:
    """Screw axis, in the frame with the base point at the origin, for a run starting at ``state0``."""
    a, b, _ = _profile_terms(as_vector(state0))
    return np.array([-2.0 * b, 2.0 * a])


def _frame_shift(traj: Trajectory, frame: str) -> np.ndarray:
    if frame not in FRAMES:
        raise ValueError(f"frame must be one of {FRAMES}")
    if frame == "base":
        return np.zeros(3)
    ax = axis_position(traj.states[0])
    return np.array([-ax[0], -ax[1], 0.0])


def immersion_grid(traj: Trajectory, x_values, params: ModelParams, frame: str = "base") -> np.ndarray:
    _require_canonical(params)
    leg = x_leg(traj.states, x_values)
    return leg + traj.quad[:, None, :] + _frame_shift(traj, frame)


def immersion_point(traj: Trajectory, sample_index: int, x: float, params: ModelParams,
                    frame: str = "base") -> np.ndarray:
    _require_canonical(params)
    if not -len(traj) <= sample_index < len(traj):
        raise IndexError(f"sample index {sample_index} out of range for {len(traj)} samples")
    leg = x_leg(traj.states[sample_index], [x])[0, 0]
    return leg + traj.quad[sample_index] + _frame_shift(traj, frame)


def helicoidal_transform(pt, tau: float, angular: float, axis=(0.0, 0.0)) -> np.ndarray:
    """Screw motion: rotate by ``tau`` about the vertical line through ``axis``, lift by ``4 M tau``."""
    pt = np.asarray(pt, dtype=float)
    c, s = math.cos(tau), math.sin(tau)
    u = pt[..., 0] - axis[0]
    v = pt[..., 1] - axis[1]
    out = np.empty(np.broadcast(pt, np.zeros(3)).shape)
    out[..., 0] = u * c - v * s + axis[0]
    out[..., 1] = u * s + v * c + axis[1]
    out[..., 2] = pt[..., 2] + 4.0 * angular * tau
    return out


def log_rho_second_derivative(states: np.ndarray, params: ModelParams) -> np.ndarray:
    """Exact ``d^2/dt^2 log rho`` along the flow.

    ``rho' = 2 lam (|s|^2 - |r|^2)`` and ``rho'' = 4 lam rho (lam - 4 H Re(conj(r) s))``.
    """
    states = np.atleast_2d(states)
    rr = states[:, 0] ** 2 + states[:, 1] ** 2
    ss = states[:, 2] ** 2 + states[:, 3] ** 2
    rho = rr + ss
    dot = states[:, 0] * states[:, 2] + states[:, 1] * states[:, 3]
    lam, h = params.lam, params.mean_curvature
    d1 = 2.0 * lam * (ss - rr)
    d2 = 4.0 * lam * rho * (lam - 4.0 * h * dot)
    with np.errstate(divide="ignore", invalid="ignore"):
        return d2 / rho - (d1 / rho) ** 2


def gauss_curvature_exact(states: np.ndarray, params: ModelParams) -> np.ndarray:
    """``K = -(1/4) (log rho)'' / rho^2`` with the derivative taken from the vector field."""
    states = np.atleast_2d(states)
    rho = np.sum(states**2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return -0.25 * log_rho_second_derivative(states, params) / rho**2


def gauss_curvature_analytic(traj: Trajectory, sample_index: int) -> float:
    """``K = -(1/4) (log rho)'' / rho^2`` with a 4th-order central difference in t."""
    n = len(traj)
    i = sample_index + n if sample_index < 0 else sample_index
    if i < 2 or i > n - 3:
        raise IndexError(f"sample {sample_index} lacks two neighbours on each side (n = {n})")
    h = traj.spacing
    f = np.log(traj.rho[i - 2:i + 3])
    d2 = (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h)
    rho = traj.rho[i]
    return float(-0.25 * d2 / rho**2)


def generate_mesh(traj: Trajectory, x_count: int, x_span: tuple[float, float],
                  params: ModelParams, frame: str = "base") -> ImmersionMesh:
    if x_count < 3:
        raise ValueError("x_count must be at least 3")
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    x_values = np.linspace(x_span[0], x_span[1], x_count)
    grid = immersion_grid(traj, x_values, params, frame)
    n_t = len(traj)
    rho = traj.rho
    conf = np.repeat(4.0 * rho**2, x_count)
    gauss = np.repeat(gauss_curvature_exact(traj.states, params), x_count)
    axis = axis_position(traj.states[0]) if frame == "base" else np.zeros(2)
    return ImmersionMesh(traj.times.copy(), x_values, grid.reshape(-1, 3), quad_faces(n_t, x_count),
                         conf, gauss, axis, float(traj.angulars[0]))


def helicoidal_residual(traj: Trajectory, params: ModelParams,
                        taus: Sequence[float] = (0.1, 1.0, 2.7),
                        x_values=None, frame: str = "base", rows=None) -> float:
    """Max ``|X(t, x + tau) - screw(X(t, x), tau)|`` over samples, x values and ``taus``."""
    x_values = np.linspace(0.0, 2.0 * np.pi, 25) if x_values is None else np.asarray(x_values)
    sub = traj if rows is None else _subset(traj, rows)
    base = immersion_grid(sub, x_values, params, frame)
    axis = axis_position(traj.states[0]) if frame == "base" else np.zeros(2)
    angular = float(traj.angulars[0])
    worst = 0.0
    for tau in taus:
        shifted = immersion_grid(sub, x_values + tau, params, frame)
        moved = helicoidal_transform(base, tau, angular, axis)
        worst = max(worst, float(np.max(np.linalg.norm(shifted - moved, axis=-1))))
    return worst


def _subset(traj: Trajectory, rows) -> Trajectory:
    rows = np.asarray(rows)
    return Trajectory(traj.times[rows], traj.states[rows], traj.quad[rows], traj.drift[rows],
                      traj.params, traj.step, traj.method, traj.newton_tol, traj.meta)


def s1_equivalence_defect(state0: StateLike, phi: float, params: ModelParams,
                          cfg: IntegratorConfig, x_values=None) -> float:
    """Compare the mesh of ``s1_rotate(state0, phi)`` with the screwed mesh of ``state0``.

    Rotating the initial spinors by ``phi`` shifts ``x`` by ``phi / lam``, so the
    two surfaces differ by the screw motion with ``tau = phi / lam``. Both meshes
    carry their base point at the origin, so the screwed mesh is re-based at
    the image of that point before comparing.
    """
    x_values = np.linspace(0.0, 2.0 * np.pi, 33) if x_values is None else np.asarray(x_values)
    y0 = as_vector(state0)
    base = immersion_grid(integrate(y0, params, cfg), x_values, params)
    rotated = immersion_grid(integrate(s1_rotate(y0, phi), params, cfg), x_values, params)
    tau = phi / params.lam
    axis = axis_position(y0)
    angular = angular_integral(y0)
    moved = helicoidal_transform(base, tau, angular, axis)
    moved -= helicoidal_transform(np.zeros(3), tau, angular, axis)
    return float(np.max(np.linalg.norm(rotated - moved, axis=-1)))


def period_translation(state0: StateLike, params: ModelParams, period: float, dt: float = 1e-3,
                       stride: int = 10, x_count: int = 64) -> tuple[float, float]:
    """Compare the mesh with itself one profile period later.

    The run uses a step that divides ``period`` exactly, so rows ``i`` and
    ``i + n`` sit one period apart. Returns the vertical shift between them
    and the max vertex mismatch once that shift is removed.
    """
    if not period > 0:
        raise ValueError("period must be positive")
    n = stride * int(math.ceil(period / (dt * stride)))
    cfg = IntegratorConfig(dt=period / n, t_span=(0.0, 2.0 * period), record_stride=stride)
    traj = integrate(state0, params, cfg)
    grid = generate_mesh(traj, x_count, (0.0, 2.0 * np.pi), params, frame="axis").grid
    k = n // stride
    d = grid[k:] - grid[:-k]
    dz = float(d[..., 2].mean())
    mismatch = float(np.abs(d - np.array([0.0, 0.0, dz])).max())
    return dz, mismatch


# -- discrete geometry -------------------------------------------------------

def _cot(u, v):
    cross = np.linalg.norm(np.cross(u, v), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.einsum("ij,ij->i", u, v) / cross


def mean_curvature_discrete(mesh: ImmersionMesh, area_floor: float = 1e-14) -> np.ndarray:
    """Per-vertex mean curvature from the cotangent Laplacian.

    Uses ``Delta X = -2 H n`` with mixed Voronoi areas. The sign is taken
    against the ``X_x x X_t`` normal, which makes the unit-cylinder fixture
    read ``+1/2``. Boundary vertices and vertices touching a face of area
    below ``area_floor`` are returned as NaN.
    """
    X = mesh.points
    tri = mesh.triangles()
    nv = len(X)
    i0, i1, i2 = tri[:, 0], tri[:, 1], tri[:, 2]
    e0 = X[i2] - X[i1]   # opposite vertex 0
    e1 = X[i0] - X[i2]   # opposite vertex 1
    e2 = X[i1] - X[i0]   # opposite vertex 2
    fn = np.cross(e2, -e1)
    area = 0.5 * np.linalg.norm(fn, axis=1)
    bad = area < area_floor
    good = ~bad

    cot0 = _cot(X[i1] - X[i0], X[i2] - X[i0])
    cot1 = _cot(X[i0] - X[i1], X[i2] - X[i1])
    cot2 = _cot(X[i0] - X[i2], X[i1] - X[i2])

    lap = np.zeros((nv, 3))
    for (a, b, w) in ((i1, i2, cot0), (i2, i0, cot1), (i0, i1, cot2)):
        ww = np.where(good, w, 0.0)[:, None]
        d = X[b] - X[a]
        np.add.at(lap, a, ww * d)
        np.add.at(lap, b, -ww * d)

    # mixed areas (Meyer et al.)
    l0, l1, l2 = (np.einsum("ij,ij->i", e, e) for e in (e0, e1, e2))
    obtuse0 = l0 > l1 + l2
    obtuse1 = l1 > l0 + l2
    obtuse2 = l2 > l0 + l1
    any_obtuse = obtuse0 | obtuse1 | obtuse2
    vor0 = (l1 * cot1 + l2 * cot2) / 8.0
    vor1 = (l0 * cot0 + l2 * cot2) / 8.0
    vor2 = (l0 * cot0 + l1 * cot1) / 8.0
    amix = np.zeros(nv)
    for idx, vor, obt in ((i0, vor0, obtuse0), (i1, vor1, obtuse1), (i2, vor2, obtuse2)):
        a_v = np.where(any_obtuse, np.where(obt, area / 2.0, area / 4.0), vor)
        np.add.at(amix, idx, np.where(good, a_v, 0.0))

    normals = np.zeros((nv, 3))
    for idx in (i0, i1, i2):
        np.add.at(normals, idx, fn)
    with np.errstate(divide="ignore", invalid="ignore"):
        normals /= np.linalg.norm(normals, axis=1)[:, None]
        delta = lap / (2.0 * amix[:, None])
    h = 0.5 * np.einsum("ij,ij->i", delta, normals)

    n_t, n_x = mesh.shape
    flagged = np.zeros(nv, dtype=bool)
    flagged[np.unique(tri[bad].ravel())] = True
    ii, jj = np.divmod(np.arange(nv), n_x)
    boundary = (ii == 0) | (ii == n_t - 1) | (jj == 0) | (jj == n_x - 1)
    h[flagged | boundary] = np.nan
    return h


def fit_sphere(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares sphere through ``points``: returns (center, radius)."""
    P = np.asarray(points, dtype=float)
    A = np.column_stack([2.0 * P, np.ones(len(P))])
    rhs = np.sum(P * P, axis=1)
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    center = sol[:3]
    radius = math.sqrt(sol[3] + center @ center)
    return center, radius


def fit_circle(points: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Planar least-squares circle through the (x, y) parts of ``points``.

    Returns (center, radius, max residual).
    """
    P = np.asarray(points, dtype=float)[:, :2]
    A = np.column_stack([2.0 * P, np.ones(len(P))])
    rhs = np.sum(P * P, axis=1)
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    center = sol[:2]
    radius = math.sqrt(sol[2] + center @ center)
    resid = np.abs(np.linalg.norm(P - center, axis=1) - radius)
    return center, radius, float(resid.max())


def _d1_6th(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """6th-order central first derivative; NaN within three samples of either end."""
    f = np.moveaxis(f, axis, 0)
    out = np.full_like(f, np.nan)
    if len(f) >= 7:
        out[3:-3] = (-f[:-6] + 9.0 * f[1:-5] - 45.0 * f[2:-4]
                     + 45.0 * f[4:-2] - 9.0 * f[5:-1] + f[6:]) / (60.0 * h)
    return np.moveaxis(out, 0, axis)


def conformality_defects(mesh: ImmersionMesh) -> dict:
    """Finite-difference metric checks on the mesh grid.

    Reports max ``| |X_x|^2 - |X_t|^2 |``, max ``|X_x . X_t|`` and max
    ``| |X_x|^2 - conformal_factor |`` over interior vertices.
    """
    G = mesh.grid
    ht = float(mesh.t_values[1] - mesh.t_values[0])
    hx = float(mesh.x_values[1] - mesh.x_values[0])
    xt = _d1_6th(G, ht, 0)
    xx = _d1_6th(G, hx, 1)
    nt = np.sum(xt * xt, axis=-1)
    nx = np.sum(xx * xx, axis=-1)
    cross = np.sum(xt * xx, axis=-1)
    conf = mesh.conformal_factor.reshape(mesh.shape)
    return {
        "length_mismatch": float(np.nanmax(np.abs(nx - nt))),
        "orthogonality": float(np.nanmax(np.abs(cross))),
        "factor_mismatch": float(np.nanmax(np.abs(nx - conf))),
    }


def write_obj(mesh: ImmersionMesh, path) -> None:
    with open(path, "w") as fh:
        for x, y, z in mesh.points:
            fh.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        for f in mesh.faces + 1:
            fh.write(f"f {f[0]} {f[1]} {f[2]} {f[3]}\n")


def read_obj(path) -> tuple[np.ndarray, np.ndarray]:
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(v) for v in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(v.split("/")[0]) - 1 for v in parts[1:]])
    return np.array(verts), np.array(faces, dtype=np.int64)
