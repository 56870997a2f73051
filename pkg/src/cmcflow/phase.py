"""Reduced two-degree-of-freedom CMC system: flow, first integrals, S^1 symmetry.

Phase coordinates are ``(p1, p2, q1, q2)`` with complex pairs ``r = p1 + i p2``
and ``s = q1 + i q2``. The flow is

    r_t = -lam r + 2 H rho s,    s_t = lam s - 2 H rho r,    rho = |r|^2 + |s|^2,

it has the energy ``E = (H/2) rho^2 - lam (p1 q1 + p2 q2)`` and the angular
integral ``M = p1 q2 - p2 q1``, and both are invariant under the simultaneous
rotation ``r, s -> e^{i phi} r, e^{i phi} s``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np


class DomainError(ValueError):
    """Invalid parameters or non-finite phase data."""


@dataclass(frozen=True)
class ModelParams:
    lam: float = 0.5
    mean_curvature: float = 0.5

    def __post_init__(self):
        for name in ("lam", "mean_curvature"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
            if v == 0.0:
                raise DomainError(f"{name} must be nonzero")

    @property
    def is_canonical(self) -> bool:
        """True for lam = H = 1/2, the normalisation of the closed-form immersion."""
        return self.lam == 0.5 and self.mean_curvature == 0.5


@dataclass(frozen=True)
class PhaseState:
    p1: float
    p2: float
    q1: float
    q2: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.p1, self.p2, self.q1, self.q2)):
            raise DomainError(f"non-finite phase state {self!r}")

    @classmethod
    def from_array(cls, y) -> "PhaseState":
        y = np.asarray(y, dtype=float)
        return cls(float(y[0]), float(y[1]), float(y[2]), float(y[3]))

    @classmethod
    def from_complex(cls, r: complex, s: complex) -> "PhaseState":
        return cls(r.real, r.imag, s.real, s.imag)

    def as_array(self) -> np.ndarray:
        return np.array([self.p1, self.p2, self.q1, self.q2])

    @property
    def r(self) -> complex:
        return complex(self.p1, self.p2)

    @property
    def s(self) -> complex:
        return complex(self.q1, self.q2)

    @property
    def rho(self) -> float:
        return self.p1**2 + self.p2**2 + self.q1**2 + self.q2**2


StateLike = Union[PhaseState, Sequence[float], np.ndarray]


def as_vector(state: StateLike) -> np.ndarray:
    """Coerce to a finite float array of shape (4,)."""
    if isinstance(state, PhaseState):
        return state.as_array()
    y = np.asarray(state, dtype=float)
    if y.shape != (4,):
        raise DomainError(f"phase state must have 4 components, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise DomainError(f"non-finite phase state {y!r}")
    return y


class SurfaceTag(str, enum.Enum):
    DEGENERATE = "Degenerate"
    CYLINDER = "Cylinder"
    UNDULOID = "Unduloid"
    SPHERE = "Sphere"
    NODOID = "Nodoid"
    HELICOIDAL = "HelicoidalCMC"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SurfaceClass:
    tag: SurfaceTag
    energy: float
    angular: float


def vector_field(state: StateLike, params: ModelParams) -> np.ndarray:
    """Rates ``(dp1, dp2, dq1, dq2)/dt``."""
    p1, p2, q1, q2 = as_vector(state)
    lam, h = params.lam, params.mean_curvature
    c = 2.0 * h * (p1 * p1 + p2 * p2 + q1 * q1 + q2 * q2)
    return np.array([-lam * p1 + c * q1, -lam * p2 + c * q2,
                     lam * q1 - c * p1, lam * q2 - c * p2])


def jacobian(state: StateLike, params: ModelParams) -> np.ndarray:
    """Analytic 4x4 Jacobian of :func:`vector_field`."""
    y = as_vector(state)
    p1, p2, q1, q2 = y
    lam, h = params.lam, params.mean_curvature
    c = 2.0 * h * float(y @ y)
    J = np.array([[-lam, 0.0, c, 0.0],
                  [0.0, -lam, 0.0, c],
                  [-c, 0.0, lam, 0.0],
                  [0.0, -c, 0.0, lam]])
    J += 4.0 * h * np.outer([q1, q2, -p1, -p2], y)
    return J


def hamiltonian(state: StateLike, params: ModelParams) -> float:
    p1, p2, q1, q2 = as_vector(state)
    rho = p1 * p1 + p2 * p2 + q1 * q1 + q2 * q2
    return 0.5 * params.mean_curvature * rho * rho - params.lam * (p1 * q1 + p2 * q2)


def hamiltonian_gradient(state: StateLike, params: ModelParams) -> np.ndarray:
    y = as_vector(state)
    p1, p2, q1, q2 = y
    c = 2.0 * params.mean_curvature * float(y @ y)
    lam = params.lam
    return np.array([c * p1 - lam * q1, c * p2 - lam * q2,
                     c * q1 - lam * p1, c * q2 - lam * p2])


def angular_integral(state: StateLike) -> float:
    p1, p2, q1, q2 = as_vector(state)
    return p1 * q2 - p2 * q1


def s1_rotate(state: StateLike, phi: float) -> PhaseState:
    """Rotate ``(p1, p2)`` and ``(q1, q2)`` together by ``phi``."""
    p1, p2, q1, q2 = as_vector(state)
    c, s = math.cos(phi), math.sin(phi)
    return PhaseState(p1 * c - p2 * s, p1 * s + p2 * c, q1 * c - q2 * s, q1 * s + q2 * c)


def s1_rotate_array(y: np.ndarray, phi: float) -> np.ndarray:
    """Vectorised :func:`s1_rotate` over the last axis of ``y`` (shape ``(..., 4)``)."""
    y = np.asarray(y, dtype=float)
    c, s = math.cos(phi), math.sin(phi)
    out = np.empty_like(y)
    out[..., 0] = y[..., 0] * c - y[..., 1] * s
    out[..., 1] = y[..., 0] * s + y[..., 1] * c
    out[..., 2] = y[..., 2] * c - y[..., 3] * s
    out[..., 3] = y[..., 2] * s + y[..., 3] * c
    return out


def _best_phase(ys: np.ndarray, yb: np.ndarray) -> np.ndarray:
    # angle maximising <R_phi a, b>: minus the argument of conj(r_b) r_a + conj(s_b) s_a
    w = ((ys[..., 0] + 1j * ys[..., 1]) * complex(yb[0], -yb[1])
         + (ys[..., 2] + 1j * ys[..., 3]) * complex(yb[2], -yb[3]))
    return -np.angle(w)


def align_phase(a: StateLike, b: StateLike) -> tuple[np.ndarray, float]:
    """Rotate ``a`` along its S^1-orbit to the point closest to ``b``.

    Returns the rotated state and the angle used.
    """
    ya, yb = as_vector(a), as_vector(b)
    phi = float(_best_phase(ya, yb))
    return s1_rotate_array(ya, phi), phi


def reduced_distance(a: StateLike, b: StateLike) -> float:
    """Distance between the S^1-orbits of ``a`` and ``b``."""
    rotated, _ = align_phase(a, b)
    return float(np.linalg.norm(rotated - as_vector(b)))


def reduced_distance_array(ys: np.ndarray, b: StateLike) -> np.ndarray:
    ys = np.asarray(ys, dtype=float)
    yb = as_vector(b)
    phi = _best_phase(ys, yb)
    c, s = np.cos(phi), np.sin(phi)
    rot = np.empty_like(ys)
    rot[..., 0] = ys[..., 0] * c - ys[..., 1] * s
    rot[..., 1] = ys[..., 0] * s + ys[..., 1] * c
    rot[..., 2] = ys[..., 2] * c - ys[..., 3] * s
    rot[..., 3] = ys[..., 2] * s + ys[..., 3] * c
    return np.linalg.norm(rot - yb, axis=-1)


def equilibria(params: ModelParams) -> list[PhaseState]:
    """Origin plus the two nonzero equilibria on the ``p2 = q2 = 0`` plane.

    Nonzero equilibria satisfy ``q1 = sign(lam/H) p1`` and ``rho = |lam / (2H)|``;
    all others are their S^1-orbits.
    """
    ratio = params.lam / (2.0 * params.mean_curvature)
    a = math.sqrt(abs(ratio) / 2.0)
    sgn = 1.0 if ratio > 0 else -1.0
    return [PhaseState(0.0, 0.0, 0.0, 0.0),
            PhaseState(a, 0.0, sgn * a, 0.0),
            PhaseState(-a, 0.0, -sgn * a, 0.0)]


def equilibrium_energy(params: ModelParams) -> float:
    """Energy at the nonzero equilibria (``-lam^2 / (8 H)`` when lam, H > 0)."""
    return hamiltonian(equilibria(params)[1], params)


def classify(state: StateLike, params: ModelParams, tol: float = 1e-9) -> SurfaceClass:
    """Map a phase state to the surface family of its trajectory.

    The energy window around zero (``|E| < tol``) is what counts as the sphere
    separatrix, so results near that level depend on ``tol``. All thresholds are
    absolute.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    y = as_vector(state)
    energy = hamiltonian(y, params)
    angular = angular_integral(y)

    def make(tag):
        return SurfaceClass(tag, energy, angular)

    if float(y @ y) < tol:
        return make(SurfaceTag.DEGENERATE)
    if abs(angular) >= tol:
        return make(SurfaceTag.HELICOIDAL)
    if any(reduced_distance(y, e) < tol for e in equilibria(params)[1:]):
        return make(SurfaceTag.CYLINDER)
    if abs(energy) < tol:
        return make(SurfaceTag.SPHERE)
    if energy < 0:
        return make(SurfaceTag.UNDULOID)
    return make(SurfaceTag.NODOID)


def separatrix_points(params: ModelParams, n: int = 64) -> np.ndarray:
    """Points ``(p1, q1)`` on the zero-energy loops of the ``p2 = q2 = 0`` plane.

    In polar form ``p1 = R cos t, q1 = R sin t`` the level ``E = 0`` reads
    ``R^2 = (lam / H) sin 2t``.
    """
    ratio = params.lam / params.mean_curvature
    start = 0.0 if ratio > 0 else 0.5 * np.pi
    theta = np.linspace(start, start + 0.5 * np.pi, n)
    radius = np.sqrt(np.clip(ratio * np.sin(2.0 * theta), 0.0, None))
    loop = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    return np.vstack([loop, -loop])
