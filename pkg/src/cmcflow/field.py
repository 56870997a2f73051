"""Periodic spinor field system and the generic Weierstrass-type inducer.

The field pair ``(psi1, psi2)`` on a periodic x-interval of length ``L`` evolves by

    psi1_t =  i psi1_x + 2 H rho psi2,
    psi2_t = -i psi2_x - 2 H rho psi1,      rho = |psi1|^2 + |psi2|^2,

with spectral x-derivatives and classical RK4 in time. Fields of the form
``(r(t), s(t)) e^{i lam x}`` stay of that form and reproduce the reduced flow.

The system is of Cauchy-Riemann type in ``z = t + i x``, so marching in ``t``
is ill-posed: the linear part sends a Fourier mode ``e^{ikx}`` of ``psi1`` to
``e^{-kt}`` and of ``psi2`` to ``e^{kt}``. Evolution is therefore Galerkin
truncated to ``|k| <= k_cut``; round-off in retained modes grows at most like
``e^{k_cut t}``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_simpson

from .phase import ModelParams, StateLike, as_vector
from .surface import ImmersionMesh, quad_faces


class BlowUpError(RuntimeError):
    def __init__(self, message, time=None, amplitude=None):
        super().__init__(message)
        self.time = time
        self.amplitude = amplitude


@dataclass
class FieldState:
    length: float
    psi1: np.ndarray
    psi2: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.psi1 = np.asarray(self.psi1, dtype=complex)
        self.psi2 = np.asarray(self.psi2, dtype=complex)
        n = self.psi1.shape[0]
        if self.psi1.shape != (n,) or self.psi2.shape != (n,):
            raise ValueError("psi1 and psi2 must be 1-d arrays of equal length")
        if n < 16 or n % 2:
            raise ValueError(f"grid size must be even and at least 16, got {n}")
        if not (math.isfinite(self.length) and self.length > 0):
            raise ValueError("domain length must be positive")
        if not (np.all(np.isfinite(self.psi1)) and np.all(np.isfinite(self.psi2))):
            raise ValueError("non-finite field samples")

    @property
    def n(self) -> int:
        return self.psi1.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.length * np.arange(self.n) / self.n

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.psi1) ** 2 + np.abs(self.psi2) ** 2


@dataclass(frozen=True)
class ConservedSet:
    c_plus: complex
    c_minus: complex
    p_momentum: complex
    h_energy: complex

    @property
    def reality_defect(self) -> float:
        return max(abs(v.imag) for v in self.as_tuple())

    def as_tuple(self) -> tuple[complex, complex, complex, complex]:
        return (self.c_plus, self.c_minus, self.p_momentum, self.h_energy)


def wavenumbers(n: int, length: float) -> np.ndarray:
    return 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)


def check_commensurate(lam: float, length: float, tol: float = 1e-9) -> None:
    """Require ``lam L / (2 pi)`` to be an integer so ``e^{i lam x}`` is periodic."""
    k = lam * length / (2.0 * np.pi)
    if abs(k - round(k)) > tol:
        raise ValueError(f"lam * L / (2 pi) = {k:.6g} is not an integer")


def ansatz_field(state: StateLike, params: ModelParams, length: float = 4.0 * np.pi,
                 n: int = 256, time: float = 0.0) -> FieldState:
    """``psi1 = r e^{i lam x}``, ``psi2 = s e^{i lam x}`` on an ``n``-point grid."""
    check_commensurate(params.lam, length)
    y = as_vector(state)
    x = length * np.arange(n) / n
    phase = np.exp(1j * params.lam * x)
    return FieldState(length, complex(y[0], y[1]) * phase, complex(y[2], y[3]) * phase, time)


def ansatz_sequence(states: np.ndarray, times: np.ndarray, params: ModelParams,
                    length: float = 4.0 * np.pi, n: int = 256) -> list[FieldState]:
    return [ansatz_field(y, params, length, n, float(t)) for y, t in zip(states, times)]


def _spectral_dx(u: np.ndarray, k: np.ndarray) -> np.ndarray:
    return np.fft.ifft(1j * k * np.fft.fft(u, axis=-1), axis=-1)


def _project(u: np.ndarray, keep: np.ndarray) -> np.ndarray:
    return np.fft.ifft(np.fft.fft(u, axis=-1) * keep, axis=-1)


def _rhs(u: np.ndarray, k: np.ndarray, h: float, keep: np.ndarray) -> np.ndarray:
    # u has shape (2, N): rows psi1, psi2
    # i d/dx -> -k, -i d/dx -> +k in Fourier space
    uh = np.fft.fft(u, axis=-1)
    c = 2.0 * h * (np.abs(u[0]) ** 2 + np.abs(u[1]) ** 2)
    total = np.fft.fft(np.stack([c * u[1], -c * u[0]]), axis=-1)
    total[0] -= k * uh[0]
    total[1] += k * uh[1]
    return np.fft.ifft(total * keep, axis=-1)


def evolve(state0: FieldState, params: ModelParams, dt: float, t_end: float,
           stride: int = 1, k_cut: float = 2.0, cfl: float | None = 0.5,
           blowup_factor: float = 1e6) -> list[FieldState]:
    """RK4 evolution from ``state0.time`` to ``t_end``; returns every ``stride``-th snapshot.

    Initial data and the nonlinear term are projected onto ``|k| <= k_cut``.
    ``cfl`` bounds ``dt / (L/N)``; pass ``None`` to skip the guard.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t_end < state0.time:
        raise ValueError("t_end precedes the initial time")
    if stride < 1:
        raise ValueError("stride must be a positive integer")
    hx = state0.length / state0.n
    if cfl is not None and dt > cfl * hx:
        raise ValueError(f"dt = {dt:g} violates dt <= {cfl} * L/N = {cfl * hx:g}")
    n_steps = int(round((t_end - state0.time) / dt))
    if n_steps:
        dt = (t_end - state0.time) / n_steps
    if not k_cut > 0:
        raise ValueError("k_cut must be positive")
    k = wavenumbers(state0.n, state0.length)
    keep = (np.abs(k) <= k_cut + 1e-12).astype(float)
    h = params.mean_curvature
    u = _project(np.stack([state0.psi1, state0.psi2]), keep)
    amp0 = float(np.abs(u).max())
    limit = blowup_factor * (amp0 if amp0 > 0 else 1.0)
    out = [FieldState(state0.length, u[0].copy(), u[1].copy(), state0.time)]
    for step in range(1, n_steps + 1):
        k1 = _rhs(u, k, h, keep)
        k2 = _rhs(u + 0.5 * dt * k1, k, h, keep)
        k3 = _rhs(u + 0.5 * dt * k2, k, h, keep)
        k4 = _rhs(u + dt * k3, k, h, keep)
        u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = state0.time + step * dt
        amp = float(np.abs(u).max()) if np.all(np.isfinite(u)) else math.inf
        if amp > limit:
            raise BlowUpError(f"field amplitude {amp:.3e} exceeded {limit:.3e} at t = {t:.6g}", t, amp)
        if step % stride == 0:
            out.append(FieldState(state0.length, u[0].copy(), u[1].copy(), t))
    return out


def conserved_quantities(state: FieldState, params: ModelParams,
                         potential_weight: float = 0.5) -> ConservedSet:
    """The four x-integrals, computed as complex numbers by the periodic trapezoid rule.

    The energy density is ``(i/2)(psi1_x conj(psi2) + conj(psi1) psi2_x) + w H rho^2``.
    Only ``w = 1/2`` is conserved by the evolution (and reduces on ansatz data to
    ``L`` times the reduced energy); ``w = 1`` is kept selectable for comparison.
    """
    k = wavenumbers(state.n, state.length)
    a, b = state.psi1, state.psi2
    ax, bx = _spectral_dx(a, k), _spectral_dx(b, k)
    ac, bc = np.conj(a), np.conj(b)
    w = state.length / state.n
    rho = np.abs(a) ** 2 + np.abs(b) ** 2
    c_plus = w * np.sum(a**2 + b**2 + ac**2 + bc**2)
    c_minus = w * np.sum(a**2 + b**2 - ac**2 - bc**2) / 1j
    p_mom = w * np.sum(ax * bc - ac * bx)
    h_en = w * np.sum(0.5j * (ax * bc + ac * bx) + potential_weight * params.mean_curvature * rho**2)
    return ConservedSet(complex(c_plus), complex(c_minus), complex(p_mom), complex(h_en))


def spectral_concentration(state: FieldState, params: ModelParams) -> float:
    """Fraction of the L2 norm carried by the single Fourier mode ``e^{i lam x}``."""
    k = wavenumbers(state.n, state.length)
    mode = int(np.argmin(np.abs(k - params.lam)))
    total = 0.0
    peak = 0.0
    for u in (state.psi1, state.psi2):
        c = np.abs(np.fft.fft(u)) ** 2
        total += c.sum()
        peak += c[mode]
    return float(peak / total) if total > 0 else 1.0


def _grid(fields: Sequence[FieldState]) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    if len(fields) < 2:
        raise ValueError("need at least two snapshots")
    times = np.array([f.time for f in fields])
    dts = np.diff(times)
    if np.any(dts <= 0) or np.max(np.abs(dts - dts[0])) > 1e-9 * max(1.0, abs(dts[0])):
        raise ValueError("snapshots must lie on a uniform increasing time grid")
    length, n = fields[0].length, fields[0].n
    if any(f.n != n or f.length != length for f in fields):
        raise ValueError("snapshots must share one spatial grid")
    psi1 = np.stack([f.psi1 for f in fields])
    psi2 = np.stack([f.psi2 for f in fields])
    return times, psi1, psi2, float(dts[0])


def _coefficients(psi1: np.ndarray, psi2: np.ndarray):
    """dt- and dx-coefficients of the three immersion 1-forms (first coordinate mirrored).

    With ``W = X^1 + i X^2`` in the textbook orientation,
    ``dW = 2i (conj(psi1)^2 dz - conj(psi2)^2 dzbar)`` and
    ``dX^3 = -2 (psi2 conj(psi1) dz + psi1 conj(psi2) dzbar)``, ``dz = dt + i dx``.
    """
    a2, b2 = np.conj(psi1) ** 2, np.conj(psi2) ** 2
    w_t = 2j * (a2 - b2)
    w_x = -2.0 * (a2 + b2)
    mix = psi2 * np.conj(psi1)
    x3_t = -4.0 * mix.real
    x3_x = 4.0 * mix.imag
    ct = np.stack([-w_t.real, w_t.imag, x3_t], axis=-1)
    cx = np.stack([-w_x.real, w_x.imag, x3_x], axis=-1)
    return ct, cx


def induce_generic(fields: Sequence[FieldState], params: ModelParams, path: str = "tx") -> ImmersionMesh:
    """Integrate the immersion 1-forms over the (t, x) snapshot grid.

    ``path="tx"`` runs the t-leg along the first x column and then x-legs along
    each time row; ``"xt"`` does the reverse. Each leg uses cumulative
    composite Simpson. The periodic x grid is closed with its wrap-around
    column so the mesh spans ``[0, L]``.
    """
    if path not in ("tx", "xt"):
        raise ValueError("path must be 'tx' or 'xt'")
    times, psi1, psi2, ht = _grid(fields)
    length, n = fields[0].length, fields[0].n
    hx = length / n
    psi1w = np.concatenate([psi1, psi1[:, :1]], axis=1)
    psi2w = np.concatenate([psi2, psi2[:, :1]], axis=1)
    ct, cx = _coefficients(psi1w, psi2w)
    if path == "tx":
        t_leg = cumulative_simpson(ct[:, 0, :], dx=ht, axis=0, initial=0.0)
        x_legs = cumulative_simpson(cx, dx=hx, axis=1, initial=0.0)
        grid = t_leg[:, None, :] + x_legs
    else:
        x_leg = cumulative_simpson(cx[0], dx=hx, axis=0, initial=0.0)
        t_legs = cumulative_simpson(ct, dx=ht, axis=0, initial=0.0)
        grid = x_leg[None, :, :] + t_legs
    rho = np.abs(psi1w) ** 2 + np.abs(psi2w) ** 2
    gauss = _gauss_from_density(rho[:, :-1], ht, length, params)
    gauss = np.concatenate([gauss, gauss[:, :1]], axis=1)
    n_t, n_x = grid.shape[:2]
    x_values = hx * np.arange(n + 1)
    return ImmersionMesh(times, x_values, grid.reshape(-1, 3), quad_faces(n_t, n_x),
                         (4.0 * rho**2).ravel(), gauss.ravel(), None, float("nan"))


def _gauss_from_density(rho: np.ndarray, ht: float, length: float, params: ModelParams) -> np.ndarray:
    """``K = -(log rho)_{z zbar} / rho^2``; spectral in x, 4th-order central in t, NaN at t ends."""
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.log(rho)
    k = wavenumbers(rho.shape[1], length)
    fxx = np.full_like(f, np.nan)
    finite = np.all(np.isfinite(f), axis=1)
    fxx[finite] = np.fft.ifft(-(k**2) * np.fft.fft(f[finite], axis=1), axis=1).real
    ftt = np.full_like(f, np.nan)
    if len(f) >= 5:
        ftt[2:-2] = (-f[:-4] + 16.0 * f[1:-3] - 30.0 * f[2:-2] + 16.0 * f[3:-1] - f[4:]) / (12.0 * ht * ht)
    with np.errstate(divide="ignore", invalid="ignore"):
        return -0.25 * (ftt + fxx) / rho**2


def dirac_residual(fields: Sequence[FieldState], params: ModelParams) -> float:
    """Max over interior grid points of ``|psi1_z - p psi2| + |psi2_zbar + p psi1|``, ``p = H rho``."""
    if len(fields) < 5:
        raise IndexError("dirac_residual needs at least 5 time samples")
    times, psi1, psi2, ht = _grid(fields)
    k = wavenumbers(fields[0].n, fields[0].length)

    def dt4(u):
        return (u[:-4] - 8.0 * u[1:-3] + 8.0 * u[3:-1] - u[4:]) / (12.0 * ht)

    a, b = psi1[2:-2], psi2[2:-2]
    a_t, b_t = dt4(psi1), dt4(psi2)
    a_x, b_x = _spectral_dx(a, k), _spectral_dx(b, k)
    p = params.mean_curvature * (np.abs(a) ** 2 + np.abs(b) ** 2)
    r1 = 0.5 * (a_t - 1j * a_x) - p * b
    r2 = 0.5 * (b_t + 1j * b_x) + p * a
    return float(np.max(np.abs(r1) + np.abs(r2)))


def reduction_error(fields: Sequence[FieldState], states: np.ndarray, params: ModelParams) -> float:
    """Max pointwise distance between the fields and ``(r, s) e^{i lam x}`` built from ``states``."""
    worst = 0.0
    for f, y in zip(fields, states):
        phase = np.exp(1j * params.lam * f.x)
        e1 = np.abs(f.psi1 - complex(y[0], y[1]) * phase).max()
        e2 = np.abs(f.psi2 - complex(y[2], y[3]) * phase).max()
        worst = max(worst, float(e1), float(e2))
    return worst


def smooth_random_field(rng: np.random.Generator, length: float = 4.0 * np.pi, n: int = 256,
                        modes: int = 2, amplitude: float = 1e-4) -> FieldState:
    """Band-limited random data: Fourier modes ``|m| <= modes`` with random complex weights.

    Amplitudes default small because modes grow like ``e^{|k| t}``.
    """
    x = length * np.arange(n) / n
    out = []
    for _ in range(2):
        u = np.zeros(n, dtype=complex)
        for m in range(-modes, modes + 1):
            c = (rng.normal() + 1j * rng.normal()) / (1.0 + m * m)
            u += c * np.exp(2j * np.pi * m * x / length)
        out.append(amplitude * u / np.abs(u).max())
    return FieldState(length, out[0], out[1], 0.0)


# -- files -------------------------------------------------------------------

def write_snapshot(state: FieldState, params: ModelParams, path) -> None:
    """CSV rows ``x, Re psi1, Im psi1, Re psi2, Im psi2`` plus a ``.json`` sidecar."""
    path = str(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "re_psi1", "im_psi1", "re_psi2", "im_psi2"])
        for x, a, b in zip(state.x, state.psi1, state.psi2):
            w.writerow([f"{v:.17g}" for v in (x, a.real, a.imag, b.real, b.imag)])
    side = {"L": state.length, "N": state.n, "time": state.time,
            "lambda": params.lam, "H": params.mean_curvature}
    with open(_sidecar(path), "w") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_snapshot(path) -> tuple[FieldState, ModelParams]:
    path = str(path)
    with open(_sidecar(path)) as fh:
        side = json.load(fh)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    state = FieldState(float(side["L"]), data[:, 1] + 1j * data[:, 2], data[:, 3] + 1j * data[:, 4],
                       float(side["time"]))
    return state, ModelParams(float(side["lambda"]), float(side["H"]))


def _sidecar(path: str) -> str:
    return (path[:-4] if path.endswith(".csv") else path) + ".json"


CONSERVATION_COLUMNS = ("t", "ReC+", "ImC+", "ReC-", "ImC-", "ReP", "ImP", "ReH", "ImH")


def write_conservation_report(times: Sequence[float], sets: Sequence[ConservedSet], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CONSERVATION_COLUMNS)
        for t, c in zip(times, sets):
            vals = [t]
            for v in c.as_tuple():
                vals += [v.real, v.imag]
            w.writerow([f"{v:.17g}" for v in vals])


def conservation_drift(sets: Sequence[ConservedSet]) -> dict:
    ref = sets[0].as_tuple()
    names = ("c_plus", "c_minus", "p_momentum", "h_energy")
    return {name: max(abs(c.as_tuple()[i] - ref[i]) for c in sets) for i, name in enumerate(names)}
