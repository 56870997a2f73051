"""Registry of invariant checks shared by the ``verify`` command and the test suite.

Every check computes one non-negative defect and passes when it is strictly
below its threshold. Passing ``tol`` to :func:`run_checks` replaces every
threshold, so ``tol=0`` must fail the whole suite.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from . import field as fld
from .integrator import IntegratorConfig, detect_period, energy_drift_order, flow, integrate
from .phase import (
    ModelParams,
    angular_integral,
    classify,
    equilibria,
    equilibrium_energy,
    hamiltonian,
    hamiltonian_gradient,
    reduced_distance,
    s1_rotate,
    s1_rotate_array,
    vector_field,
)
from .surface import (
    conformality_defects,
    fit_circle,
    gauss_curvature_analytic,
    gauss_curvature_exact,
    generate_mesh,
    helicoidal_residual,
    immersion_grid,
    mean_curvature_discrete,
    period_translation,
    s1_equivalence_defect,
)

CANONICAL = ModelParams()

UNDULOID = (0.1, 0.0, 0.1, 0.0)
NODOID = (1.0, 0.0, 0.0, 0.0)
HELICOIDAL = (1.0, 0.0, 0.0, 1.0)
CYLINDER = (0.5, 0.0, 0.5, 0.0)


@dataclass(frozen=True)
class Check:
    name: str
    threshold: float
    run: Callable[[np.random.Generator], float]
    description: str


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float
    seconds: float
    description: str = ""

    @property
    def passed(self) -> bool:
        return math.isfinite(self.value) and self.value < self.threshold


REGISTRY: dict[str, Check] = {}


def check(name: str, threshold: float, description: str):
    def wrap(fn):
        if name in REGISTRY:
            raise ValueError(f"duplicate check {name!r}")
        REGISTRY[name] = Check(name, threshold, fn, description)
        return fn
    return wrap


def _random_states(rng, n=64, scale=1.0):
    return rng.uniform(-scale, scale, size=(n, 4))


def _fixture_cfg(t_end, stride=1, dt=1e-3):
    return IntegratorConfig(dt=dt, t_span=(0.0, t_end), record_stride=stride)


# -- reduced system ------------------------------------------------------------

@check("phase.energy_flux", 1e-12, "dE/dt along the vector field vanishes")
def _energy_flux(rng):
    worst = 0.0
    for y in _random_states(rng):
        g = hamiltonian_gradient(y, CANONICAL)
        f = vector_field(y, CANONICAL)
        worst = max(worst, abs(g @ f) / (1.0 + np.linalg.norm(g) * np.linalg.norm(f)))
    return worst


@check("phase.angular_flux", 1e-12, "dM/dt along the vector field vanishes")
def _angular_flux(rng):
    worst = 0.0
    for y in _random_states(rng):
        g = np.array([y[3], -y[2], -y[1], y[0]])
        f = vector_field(y, CANONICAL)
        worst = max(worst, abs(g @ f) / (1.0 + np.linalg.norm(g) * np.linalg.norm(f)))
    return worst


@check("phase.s1_equivariance", 1e-12, "the vector field commutes with the S^1 rotation")
def _s1_equivariance(rng):
    worst = 0.0
    for y in _random_states(rng):
        phi = rng.uniform(-np.pi, np.pi)
        lhs = vector_field(s1_rotate(y, phi), CANONICAL)
        rhs = s1_rotate_array(vector_field(y, CANONICAL), phi)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


@check("phase.s1_invariants", 1e-12, "E and M are unchanged by the S^1 rotation")
def _s1_invariants(rng):
    worst = 0.0
    for y in _random_states(rng):
        z = s1_rotate(y, rng.uniform(-np.pi, np.pi))
        worst = max(worst, abs(hamiltonian(z, CANONICAL) - hamiltonian(y, CANONICAL)),
                    abs(angular_integral(z) - angular_integral(y)))
    return worst


@check("phase.classify_s1_invariance", 0.5, "number of states whose class changes under rotation")
def _classify_invariance(rng):
    states = list(_random_states(rng, 32))
    states += [np.array(e.as_array()) for e in equilibria(CANONICAL)[1:]]
    states += [np.array(UNDULOID), np.array(NODOID)]
    changed = 0
    for y in states:
        tag = classify(y, CANONICAL).tag
        for phi in rng.uniform(-np.pi, np.pi, 4):
            changed += classify(s1_rotate(y, phi), CANONICAL).tag != tag
    return float(changed)


@check("phase.equilibria", 1e-14, "vector field at the listed equilibria")
def _equilibria(rng):
    worst = 0.0
    for params in (CANONICAL, ModelParams(1.0, 0.5), ModelParams(-0.5, 0.5)):
        for e in equilibria(params):
            worst = max(worst, float(np.abs(vector_field(e, params)).max()))
    return worst


@check("phase.equilibrium_energy", 1e-15, "equilibrium energy against -lam^2/(8H)")
def _equilibrium_energy(rng):
    return abs(equilibrium_energy(CANONICAL) + 1.0 / 16.0)


# -- integrator -------------------------------------------------------------------

def _drifts(t_end):
    return [integrate(y, CANONICAL, _fixture_cfg(t_end)).max_drift for y in (UNDULOID, NODOID, HELICOIDAL)]


@check("integrator.energy_drift", 1e-10, "max |E(t) - E(0)| on three orbit classes, t in [0, 20]")
def _energy_drift(rng):
    return max(d[0] for d in _drifts(20.0))


@check("integrator.angular_drift", 1e-12, "max |M(t) - M(0)| on three orbit classes, t in [0, 20]")
def _angular_drift(rng):
    return max(d[1] for d in _drifts(20.0))


@check("integrator.reversibility", 1e-11, "forward then backward integration returns to the start")
def _reversibility(rng):
    worst = 0.0
    for method in ("midpoint", "gauss4"):
        cfg = IntegratorConfig(dt=1e-3, t_span=(0.0, 1e-3), method=method)
        for y in (UNDULOID, NODOID, HELICOIDAL):
            fwd, _ = flow(y, CANONICAL, 2.0, cfg)
            back, _ = flow(fwd, CANONICAL, -2.0, cfg)
            worst = max(worst, float(np.abs(back - np.array(y)).max()))
    return worst


@check("integrator.s1_commutation", 1e-10, "integrating a rotated start equals rotating the trajectory")
def _s1_commutation(rng):
    worst = 0.0
    cfg = _fixture_cfg(5.0, stride=10)
    for y in _random_states(rng, 4):
        phi = rng.uniform(-np.pi, np.pi)
        a = integrate(s1_rotate(y, phi), CANONICAL, cfg).states
        b = s1_rotate_array(integrate(y, CANONICAL, cfg).states, phi)
        worst = max(worst, float(np.abs(a - b).max()))
    return worst


@check("integrator.midpoint_order", 0.1, "|observed energy-drift order - 2| for the midpoint rule")
def _midpoint_order(rng):
    _, orders = energy_drift_order(UNDULOID, CANONICAL, [4e-3, 2e-3, 1e-3], 10.0, method="midpoint")
    return float(np.max(np.abs(orders - 2.0)))


@check("integrator.period_return", 1e-8, "S^1-reduced return distance after one detected period")
def _period_return(rng):
    traj = integrate(UNDULOID, CANONICAL, _fixture_cfg(15.0))
    period = detect_period(traj, tol=1e-8)
    if period is None:
        return math.inf
    y, _ = flow(UNDULOID, CANONICAL, period, _fixture_cfg(1e-3))
    return reduced_distance(y, UNDULOID)


# -- surfaces ---------------------------------------------------------------------

def _cylinder_mesh(n=200):
    span = 2.0 * np.pi
    cfg = IntegratorConfig(dt=span / (10 * (n - 1)), t_span=(0.0, span), record_stride=10)
    return generate_mesh(integrate(CYLINDER, CANONICAL, cfg), n, (0.0, span), CANONICAL)


@check("surface.cylinder", 1e-8, "max |x^2 + (y-1)^2 - 1| on the equilibrium mesh")
def _cylinder(rng):
    P = _cylinder_mesh().points
    return float(np.abs(P[:, 0] ** 2 + (P[:, 1] - 1.0) ** 2 - 1.0).max())


@check("surface.cylinder_mean_curvature", 1e-3, "|median discrete H - 1/2| on the cylinder")
def _cylinder_h(rng):
    h = mean_curvature_discrete(_cylinder_mesh())
    return abs(float(np.nanmedian(h)) - 0.5)


@check("surface.helicoidal_invariance", 1e-8, "max |X(t, x+tau) - screw(X(t, x), tau)|")
def _helicoidal(rng):
    worst = 0.0
    for y in (HELICOIDAL, (0.3, 0.4, -0.2, 0.1), UNDULOID):
        traj = integrate(y, CANONICAL, _fixture_cfg(5.0, stride=25))
        worst = max(worst, helicoidal_residual(traj, CANONICAL))
    return worst


@check("surface.helicoidal_pitch", 1e-8, "|X3(t, x + 2 pi) - X3(t, x) - 8 pi M|")
def _pitch(rng):
    worst = 0.0
    for y in (HELICOIDAL, (0.3, 0.4, -0.2, 0.1)):
        traj = integrate(y, CANONICAL, _fixture_cfg(5.0, stride=25))
        xs = np.linspace(0.0, 2.0 * np.pi, 9)
        a = immersion_grid(traj, xs, CANONICAL)
        b = immersion_grid(traj, xs + 2.0 * np.pi, CANONICAL)
        pitch = 8.0 * np.pi * angular_integral(y)
        worst = max(worst, float(np.abs(b[..., 2] - a[..., 2] - pitch).max()))
    return worst


@check("surface.s1_equivalence", 1e-8, "rotated start versus screwed mesh, vertex-wise")
def _s1_equivalence(rng):
    cfg = _fixture_cfg(3.0, stride=20)
    worst = 0.0
    for y in _random_states(rng, 3):
        worst = max(worst, s1_equivalence_defect(y, rng.uniform(-np.pi, np.pi), CANONICAL, cfg))
    return worst


@check("surface.revolution", 1e-8, "circle-fit residual and X3 spread of t-rows when M = 0")
def _revolution(rng):
    worst = 0.0
    for y in (UNDULOID, NODOID):
        traj = integrate(y, CANONICAL, _fixture_cfg(5.0, stride=50))
        grid = generate_mesh(traj, 40, (0.0, 2.0 * np.pi), CANONICAL).grid
        for row in grid:
            _, _, resid = fit_circle(row)
            worst = max(worst, resid, float(np.ptp(row[:, 2])))
    return worst


@check("surface.closed_profile", 1e-12, "max |X(t, 2 pi) - X(t, 0)| when M = 0")
def _closed_profile(rng):
    worst = 0.0
    for y in (UNDULOID, NODOID, CYLINDER):
        traj = integrate(y, CANONICAL, _fixture_cfg(5.0, stride=50))
        g = immersion_grid(traj, [0.0, 2.0 * np.pi], CANONICAL)
        worst = max(worst, float(np.abs(g[:, 1] - g[:, 0]).max()))
    return worst


def _fixture_meshes():
    out = []
    for y, t_end in ((CYLINDER, 5.0), (UNDULOID, 10.0), (NODOID, 5.0), (HELICOIDAL, 5.0)):
        traj = integrate(y, CANONICAL, _fixture_cfg(t_end, stride=10))
        out.append(generate_mesh(traj, 200, (0.0, 2.0 * np.pi), CANONICAL))
    return out


@check("surface.conformality", 1e-6, "max of | |X_x|^2 - |X_t|^2 | and |X_x . X_t| on fixture meshes")
def _conformality(rng):
    return max(max(d["length_mismatch"], d["orthogonality"])
               for d in map(conformality_defects, _fixture_meshes()))


@check("surface.conformal_factor", 1e-6, "max | |X_x|^2 - 4 rho^2 | on fixture meshes")
def _conformal_factor(rng):
    return max(conformality_defects(m)["factor_mismatch"] for m in _fixture_meshes())


@check("surface.gauss_curvature", 1e-6, "finite-difference K against the exact vector-field K")
def _gauss(rng):
    traj = integrate(UNDULOID, CANONICAL, _fixture_cfg(10.0, stride=5))
    exact = gauss_curvature_exact(traj.states, CANONICAL)
    fd = np.array([gauss_curvature_analytic(traj, i) for i in range(2, len(traj) - 2)])
    return float(np.abs(fd - exact[2:-2]).max())


@check("surface.period_translation", 1e-6, "unduloid mesh against itself one period later")
def _period_translation(rng):
    traj = integrate(UNDULOID, CANONICAL, _fixture_cfg(15.0))
    period = detect_period(traj)
    if period is None:
        return math.inf
    return period_translation(UNDULOID, CANONICAL, period)[1]


# -- field system ---------------------------------------------------------------------

def _ansatz_run(t_end=2.0, n=128, dt=1e-3, stride=10):
    f0 = fld.ansatz_field(UNDULOID, CANONICAL, n=n)
    fields = fld.evolve(f0, CANONICAL, dt, t_end, stride=stride)
    traj = integrate(UNDULOID, CANONICAL, IntegratorConfig(dt=dt, t_span=(0.0, t_end), record_stride=stride))
    return fields, traj


@check("field.reduction", 1e-6, "evolved ansatz data against the reduced trajectory")
def _reduction(rng):
    fields, traj = _ansatz_run()
    return fld.reduction_error(fields, traj.states, CANONICAL)


@check("field.conservation", 1e-6, "drift of C+, C-, P and the energy on perturbed ansatz data")
def _field_conservation(rng):
    f0 = fld.ansatz_field(UNDULOID, CANONICAL, n=128)
    noise = fld.smooth_random_field(rng, n=128, amplitude=1e-3)
    start = fld.FieldState(f0.length, f0.psi1 + noise.psi1, f0.psi2 + noise.psi2)
    fields = fld.evolve(start, CANONICAL, 1e-3, 2.0, stride=50)
    drift = fld.conservation_drift([fld.conserved_quantities(f, CANONICAL) for f in fields])
    return max(drift.values())


@check("field.reality", 1e-8, "largest imaginary part of the integrals on ansatz data")
def _reality(rng):
    fields, _ = _ansatz_run()
    return max(fld.conserved_quantities(f, CANONICAL).reality_defect for f in fields)


@check("field.ansatz_momentum", 1e-8, "|P - M L| and |C+|, |C-| on ansatz data")
def _momentum(rng):
    worst = 0.0
    for y in (HELICOIDAL, (0.3, 0.4, -0.2, 0.1), UNDULOID):
        f = fld.ansatz_field(y, CANONICAL)
        c = fld.conserved_quantities(f, CANONICAL)
        worst = max(worst, abs(c.p_momentum - angular_integral(y) * f.length),
                    abs(c.c_plus), abs(c.c_minus))
    return worst


@check("field.spectral_concentration", 1e-8, "norm fraction outside the e^{i lam x} mode")
def _concentration(rng):
    fields, _ = _ansatz_run()
    return 1.0 - min(fld.spectral_concentration(f, CANONICAL) for f in fields)


@check("field.path_independence", 1e-6, "t-then-x versus x-then-t inducing on an evolved field")
def _path(rng):
    f0 = fld.ansatz_field(UNDULOID, CANONICAL, n=128)
    noise = fld.smooth_random_field(rng, n=128, amplitude=1e-3)
    start = fld.FieldState(f0.length, f0.psi1 + noise.psi1, f0.psi2 + noise.psi2)
    fields = fld.evolve(start, CANONICAL, 1e-3, 1.0, stride=10)
    a = fld.induce_generic(fields, CANONICAL, "tx")
    b = fld.induce_generic(fields, CANONICAL, "xt")
    return float(np.abs(a.points - b.points).max())


@check("field.dirac_residual", 1e-6, "residual of the linear spinor system on ansatz fields")
def _dirac(rng):
    traj = integrate(UNDULOID, CANONICAL, _fixture_cfg(2.0))
    return fld.dirac_residual(fld.ansatz_sequence(traj.states, traj.times, CANONICAL, n=64), CANONICAL)


# -- runner -------------------------------------------------------------------------

def select(pattern: Optional[str] = None) -> list[Check]:
    checks = list(REGISTRY.values())
    if pattern:
        checks = [c for c in checks if pattern in c.name]
    return checks


def run_checks(pattern: Optional[str] = None, tol: Optional[float] = None,
               seed: int = 0) -> list[CheckResult]:
    """Run the selected checks in registry order.

    Each check gets a generator seeded by ``seed`` and its registry position, so a
    filtered run reproduces the values of the full run.
    """
    results = []
    index = {name: i for i, name in enumerate(REGISTRY)}
    for c in select(pattern):
        rng = np.random.default_rng([seed, index[c.name]])
        t0 = time.perf_counter()
        value = float(c.run(rng))
        threshold = c.threshold if tol is None else tol
        results.append(CheckResult(c.name, value, threshold, time.perf_counter() - t0, c.description))
    return results


def format_table(results: Iterable[CheckResult]) -> str:
    results = list(results)
    width = max((len(r.name) for r in results), default=4)
    lines = [f"{'check':<{width}}  {'value':>11}  {'threshold':>9}  result"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {r.value:11.3e}  {r.threshold:9.1e}  {'PASS' if r.passed else 'FAIL'}")
    n_pass = sum(r.passed for r in results)
    lines.append(f"{n_pass}/{len(results)} checks passed")
    return "\n".join(lines)
