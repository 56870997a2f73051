import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmcflow.phase import (
    DomainError,
    ModelParams,
    PhaseState,
    SurfaceTag,
    align_phase,
    angular_integral,
    as_vector,
    classify,
    equilibria,
    equilibrium_energy,
    hamiltonian,
    hamiltonian_gradient,
    jacobian,
    reduced_distance,
    s1_rotate,
    s1_rotate_array,
    separatrix_points,
    vector_field,
)

P = ModelParams()

coord = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)
states = st.tuples(coord, coord, coord, coord)
angles = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)
nonzero = st.one_of(st.floats(0.05, 3.0), st.floats(-3.0, -0.05))


def _rho(y):
    return sum(v * v for v in y)


class TestParams:
    def test_defaults(self):
        assert P.lam == 0.5 and P.mean_curvature == 0.5
        assert P.is_canonical

    @pytest.mark.parametrize("lam,h", [(0.0, 0.5), (0.5, 0.0), (math.nan, 0.5), (0.5, math.inf)])
    def test_rejects(self, lam, h):
        with pytest.raises(DomainError):
            ModelParams(lam, h)

    def test_state_rejects_nonfinite(self):
        with pytest.raises(DomainError):
            PhaseState(0.0, math.nan, 0.0, 0.0)
        with pytest.raises(DomainError):
            vector_field((0.0, 0.0, math.inf, 0.0), P)
        with pytest.raises(DomainError):
            as_vector([1.0, 2.0, 3.0])

    def test_complex_round_trip(self):
        s = PhaseState.from_complex(1 + 2j, -3 + 0.5j)
        assert (s.r, s.s) == (1 + 2j, -3 + 0.5j)
        assert s.rho == pytest.approx(1 + 4 + 9 + 0.25)


class TestVectorField:
    def test_origin(self):
        assert np.all(vector_field((0, 0, 0, 0), P) == 0.0)

    def test_equilibrium(self):
        assert np.all(vector_field((0.5, 0, 0.5, 0), P) == 0.0)

    def test_unit_p1(self):
        np.testing.assert_allclose(vector_field((1, 0, 0, 0), P), [-0.5, 0, -1, 0], atol=0)

    def test_complex_form(self):
        y = np.array([0.3, -0.7, 0.2, 0.9])
        lam, h = 0.8, -0.3
        r, s = complex(y[0], y[1]), complex(y[2], y[3])
        rho = abs(r) ** 2 + abs(s) ** 2
        rt = -lam * r + 2 * h * rho * s
        stt = lam * s - 2 * h * rho * r
        np.testing.assert_allclose(vector_field(y, ModelParams(lam, h)),
                                   [rt.real, rt.imag, stt.real, stt.imag], rtol=1e-14)

    @given(states)
    def test_jacobian_matches_differences(self, y):
        y = np.array(y)
        eps = 1e-6
        fd = np.column_stack([(vector_field(y + eps * e, P) - vector_field(y - eps * e, P)) / (2 * eps)
                              for e in np.eye(4)])
        np.testing.assert_allclose(jacobian(y, P), fd, atol=1e-6 * (1 + _rho(y)))

    @given(states)
    def test_hamiltonian_form(self, y):
        # p-dot = dH/dq, q-dot = -dH/dp
        g = hamiltonian_gradient(y, P)
        f = vector_field(y, P)
        np.testing.assert_allclose(f, [g[2], g[3], -g[0], -g[1]], atol=1e-12 * (1 + _rho(y) ** 2))


class TestIntegrals:
    def test_hamiltonian_values(self):
        assert hamiltonian((0, 0, 0, 0), P) == 0.0
        assert hamiltonian((0.5, 0, 0.5, 0), P) == pytest.approx(-1 / 16, abs=1e-16)
        assert hamiltonian((1, 0, 0, 0), P) == pytest.approx(0.25, abs=1e-16)

    def test_equilibrium_energy_is_not_minus_one_over_32(self):
        # independent substitution: (H/2) rho^2 - lam p.q with rho = 1/2, p.q = 1/4
        rho, pq = 0.25 + 0.25, 0.25
        e = 0.5 * 0.5 * rho**2 - 0.5 * pq
        assert e == -1 / 16
        assert equilibrium_energy(P) == pytest.approx(e, abs=1e-16)
        assert abs(equilibrium_energy(P) + 1 / 32) > 1e-2

    def test_angular_values(self):
        assert angular_integral((0.5, 0, 0.5, 0)) == 0.0
        assert angular_integral((1, 0, 0, 1)) == 1.0
        assert angular_integral((0.3, 0.4, -0.2, 0.1)) == pytest.approx(0.11, abs=1e-16)

    @given(states, nonzero, nonzero)
    def test_energy_flux_vanishes(self, y, lam, h):
        p = ModelParams(lam, h)
        g, f = hamiltonian_gradient(y, p), vector_field(y, p)
        assert abs(g @ f) < 1e-12 * (1 + np.linalg.norm(g) * np.linalg.norm(f))

    @given(states, nonzero, nonzero)
    def test_angular_flux_vanishes(self, y, lam, h):
        f = vector_field(y, ModelParams(lam, h))
        g = np.array([y[3], -y[2], -y[1], y[0]])
        assert abs(g @ f) < 1e-12 * (1 + np.linalg.norm(g) * np.linalg.norm(f))

    @given(states)
    def test_gradient_matches_differences(self, y):
        y = np.array(y)
        eps = 1e-6
        fd = [(hamiltonian(y + eps * e, P) - hamiltonian(y - eps * e, P)) / (2 * eps) for e in np.eye(4)]
        np.testing.assert_allclose(hamiltonian_gradient(y, P), fd, atol=1e-6 * (1 + _rho(y)))


class TestSymmetry:
    def test_identity(self):
        assert s1_rotate((0.3, 0.4, -0.2, 0.1), 0.0) == PhaseState(0.3, 0.4, -0.2, 0.1)

    def test_quarter_turn(self):
        np.testing.assert_allclose(s1_rotate((1, 0, 0, 1), math.pi / 2).as_array(), [0, 1, -1, 0], atol=1e-16)

    @given(states, angles)
    def test_preserves_integrals(self, y, phi):
        z = s1_rotate(y, phi)
        scale = 1 + _rho(y) ** 2
        assert abs(hamiltonian(z, P) - hamiltonian(y, P)) < 1e-13 * scale
        assert abs(angular_integral(z) - angular_integral(y)) < 1e-13 * scale

    @given(states, angles)
    def test_equivariance(self, y, phi):
        lhs = vector_field(s1_rotate(y, phi), P)
        rhs = s1_rotate_array(vector_field(y, P), phi)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + _rho(y) ** 1.5))

    @given(states, angles)
    def test_reduced_distance_zero_on_orbit(self, y, phi):
        assert reduced_distance(s1_rotate(y, phi), y) < 1e-12 * (1 + _rho(y))

    @given(states, states)
    def test_reduced_distance_is_minimum(self, a, b):
        d = reduced_distance(a, b)
        trial = min(np.linalg.norm(s1_rotate_array(np.array(a), t) - np.array(b))
                    for t in np.linspace(0, 2 * np.pi, 181))
        assert d <= trial + 1e-12
        _, phi = align_phase(a, b)
        assert np.linalg.norm(s1_rotate_array(np.array(a), phi) - np.array(b)) == pytest.approx(d, abs=1e-12)


class TestEquilibria:
    def test_canonical(self):
        eq = [e.as_array() for e in equilibria(P)]
        np.testing.assert_array_equal(eq, [[0, 0, 0, 0], [0.5, 0, 0.5, 0], [-0.5, 0, -0.5, 0]])

    def test_lam_one(self):
        p = ModelParams(1.0, 0.5)
        for e in equilibria(p)[1:]:
            assert e.rho == pytest.approx(1.0, abs=1e-15)
            assert abs(e.p1) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
            assert np.abs(vector_field(e, p)).max() < 1e-15

    @given(nonzero, nonzero)
    def test_general_params_are_fixed_points(self, lam, h):
        p = ModelParams(lam, h)
        for e in equilibria(p):
            assert np.abs(vector_field(e, p)).max() < 1e-13 * (1 + abs(lam) + abs(lam / h))
        rho = abs(lam / (2 * h))
        expected = 0.5 * h * rho**2 - abs(lam) * math.copysign(1.0, h) * rho / 2
        assert equilibrium_energy(p) == pytest.approx(expected, rel=1e-12)


class TestClassify:
    @pytest.mark.parametrize("y,tag", [
        ((0.5, 0, 0.5, 0), SurfaceTag.CYLINDER),
        ((-0.5, 0, -0.5, 0), SurfaceTag.CYLINDER),
        ((0.1, 0, 0.1, 0), SurfaceTag.UNDULOID),
        ((1, 0, 0, 0), SurfaceTag.NODOID),
        ((1, 0, 0, 1), SurfaceTag.HELICOIDAL),
        ((0, 0, 0, 0), SurfaceTag.DEGENERATE),
        ((math.sqrt(0.5), 0, math.sqrt(0.5), 0), SurfaceTag.SPHERE),
    ])
    def test_fixtures(self, y, tag):
        assert classify(y, P).tag is tag

    def test_record_carries_integrals(self):
        c = classify((0.1, 0, 0.1, 0), P)
        assert c.energy == hamiltonian((0.1, 0, 0.1, 0), P)
        assert c.energy == pytest.approx(-0.0049, abs=1e-16)
        assert c.angular == 0.0
        assert str(c.tag) == "Unduloid"

    def test_tolerance_dependence(self):
        y = (math.sqrt(0.5) * 1.001, 0, math.sqrt(0.5), 0)
        e = hamiltonian(y, P)
        assert classify(y, P, tol=1e-9).tag is SurfaceTag.NODOID
        assert classify(y, P, tol=2 * abs(e)).tag is SurfaceTag.SPHERE

    def test_rejects_bad_tol(self):
        with pytest.raises(DomainError):
            classify((1, 0, 0, 0), P, tol=0.0)

    @given(states, angles)
    def test_s1_invariant(self, y, phi):
        assert classify(s1_rotate(y, phi), P).tag is classify(y, P).tag

    @settings(max_examples=50)
    @given(angles)
    def test_rotated_equilibria_are_cylinders(self, phi):
        for e in equilibria(P)[1:]:
            assert classify(s1_rotate(e, phi), P).tag is SurfaceTag.CYLINDER


def test_separatrix_points_have_zero_energy():
    pts = separatrix_points(P, 50)
    e = [hamiltonian((p, 0, q, 0), P) for p, q in pts]
    assert np.max(np.abs(e)) < 1e-15


def test_separatrix_negative_ratio():
    p = ModelParams(-0.5, 0.5)
    pts = separatrix_points(p, 20)
    assert np.max(np.abs([hamiltonian((a, 0, b, 0), p) for a, b in pts])) < 1e-15
    assert np.all(pts[:, 0] * pts[:, 1] <= 1e-15)
