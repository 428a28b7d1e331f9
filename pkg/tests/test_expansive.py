import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anisotl.errors import NotExpansive, NotExponential, Singular
from anisotl.linalg_expansive import (
    build_ellipsoid,
    fractional_power,
    matrix_from_json,
    measure_nu_constant,
    measure_quasi_triangle,
    metric_ball,
    quasi_norm,
    real_matrix_log,
    sample_points,
    spatial_gauge,
    transpose_gauge,
    validate_expansive,
    unit_ball_volume,
    WeightNu,
)

JORDAN = [[2.0, 1.0], [0.0, 2.0]]


def expm_oracle(M, order=30):
    """Independent scaling-and-squaring exponential used as a test oracle."""
    M = np.asarray(M, dtype=float)
    n_squarings = max(0, int(math.ceil(math.log2(max(np.linalg.norm(M), 1e-16)))) + 1)
    X = M / 2.0**n_squarings
    T = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, order):
        term = term @ X / k
        T = T + term
    for _ in range(n_squarings):
        T = T @ T
    return T


class TestValidate:
    def test_jordan_block_is_expansive(self):
        E = validate_expansive(JORDAN)
        assert E.absdet == pytest.approx(4.0)
        assert E.d == 2

    def test_unit_eigenvalue_rejected(self):
        with pytest.raises(NotExpansive):
            validate_expansive([[1.0, 0.0], [0.0, 2.0]])

    def test_singular_rejected(self):
        with pytest.raises(Singular):
            validate_expansive([[0.0, 0.0], [0.0, 2.0]])

    def test_diag_2_4_exponents(self):
        E = validate_expansive(np.diag([2.0, 4.0]))
        # chosen brackets: geometric midpoint and 1% margin
        lam_minus = math.sqrt(2.0)
        lam_plus = 4.0 * 1.01
        assert E.lambda_minus == pytest.approx(lam_minus)
        assert E.lambda_plus == pytest.approx(lam_plus)
        assert E.zeta_minus == pytest.approx(math.log(lam_minus) / math.log(8.0))
        assert E.zeta_plus == pytest.approx(math.log(lam_plus) / math.log(8.0))
        assert 0.0 < E.zeta_minus < 0.5 < E.zeta_plus

    def test_zeta_bracket_invariant(self):
        for mat in ([[3.0]], np.diag([2.0, 4.0]), JORDAN, [[0.0, -2.0], [2.0, 0.0]]):
            E = validate_expansive(mat)
            assert 0.0 < E.zeta_minus < 1.0 / E.d
            assert E.zeta_plus > 1.0 / E.d

    def test_json_round_trip(self):
        E = matrix_from_json({"dim": 2, "entries": [2, 1, 0, 2]})
        assert np.allclose(E.A, JORDAN)


class TestMatrixLog:
    def test_diagonal(self):
        E = validate_expansive(np.diag([2.0, 4.0]))
        B = real_matrix_log(E)
        assert np.allclose(B, np.diag([math.log(2.0), math.log(4.0)]), atol=1e-12)

    def test_scaled_identity(self):
        E = validate_expansive(2.0 * np.eye(2))
        assert np.allclose(real_matrix_log(E), math.log(2.0) * np.eye(2), atol=1e-12)

    def test_jordan_block_against_oracle(self):
        E = validate_expansive(JORDAN)
        B = real_matrix_log(E)
        assert np.max(np.abs(expm_oracle(B) - np.asarray(JORDAN))) < 1e-10

    def test_negative_axis_rejected(self):
        E = validate_expansive([[-2.0, 0.0], [0.0, 3.0]])
        assert E.log is None
        with pytest.raises(NotExponential):
            real_matrix_log(E)

    def test_rotation_dilation_has_real_log(self):
        # complex eigenvalue pair 2i, -2i: real log exists
        E = validate_expansive([[0.0, -2.0], [2.0, 0.0]])
        B = real_matrix_log(E)
        assert np.max(np.abs(expm_oracle(B) - E.A)) < 1e-9


class TestFractionalPower:
    def test_half_power_of_diag(self):
        E = validate_expansive(np.diag([4.0]))
        assert np.allclose(fractional_power(E, 0.5), [[2.0]], atol=1e-12)

    def test_zero_power(self):
        E = validate_expansive(JORDAN)
        assert np.allclose(fractional_power(E, 0.0), np.eye(2))

    def test_square_against_matrix_product(self):
        E = validate_expansive(JORDAN)
        A = np.asarray(JORDAN)
        assert np.allclose(fractional_power(E, 2.0), A @ A, atol=1e-10)

    @pytest.mark.parametrize("mat", [np.diag([2.0, 4.0]), JORDAN])
    def test_semigroup(self, mat):
        E = validate_expansive(mat)
        grid = np.linspace(-3, 3, 7)
        for s in grid:
            for t in grid:
                lhs = fractional_power(E, s) @ fractional_power(E, t)
                rhs = fractional_power(E, s + t)
                assert np.linalg.norm(lhs - rhs) <= 1e-8 * max(np.linalg.norm(rhs), 1.0)


class TestEllipsoid:
    def test_dyadic_line(self):
        E = validate_expansive([[2.0]])
        S = build_ellipsoid(E)
        # geometric series 1 + 1/4 + ... = 4/3 and unit length interval
        assert S.Q[0, 0] == pytest.approx(4.0 / 3.0, abs=1e-12)
        assert S.contains(np.array([[0.499]]))[0]
        assert not S.contains(np.array([[0.501]]))[0]

    def test_isotropic_disk(self):
        E = validate_expansive(2.0 * np.eye(2))
        S = build_ellipsoid(E)
        r_star = 1.0 / math.sqrt(math.pi)  # disk of area one
        assert S.contains(np.array([[r_star - 1e-6, 0.0]]))[0]
        assert not S.contains(np.array([[r_star + 1e-6, 0.0]]))[0]

    @pytest.mark.parametrize("mat", [[[2.0]], np.diag([2.0, 4.0]), JORDAN])
    def test_unit_measure_via_monte_carlo(self, mat):
        E = validate_expansive(mat)
        S = build_ellipsoid(E)
        # closed-form volume identity
        d = E.d
        vol = S.c ** (d / 2.0) * unit_ball_volume(d) / math.sqrt(np.linalg.det(S.Q))
        assert vol == pytest.approx(1.0, abs=1e-10)
        # independent Monte Carlo cross-check
        rng = np.random.default_rng(5)
        box = 2.0
        pts = rng.uniform(-box, box, size=(200_000, d))
        frac = np.mean(S.contains(pts))
        assert frac * (2 * box) ** d == pytest.approx(1.0, abs=0.05)

    @pytest.mark.parametrize("mat", [[[2.0]], np.diag([2.0, 4.0]), JORDAN])
    def test_expansion_gap(self, mat):
        E = validate_expansive(mat)
        S = build_ellipsoid(E)
        assert S.r > 1.0
        bnd = S.boundary_points(128)
        A_inv = np.linalg.inv(E.A)
        assert np.all(S.contains(S.r * bnd @ A_inv.T))
        assert np.all(S.contains(bnd / S.r))


class TestQuasiNorm:
    def setup_method(self):
        self.S1 = build_ellipsoid(validate_expansive([[2.0]]))

    def test_zero(self):
        assert quasi_norm(self.S1, np.array([0.0])) == 0.0

    def test_first_shell(self):
        assert quasi_norm(self.S1, np.array([0.6])) == 1.0

    def test_homogeneity_of_example(self):
        assert quasi_norm(self.S1, np.array([1.2])) == 2.0

    @pytest.mark.parametrize("mat", [[[2.0]], np.diag([2.0, 4.0]), JORDAN])
    def test_exact_homogeneity_and_symmetry(self, mat):
        E = validate_expansive(mat)
        S = build_ellipsoid(E)
        pts = sample_points(S, 2000, seed=3)
        shell, sat = S.shell_index(pts)
        shell_a, sat_a = S.shell_index(pts @ E.A.T)
        ok = ~(sat | sat_a)
        assert np.mean(ok) > 0.99
        assert np.array_equal(shell_a[ok], shell[ok] + 1)
        # dyadic determinants make the float identity exact as well
        vals = quasi_norm(S, pts[ok])
        vals_a = quasi_norm(S, pts[ok] @ E.A.T)
        assert np.array_equal(vals_a, E.absdet * vals)
        assert np.array_equal(quasi_norm(S, -pts[ok]), vals)
        assert np.all(vals > 0)

    def test_quasi_triangle_stability(self):
        S = build_ellipsoid(validate_expansive(JORDAN))
        c1 = measure_quasi_triangle(S, n=4096, seed=13)
        c2 = measure_quasi_triangle(S, n=16384, seed=13)
        assert np.isfinite(c1) and c1 >= 0.5
        assert abs(c2 - c1) <= 0.1 * c1

    def test_nu_submultiplicative_stability(self):
        S = build_ellipsoid(validate_expansive(np.diag([2.0, 4.0])))
        w = WeightNu(S, beta=1.5)
        k1 = measure_nu_constant(w, n=4096, seed=1)
        k2 = measure_nu_constant(w, n=16384, seed=1)
        assert np.isfinite(k1)
        assert abs(k2 - k1) <= 0.25 * k1

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(st.floats(-50, 50), min_size=2, max_size=2),
    )
    def test_symmetry_property(self, xs):
        x = np.array(xs)
        S = _JORDAN_STRUCTURE
        assert quasi_norm(S, -x) == quasi_norm(S, x)


_JORDAN_STRUCTURE = build_ellipsoid(validate_expansive(JORDAN))


class TestMetricBall:
    def setup_method(self):
        self.S = build_ellipsoid(validate_expansive([[2.0]]))

    @pytest.mark.parametrize("radius,level", [(1.0, 0), (2.0, 1), (3.0, 2), (0.5, -1)])
    def test_levels(self, radius, level):
        ball = metric_ball(self.S, np.zeros(1), radius)
        assert ball.level == level

    def test_bad_radius(self):
        with pytest.raises(ValueError):
            metric_ball(self.S, np.zeros(1), 0.0)


class TestScaleGauge:
    def test_line_gauge_closed_form(self):
        E = validate_expansive([[2.0]])
        g = spatial_gauge(E)
        xs = np.array([[0.5], [1.0], [2.0], [-3.0], [0.1]])
        expected = np.log2(2.0 * np.abs(xs[:, 0]))
        assert np.allclose(g.t(xs), expected, atol=1e-10)

    @pytest.mark.parametrize("mat", [np.diag([2.0, 4.0]), JORDAN])
    def test_cocycle(self, mat):
        E = validate_expansive(mat)
        g = spatial_gauge(E)
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(200, 2)) * 10 ** rng.uniform(-2, 2, size=(200, 1))
        for u in (1.0, -2.0, 0.375):
            moved = pts @ g.dilate(u).T
            assert np.allclose(g.t(moved), g.t(pts) + u, atol=1e-9)

    def test_transpose_gauge_matches_transposed_matrix(self):
        E = validate_expansive(JORDAN)
        g = transpose_gauge(E)
        rng = np.random.default_rng(4)
        pts = rng.normal(size=(50, 2))
        moved = pts @ E.A  # (A^T) applied to points
        assert np.allclose(g.t(moved), g.t(pts) + 1.0, atol=1e-9)

    def test_level_sets(self):
        E = validate_expansive(np.diag([2.0, 4.0]))
        g = transpose_gauge(E)
        pts = g.points_on_level(1.5, 64)
        assert np.allclose(g.t(pts), 1.5, atol=1e-9)
        assert g.level_extent(2.0) > g.level_extent(0.0)
