import numpy as np
import pytest

from semilab.cutoffs import psi_profile
from semilab.models import get_model
from semilab.symbols import (CalibratedConstants, PhasePoint, ProofConstants,
                             SymbolError, F_at, G_at, Psi_at, calibrate_constants,
                             chi_t_at, choose_R, eval_F, eval_g, eval_lambda,
                             eval_p, eval_q, g_at, hamilton_derivative,
                             hamilton_im_re_symbol, im_p_symbol, lambda_at, p_at,
                             q_at, q_hessian, re_p_symbol)

DAVIES = get_model("davies")
HARMONIC = get_model("harmonic_complex")
MAGNETIC = get_model("magnetic_sqrt")


def P(x, xi):
    return PhasePoint((x,), (xi,))


class TestChi:
    def test_plateau_at_origin(self):
        assert chi_t_at(P(0.0, 0.0), 1.0) == 1.0

    def test_outside_support(self):
        assert chi_t_at(P(0.0, 3.0), 1.0) == 0.0

    def test_transition_value_equals_profile(self):
        from semilab.cutoffs import chi_profile
        prof = chi_profile()
        assert chi_t_at(P(0.0, 1.5), 1.0) == pytest.approx(prof.value(1.5), rel=1e-14)

    def test_rejects_nonpositive_t(self):
        with pytest.raises(SymbolError):
            chi_t_at(P(0.0, 0.0), 0.0)


class TestChooseR:
    def test_davies(self):
        assert choose_R(DAVIES) == 8.0

    def test_magnetic_sqrt(self):
        assert choose_R(MAGNETIC) == 8.0

    def test_zero_potential_minimum(self):
        from semilab.models import PotentialModel, VectorField, zero_field
        m = PotentialModel("null", 1, zero_field(1), zero_field(1),
                           VectorField([zero_field(1)]))
        assert choose_R(m) == 2.0


class TestPQ:
    def test_harmonic_p_equals_q(self):
        X = P(1.0, 1.0)
        assert p_at(HARMONIC, X) == 2.0 + 1.0j
        assert q_at(HARMONIC, X, 8.0) == p_at(HARMONIC, X)

    def test_magnetic_plateau(self):
        X = P(0.0, 1.0)
        assert q_at(MAGNETIC, X, 8.0) == 0.0
        assert p_at(MAGNETIC, X) == 0.0

    def test_magnetic_beyond_cutoff(self):
        X = P(0.0, 40.0)
        assert p_at(MAGNETIC, X) == pytest.approx(1521.0)
        assert q_at(MAGNETIC, X, 8.0) == pytest.approx(1600.0)

    def test_p_equals_q_wherever_chi_is_one(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(-5, 5, (200, 1))
        xi = rng.uniform(-8, 8, (200, 1))
        from semilab.symbols import eval_chi_t
        plateau = np.asarray(eval_chi_t(x, xi, 16.0)) == 1.0
        p = eval_p(MAGNETIC, x, xi)
        q = eval_q(MAGNETIC, x, xi, 8.0)
        assert np.all(p[plateau] == q[plateau])


class TestLambda:
    def test_davies_example(self):
        assert lambda_at(DAVIES, P(1.0, 1.0)) == 9.0

    def test_vanishes_when_all_terms_vanish(self):
        assert lambda_at(DAVIES, P(0.0, 0.0)) == 0.0

    def test_harmonic_direct(self):
        # |xi|^2 + V1 + 2|V2'|^2 at (x, xi) = (2, 2): 4 + 4 + 2
        assert lambda_at(HARMONIC, P(2.0, 2.0)) == 10.0

    def test_nonnegative_on_random_points(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(-50, 50, (500, 1))
        xi = rng.uniform(-50, 50, (500, 1))
        for m in (DAVIES, HARMONIC, MAGNETIC):
            assert np.all(eval_lambda(m, x, xi, "p") >= 0.0)
            assert np.all(eval_lambda(m, x, xi, "q", 8.0) >= 0.0)


class TestF:
    def test_plateau_value_one(self):
        assert F_at(MAGNETIC, P(0.0, 1.0), 1j, 8.0) == 1.0

    def test_a_zero_gives_one(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(-30, 30, (100, 1))
        xi = rng.uniform(-30, 30, (100, 1))
        f = eval_F(HARMONIC, x, xi, 2.0 + 5.0j, 8.0)
        assert np.allclose(f, 1.0, atol=1e-12)

    def test_magnetic_quotient_value(self):
        f = F_at(MAGNETIC, P(0.0, 40.0), 1j, 8.0)
        expect = (1600.0 - 1j) / (1521.0 - 1j)
        assert f == pytest.approx(expect, rel=1e-12)
        assert f.real == pytest.approx(1.0519, abs=1e-4)
        assert f.imag == pytest.approx(3.42e-5, abs=2e-7)

    def test_rejects_z_in_forbidden_half(self):
        with pytest.raises(SymbolError):
            F_at(MAGNETIC, P(0.0, 40.0), 5.0 + 1.0j, 8.0)


class TestHamilton:
    def test_reproduces_subelliptic_identity(self):
        # H_{Im p} Re p = -2 V2'.(xi - A); iterating once more gives 2|V2'|^2,
        # matching lambda_p - Re p
        for m in (DAVIES, HARMONIC, MAGNETIC):
            f = im_p_symbol(m)
            u = re_p_symbol(m)
            w = hamilton_im_re_symbol(m)
            for (x0, xi0) in ((1.0, 1.0), (0.5, -2.0), (-3.0, 0.25)):
                X = P(x0, xi0)
                first = hamilton_derivative(f, u, X)
                assert first == pytest.approx(w.at(X).real, rel=1e-12, abs=1e-12)
                second = hamilton_derivative(f, w, X)
                lam = lambda_at(m, X)
                re_p = p_at(m, X).real
                assert re_p + second == pytest.approx(lam, rel=1e-12, abs=1e-12)

    def test_constant_f_gives_zero(self):
        from semilab.symbols import SymbolField
        c = SymbolField(1, lambda x, xi: np.full(x.shape[:-1], 3.0), "const",
                        deriv_fn=lambda x, xi, a: np.zeros(x.shape[:-1]),
                        analytic_order=1)
        u = re_p_symbol(HARMONIC)
        assert hamilton_derivative(c, u, P(1.0, 2.0)) == 0.0

    def test_antisymmetry(self):
        f = im_p_symbol(MAGNETIC)
        u = re_p_symbol(MAGNETIC)
        X = P(0.7, -1.3)
        assert hamilton_derivative(f, u, X) == pytest.approx(
            -hamilton_derivative(u, f, X), rel=1e-12)
        assert hamilton_derivative(f, f, X) == 0.0

    def test_bilinearity(self):
        from semilab.symbols import SymbolField
        f = im_p_symbol(MAGNETIC)
        u = re_p_symbol(MAGNETIC)
        w = hamilton_im_re_symbol(MAGNETIC)
        X = P(1.1, 0.4)
        lhs = hamilton_derivative(f, SymbolField(
            1, lambda x, xi: 2.0 * u(x, xi) + 3.0 * w(x, xi), "lin",
            deriv_fn=lambda x, xi, a: 2.0 * u.deriv(x, xi, a) + 3.0 * w.deriv(x, xi, a),
            analytic_order=1), X)
        assert lhs == pytest.approx(2 * hamilton_derivative(f, u, X)
                                    + 3 * hamilton_derivative(f, w, X), rel=1e-12)


class TestWeightG:
    def test_g_zero_below_threshold(self):
        # lambda_p(0.01, 0) = 8e-4 + 1e-4 < h
        assert g_at(DAVIES, P(0.01, 0.01), 1e-2, 0.1) == 0.0

    def test_G_zero_when_psi_factor_vanishes(self):
        # Re p >= h^(2/3) lambda^(1/3) kills the cutoff factor
        m = HARMONIC
        X = P(3.0, 3.0)
        assert G_at(m, X, 1e-2, 0.1) == 0.0

    def test_G_davies_plateau_point(self):
        # at (1, 0): Re p = 0, lambda = 8, Hamilton factor vanishes with xi = A
        assert G_at(DAVIES, P(1.0, 0.0), 1e-2, 0.1) == 0.0

    def test_G_errors_outside_domain(self):
        with pytest.raises(SymbolError):
            G_at(DAVIES, P(0.0, 0.0), 1e-2, 0.1)

    def test_g_matches_G_above_two_h(self):
        h, eps = 2.0 ** -5, 0.1
        for (x0, xi0) in ((1.0, 0.05), (2.0, 0.1), (0.5, 0.2)):
            lam = lambda_at(DAVIES, P(x0, xi0))
            assert lam >= 2 * h
            assert g_at(DAVIES, P(x0, xi0), h, eps) == pytest.approx(
                G_at(DAVIES, P(x0, xi0), h, eps), rel=1e-12, abs=1e-15)

    def test_g_support_structure(self):
        h = 2.0 ** -4
        prof = psi_profile()
        rng = np.random.default_rng(11)
        x = rng.uniform(-4, 4, (400, 1))
        xi = rng.uniform(-4, 4, (400, 1))
        lam = eval_lambda(DAVIES, x, xi, "p")
        g = eval_g(DAVIES, x, xi, h, 0.1, prof)
        assert np.all(g[lam <= h] == 0.0)

    def test_g_bounded_and_gradient_scale(self):
        # |g| <= 1 and sqrt(h) |g'| uniformly bounded over the h scan
        ax = np.linspace(-20, 20, 161)
        X, XI = np.meshgrid(ax, ax, indexing="ij")
        x, xi = X.ravel()[:, None], XI.ravel()[:, None]
        eps = 0.12
        worst_g, worst_dg = 0.0, 0.0
        for k in range(3, 10):
            h = 2.0 ** -k
            g = eval_g(DAVIES, x, xi, h, eps)
            worst_g = max(worst_g, np.abs(g).max())
            d = 1e-3 * np.sqrt(h)
            dg = (eval_g(DAVIES, x, xi + d, h, eps)
                  - eval_g(DAVIES, x, xi - d, h, eps)) / (2 * d)
            worst_dg = max(worst_dg, np.sqrt(h) * np.abs(dg).max())
        assert worst_g <= 1.0
        assert worst_dg <= 2.0


class TestPsi:
    def test_plateau_at_origin(self):
        assert Psi_at(DAVIES, P(0.0, 0.0), 1e-2, 1.0, 1.0, 8.0) == 1.0

    def test_zero_outside_support(self):
        # B lambda_q(sqrt(h) X) >= y forces Psi = 0
        assert Psi_at(DAVIES, P(40.0, 0.0), 1.0, 1.0, 1.0, 8.0) == 0.0

    def test_davies_example_value(self):
        assert Psi_at(DAVIES, P(1.0, 1.0), 1e-2, 1.0, 1.0, 8.0) == 1.0

    def test_depends_only_on_scaled_lambda(self):
        # lambda_q(sqrt(h) X) = h (xi^2 + 8 x^2) for davies: pick two distinct
        # points with equal values
        h, y, B = 2.0 ** -4, 1.0, 2.0
        a = Psi_at(DAVIES, P(1.0, 0.0), h, y, B, 8.0)
        b = Psi_at(DAVIES, P(0.0, np.sqrt(8.0)), h, y, B, 8.0)
        assert a == pytest.approx(b, rel=1e-12)


class TestQHessian:
    def test_matches_finite_differences_magnetic(self):
        m = MAGNETIC
        R = 8.0
        rng = np.random.default_rng(2)
        x = rng.uniform(-3, 3, (40, 1))
        xi = rng.uniform(-40, 40, (40, 1))   # crosses the cutoff transition
        H = q_hessian(m, x, xi, R)
        d = 1e-4
        for i in range(2):
            for j in range(2):
                def q_of(dx1, dx2):
                    xs = x + (dx1 if i == 0 else 0.0)
                    xis = xi + (dx1 if i == 1 else 0.0)
                    xs = xs + (dx2 if j == 0 else 0.0)
                    xis = xis + (dx2 if j == 1 else 0.0)
                    return eval_q(m, xs, xis, R)
                fd = (q_of(d, d) - q_of(d, -d) - q_of(-d, d) + q_of(-d, -d)) / (4 * d * d)
                err = np.abs(fd - H[:, i, j])
                assert err.max() < 2e-4


class TestCalibration:
    GRID = None

    @classmethod
    def _grid(cls):
        if cls.GRID is None:
            ax = np.sort(np.concatenate([np.linspace(-20, 20, 101),
                                         np.logspace(np.log10(25), 3, 8),
                                         -np.logspace(np.log10(25), 3, 8)]))
            X, XI = np.meshgrid(ax, ax, indexing="ij")
            cls.GRID = (X.ravel()[:, None], XI.ravel()[:, None])
        return cls.GRID

    def test_proof_constants_invariant(self):
        pc = ProofConstants(C0=0.25, C1=3.0)
        assert pc.B == 1.0 / (4.0 * 0.25 * 3.0) ** 3

    def test_davies_calibration(self):
        x, xi = self._grid()
        cal = calibrate_constants(DAVIES, [2.0 ** -3, 2.0 ** -6, 2.0 ** -9], x, xi)
        assert isinstance(cal, CalibratedConstants)
        assert 0 < cal.weight.epsilon <= 1.0
        assert cal.weight_floor >= 0.1
        # |q| - T <= 1 * lambda_q pointwise for davies, so B >= 2 suffices
        assert cal.proof.B >= 2.0

    def test_bounded_imag_needs_only_moderate_B(self):
        x, xi = self._grid()
        cal = calibrate_constants(get_model("bounded_imag"),
                                  [2.0 ** -4, 2.0 ** -6], x, xi)
        assert cal.proof.B >= 2.0
        assert cal.proof.C0 >= 2.0 ** -20

    def test_zero_potential_equality_case(self):
        # |q| = xi^2 = lambda_q exactly: B = 2 sits at equality
        from semilab.models import PotentialModel, VectorField, zero_field
        m = PotentialModel("null", 1, zero_field(1), zero_field(1),
                           VectorField([zero_field(1)]))
        x, xi = self._grid()
        cal = calibrate_constants(m, [2.0 ** -4], x, xi)
        assert cal.proof.B >= 2.0 * (1 - 1e-9)

    def test_region_constants_validated(self):
        with pytest.raises(SymbolError):
            ProofConstants(C0=1.5, C1=1.0)
        with pytest.raises(SymbolError):
            ProofConstants(C0=0.5, C1=1.0, K=0.9)
