import numpy as np
import pytest

from passquant import (
    ComposedIndices,
    IndexSet,
    Monomial,
    ParameterError,
    SdCertificate,
    isps_certificate,
    loop_bounds,
    margin_check,
    single_system_bounds,
    symbolic_loop_bounds,
    ultimate_bound_class_k,
)


def unit_cert(theta=0.0, n=2, window=0):
    return SdCertificate(window=window, theta=theta, mp=np.eye(n))


class TestSingleSystemBounds:
    def test_hand_computed_case(self):
        # nu=0, rho=1, lam=1/2, N=0, theta=0, delta=0, |u|=1, V=p=|x|^2
        idx = IndexSet(0.0, 1.0)
        rep = single_system_bounds(idx, unit_cert(), np.eye(2), 1.0, lam=0.5, c5=0.5, p_x0=0.0)
        assert rep.eta1 == pytest.approx(0.5)
        assert rep.eta2 == pytest.approx(0.5)
        assert rep.constants["c2"] == pytest.approx(0.5)
        assert rep.constants["c3"] == pytest.approx(0.5)
        assert rep.constants["xi2"] == pytest.approx(1.0)
        assert rep.constants["c1"] == pytest.approx(1.0)
        assert rep.level_d1 == pytest.approx(1.5)
        # xi4 = (c2+c5)/eta2 = 2, c4 = 2, level_d2 = c2 + c4 = 2.5
        assert rep.level_d2 == pytest.approx(2.5)

    def test_zero_input_from_origin(self):
        idx = IndexSet(0.0, 1.0)
        rep = single_system_bounds(idx, unit_cert(), np.eye(2), 0.0, lam=0.5, c5=1.0, p_x0=0.0)
        assert rep.level_d1 == pytest.approx(0.0)

    def test_input_homogeneity(self):
        idx = IndexSet(0.0, 1.0, delta=0.0)
        r1 = single_system_bounds(idx, unit_cert(theta=0.3), np.eye(2), 1.0, lam=0.5, c5=0.1)
        r2 = single_system_bounds(idx, unit_cert(theta=0.3), np.eye(2), 2.0, lam=0.5, c5=0.1)
        assert r2.constants["c2"] == pytest.approx(4.0 * r1.constants["c2"])
        assert r2.constants["c3"] == pytest.approx(4.0 * r1.constants["c3"])

    def test_v_first_enlarges_global_level(self):
        idx = IndexSet(0.0, 1.0)
        rep = single_system_bounds(
            idx, unit_cert(), np.eye(2), 0.0, lam=0.5, c5=1.0, p_x0=0.0, v_first=[7.0]
        )
        assert rep.level_d1 == pytest.approx(7.0)

    def test_rejects_negative_rho(self):
        with pytest.raises(ParameterError):
            single_system_bounds(IndexSet(0.0, -0.1), unit_cert(), np.eye(2), 0.0)

    def test_rejects_eta1_nonpositive(self):
        with pytest.raises(ParameterError):
            single_system_bounds(IndexSet(5.0, 1.0), unit_cert(), np.eye(2), 0.0, lam=0.5)

    def test_rejects_state_bias(self):
        with pytest.raises(ParameterError):
            single_system_bounds(IndexSet(0.0, 1.0, w=1.0), unit_cert(), np.eye(2), 0.0)


class TestLoopBounds:
    def setup_method(self):
        self.idx = ComposedIndices(nu=-2.0, rho=0.5, delta=0.013, w1=0.0, w2=0.0)
        self.c1 = unit_cert(theta=0.0, n=2)
        self.c2 = unit_cert(theta=0.0, n=2)
        self.storage = np.eye(4)

    def test_zero_reference_specialization(self):
        rep = loop_bounds(self.idx, self.c1, self.c2, self.storage, 0.0, 0.01, 0.01, 2)
        # theta = 0: d1 = (N+1) delta, d2 = m (N2+1) (theta2 mu1^2 + mu2^2)
        assert rep.constants["d1"] == pytest.approx(0.013)
        assert rep.constants["d2"] == pytest.approx(2 * 0.01**2)

    def test_zero_noise_collapse(self):
        idx = ComposedIndices(nu=-2.0, rho=0.5, delta=0.0, w1=0.0, w2=0.0)
        rep = loop_bounds(idx, self.c1, self.c2, self.storage, 0.0, 0.0, 0.0, 2)
        assert rep.constants["d1"] == 0.0
        assert rep.constants["d2"] == 0.0

    def test_monotone_in_reference_and_precision(self):
        base = loop_bounds(self.idx, self.c1, self.c2, self.storage, 0.1, 0.01, 0.01, 2, d3=1e-3)
        for kwargs in (
            dict(r_norm=0.2, mu1=0.01, mu2=0.01),
            dict(r_norm=0.1, mu1=0.02, mu2=0.01),
            dict(r_norm=0.1, mu1=0.01, mu2=0.02),
        ):
            other = loop_bounds(
                self.idx, self.c1, self.c2, self.storage,
                kwargs["r_norm"], kwargs["mu1"], kwargs["mu2"], 2, d3=1e-3,
            )
            assert other.level_d2 >= base.level_d2

    def test_halved_precision_shrinks_level(self):
        coarse = loop_bounds(self.idx, self.c1, self.c2, self.storage, 0.0, 0.02, 0.02, 2)
        idx_fine = ComposedIndices(nu=-2.0, rho=0.5, delta=0.013 / 4.0, w1=0.0, w2=0.0)
        fine = loop_bounds(idx_fine, self.c1, self.c2, self.storage, 0.0, 0.01, 0.01, 2)
        assert fine.level_d2 < coarse.level_d2

    def test_v_first_in_global_level(self):
        rep = loop_bounds(
            self.idx, self.c1, self.c2, self.storage, 0.0, 0.01, 0.01, 2, v_first=[9.0]
        )
        assert rep.level_d1 == pytest.approx(9.0)
        assert rep.level_d2 < 9.0

    def test_rejects_nonpositive_rho(self):
        bad = ComposedIndices(nu=-2.0, rho=0.0, delta=0.0, w1=0.0, w2=0.0)
        with pytest.raises(ParameterError):
            loop_bounds(bad, self.c1, self.c2, self.storage, 0.0, 0.01, 0.01, 2)


class TestSymbolicLoopBounds:
    def setup_method(self):
        self.idx = ComposedIndices(nu=-2.0, rho=0.5, delta=0.1, w1=0.0, w2=0.0)
        self.c1 = unit_cert(n=2)
        self.c2 = unit_cert(n=2)
        self.storage = np.eye(4)

    def test_eps_zero_matches_inflated_output_radius(self):
        rep = symbolic_loop_bounds(
            self.idx, self.c1, self.c2, self.storage, 0.0, 0.7, 0.0, 0.01, 0.01, 2
        )
        assert rep.constants["d2"] == pytest.approx((3.0 * np.sqrt(2.0) * 0.01) ** 2)

    def test_zero_lipschitz_decouples_eps(self):
        a = symbolic_loop_bounds(self.idx, self.c1, self.c2, self.storage, 0.0, 0.0, 0.1, 0.01, 0.01, 2)
        b = symbolic_loop_bounds(self.idx, self.c1, self.c2, self.storage, 0.0, 0.0, 5.0, 0.01, 0.01, 2)
        assert a.constants["d2"] == pytest.approx(b.constants["d2"])

    def test_level_monotone_in_eps(self):
        levels = [
            symbolic_loop_bounds(
                self.idx, self.c1, self.c2, self.storage, 0.0, 0.67, eps, 0.01, 0.01, 2, d3=1e-3
            ).level_d2
            for eps in (0.05, 0.1, 0.25, 0.5)
        ]
        assert np.all(np.diff(levels) > 0)
        assert np.all(np.isfinite(levels))


class TestMarginCheck:
    def test_no_bias_reduces_to_min_eigenvalue(self):
        cert = margin_check(0.4, np.diag([1.0, 2.0]), 0.0, np.zeros((1, 1)), 0.0, np.zeros((1, 1)))
        assert cert.passed
        assert cert.margin == pytest.approx(0.4)

    def test_direct_substitution(self):
        cert = margin_check(2.0, np.eye(2), 1.0, np.eye(1), 1.0, np.eye(1))
        assert cert.margin == pytest.approx(1.0)
        assert cert.passed

    def test_large_bias_fails(self):
        cert = margin_check(
            0.1, 0.05 * np.eye(4),
            6.8572, 0.2187 * np.eye(2),
            0.0, np.zeros((2, 2)),
        )
        assert not cert.passed
        assert cert.margin < 0


class TestIsps:
    def test_direct_substitution(self):
        cert = isps_certificate(2.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0)
        assert cert.lam_star == pytest.approx(0.5)
        assert cert.alpha3.coeff == pytest.approx(0.5)
        assert cert.sigma.coeff == pytest.approx(0.5)
        assert cert.d2 == 0.0

    def test_delta_passthrough(self):
        cert = isps_certificate(2.0, 1.0, 2.0, 1.0, 0.0, 0.0, 1.0, 0.1, 0.0)
        assert cert.d2 == pytest.approx(0.1)

    def test_duplicate_evaluation(self):
        nu, rho, c, theta = -0.2, 0.8, 0.3, 0.4
        cert = isps_certificate(2.0, 0.5, 1.5, c, 0.2, nu, rho, 0.05, theta)
        lam = rho / 2.0
        eta1 = 1.0 / (4.0 * lam) - nu
        eta2 = rho - lam
        assert cert.alpha3.coeff == pytest.approx(eta2 * c)
        assert cert.sigma.coeff == pytest.approx(eta1 + theta * eta2)

    def test_rejects_eta1_nonpositive(self):
        with pytest.raises(ParameterError):
            isps_certificate(2.0, 1.0, 1.0, 1.0, 0.0, 10.0, 0.2, 0.0, 0.0)


class TestUltimateBoundClassK:
    def test_zero_energy(self):
        assert ultimate_bound_class_k(0.5, 0.5, 0.0, 0.0, 0.0, Monomial(1, 2), Monomial(1, 2)) == 0.0

    def test_identity_monomials(self):
        # eta2 = 1 with identity monomials: two halvings inverted give 4E
        energy = 0.7  # (eta1 + theta*eta2) u^2 + delta with u = 1
        got = ultimate_bound_class_k(0.7, 1.0, 0.0, 0.0, 1.0, Monomial(1, 1), Monomial(1, 1))
        assert got == pytest.approx(4.0 * energy)

    def test_duplicate_evaluation_quadratics(self):
        eta1, eta2, theta, delta, u = 1.3, 0.4, 0.2, 0.05, 0.7
        p_mono, v_mono = Monomial(0.3, 2.0), Monomial(1.6, 2.0)
        got = ultimate_bound_class_k(eta1, eta2, theta, delta, u, p_mono, v_mono)
        energy = (eta1 + theta * eta2) * u**2 + delta
        t = 2.0 * energy
        composed_coeff = eta2 * 0.3 / 1.6
        expected = max((t / composed_coeff) ** 1.0, 2.0 * t)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_rejects_bad_exponent(self):
        with pytest.raises(ParameterError):
            Monomial(1.0, 0.0)
