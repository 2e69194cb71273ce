import math

import numpy as np
import pytest

from passquant import CertificateError, DimensionError
from passquant import linalg


def series_expm(a, terms=30):
    """Truncated Taylor series, the independent oracle for the exponential."""
    a = np.asarray(a, float)
    out = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for k in range(1, terms + 1):
        term = term @ a / k
        out = out + term
    return out


class TestSymEig:
    def test_identity(self):
        w, _ = linalg.sym_eig(np.eye(2))
        assert np.allclose(w, [1.0, 1.0])

    def test_diagonal_sorted_ascending(self):
        w, _ = linalg.sym_eig(np.diag([3.0, -1.0]))
        assert np.allclose(w, [-1.0, 3.0])

    def test_two_by_two_hand_derived(self):
        # characteristic polynomial (2-l)^2 - 1 = 0 -> l in {1, 3}
        w, _ = linalg.sym_eig([[2.0, 1.0], [1.0, 2.0]])
        assert np.allclose(w, [1.0, 3.0], atol=1e-12)

    def test_rejects_asymmetric(self):
        with pytest.raises(DimensionError):
            linalg.sym_eig([[0.0, 1.0], [0.0, 0.0]])

    def test_rejects_non_square(self):
        with pytest.raises(DimensionError):
            linalg.sym_eig(np.zeros((2, 3)))

    def test_reconstruction_and_orthogonality(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = rng.integers(1, 9)
            a = rng.standard_normal((n, n))
            a = 0.5 * (a + a.T)
            w, v = linalg.sym_eig(a)
            assert np.max(np.abs(v.T @ v - np.eye(n))) <= 1e-8
            scale = max(np.max(np.abs(a)), 1e-30)
            assert np.max(np.abs(a @ v - v @ np.diag(w))) <= 1e-9 * max(scale, 1.0)


class TestNsd:
    def test_negative_identity(self):
        assert linalg.is_nsd(-np.eye(3), 0.0)

    def test_boundary_zero_eigenvalue(self):
        assert linalg.is_nsd(np.diag([0.0, -1.0]), 0.0)

    def test_small_positive_fails(self):
        assert not linalg.is_nsd(np.diag([1e-6, -1.0]), 0.0)


class TestExpm:
    def test_zero_matrix(self):
        assert np.allclose(linalg.expm(np.zeros((3, 3))), np.eye(3))

    def test_diagonal(self):
        e = linalg.expm(np.diag([1.0, -1.0]))
        assert np.allclose(e, np.diag([math.e, 1.0 / math.e]), rtol=1e-12)

    def test_matches_series_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a = rng.standard_normal((3, 3))
            a *= 1.0 / max(np.linalg.norm(a, 2), 1.0)
            assert np.max(np.abs(linalg.expm(a) - series_expm(a))) <= 1e-9

    def test_inverse_property(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            a = rng.standard_normal((4, 4))
            a *= 3.0 / max(np.linalg.norm(a, 2), 3.0)
            prod = linalg.expm(a) @ linalg.expm(-a)
            assert np.max(np.abs(prod - np.eye(4))) <= 1e-7


class TestQuadSublevelMax:
    def test_spheres(self):
        assert linalg.quad_sublevel_max(np.eye(2), np.eye(2), 4.0) == pytest.approx(4.0)

    def test_axis_aligned(self):
        assert linalg.quad_sublevel_max(np.diag([2.0, 1.0]), np.eye(2), 1.0) == pytest.approx(2.0)

    def test_against_boundary_sweep(self):
        m = np.array([[2.0, 1.0], [1.0, 2.0]])
        p = np.diag([1.0, 4.0])
        got = linalg.quad_sublevel_max(m, p, 1.0)
        theta = np.linspace(0.0, 2.0 * np.pi, 100000)
        pts = np.stack([np.cos(theta), 0.5 * np.sin(theta)])
        brute = np.einsum("ik,ij,jk->k", pts, m, pts).max()
        assert got == pytest.approx(brute, abs=1e-3)

    def test_homogeneous_in_xi(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            g = rng.standard_normal((3, 3))
            p = g @ g.T + 0.5 * np.eye(3)
            h = rng.standard_normal((3, 3))
            m = h @ h.T
            base = linalg.quad_sublevel_max(m, p, 1.5)
            assert linalg.quad_sublevel_max(m, p, 3.0) == pytest.approx(2.0 * base, rel=1e-12)

    def test_rejects_non_pd(self):
        with pytest.raises(CertificateError) as err:
            linalg.quad_sublevel_max(np.eye(2), np.diag([1.0, 0.0]), 1.0)
        assert "min_eigenvalue" in err.value.info


class TestCholeskySolveLyap:
    def test_cholesky_roundtrip(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            g = rng.standard_normal((4, 4))
            p = g @ g.T + 0.1 * np.eye(4)
            low = linalg.cholesky(p)
            assert np.max(np.abs(low @ low.T - p)) <= 1e-9
            assert np.allclose(low, np.tril(low))

    def test_cholesky_rejects_indefinite(self):
        with pytest.raises(CertificateError):
            linalg.cholesky(np.diag([1.0, -1.0]))

    def test_solve_identity(self):
        b = np.array([1.0, -2.0, 3.0])
        assert np.allclose(linalg.solve(np.eye(3), b), b)

    def test_lyap_closed_form(self):
        # A = -I: A'P + PA = -2P = -Q -> P = Q/2
        p = linalg.lyap(-np.eye(2), 2.0 * np.eye(2))
        assert np.allclose(p, np.eye(2), atol=1e-12)

    def test_lyap_residual(self, bench_model):
        a = bench_model.a
        p = linalg.lyap(a, np.eye(2))
        assert np.max(np.abs(a.T @ p + p @ a + np.eye(2))) <= 1e-8

    def test_lyap_rejects_unstable(self):
        with pytest.raises(CertificateError) as err:
            linalg.lyap(np.array([[1.0]]), np.eye(1))
        assert "eigenvalue" in err.value.info
