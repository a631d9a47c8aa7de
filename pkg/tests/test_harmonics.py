import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import eval_legendre, sph_harm_y

from surfmotion import harmonics as H
from surfmotion.errors import InvalidIndex, NegativeOrderOnConstant, ValidationError
from surfmotion.quadrature import sphere_rule


def random_dirs(n, seed=0):
    x = np.random.default_rng(seed).normal(size=(n, 3))
    return x / np.linalg.norm(x, axis=1)[:, None]


def test_flat_index_roundtrip():
    seen = set()
    for n in range(8):
        for j in range(1, 2 * n + 2):
            idx = H.ShIndex(n, j)
            assert H.ShIndex.from_flat(idx.p) == idx
            seen.add(idx.p)
    assert seen == set(range(H.num_coeffs(7)))
    assert H.ShIndex(2, 4).p == 7 and H.ShIndex(2, 4).m == 1


@pytest.mark.parametrize("n,j", [(-1, 1), (0, 0), (0, 2), (3, 8)])
def test_invalid_index(n, j):
    with pytest.raises(InvalidIndex):
        H.ShIndex(n, j)


def test_constant_harmonic():
    x = random_dirs(10)
    np.testing.assert_allclose(H.eval_sh(H.ShIndex(0, 1), x), 1 / np.sqrt(4 * np.pi), rtol=0, atol=1e-15)
    np.testing.assert_allclose(H.eval_sh_gradient(H.ShIndex(0, 1), x), 0.0, atol=1e-15)


def test_matches_scipy_complex_harmonics():
    # real form without the Condon-Shortley phase:
    # m > 0: sqrt(2) (-1)^m Re Y_n^m, m < 0: sqrt(2) (-1)^m Im Y_n^|m|
    x = random_dirs(40, 1)
    theta = np.arccos(x[:, 2])
    phi = np.arctan2(x[:, 1], x[:, 0])
    Y = H.sh_values(6, x)
    for n in range(7):
        for m in range(-n, n + 1):
            ref = sph_harm_y(n, abs(m), theta, phi)
            if m == 0:
                expect = ref.real
            elif m > 0:
                expect = np.sqrt(2) * (-1) ** m * ref.real
            else:
                expect = np.sqrt(2) * (-1) ** m * ref.imag
            np.testing.assert_allclose(Y[:, n * n + n + m], expect, atol=1e-12)


def test_gram_identity():
    n_max = 10
    rule = sphere_rule(2 * n_max)
    Y = H.sh_values(n_max, rule.nodes)
    G = Y.T @ (rule.weights[:, None] * Y)
    assert np.abs(G - np.eye(len(G))).max() < 1e-10


def test_addition_theorem():
    x, y = random_dirs(15, 2), random_dirs(15, 3)
    Yx, Yy = H.sh_values(8, x), H.sh_values(8, y)
    for n in range(9):
        sl = slice(n * n, (n + 1) ** 2)
        lhs = np.sum(Yx[:, sl] * Yy[:, sl], axis=1)
        rhs = (2 * n + 1) / (4 * np.pi) * eval_legendre(n, np.sum(x * y, axis=1))
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_gradient_matches_finite_differences():
    x = random_dirs(20, 4)
    G = H.sh_surface_gradients(5, x)
    assert np.abs(np.einsum("mpa,ma->mp", G, x)).max() < 1e-12
    h = 1e-6
    t = np.cross(x, random_dirs(20, 5))
    t /= np.linalg.norm(t, axis=1)[:, None]
    fwd = x + h * t
    bwd = x - h * t
    fd = (H.sh_values(5, fwd / np.linalg.norm(fwd, axis=1)[:, None])
          - H.sh_values(5, bwd / np.linalg.norm(bwd, axis=1)[:, None])) / (2 * h)
    np.testing.assert_allclose(np.einsum("mpa,ma->mp", G, t), fd, atol=1e-6)


def test_dirichlet_energy_equals_eigenvalue():
    rule = sphere_rule(20)
    G = H.sh_surface_gradients(6, rule.nodes)
    energy = np.einsum("m,mpa,mpa->p", rule.weights, G, G)
    np.testing.assert_allclose(energy, H.eigenvalues(6), atol=1e-10)


def test_laplace_beltrami_eigenrelation_from_extension():
    # Delta_S F = tr(H) - x^T H x - 2 x . grad F on the unit sphere
    x = random_dirs(30, 6)
    for p in [0, 3, 8, 17, 40]:
        c = np.zeros(H.num_coeffs(6))
        c[p] = 1.0
        val, grad, hess = H.sh_synthesis(c, x)
        lap = (np.trace(hess, axis1=1, axis2=2) - np.einsum("ma,mab,mb->m", x, hess, x)
               - 2 * np.sum(x * grad, axis=1))
        n = H.degree_of(p)
        np.testing.assert_allclose(lap, -n * (n + 1) * val, atol=1e-10)


@pytest.mark.parametrize("n,lam", [(0, 0), (2, 6), (10, 110)])
def test_eigenvalue(n, lam):
    assert H.eigenvalue(n) == lam


def test_seminorm():
    c = np.zeros(9)
    c[0] = 2.0
    assert H.seminorm_sq(c, 3.0) == 0.0
    c2 = np.zeros(9)
    c2[H.ShIndex(2, 1).p] = 1.0
    assert H.seminorm_sq(c2, 1.0) == pytest.approx(6.0)
    rng = np.random.default_rng(0)
    c3 = rng.normal(size=16)
    assert H.seminorm_sq(c3, 0.0) == pytest.approx(np.sum(c3**2))
    with pytest.raises(NegativeOrderOnConstant):
        H.seminorm_sq(c, -1.0)
    c[0] = 0.0
    assert H.seminorm_sq(c, -1.0) == 0.0


def test_points_must_be_unit():
    with pytest.raises(ValidationError):
        H.sh_values(2, [[1.0, 1.0, 0.0]])


def test_frames_roundtrip(tmp_path):
    frames = np.random.default_rng(1).normal(size=(3, 16))
    H.dump_frames(tmp_path / "f.json", 3, frames, T=2)
    n_max, back, doc = H.load_frames(tmp_path / "f.json")
    assert n_max == 3 and doc["T"] == 2
    np.testing.assert_array_equal(back, frames)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 8), st.floats(-1, 1), st.floats(0, 2 * np.pi))
def test_degree_sum_is_rotation_invariant(n, z, phi):
    s = np.sqrt(1 - z * z)
    x = np.array([[s * np.cos(phi), s * np.sin(phi), z]])
    Y = H.sh_values(n, x)[0, n * n:(n + 1) ** 2]
    assert np.sum(Y**2) == pytest.approx((2 * n + 1) / (4 * np.pi), rel=1e-12)
