import numpy as np
import pytest
from scipy import integrate

from surfmotion import geometry as G
from surfmotion import harmonics as H
from surfmotion import quadrature as Q
from surfmotion.errors import ValidationError


def test_cap_area_and_moments():
    rule = Q.cap_rule(20)
    assert rule.weights.sum() == pytest.approx(2 * np.pi, abs=1e-10)
    assert np.all(rule.weights > 0)
    assert np.sum(rule.weights * rule.nodes[:, 2]) == pytest.approx(np.pi, abs=1e-10)
    assert np.all(rule.nodes[:, 2] > 0) and np.all(rule.nodes[:, 2] < 1)
    assert rule.domain == "cap" and Q.sphere_rule(4).domain == "sphere"


def test_node_count_scaling():
    m = int(np.ceil(401 / 2))
    assert len(Q.cap_rule(400)) == m * (2 * m + 1)


@pytest.mark.parametrize("d", [4, 9, 16])
def test_monomial_exactness_on_cap(d):
    rule = Q.cap_rule(d)
    rng = np.random.default_rng(d)
    for _ in range(6):
        a, b, c = rng.multinomial(d, [1 / 3] * 3)
        approx = np.sum(rule.weights * rule.nodes[:, 0] ** a * rule.nodes[:, 1] ** b * rule.nodes[:, 2] ** c)
        f = lambda th, ph: (np.sin(th) * np.cos(ph)) ** a * (np.sin(th) * np.sin(ph)) ** b * np.cos(th) ** c * np.sin(th)
        exact, _ = integrate.dblquad(f, 0, 2 * np.pi, 0, np.pi / 2, epsabs=1e-13, epsrel=1e-13)
        assert approx == pytest.approx(exact, abs=1e-10)


def test_sh_product_exactness_on_sphere():
    n = 6
    rule = Q.sphere_rule(2 * n)
    Y = H.sh_values(n, rule.nodes)
    assert np.abs(Y.T @ (rule.weights[:, None] * Y) - np.eye(Y.shape[1])).max() < 1e-10


def test_cap_gram_degree_two_against_adaptive_quadrature():
    rule = Q.cap_rule(8)
    Y = H.sh_values(2, rule.nodes)[:, 4:9]
    gram = Y.T @ (rule.weights[:, None] * Y)

    def entry(j, k):
        def f(th, ph):
            x = np.array([[np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)]])
            y = H.sh_values(2, x)[0]
            return y[4 + j] * y[4 + k] * np.sin(th)
        return integrate.dblquad(f, 0, 2 * np.pi, 0, np.pi / 2, epsabs=1e-12)[0]

    for j in range(5):
        for k in range(j, 5):
            assert gram[j, k] == pytest.approx(entry(j, k), abs=1e-8)


def test_sphere_areas():
    rule = Q.sphere_rule(10)
    assert Q.surface_integral(rule, G.ConstantRadius(1.0), 0, np.ones(len(rule))) == pytest.approx(4 * np.pi)
    assert Q.surface_integral(rule, G.ConstantRadius(2.0), 0, lambda x: np.ones(len(x))) == pytest.approx(16 * np.pi)


def test_pullback_matches_chart_integral():
    c = np.zeros(9)
    c[0], c[H.ShIndex(2, 4).p] = np.sqrt(4 * np.pi), 0.1
    rho = G.SHRadius(c)
    pull = Q.surface_integral(Q.sphere_rule(120), rho, 0, lambda x: np.ones(len(x)))
    u, wu = np.polynomial.legendre.leggauss(80)
    th = 0.5 * np.pi * (u + 1)
    ph = (np.arange(160) + 0.5) * 2 * np.pi / 160
    T, P = np.meshgrid(th, ph, indexing="ij")
    s = G.eval_frame(G.Chart(margin=1e-5), rho, 0, np.stack([P.ravel(), T.ravel()], 1))
    coord = np.sum(s.J * np.repeat(0.5 * np.pi * wu, 160)) * 2 * np.pi / 160
    assert pull == pytest.approx(coord, rel=1e-8)


def test_invalid_rules():
    with pytest.raises(ValidationError):
        Q.cap_rule(0)
    with pytest.raises(ValidationError):
        Q.cap_rule(4, 4.0)
