import numpy as np
import pytest

from conftest import random_gauge, random_links
from ymflow.algebra import su2_exp
from ymflow.forms import (
    COMPONENTS,
    AdjForm,
    Transport,
    covariant_d,
    covariant_d_star,
    hodge_star,
    inner,
    split_self_dual,
    zero_form,
)
from ymflow.lattice import LatticeGeometry, LinkField, conjugate_algebra, gauge_transform
from ymflow.observables import bianchi_residuals, curvature
from ymflow.seeds import seed_flat
from test_lattice import _smooth_potential


def random_form(geometry, degree, seed):
    rng = np.random.default_rng(seed)
    return AdjForm(geometry, degree, rng.standard_normal(geometry.dims + (len(COMPONENTS[degree]), 3)))


def smooth_links(n, L=4.0):
    g = LatticeGeometry((n,) * 4, spacing=L / n)
    y = g.coords() * g.spacing
    links = np.empty(g.dims + (4, 4))
    for mu in range(4):
        mid = y + 0.5 * g.spacing * np.eye(4)[mu]
        links[..., mu, :] = su2_exp(g.spacing * _smooth_potential(mid, L)[..., mu, :])
    return LinkField(g, links)


def test_components():
    assert COMPONENTS[2] == ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
    assert [len(c) for c in COMPONENTS] == [1, 4, 6, 4, 1]


def test_form_shape_checked(geo4):
    with pytest.raises(ValueError):
        AdjForm(geo4, 2, np.zeros(geo4.dims + (4, 3)))


def test_hodge_star_pattern(geo4):
    F = zero_form(geo4, 2)
    F.data[..., 0, 0] = 1.0
    S = hodge_star(F)
    expected = np.zeros_like(F.data)
    expected[..., 5, 0] = 1.0
    np.testing.assert_array_equal(S.data, expected)
    # 02 <-> -13 and 03 <-> 12
    for src, dst, sign in ((1, 4, -1.0), (4, 1, -1.0), (2, 3, 1.0), (3, 2, 1.0), (5, 0, 1.0)):
        G = zero_form(geo4, 2)
        G.data[..., src, 1] = 1.0
        assert np.all(hodge_star(G).data[..., dst, 1] == sign)


def test_hodge_star_involution_isometry(geo4):
    F, G = random_form(geo4, 2, 1), random_form(geo4, 2, 2)
    np.testing.assert_array_equal(hodge_star(hodge_star(F)).data, F.data)
    assert inner(hodge_star(F), hodge_star(G)) == pytest.approx(inner(F, G), rel=1e-14)
    with pytest.raises(ValueError):
        hodge_star(random_form(geo4, 1, 3))


def test_hodge_star_matches_levi_civita(geo4):
    from itertools import permutations

    F = random_form(geo4, 2, 4)
    full = np.zeros(geo4.dims + (4, 4, 3))
    for k, (m, n) in enumerate(COMPONENTS[2]):
        full[..., m, n, :] = F.data[..., k, :]
        full[..., n, m, :] = -F.data[..., k, :]
    eps = np.zeros((4, 4, 4, 4))
    for p in permutations(range(4)):
        eps[p] = np.linalg.det(np.eye(4)[list(p)])
    star = 0.5 * np.einsum("mnrs,...rsa->...mna", eps, full)
    S = hodge_star(F)
    for k, (m, n) in enumerate(COMPONENTS[2]):
        np.testing.assert_allclose(S.data[..., k, :], star[..., m, n, :], atol=1e-14)


def test_split_examples(geo4):
    F = zero_form(geo4, 2)
    F.data[..., 0, 0] = 1.0
    F.data[..., 5, 0] = 1.0
    plus, minus = split_self_dual(F)
    np.testing.assert_array_equal(plus.data, F.data)
    np.testing.assert_array_equal(minus.data, 0.0)
    p0, m0 = split_self_dual(zero_form(geo4, 2))
    assert not p0.data.any() and not m0.data.any()


def test_split_orthogonal_and_idempotent(geo4):
    F = random_form(geo4, 2, 5)
    plus, minus = split_self_dual(F)
    np.testing.assert_allclose((plus + minus).data, F.data, rtol=0, atol=4e-16 * np.max(np.abs(F.data)))
    np.testing.assert_array_equal(hodge_star(plus).data, plus.data)
    np.testing.assert_array_equal(hodge_star(minus).data, -minus.data)
    n2 = F.norm2()
    assert abs(inner(plus, minus)) <= 1e-12 * n2
    assert plus.norm2() + minus.norm2() == pytest.approx(n2, rel=1e-12)
    pp, pm = split_self_dual(plus)
    np.testing.assert_array_equal(pp.data, plus.data)
    np.testing.assert_array_equal(pm.data, 0.0)


def test_d_of_constant_on_flat(geo4):
    U = seed_flat(geo4)
    for k in range(4):
        w = AdjForm(geo4, k, np.broadcast_to(np.random.default_rng(k).standard_normal((len(COMPONENTS[k]), 3)), geo4.dims + (len(COMPONENTS[k]), 3)).copy())
        assert not covariant_d(U, w).data.any()
        if k > 0:
            assert not covariant_d_star(U, w).data.any()


def test_d_of_sine_is_forward_difference():
    g = LatticeGeometry((8, 4, 4, 4), spacing=0.5)
    U = seed_flat(g)
    x0 = g.coords()[..., 0]
    f = np.sin(2 * np.pi * x0 / 8)
    w = zero_form(g, 0)
    w.data[..., 0, 0] = f
    D = covariant_d(U, w).data
    expected = (np.roll(f, -1, axis=0) - f) / g.spacing
    np.testing.assert_allclose(D[..., 0, 0], expected, atol=1e-14)
    assert not D[..., 1:, :].any() and not D[..., 0, 1:].any()


def test_degree_and_geometry_errors(geo4):
    U = seed_flat(geo4)
    with pytest.raises(ValueError):
        covariant_d(U, random_form(geo4, 4, 0))
    with pytest.raises(ValueError):
        covariant_d_star(U, random_form(geo4, 0, 0))
    other = LatticeGeometry((4, 4, 4, 6))
    with pytest.raises(ValueError):
        covariant_d(U, random_form(other, 1, 0))
    with pytest.raises(ValueError):
        covariant_d_star(U, random_form(other, 2, 0))


@pytest.mark.parametrize("degree", [0, 1, 2, 3])
def test_adjointness(degree, geo_mixed):
    U = random_links(geo_mixed, 0.3, 10 + degree)
    t = Transport(U)
    for s in range(5):
        w = random_form(geo_mixed, degree, 100 + s)
        e = random_form(geo_mixed, degree + 1, 200 + s)
        lhs, rhs = inner(covariant_d(t, w), e), inner(w, covariant_d_star(t, e))
        assert abs(lhs - rhs) <= 1e-12 * w.norm() * e.norm()


def _dense(op, geometry, degree):
    n = len(COMPONENTS[degree])
    cols = []
    for i in range(geometry.n_sites * n * 3):
        d = np.zeros(geometry.n_sites * n * 3)
        d[i] = 1.0
        cols.append(op(AdjForm(geometry, degree, d.reshape(geometry.dims + (n, 3)))).data.ravel())
    return np.array(cols).T


@pytest.mark.parametrize("degree", [0, 1, 2, 3])
def test_dense_transpose(degree):
    g = LatticeGeometry((2,) * 4, min_extent=2)
    U = random_links(g, 0.4, 20 + degree)
    t = Transport(U)
    D = _dense(lambda w: covariant_d(t, w), g, degree)
    Ds = _dense(lambda w: covariant_d_star(t, w), g, degree + 1)
    np.testing.assert_allclose(Ds, D.T, atol=1e-13)


def test_dd_vanishes_on_flat(geo4):
    U = seed_flat(geo4)
    for k in range(3):
        w = random_form(geo4, k, 30 + k)
        assert np.max(np.abs(covariant_d(U, covariant_d(U, w)).data)) < 1e-12


def test_gauge_equivariance(geo4):
    U = random_links(geo4, 0.8, 40)
    g = random_gauge(geo4, 41)
    V = gauge_transform(U, g)
    for k in range(4):
        w = random_form(geo4, k, 50 + k)
        wg = AdjForm(geo4, k, conjugate_algebra(g, w.data))
        np.testing.assert_allclose(covariant_d(V, wg).data, conjugate_algebra(g, covariant_d(U, w).data), atol=1e-12)
        e = random_form(geo4, k + 1, 60 + k)
        eg = AdjForm(geo4, k + 1, conjugate_algebra(g, e.data))
        np.testing.assert_allclose(covariant_d_star(V, eg).data, conjugate_algebra(g, covariant_d_star(U, e).data), atol=1e-12)


def test_dd_is_curvature_bracket_to_first_order():
    errors = []
    for n in (8, 16):
        U = smooth_links(n)
        g = U.geometry
        y = g.coords() * g.spacing
        w = AdjForm(g, 0, (np.sin(2 * np.pi * y[..., :1] / 4.0) * np.array([1.0, 0.5, -0.3]))[..., None, :])
        DD = covariant_d(U, covariant_d(U, w)).data
        bracket = np.cross(curvature(U).data, w.data)
        errors.append(np.sqrt(g.spacing**4 * np.sum((DD - bracket) ** 2)))
    assert np.log2(errors[0] / errors[1]) >= 0.8, errors


def test_bianchi_residual_first_order():
    res = [bianchi_residuals(smooth_links(n))[0] for n in (8, 16)]
    assert np.log2(res[0] / res[1]) >= 0.8, res
