import numpy as np
import pytest

from conftest import random_gauge, random_links
from ymflow.algebra import IDENTITY, adjoint_action, qmul, su2_exp, su2_log
from ymflow.lattice import (
    ACTION_NORM,
    PAIRS,
    GaugeField,
    LatticeGeometry,
    LinkField,
    clover_field,
    clover_field_strength,
    conjugate_algebra,
    force_field,
    gauge_transform,
    identity_links,
    plaquette,
    plaquette_field,
    staples,
    wilson_action,
    wilson_force,
)
from ymflow.observables import ym_energies
from ymflow.seeds import seed_flat


def constant_field(geometry, c):
    """U_0(x) = exp(c x_1 a T_1) with all other links trivial."""
    links = identity_links(geometry)
    a = geometry.spacing
    x1 = geometry.coords()[..., 1].astype(float)
    v = np.zeros(geometry.dims + (3,))
    v[..., 0] = c * x1 * a * a
    links[..., 0, :] = su2_exp(v)
    return LinkField(geometry, links)


def test_geometry_validation():
    with pytest.raises(ValueError):
        LatticeGeometry((4, 4, 3, 4))
    with pytest.raises(ValueError):
        LatticeGeometry((4, 4, 4))
    with pytest.raises(ValueError):
        LatticeGeometry((4, 4, 4, 4), spacing=0.0)
    g = LatticeGeometry((4, 6, 8, 10), spacing=0.5)
    assert g.extent == (2.0, 3.0, 4.0, 5.0)
    assert g.ball_radius_cap == 1.0
    assert LatticeGeometry((8,) * 4, r0=2.5).ball_radius_cap == 2.5


def test_canonical_order(geo_mixed):
    g = geo_mixed
    x = (1, 3, 2, 5)
    s = g.site_index(x)
    assert s == 1 + 4 * (3 + 5 * (2 + 4 * 5))
    assert g.site_coords(s) == x
    field = np.arange(g.n_sites * 2, dtype=float).reshape(g.dims[::-1] + (2,)).transpose(3, 2, 1, 0, 4)
    flat = g.to_canonical(np.ascontiguousarray(field))
    np.testing.assert_array_equal(flat[s], field[x])
    np.testing.assert_array_equal(g.from_canonical(flat), field)


def test_minimum_image_distance():
    g = LatticeGeometry((8,) * 4)
    d = g.distance((0, 0, 0, 0))
    assert d[7, 0, 0, 0] == 1.0
    assert d[4, 0, 0, 0] == 4.0
    assert d[5, 0, 6, 0] == np.sqrt(13.0)
    assert d.max() == 8.0


def test_link_field_shape_checked(geo4):
    with pytest.raises(ValueError):
        LinkField(geo4, np.zeros((4, 4, 4, 4, 3, 4)))


def test_plaquette_flat_and_plane_check(geo4):
    U = seed_flat(geo4)
    np.testing.assert_array_equal(plaquette(U, (1, 2, 3, 0), 0, 2), IDENTITY)
    with pytest.raises(ValueError):
        plaquette(U, (0, 0, 0, 0), 1, 1)
    with pytest.raises(ValueError):
        clover_field_strength(U, (0, 0, 0, 0), 2, 2)


def test_plaquette_constant_field_direct_product():
    g = LatticeGeometry((6,) * 4)
    c = 0.03
    U = constant_field(g, c)
    x = (1, 2, 0, 3)
    # direct four-element product: only the two U_0 links contribute
    expected = qmul(su2_exp(np.array([c * 2, 0, 0])), su2_exp(-np.array([c * 3, 0, 0])))
    np.testing.assert_allclose(plaquette(U, x, 0, 1), expected, atol=1e-15)
    np.testing.assert_allclose(su2_log(plaquette(U, x, 0, 1)), [-c, 0, 0], atol=1e-15)


def test_plaquette_site_kernel_matches_field(geo_mixed):
    U = random_links(geo_mixed, 0.7, 3)
    for mu, nu in PAIRS:
        P = plaquette_field(U, mu, nu)
        for x in [(0, 0, 0, 0), (3, 4, 3, 5), (1, 2, 0, 4)]:
            np.testing.assert_allclose(plaquette(U, x, mu, nu), P[x], atol=1e-15)


def test_clover_constant_field():
    g = LatticeGeometry((8,) * 4)
    for c in (0.01, 0.05):
        U = constant_field(g, c)
        F = clover_field_strength(U, (3, 3, 3, 3), 0, 1)
        assert np.linalg.norm(F - np.array([-c, 0, 0])) <= 0.01 * c


def test_clover_antisymmetric_and_matches_field(geo_mixed):
    U = random_links(geo_mixed, 0.5, 4)
    F = clover_field(U)
    for k, (mu, nu) in enumerate(PAIRS):
        for x in [(0, 0, 0, 0), (2, 4, 1, 5)]:
            f = clover_field_strength(U, x, mu, nu)
            np.testing.assert_array_equal(clover_field_strength(U, x, nu, mu), -f)
            np.testing.assert_allclose(F[x][k], f, atol=1e-14)


def test_flat_has_no_force_or_curvature(geo4):
    U = seed_flat(geo4)
    assert np.all(force_field(U) == 0)
    assert np.all(clover_field(U) == 0)
    assert wilson_action(U) == 0


def test_gauge_transform_identity_and_composition(geo4):
    U = random_links(geo4, 1.0, 5)
    ident = GaugeField(geo4, np.broadcast_to(IDENTITY, geo4.dims + (4,)).copy())
    np.testing.assert_array_equal(gauge_transform(U, ident).links, U.links)
    g, h = random_gauge(geo4, 1), random_gauge(geo4, 2)
    twice = gauge_transform(gauge_transform(U, g), h)
    once = gauge_transform(U, GaugeField(geo4, qmul(h.g, g.g)))
    np.testing.assert_allclose(twice.links, once.links, atol=1e-14)


def test_gauge_transform_geometry_mismatch(geo4):
    U = random_links(geo4, 1.0, 5)
    other = LatticeGeometry((4, 4, 4, 5))
    with pytest.raises(ValueError):
        gauge_transform(U, random_gauge(other, 1))


def test_plaquette_covariance(geo4):
    U = random_links(geo4, 1.0, 6)
    g = random_gauge(geo4, 3)
    V = gauge_transform(U, g)
    x = (1, 0, 3, 2)
    expected = qmul(qmul(g.g[x], plaquette(U, x, 1, 3)), g.g[x] * np.array([1, -1, -1, -1]))
    np.testing.assert_allclose(plaquette(V, x, 1, 3), expected, atol=1e-14)


def test_energy_gauge_invariant():
    g6 = LatticeGeometry((6,) * 4)
    U = random_links(g6, 0.8, 7)
    V = gauge_transform(U, random_gauge(g6, 4))
    for a, b in zip(ym_energies(U), ym_energies(V)):
        assert a == pytest.approx(b, rel=1e-10)
    assert wilson_action(V) == pytest.approx(wilson_action(U), rel=1e-12)


def test_force_gauge_covariant(geo4):
    U = random_links(geo4, 1.0, 8)
    g = random_gauge(geo4, 5)
    Z = force_field(U)
    Zg = force_field(gauge_transform(U, g))
    np.testing.assert_allclose(Zg, conjugate_algebra(g, Z), atol=1e-12)


def test_force_site_kernel_matches_field(geo_mixed):
    U = random_links(geo_mixed, 0.9, 9)
    Z = force_field(U)
    assert len(staples(U, (0, 0, 0, 0), 2)) == 6
    for mu in range(4):
        for x in [(0, 0, 0, 0), (3, 1, 2, 5)]:
            np.testing.assert_allclose(wilson_force(U, x, mu), Z[x][mu], atol=1e-14)


def _kick(U, x, mu, v):
    links = U.links.copy()
    links[x + (mu,)] = qmul(su2_exp(v), links[x + (mu,)])
    return LinkField(U.geometry, links)


def test_force_finite_difference():
    g = LatticeGeometry((4,) * 4, spacing=0.8)
    U = random_links(g, 1.0, 10)
    rng = np.random.default_rng(0)
    h, a = 1e-4, g.spacing
    for _ in range(5):
        x = tuple(int(c) for c in rng.integers(0, 4, size=4))
        mu = int(rng.integers(4))
        Z = wilson_force(U, x, mu)
        for c in range(3):
            e = np.zeros(3)
            e[c] = h
            fd = -(wilson_action(_kick(U, x, mu, e)) - wilson_action(_kick(U, x, mu, -e))) / (2 * h * a * a * ACTION_NORM)
            assert abs(Z[c] - fd) <= 1e-6 * max(abs(fd), np.linalg.norm(Z))


def test_force_locality():
    g = LatticeGeometry((6,) * 4)
    links = identity_links(g)
    links[0, 0, 0, 0, 0] = su2_exp(np.array([0.3, -0.2, 0.5]))
    U = LinkField(g, links)
    Z = force_field(U)
    assert np.all(Z[3, 3, 3, 3] == 0)
    assert np.any(Z[0, 0, 0, 0, 0] != 0)
    # perturbing a link outside the stencil leaves a force bit-for-bit unchanged
    V = random_links(g, 0.5, 11)
    W = _kick(V, (3, 3, 3, 3), 2, np.array([0.1, 0.2, 0.3]))
    np.testing.assert_array_equal(wilson_force(V, (0, 0, 0, 0), 1), wilson_force(W, (0, 0, 0, 0), 1))


def test_euler_step_decreases_action(geo4):
    U = random_links(geo4, 1.0, 12)
    V = LinkField(geo4, qmul(su2_exp(0.01 * force_field(U)), U.links))
    assert wilson_action(V) < wilson_action(U)


def _smooth_potential(y, L, c=0.6):
    k = 2 * np.pi / L
    A = np.zeros(y.shape[:-1] + (4, 3))
    A[..., 0, 0] = c * np.sin(k * y[..., 1])
    A[..., 1, 1] = c * np.cos(k * y[..., 0]) + 0.5 * c * np.sin(k * y[..., 2])
    A[..., 2, 2] = c * np.sin(k * (y[..., 3] + y[..., 0]))
    A[..., 3, 0] = 0.7 * c * np.cos(k * y[..., 1])
    A[..., 3, 1] = 0.4 * c * np.sin(k * y[..., 2])
    return A


def _smooth_curvature(y, L, c=0.6, h=1e-5):
    """F_{mu nu} = d_mu A_nu - d_nu A_mu + [A_mu, A_nu] by central differences of the closed form."""
    A = _smooth_potential(y, L, c)
    F = np.zeros(y.shape[:-1] + (6, 3))
    for k, (mu, nu) in enumerate(PAIRS):
        e_mu, e_nu = np.eye(4)[mu] * h, np.eye(4)[nu] * h
        d_mu_A_nu = (_smooth_potential(y + e_mu, L, c)[..., nu, :] - _smooth_potential(y - e_mu, L, c)[..., nu, :]) / (2 * h)
        d_nu_A_mu = (_smooth_potential(y + e_nu, L, c)[..., mu, :] - _smooth_potential(y - e_nu, L, c)[..., mu, :]) / (2 * h)
        F[..., k, :] = d_mu_A_nu - d_nu_A_mu + np.cross(A[..., mu, :], A[..., nu, :])
    return F


def test_clover_second_order_convergence():
    L = 4.0
    errors = []
    for n in (4, 8, 16):
        g = LatticeGeometry((n,) * 4, spacing=L / n)
        y = g.coords() * g.spacing
        links = np.empty(g.dims + (4, 4))
        for mu in range(4):
            mid = y + 0.5 * g.spacing * np.eye(4)[mu]
            links[..., mu, :] = su2_exp(g.spacing * _smooth_potential(mid, L)[..., mu, :])
        F = clover_field(LinkField(g, links))
        errors.append(np.max(np.abs(F - _smooth_curvature(y, L))))
    order = np.log2(errors[1] / errors[2])
    assert order >= 1.8, errors
