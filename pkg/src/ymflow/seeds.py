"""Deterministic initial link fields: flat, random, BPST instanton, grafted instanton.

The instanton is written in regular gauge near its center and in singular
gauge outside radius ``2*rho``; the two are joined by the lattice gauge
transformation ``g(y) = y/|y|`` (as a unit quaternion), so the core links are
exactly gauge-equivalent to midpoint exponentials of the regular-gauge field
while the tail decays like ``rho^2/r^3`` and wraps across the torus seam
without a jump of order one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import adjoint_action, qconj, qmul, qmul_dag, su2_exp
from .lattice import NDIM, LatticeGeometry, LinkField, identity_links
from .observables import smoothstep

SELF_DUAL = "self_dual"
ANTI_SELF_DUAL = "anti_self_dual"
SEED_KINDS = ("flat", "random", "bpst", "grafted")


@dataclass(frozen=True)
class SeedSpec:
    kind: str = "flat"
    amplitude: float = 0.0
    rng_seed: int = 0
    center: tuple = (0, 0, 0, 0)
    rho: float = 2.0
    taper_R: float = 8.0
    orientation: str = ANTI_SELF_DUAL

    def validate(self, geometry: LatticeGeometry):
        if self.kind not in SEED_KINDS:
            raise ValueError(f"unknown seed kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude}")
        if self.kind in ("bpst", "grafted"):
            _check_rho(geometry, self.rho)
            if self.orientation not in (SELF_DUAL, ANTI_SELF_DUAL):
                raise ValueError(f"unknown orientation {self.orientation!r}")
        if self.kind == "grafted":
            _check_taper(geometry, self.rho, self.taper_R)

    def build(self, geometry: LatticeGeometry) -> LinkField:
        self.validate(geometry)
        if self.kind == "flat":
            return seed_flat(geometry)
        if self.kind == "random":
            return seed_random(geometry, self.amplitude, self.rng_seed)
        if self.kind == "bpst":
            return seed_bpst(geometry, self.center, self.rho, self.orientation)
        return seed_grafted(geometry, self.center, self.rho, self.taper_R, self.orientation)


def _check_rho(geometry, rho):
    a = geometry.spacing
    if rho < 2 * a * (1 - 1e-12):
        raise ValueError(f"rho >= 2a required, got rho = {rho} with a = {a}")
    # 2*rho (the gauge switch radius) must stay inside R0
    if rho > min(geometry.extent) / 4 * (1 + 1e-12):
        raise ValueError(f"rho <= extent/4 = {min(geometry.extent) / 4} required, got {rho}")


def _check_taper(geometry, rho, taper_R):
    if taper_R < 4 * rho * (1 - 1e-12):
        raise ValueError(f"taper_R >= 4 rho required, got taper_R = {taper_R}, rho = {rho}")
    if taper_R > geometry.ball_radius_cap * (1 + 1e-12):
        raise ValueError(f"taper_R must not exceed R0 = {geometry.ball_radius_cap}")


def seed_flat(geometry: LatticeGeometry) -> LinkField:
    return LinkField(geometry, identity_links(geometry))


def gaussian_algebra(geometry: LatticeGeometry, rng_seed: int):
    """Standard-normal algebra coefficients per link, drawn in canonical link order.

    Philox is counter-based, so the draw is a pure function of the seed.
    """
    rng = np.random.Generator(np.random.Philox(key=int(rng_seed) % 2**64))
    flat = rng.standard_normal((geometry.n_sites, NDIM, 3))
    return geometry.from_canonical(flat)


def seed_random(geometry: LatticeGeometry, amplitude: float, rng_seed: int) -> LinkField:
    if amplitude < 0:
        raise ValueError(f"amplitude must be >= 0, got {amplitude}")
    if amplitude == 0:
        return seed_flat(geometry)
    return LinkField(geometry, su2_exp(amplitude * gaussian_algebra(geometry, rng_seed)))


def perturb(U: LinkField, amplitude: float, rng_seed: int) -> LinkField:
    """Left-multiply every link by an independent ``exp(amplitude * G)``."""
    if amplitude < 0:
        raise ValueError(f"amplitude must be >= 0, got {amplitude}")
    if amplitude == 0:
        return U.copy()
    kick = su2_exp(amplitude * gaussian_algebra(U.geometry, rng_seed))
    return LinkField(U.geometry, qmul(kick, U.links))


def thooft_symbols(orientation: str = SELF_DUAL):
    """'t Hooft symbols ``eta[a, mu, nu]`` with direction 3 playing the role of x4."""
    eta = np.zeros((3, NDIM, NDIM))
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eta[a, b, c], eta[a, c, b] = 1.0, -1.0
    s = 1.0 if orientation == SELF_DUAL else -1.0
    for a in range(3):
        eta[a, a, 3], eta[a, 3, a] = s, -s
    return eta


def _winding(y, orientation):
    """Unit quaternion ``g(y)`` with ``A_regular -> g^-1 dg`` at large |y|; identity at y = 0."""
    r = np.sqrt(np.sum(y * y, axis=-1))
    q = np.stack([y[..., 3], y[..., 0], y[..., 1], y[..., 2]], axis=-1)
    q = q / np.where(r > 0, r, 1.0)[..., None]
    q[r == 0] = (1.0, 0.0, 0.0, 0.0)
    return q if orientation == SELF_DUAL else qconj(q)


def regular_gauge_potential(y, rho, orientation, mu):
    """``A_mu(y) = 2 eta_{a mu nu} y_nu / (|y|^2 + rho^2) T_a`` (coefficients)."""
    eta = thooft_symbols(orientation)
    r2 = np.sum(y * y, axis=-1)
    return 2.0 * np.einsum("an,...n->...a", eta[:, mu, :], y) / (r2 + rho * rho)[..., None]


def singular_gauge_potential(y, rho, orientation, mu):
    """``g A g^-1 + g d(g^-1) = -(rho^2/|y|^2) g A g^-1`` for the regular-gauge ``A``."""
    r2 = np.sum(y * y, axis=-1)
    A = regular_gauge_potential(y, rho, orientation, mu)
    return -(rho * rho / r2)[..., None] * adjoint_action(_winding(y, orientation), A)


def _instanton_links(geometry, center, rho, orientation, taper=None):
    a = geometry.spacing
    r_switch = 2.0 * rho
    g_site = _winding(geometry.displacement(center), orientation)
    links = np.empty(geometry.dims + (NDIM, 4))
    for mu in range(NDIM):
        offset = np.zeros(NDIM)
        offset[mu] = 0.5
        y = geometry.displacement(center, offset)
        r = np.sqrt(np.sum(y * y, axis=-1))
        core = r < r_switch
        # regular gauge, rotated into the singular frame by a site gauge transformation
        inner = qmul_dag(
            qmul(g_site, su2_exp(a * regular_gauge_potential(y, rho, orientation, mu))),
            geometry.shift(g_site, mu),
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            As = singular_gauge_potential(np.where(core[..., None], 1.0, y), rho, orientation, mu)
        if taper is not None:
            As = As * taper(r)[..., None]
        outer = su2_exp(a * np.where(core[..., None], 0.0, As))
        links[..., mu, :] = np.where(core[..., None], inner, outer)
    return LinkField(geometry, links)


def seed_bpst(geometry: LatticeGeometry, center, rho: float, orientation: str = ANTI_SELF_DUAL) -> LinkField:
    """Charge-one instanton of scale ``rho`` (approximate on the torus)."""
    _check_rho(geometry, rho)
    if orientation not in (SELF_DUAL, ANTI_SELF_DUAL):
        raise ValueError(f"unknown orientation {orientation!r}")
    return _instanton_links(geometry, center, rho, orientation)


def seed_grafted(
    geometry: LatticeGeometry, center, rho: float, taper_R: float, orientation: str = ANTI_SELF_DUAL
) -> LinkField:
    """Instanton whose singular-gauge tail is cut off: 1 inside taper_R/2, flat beyond taper_R."""
    _check_rho(geometry, rho)
    _check_taper(geometry, rho, taper_R)
    half = 0.5 * taper_R

    def taper(r):
        return smoothstep((r - half) / half)

    U = _instanton_links(geometry, center, rho, orientation, taper=taper)
    # links whose whole extent lies beyond taper_R are exactly trivial
    links = U.links
    dist = geometry.distance(center)
    for mu in range(NDIM):
        far = (dist > taper_R) & (geometry.shift(dist, mu) > taper_R)
        links[far, mu, :] = (1.0, 0.0, 0.0, 0.0)
    return U
