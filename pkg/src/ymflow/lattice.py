"""Periodic 4D lattice, SU(2) link fields, plaquettes, clover curvature and the Wilson force.

Fields are numpy arrays whose leading four axes are the site coordinates
``(x0, x1, x2, x3)``; links carry two trailing axes ``(mu, quaternion)``.
The canonical flat site order ``s = x0 + L0*(x1 + L1*(x2 + L2*x3))`` is the
C-order flattening of the axis-reversed array (see :meth:`LatticeGeometry.to_canonical`).

The Wilson action ``S_W = sum_{x, mu<nu} (1 - 1/2 Re tr P_{mu nu}(x))`` is the
discrete energy driving the flow.  Its link gradient is related to the force by
``<Z, T_a> = -(1/(a^2 k)) dS_W/dh`` for the left perturbation ``exp(h T_a) U``
with ``k = ACTION_NORM = 1/4``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .algebra import IDENTITY, adjoint_action, project_quat, qconj, qmul, qmul_dag, qnormalize

NDIM = 4
PAIRS = tuple(combinations(range(NDIM), 2))
ACTION_NORM = 0.25


@dataclass(frozen=True)
class LatticeGeometry:
    dims: tuple
    spacing: float = 1.0
    r0: float | None = None
    # the clover stencil needs 4; the forms and spectral code work down to 2
    min_extent: int = field(default=4, compare=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", float(self.spacing))
        if len(dims) != NDIM:
            raise ValueError(f"dims must have four entries, got {dims}")
        if any(d < self.min_extent for d in dims):
            raise ValueError(f"every lattice extent must be >= {self.min_extent}, got {dims}")
        if not (self.spacing > 0 and np.isfinite(self.spacing)):
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if self.r0 is not None and not (0 < self.r0 <= 0.5 * min(self.extent)):
            raise ValueError(f"r0 must lie in (0, {0.5 * min(self.extent)}], got {self.r0}")

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.dims))

    @property
    def extent(self) -> tuple:
        return tuple(d * self.spacing for d in self.dims)

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    @property
    def ball_radius_cap(self) -> float:
        """R0: largest admissible ball radius (half the shortest extent unless configured)."""
        return self.r0 if self.r0 is not None else 0.5 * min(self.extent)

    def shift(self, arr, mu, n=1):
        """Field value at ``x + n*mu_hat`` (periodic)."""
        return np.roll(arr, -n, axis=mu)

    def site_index(self, x) -> int:
        x = [int(c) % d for c, d in zip(x, self.dims)]
        L0, L1, L2, _ = self.dims
        return x[0] + L0 * (x[1] + L1 * (x[2] + L2 * x[3]))

    def site_coords(self, s: int) -> tuple:
        out = []
        for d in self.dims:
            out.append(s % d)
            s //= d
        return tuple(out)

    def to_canonical(self, arr):
        """Reshape a site-major field to ``(n_sites, ...)`` in canonical order."""
        rest = arr.shape[NDIM:]
        return np.ascontiguousarray(np.transpose(arr, (3, 2, 1, 0) + tuple(range(4, arr.ndim)))).reshape(
            (self.n_sites,) + rest
        )

    def from_canonical(self, flat):
        rest = flat.shape[1:]
        arr = flat.reshape(tuple(reversed(self.dims)) + rest)
        return np.ascontiguousarray(np.transpose(arr, (3, 2, 1, 0) + tuple(range(4, arr.ndim))))

    def coords(self):
        """Integer coordinates, shape ``dims + (4,)``."""
        return np.stack(np.meshgrid(*[np.arange(d) for d in self.dims], indexing="ij"), axis=-1)

    def displacement(self, center, offset=None):
        """Minimum-image physical displacement ``x (+ offset) - center`` at every site.

        ``offset`` is in lattice units per direction (e.g. ``0.5`` along a link).
        """
        rel = self.coords().astype(float) - np.asarray(center, dtype=float)
        if offset is not None:
            rel = rel + np.asarray(offset, dtype=float)
        L = np.asarray(self.dims, dtype=float)
        rel = rel - L * np.floor(rel / L + 0.5)
        return rel * self.spacing

    def distance(self, center):
        y = self.displacement(center)
        return np.sqrt(np.sum(y * y, axis=-1))


@dataclass(frozen=True)
class LinkField:
    """One SU(2) element per (site, direction); ``links`` has shape ``dims + (4, 4)``."""

    geometry: LatticeGeometry
    links: np.ndarray

    def __post_init__(self):
        expected = self.geometry.dims + (NDIM, 4)
        if self.links.shape != expected:
            raise ValueError(f"links must have shape {expected}, got {self.links.shape}")

    def link(self, mu):
        return self.links[..., mu, :]

    def unit_defect(self) -> float:
        return float(np.max(np.abs(np.sum(self.links * self.links, axis=-1) - 1.0)))

    def renormalized(self) -> "LinkField":
        return LinkField(self.geometry, qnormalize(self.links))

    def copy(self) -> "LinkField":
        return LinkField(self.geometry, self.links.copy())


@dataclass(frozen=True)
class GaugeField:
    geometry: LatticeGeometry
    g: np.ndarray

    def __post_init__(self):
        expected = self.geometry.dims + (4,)
        if self.g.shape != expected:
            raise ValueError(f"gauge field must have shape {expected}, got {self.g.shape}")


def identity_links(geometry: LatticeGeometry) -> np.ndarray:
    return np.broadcast_to(IDENTITY, geometry.dims + (NDIM, 4)).copy()


def _check_plane(mu, nu):
    if mu == nu:
        raise ValueError(f"plane needs two distinct directions, got mu = nu = {mu}")


def _site(geometry, x, step=None):
    x = np.asarray(x, dtype=int)
    if step is not None:
        x = x + step
    return tuple(int(c) % d for c, d in zip(x, geometry.dims))


def _unit(mu):
    e = np.zeros(NDIM, dtype=int)
    e[mu] = 1
    return e


# ---------------------------------------------------------------- site kernels


def plaquette(U: LinkField, x, mu: int, nu: int):
    """``U_mu(x) U_nu(x+mu) U_mu(x+nu)^-1 U_nu(x)^-1`` at a single site."""
    _check_plane(mu, nu)
    g, L = U.geometry, U.links
    em, en = _unit(mu), _unit(nu)
    a = L[_site(g, x) + (mu,)]
    b = L[_site(g, x, em) + (nu,)]
    c = L[_site(g, x, en) + (mu,)]
    d = L[_site(g, x) + (nu,)]
    return qmul_dag(qmul_dag(qmul(a, b), c), d)


def _leaves(U: LinkField, x, mu, nu):
    g, L = U.geometry, U.links
    em, en = _unit(mu), _unit(nu)

    def lk(step, d):
        return L[_site(g, x, step) + (d,)]

    o = np.zeros(NDIM, dtype=int)
    inv = qconj
    leaf1 = qmul(qmul(lk(o, mu), lk(em, nu)), qmul(inv(lk(en, mu)), inv(lk(o, nu))))
    leaf2 = qmul(qmul(lk(o, nu), inv(lk(en - em, mu))), qmul(inv(lk(-em, nu)), lk(-em, mu)))
    leaf3 = qmul(qmul(inv(lk(-em, mu)), inv(lk(-em - en, nu))), qmul(lk(-em - en, mu), lk(-en, nu)))
    leaf4 = qmul(qmul(inv(lk(-en, nu)), lk(-en, mu)), qmul(lk(em - en, nu), inv(lk(o, mu))))
    return leaf1 + leaf2 + leaf3 + leaf4


def clover_field_strength(U: LinkField, x, mu: int, nu: int):
    """Clover curvature ``F_{mu nu}(x)`` as algebra coefficients."""
    _check_plane(mu, nu)
    if mu > nu:
        return -clover_field_strength(U, x, nu, mu)
    a = U.geometry.spacing
    # su2_project(Q - Q^dag) = 2 project_quat(Q)
    return project_quat(_leaves(U, x, mu, nu)) / (4.0 * a * a)


def staples(U: LinkField, x, mu: int):
    """The six staples of link (x, mu), each returned as a quaternion."""
    g, L = U.geometry, U.links
    em = _unit(mu)
    out = []
    for nu in range(NDIM):
        if nu == mu:
            continue
        en = _unit(nu)
        up = qmul_dag(qmul(L[_site(g, x) + (nu,)], L[_site(g, x, en) + (mu,)]), L[_site(g, x, em) + (nu,)])
        down = qmul(qmul(qconj(L[_site(g, x, -en) + (nu,)]), L[_site(g, x, -en) + (mu,)]), L[_site(g, x, em - en) + (nu,)])
        out.extend([up, down])
    return out


def wilson_force(U: LinkField, x, mu: int):
    """``Z_mu(x) = -(1/a^2) su2_project(U_mu(x) S_mu(x)^dag)``; a descent direction for S_W."""
    a = U.geometry.spacing
    s = np.sum(staples(U, x, mu), axis=0)
    u = U.links[_site(U.geometry, x) + (mu,)]
    return -project_quat(qmul_dag(u, s)) / (a * a)


# ---------------------------------------------------------------- field kernels


def plaquette_field(U: LinkField, mu: int, nu: int):
    _check_plane(mu, nu)
    g = U.geometry
    umu, unu = U.link(mu), U.link(nu)
    return qmul_dag(qmul_dag(qmul(umu, g.shift(unu, mu)), g.shift(umu, nu)), unu)


def wilson_action(U: LinkField) -> float:
    total = 0.0
    for mu, nu in PAIRS:
        total += float(np.sum(1.0 - plaquette_field(U, mu, nu)[..., 0]))
    return total


def clover_field(U: LinkField):
    """Clover curvature at every site, shape ``dims + (6, 3)`` in ``PAIRS`` order."""
    g = U.geometry
    a = g.spacing
    out = np.empty(g.dims + (len(PAIRS), 3))
    for k, (mu, nu) in enumerate(PAIRS):
        p = plaquette_field(U, mu, nu)
        umu, unu = U.link(mu), U.link(nu)
        # P(x-mu) seen from x: U_mu(x-mu)^-1 P(x-mu) U_mu(x-mu)
        um_b = g.shift(umu, mu, -1)
        un_b = g.shift(unu, nu, -1)
        leaf2 = qmul(qconj(um_b), qmul(g.shift(p, mu, -1), um_b))
        # P(x-mu-nu) seen from x: transported along the corner path
        corner = qmul(g.shift(um_b, nu, -1), g.shift(unu, nu, -1))  # U_mu(x-mu-nu) U_nu(x-nu)
        leaf3 = qmul(qconj(corner), qmul(g.shift(g.shift(p, mu, -1), nu, -1), corner))
        leaf4 = qmul(qconj(un_b), qmul(g.shift(p, nu, -1), un_b))
        q = p + leaf2 + leaf3 + leaf4
        out[..., k, :] = project_quat(q) / (4.0 * a * a)
    return out


def staple_sum(U: LinkField, mu: int):
    g = U.geometry
    umu = U.link(mu)
    s = np.zeros(g.dims + (4,))
    for nu in range(NDIM):
        if nu == mu:
            continue
        unu = U.link(nu)
        unu_fwd = g.shift(unu, mu)
        s += qmul_dag(qmul(unu, g.shift(umu, nu)), unu_fwd)
        s += g.shift(qmul(qconj(unu), qmul(umu, unu_fwd)), nu, -1)
    return s


def force_field(U: LinkField):
    """Wilson force at every link, shape ``dims + (4, 3)``."""
    a = U.geometry.spacing
    out = np.empty(U.geometry.dims + (NDIM, 3))
    for mu in range(NDIM):
        out[..., mu, :] = -project_quat(qmul_dag(U.link(mu), staple_sum(U, mu))) / (a * a)
    return out


def gauge_transform(U: LinkField, g: GaugeField) -> LinkField:
    """``U'_mu(x) = g(x) U_mu(x) g(x+mu)^-1``."""
    if g.geometry.dims != U.geometry.dims or g.geometry.spacing != U.geometry.spacing:
        raise ValueError("gauge field and link field live on different geometries")
    geo = U.geometry
    out = np.empty_like(U.links)
    for mu in range(NDIM):
        out[..., mu, :] = qmul_dag(qmul(g.g, U.link(mu)), geo.shift(g.g, mu))
    return LinkField(geo, out)


def conjugate_algebra(g: GaugeField, v):
    """Apply ``g(x) X g(x)^-1`` sitewise to an algebra field with extra component axes."""
    q = g.g.reshape(g.g.shape[:4] + (1,) * (v.ndim - 5) + (4,))
    return adjoint_action(np.broadcast_to(q, v.shape[:-1] + (4,)), v)
