"""Adjoint-valued lattice differential forms.

A k-form stores one su(2) coefficient vector per site and per increasing
index tuple, ``data.shape == dims + (C(4, k), 3)``, components ordered as
``itertools.combinations(range(4), k)``.  For 2-forms that is
``(01, 02, 03, 12, 13, 23)``.

The covariant derivative uses parallel-transported forward differences

    (nabla_mu w)(x) = (U_mu(x) w(x+mu) U_mu(x)^-1 - w(x)) / a

antisymmetrized over the component indices; the codifferential is its exact
transpose under ``<w, e> = a^4 sum_x sum_I <w_I(x), e_I(x)>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .algebra import adjoint_matrix
from .lattice import NDIM, LatticeGeometry, LinkField

COMPONENTS = tuple(tuple(combinations(range(NDIM), k)) for k in range(NDIM + 1))

# (*F)_{mu nu} = 1/2 eps_{mu nu rho sigma} F_{rho sigma}, eps_0123 = +1
_STAR_SOURCE = np.array([5, 4, 3, 2, 1, 0])
_STAR_SIGN = np.array([1.0, -1.0, 1.0, 1.0, -1.0, 1.0])


@dataclass(frozen=True)
class AdjForm:
    geometry: LatticeGeometry
    degree: int
    data: np.ndarray

    def __post_init__(self):
        expected = self.geometry.dims + (len(COMPONENTS[self.degree]), 3)
        if self.data.shape != expected:
            raise ValueError(f"degree-{self.degree} form needs shape {expected}, got {self.data.shape}")

    def __add__(self, other):
        _check_same(self, other)
        return AdjForm(self.geometry, self.degree, self.data + other.data)

    def __sub__(self, other):
        _check_same(self, other)
        return AdjForm(self.geometry, self.degree, self.data - other.data)

    def __mul__(self, c):
        return AdjForm(self.geometry, self.degree, c * self.data)

    __rmul__ = __mul__

    def __neg__(self):
        return AdjForm(self.geometry, self.degree, -self.data)

    def norm2(self) -> float:
        return inner(self, self)

    def norm(self) -> float:
        return float(np.sqrt(self.norm2()))


def _check_same(w, e):
    if w.geometry != e.geometry:
        raise ValueError("forms live on different geometries")
    if w.degree != e.degree:
        raise ValueError(f"degree mismatch: {w.degree} vs {e.degree}")


def zero_form(geometry: LatticeGeometry, degree: int) -> AdjForm:
    return AdjForm(geometry, degree, np.zeros(geometry.dims + (len(COMPONENTS[degree]), 3)))


def inner(w: AdjForm, e: AdjForm) -> float:
    _check_same(w, e)
    a = w.geometry.spacing
    return float(a**4 * np.sum(w.data * e.data))


def hodge_star(F: AdjForm) -> AdjForm:
    if F.degree != 2:
        raise ValueError("hodge_star is implemented for 2-forms")
    return AdjForm(F.geometry, 2, F.data[..., _STAR_SOURCE, :] * _STAR_SIGN[:, None])


def split_self_dual(F: AdjForm):
    """``(F+, F-)`` with ``F+- = (F +- *F)/2``."""
    s = hodge_star(F)
    return AdjForm(F.geometry, 2, 0.5 * (F.data + s.data)), AdjForm(F.geometry, 2, 0.5 * (F.data - s.data))


def self_dual_part(data):
    """Self-dual projection of raw 2-form data (last two axes ``(6, 3)``)."""
    return 0.5 * (data + data[..., _STAR_SOURCE, :] * _STAR_SIGN[:, None])


def _terms(degree):
    """``(out_index, direction, in_index, sign)`` for D acting on ``degree``-forms."""
    lower = {c: i for i, c in enumerate(COMPONENTS[degree])}
    out = []
    for o, I in enumerate(COMPONENTS[degree + 1]):
        for j, mu in enumerate(I):
            J = I[:j] + I[j + 1 :]
            out.append((o, mu, lower[J], -1.0 if j % 2 else 1.0))
    return out


_TERMS = {k: _terms(k) for k in range(NDIM)}


class Transport:
    """Cached adjoint-representation link rotations for one connection."""

    def __init__(self, U: LinkField):
        g = U.geometry
        self.geometry = g
        self.rot = adjoint_matrix(U.links)  # dims + (4, 3, 3)
        # R_mu(x - mu), transposed, for the backward (adjoint) difference
        self.rot_back_t = np.stack(
            [np.swapaxes(g.shift(self.rot[..., mu, :, :], mu, -1), -1, -2) for mu in range(NDIM)],
            axis=-3,
        )

    def forward(self, data, mu):
        """``nabla_mu`` applied to every component of ``data``."""
        g = self.geometry
        r_t = np.swapaxes(self.rot[..., mu, None, :, :], -1, -2)
        moved = (g.shift(data, mu)[..., None, :] @ r_t)[..., 0, :]
        return (moved - data) / g.spacing

    def backward_adjoint(self, data, mu):
        """Exact transpose of :meth:`forward`."""
        g = self.geometry
        r = np.swapaxes(self.rot_back_t[..., mu, None, :, :], -1, -2)
        moved = (g.shift(data, mu, -1)[..., None, :] @ r)[..., 0, :]
        return (moved - data) / g.spacing


def _transport(U):
    return U if isinstance(U, Transport) else Transport(U)


def _check_geometry(t, w):
    if t.geometry != w.geometry:
        raise ValueError("form and connection live on different geometries")


def covariant_d(U, w: AdjForm) -> AdjForm:
    """Covariant exterior derivative of a 0-, 1-, 2- or 3-form.

    ``U`` is a :class:`LinkField` or a prebuilt :class:`Transport`.
    """
    t = _transport(U)
    _check_geometry(t, w)
    if not 0 <= w.degree < NDIM:
        raise ValueError(f"covariant_d needs degree 0..3, got {w.degree}")
    terms = _TERMS[w.degree]
    out = np.zeros(t.geometry.dims + (len(COMPONENTS[w.degree + 1]), 3))
    for mu in range(NDIM):
        sel = [(o, J, s) for o, m, J, s in terms if m == mu]
        if not sel:
            continue
        d = t.forward(w.data, mu)
        for o, J, s in sel:
            out[..., o, :] += s * d[..., J, :]
    return AdjForm(t.geometry, w.degree + 1, out)


def covariant_d_star(U, w: AdjForm) -> AdjForm:
    """Adjoint of :func:`covariant_d`, lowering the degree by one."""
    t = _transport(U)
    _check_geometry(t, w)
    if not 0 < w.degree <= NDIM:
        raise ValueError(f"covariant_d_star needs degree 1..4, got {w.degree}")
    terms = _TERMS[w.degree - 1]
    out = np.zeros(t.geometry.dims + (len(COMPONENTS[w.degree - 1]), 3))
    for mu in range(NDIM):
        sel = [(o, J, s) for o, m, J, s in terms if m == mu]
        if not sel:
            continue
        d = t.backward_adjoint(w.data, mu)
        for o, J, s in sel:
            out[..., J, :] += s * d[..., o, :]
    return AdjForm(t.geometry, w.degree - 1, out)
