"""SU(2) group and su(2) algebra primitives.

Group elements are unit quaternions ``(w, x, y, z)`` standing for
``w*I + x*(-i s1) + y*(-i s2) + z*(-i s3)`` with ``s_a`` the Pauli matrices.
Algebra elements are real 3-vectors ``v`` standing for ``sum_a v_a T_a`` with
``T_a = -(i/2) s_a``.  All functions act on the trailing axis and broadcast
over any leading lattice axes.

With these conventions ``(-i s_a)`` multiply like the quaternion units, the
bracket ``[T_a, T_b] = eps_abc T_c`` is the cross product, and
``<X, Y> = -2 tr(XY)`` is the Euclidean dot product of coefficients.
"""

from __future__ import annotations

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
# T_a = -(i/2) sigma_a
GENERATORS = -0.5j * PAULI


def qmul(p, q):
    """Hamilton product of quaternion arrays (matches 2x2 matrix product)."""
    pw, px, py, pz = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    qw, qx, qy, qz = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ],
        axis=-1,
    )


def qconj(q):
    """Quaternion conjugate; the group inverse for unit quaternions."""
    out = np.array(q, dtype=float, copy=True)
    out[..., 1:] *= -1.0
    return out


def qmul_dag(p, q):
    """``p * q^-1`` for unit quaternions."""
    return qmul(p, qconj(q))


def qdag_mul(p, q):
    """``p^-1 * q`` for unit quaternions."""
    return qmul(qconj(p), q)


def qnormalize(q):
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def su2_exp(v):
    """Exponential map su(2) -> SU(2).

    ``exp(sum v_a T_a) = cos(|v|/2) I + sin(|v|/2) v_hat . (-i s)``.  Small
    angles use the Taylor series of ``sin(t)/t`` so that ``v = 0`` is exact.
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("su2_exp: non-finite algebra coefficients")
    half = 0.5 * np.sqrt(np.sum(v * v, axis=-1))
    small = half < 1e-4
    safe = np.where(small, 1.0, half)
    h2 = half * half
    # sin(h)/h, with the series good to ~1e-20 below 1e-4
    sinc = np.where(small, 1.0 - h2 / 6.0 + h2 * h2 / 120.0, np.sin(safe) / safe)
    out = np.empty(v.shape[:-1] + (4,))
    out[..., 0] = np.cos(half)
    out[..., 1:] = (0.5 * sinc)[..., None] * v
    return out


def su2_log(q):
    """Principal logarithm SU(2) -> su(2), inverse of :func:`su2_exp` for |v| < 2*pi."""
    q = np.asarray(q, dtype=float)
    vec = q[..., 1:]
    s = np.sqrt(np.sum(vec * vec, axis=-1))
    half = np.arctan2(s, q[..., 0])
    small = s < 1e-12
    factor = np.where(small, 2.0, 2.0 * half / np.where(small, 1.0, s))
    return factor[..., None] * vec


def su2_inner(x, y):
    """``<X, Y> = -2 tr(XY)``, the coefficient dot product."""
    return np.sum(np.asarray(x) * np.asarray(y), axis=-1)


def su2_commutator(x, y):
    """``[X, Y]``; in coefficients the cross product."""
    return np.cross(x, y)


def project_quat(q):
    """Traceless antihermitian part of a real quaternion (e.g. a sum of SU(2) elements).

    For ``M = w I + m . (-i s)`` this is ``m . (-i s) = sum 2 m_a T_a``.
    """
    return 2.0 * np.asarray(q)[..., 1:]


def su2_project(m):
    """Traceless antihermitian part of arbitrary complex 2x2 matrices.

    Returns coefficients in the ``T_a`` basis of ``(M - M^dag)/2 - tr(M - M^dag)/4``.
    """
    m = np.asarray(m, dtype=complex)
    a = 0.5 * (m - np.conj(np.swapaxes(m, -1, -2)))
    a = a - (np.trace(a, axis1=-2, axis2=-1) / 2.0)[..., None, None] * np.eye(2)
    # coefficient v_a = -2 tr(A T_a), real for antihermitian A
    return np.real(-2.0 * np.einsum("...ij,aji->...a", a, GENERATORS))


def quat_to_matrix(q):
    q = np.asarray(q, dtype=float)
    return q[..., 0, None, None] * np.eye(2) + np.einsum(
        "...a,aij->...ij", q[..., 1:], -1j * PAULI
    )


def algebra_to_matrix(v):
    return np.einsum("...a,aij->...ij", np.asarray(v, dtype=float), GENERATORS)


def matrix_to_quat(m):
    """Real quaternion coefficients of a 2x2 complex matrix (real part only)."""
    m = np.asarray(m, dtype=complex)
    w = 0.5 * np.real(np.trace(m, axis1=-2, axis2=-1))
    # tr((-i s_a)^dag M) / 2 = coefficient of (-i s_a)
    v = np.real(0.5 * np.einsum("aij,...ij->...a", np.conj(-1j * PAULI), m))
    return np.concatenate([w[..., None], v], axis=-1)


def adjoint_matrix(q):
    """3x3 rotation ``R`` with ``q X q^-1 = sum_a (R v)_a T_a``."""
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    r = np.empty(q.shape[:-1] + (3, 3))
    r[..., 0, 0] = w * w + x * x - y * y - z * z
    r[..., 0, 1] = 2.0 * (x * y - w * z)
    r[..., 0, 2] = 2.0 * (x * z + w * y)
    r[..., 1, 0] = 2.0 * (x * y + w * z)
    r[..., 1, 1] = w * w - x * x + y * y - z * z
    r[..., 1, 2] = 2.0 * (y * z - w * x)
    r[..., 2, 0] = 2.0 * (x * z - w * y)
    r[..., 2, 1] = 2.0 * (y * z + w * x)
    r[..., 2, 2] = w * w - x * x - y * y + z * z
    return r


def adjoint_action(q, v):
    """``q X q^-1`` for unit quaternions ``q`` and algebra coefficients ``v``."""
    return np.einsum("...ab,...b->...a", adjoint_matrix(q), v)
