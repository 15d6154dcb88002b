"""Matrix-free Poincare-constant estimation on self-dual adjoint 2-forms.

The quadratic form ``||D w||^2 + ||D* w||^2`` restricted to self-dual 2-forms
is minimized by restarted Lanczos with full reorthogonalization.  Every
restart begins from the current Ritz vector, so the reported Rayleigh
quotients never increase.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forms import AdjForm, Transport, covariant_d, covariant_d_star, self_dual_part
from .lattice import LatticeGeometry, LinkField

ZERO_LAMBDA = 1e-10
SELF_DUAL_TOL = 1e-10


class NotSelfDualError(ValueError):
    pass


@dataclass
class SpectralResult:
    lambda_min: float
    c_poincare: float
    iterations: int
    residual: float
    minimizer: AdjForm
    converged: bool
    history: list = field(default_factory=list)

    def report(self) -> dict:
        return {
            "lambda_min": self.lambda_min,
            "c_poincare": self.c_poincare,
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
        }


def _dot(geometry, x, y) -> float:
    return float(geometry.spacing**4 * np.sum(x * y))


def quad_form_apply(U, w: AdjForm, check: bool = True) -> AdjForm:
    """Self-dual projection of ``(D* D + D D*) w`` for a self-dual 2-form ``w``.

    ``U`` may be a :class:`LinkField` or a prebuilt :class:`Transport`.
    """
    if w.degree != 2:
        raise ValueError(f"quad_form_apply acts on 2-forms, got degree {w.degree}")
    if check:
        anti = w.data - self_dual_part(w.data)
        if np.sqrt(np.sum(anti * anti)) > SELF_DUAL_TOL * np.sqrt(np.sum(w.data * w.data)):
            raise NotSelfDualError("input form is not self-dual")
    t = U if isinstance(U, Transport) else Transport(U)
    out = covariant_d_star(t, covariant_d(t, w)).data + covariant_d(t, covariant_d_star(t, w)).data
    return AdjForm(w.geometry, 2, self_dual_part(out))


def constant_self_dual_basis(geometry: LatticeGeometry) -> list[np.ndarray]:
    """Orthonormal basis (under the global inner product) of constant self-dual forms."""
    norm = 1.0 / np.sqrt(2.0 * geometry.volume)
    basis = []
    for first, second in ((0, 5), (1, 4), (2, 3)):
        sign = -1.0 if first == 1 else 1.0  # *e_02 = -e_13
        for c in range(3):
            d = np.zeros(geometry.dims + (6, 3))
            d[..., first, c] = norm
            d[..., second, c] = sign * norm
            basis.append(d)
    return basis


def _orthonormalize(geometry, vectors):
    out = []
    for v in vectors:
        v = self_dual_part(np.array(v, dtype=float))
        for _ in range(2):
            for q in out:
                v = v - _dot(geometry, q, v) * q
        n = np.sqrt(_dot(geometry, v, v))
        if n > 1e-12:
            out.append(v / n)
    return out


def _start_vector(geometry, seed):
    rng = np.random.Generator(np.random.Philox(key=seed))
    flat = rng.standard_normal((geometry.n_sites, 6, 3))
    return self_dual_part(geometry.from_canonical(flat))


def poincare_estimate(
    U: LinkField,
    deflate_constants: bool = True,
    tol: float = 1e-8,
    max_iters: int = 2000,
    deflate=(),
    krylov_dim: int = 40,
    seed: int = 12345,
) -> SpectralResult:
    """Smallest eigenvalue of the self-dual quadratic form and ``C_A = 1/lambda``.

    ``deflate`` holds extra (self-dual) forms or raw data arrays to project
    out.  ``tol`` bounds the residual ``||A y - theta y||`` relative to the
    spectral-scale estimate ``max(|T|)`` of the Lanczos matrices.
    ``max_iters`` counts operator applications.
    """
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    g = U.geometry
    t = Transport(U)
    extra = [d.data if isinstance(d, AdjForm) else d for d in deflate]
    locked = _orthonormalize(g, (constant_self_dual_basis(g) if deflate_constants else []) + extra)

    def project(v):
        for q in locked:
            v = v - _dot(g, q, v) * q
        return v

    def apply(v):
        return project(quad_form_apply(t, AdjForm(g, 2, v), check=False).data)

    x = project(_start_vector(g, seed))
    x = x / np.sqrt(_dot(g, x, x))
    history, iters, scale = [], 0, 0.0
    theta, residual, converged = np.inf, np.inf, False
    while iters < max_iters:
        V, alpha, beta = [x], [], []
        w = apply(x)
        iters += 1
        m = min(krylov_dim, max_iters - iters + 1)
        for j in range(m):
            alpha.append(_dot(g, V[j], w))
            w = w - alpha[j] * V[j] - (beta[j - 1] * V[j - 1] if j > 0 else 0.0)
            for _ in range(2):  # full reorthogonalization
                for v in V:
                    w = w - _dot(g, v, w) * v
            b = np.sqrt(max(_dot(g, w, w), 0.0))
            if j == m - 1 or b <= 1e-14 * max(1.0, abs(alpha[j])) or iters >= max_iters:
                break
            beta.append(b)
            V.append(w / b)
            w = apply(V[-1])
            iters += 1
        k = len(alpha)
        T = np.diag(alpha) + np.diag(beta[: k - 1], 1) + np.diag(beta[: k - 1], -1)
        evals, evecs = np.linalg.eigh(T)
        scale = max(scale, float(np.max(np.abs(evals))))
        y = sum(c * v for c, v in zip(evecs[:, 0], V))
        y = y / np.sqrt(_dot(g, y, y))
        Ay = apply(y)
        iters += 1
        theta = _dot(g, y, Ay)
        r = Ay - theta * y
        residual = np.sqrt(_dot(g, r, r)) / max(scale, 1e-300)
        history.append(theta)
        x = y
        if residual <= tol or scale == 0.0:
            converged = True
            break

    lam = max(float(theta), 0.0)
    zero = lam <= ZERO_LAMBDA / g.spacing**2
    return SpectralResult(
        lambda_min=lam,
        c_poincare=np.inf if zero else 1.0 / lam,
        iterations=iters,
        residual=float(residual),
        minimizer=AdjForm(g, 2, x),
        converged=converged,
        history=history,
    )
