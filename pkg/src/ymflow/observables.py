"""Energies, charge, local ball energies, cutoffs, audits and decay fits.

Energies use the fiber norm ``|X|^2 = -tr(X^2) = 1/2 <X, X>`` so that a unit
charge instanton carries ``||F||^2 = 8 pi^2`` and

    ||F||^2 = 8 pi^2 Q + 2 ||F+||^2

holds site by site, exactly up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .forms import AdjForm, self_dual_part
from .lattice import LatticeGeometry, LinkField, clover_field, force_field

FIBER_NORM = 0.5
EIGHT_PI2 = 8.0 * math.pi**2


def curvature(U: LinkField) -> AdjForm:
    return AdjForm(U.geometry, 2, clover_field(U))


def _as_data(F):
    return F.data if isinstance(F, AdjForm) else F


def density(F):
    """Pointwise ``|F(x)|^2 = sum_{mu<nu} |F_{mu nu}|^2`` (fiber norm)."""
    d = _as_data(F)
    return FIBER_NORM * np.sum(d * d, axis=(-2, -1))


def densities(F):
    """``(|F|^2, |F+|^2)`` per site."""
    d = _as_data(F)
    return density(d), density(self_dual_part(d))


def _integrate(geometry, dens) -> float:
    return float(geometry.spacing**4 * np.sum(dens))


def ym_energies(U: LinkField, F=None):
    """``(||F||^2, ||F+||^2, ||F-||^2)`` from the clover curvature."""
    d = _as_data(F) if F is not None else clover_field(U)
    plus = self_dual_part(d)
    g = U.geometry
    return _integrate(g, density(d)), _integrate(g, density(plus)), _integrate(g, density(d - plus))


def charge_density(F):
    """Chern-Weil density with anti-self-dual fields counted positive."""
    d = _as_data(F)
    # eps_{mu nu rho sigma} <F_{mu nu}, F_{rho sigma}> summed over all four indices
    eps_sum = 8.0 * (
        np.sum(d[..., 0, :] * d[..., 5, :], axis=-1)
        - np.sum(d[..., 1, :] * d[..., 4, :], axis=-1)
        + np.sum(d[..., 2, :] * d[..., 3, :], axis=-1)
    )
    return -FIBER_NORM * eps_sum / (32.0 * math.pi**2)


def topological_charge(U: LinkField, F=None) -> float:
    d = _as_data(F) if F is not None else clover_field(U)
    return _integrate(U.geometry, charge_density(d))


def energy_formula_audit(U: LinkField, F=None) -> float:
    """``| ||F||^2 - 2 ||F+||^2 - 8 pi^2 Q |``; pure rounding for any configuration."""
    d = _as_data(F) if F is not None else clover_field(U)
    full, plus, _ = ym_energies(U, d)
    return abs(full - 2.0 * plus - EIGHT_PI2 * topological_charge(U, d))


def max_densities(U: LinkField, F=None):
    """``(sup_x |F(x)|^2, sup_x |F+(x)|^2)``."""
    d = _as_data(F) if F is not None else clover_field(U)
    full, plus = densities(d)
    return float(np.max(full)), float(np.max(plus))


def _check_radius(geometry: LatticeGeometry, R):
    if not R > 0:
        raise ValueError(f"ball radius must be positive, got {R}")
    if R > geometry.ball_radius_cap * (1 + 1e-12):
        raise ValueError(f"ball radius {R} exceeds R0 = {geometry.ball_radius_cap}")


def local_ball_energy(U: LinkField, x0, R: float, F=None):
    """``(int_{B_R(x0)} |F|^2, int_{B_R(x0)} |F+|^2)`` over site centers in the ball."""
    g = U.geometry
    _check_radius(g, R)
    d = _as_data(F) if F is not None else clover_field(U)
    full, plus = densities(d)
    inside = g.distance(x0) <= R
    return _integrate(g, full[inside]), _integrate(g, plus[inside])


def ball_energy_map(geometry: LatticeGeometry, dens, R: float):
    """Energy of the ball of radius R around every site (periodic FFT convolution)."""
    _check_radius(geometry, R)
    mask = (geometry.distance((0, 0, 0, 0)) <= R).astype(float)
    conv = np.fft.irfftn(np.fft.rfftn(dens) * np.conj(np.fft.rfftn(mask)), s=dens.shape, axes=(0, 1, 2, 3))
    # correlation with a symmetric mask: sum_y dens(x + y) mask(y)
    return geometry.spacing**4 * conv


@dataclass
class Concentration:
    radius: float
    center: tuple
    energy: float


def concentration_scan(U: LinkField, eps0: float, R_grid, stride: int = 1, F=None):
    """Smallest grid radius whose maximal ball energy reaches ``eps0``, or ``None``."""
    R_grid = [float(r) for r in R_grid]
    if not R_grid:
        raise ValueError("concentration_scan needs a nonempty radius grid")
    if any(b < a for a, b in zip(R_grid, R_grid[1:])):
        raise ValueError("radius grid must be sorted ascending")
    g = U.geometry
    d = _as_data(F) if F is not None else clover_field(U)
    full = density(d)
    if _integrate(g, full) < eps0:
        return None
    sl = tuple(slice(None, None, stride) for _ in range(4))
    for R in R_grid:
        emap = ball_energy_map(g, full, R)[sl]
        k = int(np.argmax(emap))
        if emap.flat[k] >= eps0:
            idx = np.unravel_index(k, emap.shape)
            return Concentration(R, tuple(int(i) * stride for i in idx), float(emap.flat[k]))
    return None


# ---------------------------------------------------------------- logarithmic cutoff


def smoothstep(s):
    """Quintic profile: 1 for s <= 0, 0 for s >= 1, C^2 in between."""
    s = np.clip(s, 0.0, 1.0)
    return 1.0 - 10.0 * s**3 + 15.0 * s**4 - 6.0 * s**5


@dataclass
class CutoffField:
    geometry: LatticeGeometry
    x0: tuple
    R: float
    N: float
    beta: np.ndarray
    grad_l4: float
    hess_l2: float


def log_cutoff(geometry: LatticeGeometry, x0, R: float, N: float, require_resolved: bool = True) -> CutoffField:
    """Logarithmic cutoff ``beta(x) = phi(log(N|x|/R) / log N)`` about ``x0``.

    Gradient and Hessian norms use central differences (the Hessian is the
    central-difference Jacobian of the central-difference gradient).
    """
    if not N > 1:
        raise ValueError(f"cutoff ratio N must exceed 1, got {N}")
    _check_radius(geometry, R)
    a = geometry.spacing
    if require_resolved and R / N < 2 * a:
        raise ValueError(f"cutoff unresolvable: R/N = {R / N} < 2a")
    r = geometry.distance(x0)
    with np.errstate(divide="ignore"):
        s = np.log(N * r / R) / np.log(N)
    beta = smoothstep(s)
    beta[r <= R / N] = 1.0
    beta[r >= R] = 0.0

    def central(f, mu):
        return (geometry.shift(f, mu) - geometry.shift(f, mu, -1)) / (2 * a)

    grad = [central(beta, mu) for mu in range(4)]
    grad2 = sum(gm * gm for gm in grad)
    grad_l4 = (a**4 * np.sum(grad2 * grad2)) ** 0.25
    hess2 = sum(central(grad[mu], nu) ** 2 for mu in range(4) for nu in range(4))
    hess_l2 = math.sqrt(a**4 * np.sum(hess2))
    return CutoffField(geometry, tuple(x0), float(R), float(N), beta, float(grad_l4), float(hess_l2))


@dataclass
class CutoffAudit:
    inner_final: float
    outer_initial: float
    sup_plus_integral: float
    energy_integral: float
    min_constant: float
    holds_without_constant: bool


def cutoff_energy_audit(snapshots, x0, R: float, N: float) -> CutoffAudit:
    """Smallest ``C >= 0`` for which the localized energy bound holds on a trajectory.

    ``snapshots`` is a sequence of ``(t, LinkField)``.  The bound is

        ||F(T)||^2_{B_{R/N}} <= ||F(0)||^2_{B_R}
            + int_0^T ||F+||_{L^inf(B_R)} (C + ||F||^2_{B_R}) / sqrt(log N) dt

    with the time integral by the trapezoid rule.
    """
    snapshots = list(snapshots)
    if len(snapshots) < 2:
        raise ValueError("cutoff audit needs at least two snapshots")
    if not N > 1:
        raise ValueError(f"cutoff ratio N must exceed 1, got {N}")
    g = snapshots[0][1].geometry
    if any(U.geometry != g for _, U in snapshots):
        raise ValueError("snapshots have mismatched geometries")
    _check_radius(g, R)
    ball = g.distance(x0) <= R
    inner_ball = g.distance(x0) <= R / N
    times, sup_plus, e_ball = [], [], []
    for t, U in snapshots:
        full, plus = densities(clover_field(U))
        times.append(float(t))
        sup_plus.append(math.sqrt(float(np.max(plus[ball]))))
        e_ball.append(_integrate(g, full[ball]))
    full_T, _ = densities(clover_field(snapshots[-1][1]))
    lhs = _integrate(g, full_T[inner_ball])
    rhs0 = e_ball[0]
    sqrt_log = math.sqrt(math.log(N))
    times = np.array(times)
    sup_plus = np.array(sup_plus)
    a_int = float(np.trapezoid(sup_plus, times)) / sqrt_log
    b_int = float(np.trapezoid(sup_plus * np.array(e_ball), times)) / sqrt_log
    deficit = lhs - rhs0 - b_int
    if deficit <= 0:
        c_min = 0.0
    elif a_int > 0:
        c_min = deficit / a_int
    else:
        c_min = math.inf
    return CutoffAudit(lhs, rhs0, a_int, b_int, c_min, deficit <= 0)


# ---------------------------------------------------------------- decay fits


@dataclass
class DecayFit:
    rate: float
    intercept: float
    r_squared: float
    window: tuple


def decay_fit(times, values, window=None) -> DecayFit:
    """Least squares fit of ``log(value)`` against ``t``; ``rate > 0`` means decay."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if window is not None:
        lo, hi = window
        keep = (t >= lo - 1e-12) & (t <= hi + 1e-12)
        t, v = t[keep], v[keep]
    else:
        window = (float(t.min()), float(t.max())) if t.size else (math.nan, math.nan)
    if t.size < 4:
        raise ValueError(f"decay fit needs at least 4 samples in the window, got {t.size}")
    if np.any(v <= 0):
        raise ValueError("decay fit needs strictly positive values in the window")
    y = np.log(v)
    slope, intercept = np.polyfit(t, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    resid = y - (slope * t + intercept)
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    if ss_tot == 0:
        slope = 0.0
    return DecayFit(float(-slope), float(intercept), float(r2), (float(window[0]), float(window[1])))


# ---------------------------------------------------------------- samples


@dataclass
class ObservableSample:
    t: float
    F_norm2: float
    Fp_norm2: float
    Fm_norm2: float
    Q: float
    max_density: float
    max_density_p: float
    conc_radius: float | None
    force_norm2: float
    extra: dict = field(default_factory=dict)

    CSV_COLUMNS = (
        "t",
        "F_norm2",
        "Fp_norm2",
        "Fm_norm2",
        "Q",
        "max_density",
        "max_density_p",
        "conc_radius",
        "force_norm2",
    )

    def row(self):
        return [getattr(self, c) for c in self.CSV_COLUMNS]


def force_norm2(U: LinkField, Z=None) -> float:
    """``||D*F||^2`` proxy: ``a^2 sum |Z|^2`` with ``Z = U' U^-1`` the flow velocity."""
    Z = force_field(U) if Z is None else Z
    return float(U.geometry.spacing**2 * np.sum(Z * Z))


def measure(U: LinkField, t: float, concentration=None, stride: int = 1) -> ObservableSample:
    """All per-sample observables; ``concentration`` is an optional ``(eps0, R_grid)``."""
    d = clover_field(U)
    full, plus, minus = ym_energies(U, d)
    mfull, mplus = max_densities(U, d)
    radius = None
    if concentration is not None:
        eps0, grid = concentration
        hit = concentration_scan(U, eps0, grid, stride=stride, F=d)
        radius = None if hit is None else hit.radius
    return ObservableSample(
        t=float(t),
        F_norm2=full,
        Fp_norm2=plus,
        Fm_norm2=minus,
        Q=topological_charge(U, d),
        max_density=mfull,
        max_density_p=mplus,
        conc_radius=radius,
        force_norm2=force_norm2(U),
    )


def fp_norm2_nonconstant(U: LinkField, F=None) -> float:
    """``||F+||^2`` after removing the site average of each component."""
    d = _as_data(F) if F is not None else clover_field(U)
    plus = self_dual_part(d)
    plus = plus - plus.mean(axis=(0, 1, 2, 3), keepdims=True)
    return _integrate(U.geometry, density(plus))


def sup_norm_monitor(samples, geometry: LatticeGeometry, transient: float, window: float) -> float:
    """Smallest ``C`` with ``sup|F+|^2 <= C * (trailing mean of ||F+||^2) / a^4`` after ``transient``."""
    t = np.array([s.t for s in samples])
    fp = np.array([s.Fp_norm2 for s in samples])
    sup = np.array([s.max_density_p for s in samples])
    a4 = geometry.spacing**4
    worst = 0.0
    for i in np.nonzero(t >= transient)[0]:
        sel = (t >= t[i] - window) & (t <= t[i])
        avg = float(np.mean(fp[sel]))
        if avg > 0:
            worst = max(worst, float(sup[i]) * a4 / avg)
        elif sup[i] > 0:
            return math.inf
    return worst


def bianchi_residuals(U: LinkField):
    """Diagnostics ``(||D F||, ||2 D* F+ - D* F||)``; both vanish only in the continuum."""
    from .forms import Transport, covariant_d, covariant_d_star, split_self_dual

    t = Transport(U)
    F = curvature(U)
    plus, _ = split_self_dual(F)
    return covariant_d(t, F).norm(), (2.0 * covariant_d_star(t, plus) - covariant_d_star(t, F)).norm()
