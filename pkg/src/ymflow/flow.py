"""Gradient-flow integrators on the link manifold and the sampling driver."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .algebra import qmul, qnormalize, su2_exp
from .lattice import LinkField, force_field
from .observables import ObservableSample, concentration_scan, measure

SCHEMES = ("euler", "rk3")
MIN_STEP = 1e-6
MAX_STEP = 0.1


class FlowError(RuntimeError):
    """Integration produced non-finite values; ``state`` holds the offending field."""

    def __init__(self, message: str, state: "FlowState"):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class FlowParams:
    step: float = 0.01
    scheme: str = "rk3"
    t_max: float = 1.0
    adapt: bool = False
    c_stab: float = 0.05
    sample_every: float = 0.1
    stop_energy: float | None = None
    concentration_alarm: tuple | None = None  # (eps0, R)
    scan: tuple | None = None  # (eps0, R_grid) for the conc_radius column
    scan_stride: int = 1
    snapshot_every: float | None = None

    def validate(self, spacing: float = 1.0):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not self.step > 0:
            raise ValueError(f"step must be > 0, got {self.step}")
        if not self.adapt and self.step > self.c_stab * spacing**2 * (1 + 1e-12):
            raise ValueError(f"step {self.step} exceeds c_stab * a^2 = {self.c_stab * spacing**2}")
        if self.t_max < 0:
            raise ValueError(f"t_max must be >= 0, got {self.t_max}")
        if not self.sample_every > 0:
            raise ValueError(f"sample_every must be > 0, got {self.sample_every}")
        if self.snapshot_every is not None and not self.snapshot_every > 0:
            raise ValueError(f"snapshot_every must be > 0, got {self.snapshot_every}")
        if self.concentration_alarm is not None:
            eps0, R = self.concentration_alarm
            if eps0 <= 0 or R <= 0:
                raise ValueError("concentration_alarm needs eps0 > 0 and R > 0")


@dataclass
class FlowState:
    U: LinkField
    t: float = 0.0
    step_count: int = 0


@dataclass
class Trajectory:
    samples: list
    snapshots: list  # [(t, LinkField)]
    reason: str
    final: FlowState
    steps: list = field(default_factory=list)  # accepted step sizes


def _update(Z, links, eps):
    return qmul(su2_exp(eps * Z), links)


def flow_step_euler(U: LinkField, eps: float) -> LinkField:
    if eps < 0:
        raise ValueError("step must be >= 0")
    if eps == 0:
        return U.copy()
    return LinkField(U.geometry, qnormalize(_update(force_field(U), U.links, eps)))


def flow_step_rk3(U: LinkField, eps: float) -> LinkField:
    """Third-order exponential integrator (three force evaluations)."""
    if eps < 0:
        raise ValueError("step must be >= 0")
    if eps == 0:
        return U.copy()
    g = U.geometry
    Z0 = force_field(U)
    W1 = _update(Z0, U.links, 0.25 * eps)
    Z1 = force_field(LinkField(g, W1))
    W2 = _update(8.0 / 9.0 * Z1 - 17.0 / 36.0 * Z0, W1, eps)
    Z2 = force_field(LinkField(g, W2))
    W3 = _update(0.75 * Z2 - 8.0 / 9.0 * Z1 + 17.0 / 36.0 * Z0, W2, eps)
    return LinkField(g, qnormalize(W3))


STEPPERS = {"euler": flow_step_euler, "rk3": flow_step_rk3}


def adapt_step(U: LinkField, params: FlowParams, Z=None) -> float:
    a2 = U.geometry.spacing ** 2
    Z = force_field(U) if Z is None else Z
    zmax = float(np.sqrt(np.max(np.sum(Z * Z, axis=-1))))
    eps = params.step if zmax == 0 else min(params.step, params.c_stab / zmax)
    return float(np.clip(eps, MIN_STEP * a2, MAX_STEP * a2))


def _finite(U: LinkField) -> bool:
    return bool(np.all(np.isfinite(U.links)))


def run_flow(
    state: FlowState,
    params: FlowParams,
    observers: dict[str, Callable] | None = None,
    sink: Callable[[ObservableSample], None] | None = None,
) -> Trajectory:
    """Advance ``state`` and sample observables at multiples of ``sample_every``.

    Each observer is called as ``fn(U, t)`` on a private copy of the field and
    its return value lands in ``sample.extra[name]``.  ``sink`` receives each
    sample as soon as it is measured (used for append-only CSV output).
    Stops on ``t_max``, on ``F_norm2 <= stop_energy`` or when the
    concentration alarm fires.
    """
    g = state.U.geometry
    params.validate(g.spacing)
    observers = observers or {}
    step = STEPPERS[params.scheme]
    tol = 1e-12 * max(1.0, params.t_max)

    U, t, n = state.U.copy(), float(state.t), state.step_count
    samples, snapshots, steps = [], [], []
    k_sample = int(np.floor(t / params.sample_every + 1e-9))
    k_snap = None
    if params.snapshot_every is not None:
        k_snap = int(np.floor(t / params.snapshot_every + 1e-9))

    def sample_now():
        s = measure(U, t, concentration=params.scan, stride=params.scan_stride)
        for name, fn in observers.items():
            s.extra[name] = fn(U.copy(), t)
        values = [s.F_norm2, s.Fp_norm2, s.Q, s.max_density, s.force_norm2]
        if not np.all(np.isfinite(values)):
            raise FlowError(f"non-finite observable at t = {t}", FlowState(U.copy(), t, n))
        samples.append(s)
        if sink is not None:
            sink(s)
        return s

    def stop_reason(s):
        if params.stop_energy is not None and s.F_norm2 <= params.stop_energy:
            return "stop_energy"
        if params.concentration_alarm is not None:
            eps0, R = params.concentration_alarm
            if concentration_scan(U, eps0, [R], stride=params.scan_stride) is not None:
                return "concentration_alarm"
        return None

    def on_grid(k, every):
        return abs(t - k * every) <= tol

    reason = stop_reason(sample_now()) if on_grid(k_sample, params.sample_every) else None
    if k_snap is not None and on_grid(k_snap, params.snapshot_every):
        snapshots.append((t, U.copy()))
    while reason is None:
        if t >= params.t_max - tol:
            reason = "t_max"
            break
        eps = adapt_step(U, params) if params.adapt else params.step
        targets = [params.t_max, (k_sample + 1) * params.sample_every]
        if k_snap is not None:
            targets.append((k_snap + 1) * params.snapshot_every)
        eps = min(eps, min(targets) - t)
        U = step(U, eps)
        t, n = t + eps, n + 1
        steps.append(eps)
        if not _finite(U):
            raise FlowError(f"non-finite link after step {n} (t = {t})", FlowState(U, t, n))
        if on_grid(k_sample + 1, params.sample_every):
            k_sample += 1
            t = k_sample * params.sample_every
            reason = stop_reason(sample_now())
        if k_snap is not None and on_grid(k_snap + 1, params.snapshot_every):
            k_snap += 1
            snapshots.append((t, U.copy()))
    return Trajectory(samples, snapshots, reason, FlowState(U, t, n), steps)
