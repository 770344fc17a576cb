"""Projected gradient flow toward constrained minimisers, and the moduli optimiser."""

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels
from .energy import energy_breakdown
from .families import ModuliPoint, moduli_objective, closed_forms
from .grid_field import topological_charge


class NotConverged(RuntimeError):
    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


class ChargeJump(RuntimeError):
    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


def dt_max(h):
    """Explicit stability heuristic ``0.2 h^2`` for the five-point Laplacian."""
    return 0.2 * h * h


@dataclass
class FlowConfig:
    dt: float = None
    max_steps: int = 20000
    residual_tol: float = 1e-4
    renorm_every: int = 1
    charge_guard: bool = True
    monitor_every: int = 25

    def resolved(self, h):
        dt = dt_max(h) if self.dt is None else self.dt
        if not dt > 0:
            raise ValueError("dt must be positive")
        if dt > dt_max(h) * (1 + 1e-12):
            raise ValueError(f"dt={dt:g} exceeds the stability cap 0.2 h^2 = {dt_max(h):g}")
        if self.renorm_every < 1 or self.monitor_every < 1 or self.max_steps < 0:
            raise ValueError("renorm_every, monitor_every >= 1 and max_steps >= 0 required")
        return dt


@dataclass
class FlowHistory:
    step: list = dc_field(default_factory=list)
    E: list = dc_field(default_factory=list)
    D: list = dc_field(default_factory=list)
    H: list = dc_field(default_factory=list)
    V: list = dc_field(default_factory=list)
    residual: list = dc_field(default_factory=list)
    q: list = dc_field(default_factory=list)
    max_drift: float = 0.0

    def record(self, step, eb, residual):
        self.step.append(step)
        self.E.append(eb.E)
        self.D.append(eb.D)
        self.H.append(eb.H)
        self.V.append(eb.Vp)
        self.residual.append(residual)
        self.q.append(eb.q_int)

    def rows(self):
        return list(zip(self.step, self.E, self.D, self.H, self.V, self.residual, self.q))

    def max_increase(self):
        e = np.asarray(self.E)
        return float(np.max(np.diff(e))) if e.size > 1 else 0.0


@dataclass
class RelaxResult:
    field: object
    history: FlowHistory
    converged: bool
    steps: int
    stop_reason: str


def tangential_residual(f, params):
    """``||P_m h_eps||_2`` over the grid."""
    heff = kernels.effective_field(f.values, f.grid.h, params.eps, params.p)
    _, res = kernels.projected_step(f.values, heff, 0.0, f.grid.weights)
    return float(np.sqrt(res))


def relax(f, params, cfg=None, raise_on_failure=True):
    """Explicit projected descent ``m <- normalize(m + dt P_m h_eps(m))``.

    Jacobi-style: every interior node is updated from the same snapshot, the
    ring stays at ``e3``.  The history (compact-scheme energies, residual
    ``||P_m h_eps||_2``, charge) is sampled every ``monitor_every`` steps.
    """
    cfg = cfg or FlowConfig()
    g = f.grid
    dt = cfg.resolved(g.h)
    m = f.values.copy()
    hist = FlowHistory()
    q0 = topological_charge(f).q_int
    reason = "max_steps"
    converged = False
    step = 0
    new = m.copy()
    while True:
        if cfg.renorm_every == 1:
            res = kernels.relax_step(m, new, g.h, params.eps, params.p, dt, g.weights)
        else:
            heff = kernels.effective_field(m, g.h, params.eps, params.p)
            new, res = _unnormalized_step(m, heff, dt, g.weights, step + 1, cfg.renorm_every)
        residual = float(np.sqrt(res))
        monitor = step % cfg.monitor_every == 0
        done = residual < cfg.residual_tol
        if monitor or done or step >= cfg.max_steps:
            cur = f.replaced(m)
            eb = energy_breakdown(cur, params, scheme="compact")
            hist.record(step, eb, residual)
            hist.max_drift = max(hist.max_drift, cur.norm_defect())
            if cfg.charge_guard and eb.q_int != q0:
                reason = "charge_jump"
                break
        if done:
            converged = True
            reason = "converged"
            break
        if step >= cfg.max_steps:
            break
        m, new = new, m
        step += 1
    m /= np.linalg.norm(m, axis=-1, keepdims=True)
    out = f.replaced(m, tag="relaxed")
    result = RelaxResult(out, hist, converged, step, reason)
    if raise_on_failure:
        if reason == "charge_jump":
            raise ChargeJump(f"charge changed from {q0} to {hist.q[-1]} at step {step}", result)
        if not converged:
            raise NotConverged(f"residual {hist.residual[-1]:.3e} above tol after {step} steps", result)
    return result


def _unnormalized_step(m, heff, dt, weights, step, every):
    pf = heff - np.einsum("...k,...k->...", heff, m)[..., None] * m
    res = float(np.sum(np.einsum("...k,...k->...", pf, pf) * weights))
    new = m + dt * pf
    if step % every == 0:
        new /= np.linalg.norm(new, axis=-1, keepdims=True)
    new[0], new[-1], new[:, 0], new[:, -1] = m[0], m[-1], m[:, 0], m[:, -1]
    return new, res


# ------------------------------------------------------------- moduli space

def moduli_gradient(pt, p):
    _, H, V = closed_forms(p)
    c, s = np.cos(pt.phi), np.sin(pt.phi)
    r = pt.rho
    g = np.array([-H * c / r ** 2 - 2.0 * V / r ** 3, -H * s / r])
    hess = np.array([[2.0 * H * c / r ** 3 + 6.0 * V / r ** 4, H * s / r ** 2],
                     [H * s / r ** 2, -H * c / r]])
    return g, hess


def moduli_minimize(p, start, tol=1e-12, max_iter=200):
    """Minimise ``-8pi cos(phi)/rho + 2pi/(rho^2 (p-2))`` over ``(rho, phi)``.

    Damped Newton with a gradient-descent fallback when the Hessian is not
    positive definite; ``phi`` is returned reduced to ``(-pi, pi]``.
    """
    x = np.array([start.rho, start.phi], dtype=float)
    b = start.b

    def obj(v):
        return moduli_objective(ModuliPoint(v[0], v[1], b), p)

    for it in range(max_iter):
        g, hess = moduli_gradient(ModuliPoint(x[0], x[1], b), p)
        scale = abs(closed_forms(p)[1]) / x[0] ** 2
        if np.linalg.norm(g) < tol * scale:
            phi = float(np.angle(np.exp(1j * x[1])))
            pt = ModuliPoint(float(x[0]), phi, b)
            return pt, float(moduli_objective(pt, p))
        try:
            lam = np.linalg.eigvalsh(hess)
            step = -np.linalg.solve(hess, g) if lam.min() > 0 else -g
        except np.linalg.LinAlgError:
            step = -g
        f0 = obj(x)
        t = 1.0
        while t > 1e-12:
            y = x + t * step
            if y[0] > 0 and obj(y) <= f0 + 1e-4 * t * g.dot(step):
                break
            t *= 0.5
        else:
            y = x + t * step
        x = y
    raise NotConverged(f"moduli descent did not converge in {max_iter} iterations")
