"""Spin-current driven Landau-Lifshitz-Gilbert dynamics in the Thiele frame.

The pulled-back equation ``(d_t - nu d_z) m = m x [alpha (d_t - nu d_z) m - h]``
is solved for ``d_t m`` in Landau-Lifshitz form and integrated with classical
RK4 plus nodewise renormalisation.  The frame is the one obtained after the
rigid rotation that aligns the spin velocity with ``e2``; in that frame
``c - v = (nu/2) (1, -alpha)``.
"""

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels
from ._accel import njit, use_numba
from .energy import energy_breakdown
from .grid_field import dot, gradient, integrate, topological_charge

try:
    from numba import prange
except ImportError:  # pragma: no cover
    prange = range


class BlowupSuspected(RuntimeError):
    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory


class StabilityViolation(RuntimeError):
    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory


class HorizonExceeded(UserWarning):
    pass


# ------------------------------------------------------------- Thiele frame

def perp(v):
    v = np.asarray(v, dtype=float)
    return np.array([-v[1], v[0]])


def thiele_solve(alpha, beta, v):
    """Frame velocity from ``(c - v)^perp = alpha c - beta v``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    v = np.asarray(v, dtype=float)
    if alpha == beta:
        return v.copy()
    return ((1.0 + alpha * beta) * v - (alpha - beta) * perp(v)) / (1.0 + alpha * alpha)


def thiele_residual(alpha, beta, v, c):
    v = np.asarray(v, dtype=float)
    c = np.asarray(c, dtype=float)
    return float(np.linalg.norm(perp(c - v) - (alpha * c - beta * v)))


def effective_nu(alpha, beta, v_magnitude):
    """``nu = 2 (alpha - beta) |v| / (1 + alpha^2)``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if v_magnitude < 0:
        raise ValueError("|v| must be non-negative")
    if alpha == beta:
        return 0.0
    return 2.0 * (alpha - beta) * v_magnitude / (1.0 + alpha * alpha)


@dataclass(frozen=True)
class DynamicsParams:
    alpha: float
    beta: float = 0.0
    v: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        object.__setattr__(self, "v", (float(self.v[0]), float(self.v[1])))

    @classmethod
    def from_nu(cls, alpha, nu, beta=0.0):
        """Parameters with spin velocity along ``e2`` producing the given ``nu``."""
        if alpha == beta:
            if nu:
                raise ValueError("alpha == beta forces nu = 0")
            return cls(alpha, beta, (0.0, 0.0))
        speed = nu * (1.0 + alpha * alpha) / (2.0 * (alpha - beta))
        return cls(alpha, beta, (0.0, speed))

    @property
    def c(self):
        return thiele_solve(self.alpha, self.beta, self.v)

    @property
    def nu(self):
        return effective_nu(self.alpha, self.beta, float(np.hypot(*self.v)))

    @property
    def rotation(self):
        """Angle of the spatial rotation taking ``v`` to ``|v| e2``."""
        return float(np.pi / 2 - np.arctan2(self.v[1], self.v[0])) if any(self.v) else 0.0


# --------------------------------------------------------- right-hand sides

def _rhs_numpy(m, heff, h, nu, alpha):
    out = np.zeros_like(m)
    if nu != 0.0:
        d1, d2 = kernels.gradient(m, h)
        dzm = 0.5 * (d1 - np.cross(m, d2))
        dzm -= dot(dzm, m)[..., None] * m
        out += nu * dzm
    mxh = np.cross(m, heff)
    out -= (mxh + alpha * np.cross(m, mxh)) / (1.0 + alpha * alpha)
    out[0] = out[-1] = 0.0
    out[:, 0] = out[:, -1] = 0.0
    return out


@njit(parallel=True)
def _rhs_numba(m, heff, h, nu, alpha):
    n = m.shape[0]
    out = np.zeros_like(m)
    inv = 1.0 / (1.0 + alpha * alpha)
    two_h = 2.0 * h
    for i in prange(1, n - 1):
        for j in range(1, n - 1):
            mx = m[i, j, 0]
            my = m[i, j, 1]
            mz = m[i, j, 2]
            hx = heff[i, j, 0]
            hy = heff[i, j, 1]
            hz = heff[i, j, 2]
            ax = my * hz - mz * hy
            ay = mz * hx - mx * hz
            az = mx * hy - my * hx
            bx = my * az - mz * ay
            by = mz * ax - mx * az
            bz = mx * ay - my * ax
            rx = -(ax + alpha * bx) * inv
            ry = -(ay + alpha * by) * inv
            rz = -(az + alpha * bz) * inv
            if nu != 0.0:
                p1x = (m[i + 1, j, 0] - m[i - 1, j, 0]) / two_h
                p1y = (m[i + 1, j, 1] - m[i - 1, j, 1]) / two_h
                p1z = (m[i + 1, j, 2] - m[i - 1, j, 2]) / two_h
                p2x = (m[i, j + 1, 0] - m[i, j - 1, 0]) / two_h
                p2y = (m[i, j + 1, 1] - m[i, j - 1, 1]) / two_h
                p2z = (m[i, j + 1, 2] - m[i, j - 1, 2]) / two_h
                zx = 0.5 * (p1x - (my * p2z - mz * p2y))
                zy = 0.5 * (p1y - (mz * p2x - mx * p2z))
                zz = 0.5 * (p1z - (mx * p2y - my * p2x))
                d = zx * mx + zy * my + zz * mz
                rx += nu * (zx - d * mx)
                ry += nu * (zy - d * my)
                rz += nu * (zz - d * mz)
            out[i, j, 0] = rx
            out[i, j, 1] = ry
            out[i, j, 2] = rz
    return out


def _rhs_array(m, h, params, nu, alpha):
    heff = kernels.effective_field(m, h, params.eps, params.p)
    m = np.ascontiguousarray(m)
    if use_numba():
        return _rhs_numba(m, heff, float(h), float(nu), float(alpha))
    return _rhs_numpy(m, heff, float(h), float(nu), float(alpha))


def rhs_moving_frame(f, params, nu, alpha):
    """``d_t m = nu P_m d_z m - [m x h + alpha m x (m x h)] / (1 + alpha^2)``.

    ``d_z m`` is projected onto the tangent plane so that the result is
    tangential to round-off; zero on the ring.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return _rhs_array(f.values, f.grid.h, params, nu, alpha)


def gilbert_residual(f, params, dtm, nu, alpha):
    """Max-node defect of ``u - m x (alpha u - h)`` with ``u = d_t m - nu P_m d_z m``."""
    m = f.values
    heff = kernels.effective_field(m, f.grid.h, params.eps, params.p)
    d1, d2 = kernels.gradient(m, f.grid.h)
    dzm = 0.5 * (d1 - np.cross(m, d2))
    dzm -= dot(dzm, m)[..., None] * m
    u = dtm - nu * dzm
    res = u - np.cross(m, alpha * u - heff)
    s = slice(1, -1)
    return float(np.max(np.abs(res[s, s])))


def transport(m, h, v):
    """``(v . grad) m`` projected onto the tangent plane."""
    d1, d2 = kernels.gradient(m, h)
    w = v[0] * d1 + v[1] * d2
    return w - dot(w, m)[..., None] * m


def rhs_lab_frame(f, params, dp):
    """Lab-frame Landau-Lifshitz form with spin-transfer torques.

    ``(1+a^2) d_t m = -(1 + a b) w - (a - b) m x w - m x h - a m x (m x h)``
    with ``w = (v . grad) m``.
    """
    return _rhs_lab_array(f.values, f.grid.h, params, dp)


def _rhs_lab_array(m, h, params, dp):
    a, b = dp.alpha, dp.beta
    heff = kernels.effective_field(m, h, params.eps, params.p)
    w = transport(m, h, dp.v)
    mxh = np.cross(m, heff)
    out = -((1.0 + a * b) * w + (a - b) * np.cross(m, w) + mxh + a * np.cross(m, mxh))
    out /= 1.0 + a * a
    out[0] = out[-1] = 0.0
    out[:, 0] = out[:, -1] = 0.0
    return out


def lab_gilbert_residual(f, params, dp, dtm):
    """Max-node defect of ``u + w - m x (alpha u + beta w - h)``."""
    m = f.values
    heff = kernels.effective_field(m, f.grid.h, params.eps, params.p)
    w = transport(m, f.grid.h, dp.v)
    res = dtm + w - np.cross(m, dp.alpha * dtm + dp.beta * w - heff)
    s = slice(1, -1)
    return float(np.max(np.abs(res[s, s])))


# ------------------------------------------------------------------ evolve

def dt_cap(h, alpha, nu):
    return min(0.2 * h * h * alpha / (1.0 + alpha * alpha), 0.2 * h / max(abs(nu), 1e-12))


@dataclass
class EvolveConfig:
    dt: float = None
    T: float = 1.0
    renorm_every: int = 1
    monitor_every: int = 10
    blowup_threshold: float = 50.0
    energy_tol: float = 1e-8
    snapshot_every: int = 0

    def resolved(self, h, alpha, nu):
        cap = dt_cap(h, alpha, nu)
        dt = cap if self.dt is None else self.dt
        if not dt > 0 or not self.T >= 0:
            raise ValueError("dt must be positive and T non-negative")
        if dt > cap * (1 + 1e-12):
            raise ValueError(f"dt={dt:g} exceeds the stability cap {cap:g}")
        if self.renorm_every < 1 or self.monitor_every < 1:
            raise ValueError("renorm_every and monitor_every must be >= 1")
        steps = max(1, int(np.ceil(self.T / dt - 1e-9))) if self.T > 0 else 0
        return (self.T / steps if steps else dt), steps


@dataclass
class Trajectory:
    t: list = dc_field(default_factory=list)
    E: list = dc_field(default_factory=list)
    D: list = dc_field(default_factory=list)
    D_minus_4pi: list = dc_field(default_factory=list)
    dissipation_increment: list = dc_field(default_factory=list)
    dz_sq: list = dc_field(default_factory=list)
    sup_grad: list = dc_field(default_factory=list)
    q: list = dc_field(default_factory=list)
    snapshots: list = dc_field(default_factory=list)
    alpha: float = 1.0
    nu: float = 0.0
    eps: float = 0.0
    dt: float = 0.0
    horizon: float = np.inf

    def rows(self):
        return list(zip(self.t, self.E, self.D_minus_4pi, self.dissipation_increment,
                        self.sup_grad, self.q))

    @property
    def dissipation(self):
        """``int_0^T int |d_t m|^2``."""
        return float(np.sum(self.dissipation_increment))


def horizon(E0, eps, alpha, nu):
    """Time horizon ``c alpha / (32 pi (1 + alpha^2) nu^2)``, ``c = (4 pi - E0) / eps``."""
    if nu == 0:
        return np.inf
    c = (4.0 * np.pi - E0) / eps
    return c * alpha / (32.0 * np.pi * (1.0 + alpha * alpha) * nu * nu)


def _monitor(traj, f, params, t, incr):
    eb = energy_breakdown(f, params, scheme="compact")
    d1, d2 = gradient(f)
    dzm = 0.5 * (d1 - np.cross(f.values, d2))
    traj.t.append(t)
    traj.E.append(eb.E)
    traj.D.append(eb.D)
    traj.D_minus_4pi.append(eb.D - 4.0 * np.pi * abs(eb.q_int))
    traj.dissipation_increment.append(incr)
    traj.dz_sq.append(integrate(dot(dzm, dzm), f.grid))
    traj.sup_grad.append(float(np.sqrt(np.max(dot(d1, d1) + dot(d2, d2)))))
    traj.q.append(eb.q_int)
    return eb


def evolve(f0, params, dp, cfg=None, nu=None, rhs=None):
    """RK4 integration of the moving-frame equation up to ``cfg.T``.

    ``nu`` overrides ``dp.nu``.  ``rhs`` may replace the right-hand side
    (array ``m`` -> array ``d_t m``), which is how the lab-frame mode reuses
    the integrator.  Monitors are recorded every ``monitor_every`` steps and
    at the final time; the dissipation increments use the trapezoidal rule
    in time on ``int |d_t m|^2``.
    """
    cfg = cfg or EvolveConfig()
    alpha = dp.alpha
    nu = dp.nu if nu is None else nu
    g = f0.grid
    dt, steps = cfg.resolved(g.h, alpha, nu)
    if rhs is None:
        def rhs(m):
            return _rhs_array(m, g.h, params, nu, alpha)
    traj = Trajectory(alpha=alpha, nu=nu, eps=params.eps, dt=dt)
    m = f0.values.copy()
    eb0 = _monitor(traj, f0, params, 0.0, 0.0)
    traj.horizon = horizon(eb0.E, params.eps, alpha, nu) if params.eps > 0 else np.inf
    if cfg.T > traj.horizon:
        warnings.warn(f"T={cfg.T:g} passes the energy-budget horizon {traj.horizon:.4g}",
                      HorizonExceeded, stacklevel=2)
    w = g.weights
    k1 = rhs(m)
    rate_prev = float(np.sum(dot(k1, k1) * w))
    acc = 0.0
    e_last = eb0.E
    last_monitor_step = 0
    for step in range(1, steps + 1):
        k2 = rhs(m + 0.5 * dt * k1)
        k3 = rhs(m + 0.5 * dt * k2)
        k4 = rhs(m + dt * k3)
        m = m + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step % cfg.renorm_every == 0 or step == steps:
            m /= np.linalg.norm(m, axis=-1, keepdims=True)
        k1 = rhs(m)
        rate = float(np.sum(dot(k1, k1) * w))
        acc += 0.5 * dt * (rate + rate_prev)
        rate_prev = rate
        if step % cfg.monitor_every == 0 or step == steps:
            cur = f0.replaced(m)
            eb = _monitor(traj, cur, params, step * dt, acc)
            acc = 0.0
            if cfg.snapshot_every and (step // cfg.monitor_every) % cfg.snapshot_every == 0:
                traj.snapshots.append((step * dt, m.copy()))
            if traj.sup_grad[-1] > cfg.blowup_threshold:
                raise BlowupSuspected(
                    f"sup|grad m| = {traj.sup_grad[-1]:.3g} above {cfg.blowup_threshold:g} "
                    f"at t={step * dt:.4g}", traj)
            if nu == 0:
                allowance = cfg.energy_tol * (step - last_monitor_step)
                if eb.E > e_last + allowance:
                    raise StabilityViolation(
                        f"energy rose by {eb.E - e_last:.3e} at t={step * dt:.4g} with nu=0", traj)
            e_last = eb.E
            last_monitor_step = step
    return f0.replaced(m, tag="evolved"), traj


def evolve_lab(f0, params, dp, cfg=None):
    """Diagnostic lab-frame evolution with explicit transport terms."""
    g = f0.grid
    cfg = cfg or EvolveConfig()
    speed = float(np.hypot(*dp.v))
    cap = min(0.2 * g.h * g.h * dp.alpha / (1.0 + dp.alpha ** 2), 0.2 * g.h / max(speed, 1e-12))
    if cfg.dt is None:
        cfg = EvolveConfig(**{**cfg.__dict__, "dt": cap})

    def rhs(m):
        return _rhs_lab_array(m, g.h, params, dp)

    # the transport speed enters only through the advective step cap
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HorizonExceeded)
        out, traj = evolve(f0, params, dp, cfg, nu=speed, rhs=rhs)
    traj.nu = dp.nu
    return out, traj


# --------------------------------------------------------- energy inequality

@dataclass
class InequalityReport:
    dissipation_term: float
    energy_change: float
    lhs: float
    rhs: float
    margin: float
    allowance: float
    holds: bool
    horizon: float
    max_energy: float
    below_4pi: bool


def energy_inequality_report(traj, alpha=None, nu=None, allowance=None):
    """Discrete form of the energy-budget inequality with ``lambda = 1/2``.

    ``(alpha/2) int int |d_t m|^2 + [E]_0^T <= (1 + alpha^2) nu^2 / (4 alpha) int (D - 4pi) dt``;
    time integrals by the trapezoidal rule on the monitor samples.
    """
    alpha = traj.alpha if alpha is None else alpha
    nu = traj.nu if nu is None else nu
    t = np.asarray(traj.t)
    diss = traj.dissipation
    dE = traj.E[-1] - traj.E[0]
    lhs = 0.5 * alpha * diss + dE
    integral = float(np.trapezoid(traj.D_minus_4pi, t)) if t.size > 1 else 0.0
    rhs = (1.0 + alpha * alpha) * nu * nu / (4.0 * alpha) * integral
    if allowance is None:
        allowance = 1e-8 * max(1, len(t))
    margin = rhs - lhs
    emax = float(np.max(traj.E))
    return InequalityReport(0.5 * alpha * diss, dE, lhs, rhs, margin, allowance,
                            margin >= -allowance, traj.horizon, emax, emax < 4.0 * np.pi)
