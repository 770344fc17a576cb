"""Energy functionals, effective field, helical derivatives and bound checks.

Two discretisations of the Dirichlet term are provided.  ``"central"`` is
``integrate(|grad m|^2 / 2)`` with the central-difference gradient and is what
all diagnostics report by default.  ``"compact"`` sums squared nearest-
neighbour differences over lattice edges; its exact gradient is the
five-point Laplacian, so it is the energy that the relaxation flow and the
dynamics decrease.
"""

from dataclasses import dataclass, asdict
from typing import NamedTuple

import numpy as np

from . import kernels
from .grid_field import (
    E3,
    curl_from_derivs,
    dot,
    gradient,
    integrate,
    topological_charge,
    charge_density_from_derivs,
)


@dataclass(frozen=True)
class ModelParams:
    p: float = 4.0
    eps: float = 0.05

    def __post_init__(self):
        if not 2.0 <= self.p <= 4.0:
            raise ValueError(f"p must lie in [2, 4], got {self.p}")
        if self.eps < 0:
            raise ValueError(f"eps must be non-negative, got {self.eps}")


class EnergyBreakdown(NamedTuple):
    D: float
    H: float
    Vp: float
    V4: float
    E: float
    q_int: int

    def as_dict(self):
        return self._asdict()


def _derivs(f, analytic=False):
    if analytic:
        if f.jacobian is None:
            raise ValueError("field carries no analytic jacobian")
        return f.jacobian
    return gradient(f)


# ----------------------------------------------------------------- energies

def dirichlet_density(f, derivs=None):
    d1, d2 = derivs if derivs is not None else gradient(f)
    return 0.5 * (dot(d1, d1) + dot(d2, d2))


def dirichlet(f, scheme="central", derivs=None, window=None):
    """Dirichlet energy ``D = 1/2 int |grad m|^2``."""
    if scheme == "central":
        return integrate(dirichlet_density(f, derivs), f.grid, window)
    if scheme == "compact":
        if window is not None:
            raise ValueError("the compact scheme has no windowed form")
        return dirichlet_compact(f)
    raise ValueError(f"unknown scheme {scheme!r}")


def dirichlet_compact(f):
    """Edge-sum Dirichlet energy; exact gradient is the five-point Laplacian."""
    m = f.values
    w = np.ones(f.grid.n)
    w[0] = w[-1] = 0.5
    e1 = m[1:, :, :] - m[:-1, :, :]
    e2 = m[:, 1:, :] - m[:, :-1, :]
    s1 = np.sum(np.sum(e1 * e1, axis=-1) * w[None, :])
    s2 = np.sum(np.sum(e2 * e2, axis=-1) * w[:, None])
    return float(0.5 * (s1 + s2))


def helicity_density(f, derivs=None):
    d1, d2 = derivs if derivs is not None else gradient(f)
    return dot(f.values - E3, curl_from_derivs(d1, d2))


def helicity(f, form="direct", derivs=None, window=None):
    """Helicity ``int (m - e3) . curl m``.

    ``form="by_parts"`` evaluates the integrated-by-parts variant
    ``-2 int (1 - m3) curl m`` instead.
    """
    d1, d2 = derivs if derivs is not None else gradient(f)
    if form == "direct":
        dens = helicity_density(f, (d1, d2))
    elif form == "by_parts":
        dens = -2.0 * (1.0 - f.values[..., 2]) * (d1[..., 1] - d2[..., 0])
    else:
        raise ValueError(f"unknown form {form!r}")
    return integrate(dens, f.grid, window)


def potential_density(m, p, form="abs"):
    if form == "abs":
        diff = m - E3
        return 2.0 ** (-p) * dot(diff, diff) ** (p / 2.0)
    if form == "m3":
        return 2.0 ** (-p / 2.0) * np.clip(1.0 - m[..., 2], 0.0, None) ** (p / 2.0)
    raise ValueError(f"unknown form {form!r}")


def potential(f, p, form="abs", window=None):
    """``V_p = 2^-p int |m - e3|^p``; ``form="m3"`` uses ``(1 - m3)^(p/2)``."""
    if not 2.0 <= p <= 4.0:
        raise ValueError(f"p must lie in [2, 4], got {p}")
    return integrate(potential_density(f.values, p, form), f.grid, window)


def energy_density(f, params, derivs=None):
    """Pointwise ``e_eps(m)``; integrates to ``E`` of the central scheme."""
    derivs = derivs if derivs is not None else gradient(f)
    return dirichlet_density(f, derivs) + params.eps * (
        helicity_density(f, derivs) + potential_density(f.values, params.p)
    )


def energy_breakdown(f, params, scheme="central", window=None, with_charge=True):
    derivs = gradient(f)
    D = dirichlet(f, scheme, derivs, window)
    H = helicity(f, derivs=derivs, window=window)
    Vp = potential(f, params.p, window=window)
    V4 = Vp if params.p == 4.0 else potential(f, 4.0, window=window)
    q = topological_charge(f).q_int if with_charge else 0
    return EnergyBreakdown(D, H, Vp, V4, D + params.eps * (H + Vp), q)


def total_energy(f, params, scheme="central"):
    return energy_breakdown(f, params, scheme, with_charge=False).E


# ----------------------------------------------------------- effective field

def potential_force(m, p):
    """``f_p(m) = p 2^-p |m - e3|^(p-2) (m - e3)``, the gradient of the V_p density."""
    diff = m - E3
    sq = dot(diff, diff)
    if p == 2.0:
        mag = np.full(sq.shape, 0.5)
    else:
        mag = p * 2.0 ** (-p) * sq ** ((p - 2.0) / 2.0)
    return mag[..., None] * diff


def helicity_gradient(f, derivs=None):
    """Exact variation of the discrete helicity, per unit node weight.

    Equals ``2 curl m`` at every node at least three rows away from the
    outer ring; closer to the ring the one-sided stencils and half weights
    enter.
    """
    g = f.grid
    d1, d2 = derivs if derivs is not None else gradient(f)
    c = curl_from_derivs(d1, d2)
    a = (f.values - E3) * g.weights[..., None]
    h = g.h
    ct = np.empty_like(a)
    ct[..., 0] = -kernels.gradient_adjoint(a[..., 2], h, 1)
    ct[..., 1] = kernels.gradient_adjoint(a[..., 2], h, 0)
    ct[..., 2] = kernels.gradient_adjoint(a[..., 0], h, 1) - kernels.gradient_adjoint(a[..., 1], h, 0)
    return c + ct / g.weights[..., None]


def effective_field(f, params, derivs=None):
    """``h_eps = lap m - eps (2 curl m + f_p(m))`` at interior nodes.

    The result is minus the nodal gradient of the compact-scheme energy
    divided by the quadrature weight; it is zero on the outer ring.
    """
    return kernels.effective_field(f.values, f.grid.h, params.eps, params.p)


def pin_zero_ring(a):
    a[0] = 0.0
    a[-1] = 0.0
    a[:, 0] = 0.0
    a[:, -1] = 0.0
    return a


def tangential(m, w):
    """Projection ``w - (w . m) m`` onto the tangent plane at ``m``."""
    return w - dot(w, m)[..., None] * m


# ------------------------------------------------------- helical derivatives

_AXES = {1: np.array([1.0, 0.0, 0.0]), 2: np.array([0.0, 1.0, 0.0])}


def helical_derivative(f, kappa, axis, derivs=None, analytic=False):
    """``D_i m = d_i m - kappa e_i x m`` for ``axis`` in {1, 2}."""
    if axis not in _AXES:
        raise ValueError("axis must be 1 or 2")
    d = (derivs if derivs is not None else _derivs(f, analytic))[axis - 1]
    return d - kappa * np.cross(_AXES[axis], f.values)


def bogomolny_field(f, kappa, derivs=None, analytic=False):
    derivs = derivs if derivs is not None else _derivs(f, analytic)
    D1 = helical_derivative(f, kappa, 1, derivs)
    D2 = helical_derivative(f, kappa, 2, derivs)
    return D1 + np.cross(f.values, D2)


def bogomolny_residual(f, kappa, window=None, analytic=False):
    """``int |D_1 m + m x D_2 m|^2``; zero exactly on Bogomolny solutions."""
    r = bogomolny_field(f, kappa, analytic=analytic)
    return integrate(dot(r, r), f.grid, window)


def bogomolny_residual_norm(f, kappa, window=None, analytic=False):
    """L2 norm of the Bogomolny defect (square root of the residual)."""
    return float(np.sqrt(bogomolny_residual(f, kappa, window, analytic)))


def pointwise_identity_residual(f, kappa, analytic=True, window=None):
    """Max-node defect of the pointwise completion-of-squares identity.

    ``|grad m|^2/2 - omega + kappa((m - e3).curl m + kappa (1 - m3)^2 / 2)``
    equals ``|D_1 m + m x D_2 m|^2 / 2`` at every point.
    """
    d1, d2 = _derivs(f, analytic)
    m = f.values
    lhs = (0.5 * (dot(d1, d1) + dot(d2, d2))
           - charge_density_from_derivs(m, d1, d2)
           + kappa * (dot(m - E3, curl_from_derivs(d1, d2))
                      + 2.0 * kappa * 0.25 * (1.0 - m[..., 2]) ** 2))
    r = bogomolny_field(f, kappa, derivs=(d1, d2))
    diff = np.abs(lhs - 0.5 * dot(r, r))
    if window is not None:
        s = f.grid.box_slice(window)
        diff = diff[s, s]
    return float(np.max(diff))


# ------------------------------------------------------------------- bounds

@dataclass
class BoundCheck:
    name: str
    lhs: float
    rhs: float
    margin: float
    holds: bool
    status: str


@dataclass
class BoundReport:
    checks: list
    allowance: float
    energies: EnergyBreakdown

    @property
    def all_hold(self):
        return all(c.holds for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_rows(self):
        return [asdict(c) for c in self.checks]


BOUND_NAMES = {
    "a": "helicity H^2 <= 32 D V",
    "b": "E >= (1-16eps) D + eps V / 2",
    "c": "E >= 4pi Q + eps (1 - 2eps V4/Vp) Vp",
    "d": "E >= (1 - 2eps V4/Vp) D + 8pi eps (V4/Vp) Q",
    "e": "Q = -1: E >= 4pi (1 - 4eps)",
    "f": "D >= 4pi |Q|",
}


def bound_suite(f, params, disc_constant=10.0, energies=None):
    """Evaluate the six energy inequalities with signed margins.

    A check fails only if its margin is below ``-allowance`` where
    ``allowance = max(1e-9, disc_constant * h^2 * D)``.  Margins between
    ``-allowance`` and 0 are reported as discretisation-level.
    """
    eb = energies if energies is not None else energy_breakdown(f, params)
    D, H, Vp, V4, E, Q = eb
    eps = params.eps
    allowance = max(1e-9, disc_constant * f.grid.h ** 2 * D)
    rows = [("a", 32.0 * D * Vp, H * H)]
    rows.append(("b", E, (1.0 - 16.0 * eps) * D + 0.5 * eps * Vp))
    if Vp > 0:
        ratio = V4 / Vp
        rows.append(("c", E, 4.0 * np.pi * Q + eps * (1.0 - 2.0 * eps * ratio) * Vp))
        rows.append(("d", E, (1.0 - 2.0 * eps * ratio) * D + 8.0 * np.pi * eps * ratio * Q))
    if Q == -1:
        rows.append(("e", E, 4.0 * np.pi * (1.0 - 4.0 * eps)))
    rows.append(("f", D, 4.0 * np.pi * abs(Q)))
    checks = []
    for name, lhs, rhs in rows:
        margin = float(lhs - rhs)
        if margin >= 0:
            status = "ok"
        elif margin >= -allowance:
            status = "discretization-level"
        else:
            status = "VIOLATED"
        checks.append(BoundCheck(name, float(lhs), float(rhs), margin, status != "VIOLATED", status))
    return BoundReport(checks, allowance, eb)


def metric_distance(f, g, p):
    """Diagnostic distance: gradient L2 difference plus e3-component L^(p/2)."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    d1, d2 = kernels.gradient(f.values - g.values, f.grid.h)
    grad = np.sqrt(integrate(dot(d1, d1) + dot(d2, d2), f.grid))
    q = p / 2.0
    diff3 = np.abs(f.values[..., 2] - g.values[..., 2])
    return float(grad + integrate(diff3 ** q, f.grid) ** (1.0 / q))
