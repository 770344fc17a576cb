"""Closed-form field families with exact Jacobians.

Every evaluator takes coordinate arrays ``(x1, x2)`` of any common shape and
returns ``(m, (d1m, d2m))`` with a trailing axis of length 3.  ``sample``
turns an evaluator into a :class:`SpinField` on a grid.
"""

from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np
from scipy import integrate as sp_integrate
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .energy import energy_breakdown
from .grid_field import E3, SpinField, pin_ring

FOUR_PI = 4.0 * np.pi


# ------------------------------------------------------------ stereographic

def stereographic(x1, x2):
    """Adapted stereographic map ``Phi(x) = (2 x_perp, |x|^2 - 1) / (1 + |x|^2)``.

    With ``x_perp = (-x2, x1)`` the degree is -1.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    s = x1 * x1 + x2 * x2
    q = 1.0 / (1.0 + s)
    q2 = q * q
    m = np.stack([-2.0 * x2 * q, 2.0 * x1 * q, (s - 1.0) * q], axis=-1)
    d1 = np.stack([4.0 * x1 * x2 * q2, 2.0 * q - 4.0 * x1 * x1 * q2, 4.0 * x1 * q2], axis=-1)
    d2 = np.stack([-2.0 * q + 4.0 * x2 * x2 * q2, -4.0 * x1 * x2 * q2, 4.0 * x2 * q2], axis=-1)
    return m, (d1, d2)


def _rotate(v, phi):
    c, s = np.cos(phi), np.sin(phi)
    out = v.copy()
    out[..., 0] = c * v[..., 0] - s * v[..., 1]
    out[..., 1] = s * v[..., 0] + c * v[..., 1]
    return out


@dataclass(frozen=True)
class ModuliPoint:
    """``m(x) = e^{i phi} Phi(rho x + b)``; ``b`` is the post-scaling shift."""

    rho: float = 1.0
    phi: float = 0.0
    b: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        object.__setattr__(self, "b", (float(self.b[0]), float(self.b[1])))

    @property
    def center(self):
        """Position of the core (where ``m = -e3``)."""
        return (-self.b[0] / self.rho, -self.b[1] / self.rho)


def moduli_map(pt, x1, x2):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    m, (d1, d2) = stereographic(pt.rho * x1 + pt.b[0], pt.rho * x2 + pt.b[1])
    if pt.phi:
        m, d1, d2 = (_rotate(a, pt.phi) for a in (m, d1, d2))
    return m, (pt.rho * d1, pt.rho * d2)


def closed_forms(p):
    """``(D, H, V_p)`` of the unscaled ``Phi``."""
    if not 2.0 < p <= 4.0:
        raise ValueError(f"closed forms need 2 < p <= 4 (V_p(Phi) diverges at p=2), got {p}")
    return FOUR_PI, -2.0 * FOUR_PI, 2.0 * np.pi / (p - 2.0)


def optimal_scale(p):
    """Minimising dilation ``lambda* = -2 V / H = 1 / (2(p-2))``."""
    _, H, V = closed_forms(p)
    return -2.0 * V / H


def scaled_energy_curve(lam, params):
    """``E(Phi(lam x)) = D + eps (H / lam + V / lam^2)``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    D, H, V = closed_forms(params.p)
    return D + params.eps * (H / lam + V / lam ** 2)


def moduli_objective(pt, p):
    """``H + V`` on the anti-conformal class: ``-8pi cos(phi)/rho + 2pi/(rho^2 (p-2))``."""
    _, H, V = closed_forms(p)
    return H * np.cos(pt.phi) / pt.rho + V / pt.rho ** 2


def moduli_optimum(p):
    lam = optimal_scale(p)
    return ModuliPoint(lam, 0.0), moduli_objective(ModuliPoint(lam, 0.0), p)


# ------------------------------------------------------------ cut-off tools

def _g(t):
    t = np.asarray(t, dtype=float)
    pos = t > 0
    return np.where(pos, np.exp(-1.0 / np.where(pos, t, 1.0)), 0.0)


def eta(s):
    """Smooth non-increasing step: 1 for ``s <= 0``, 0 for ``s >= 1/2``."""
    s = np.asarray(s, dtype=float)
    a = _g(0.5 - s)
    b = _g(s)
    inside = (s > 0) & (s < 0.5)
    val = np.where(inside, a / np.where(inside, a + b, 1.0), 0.0)
    return np.where(s <= 0, 1.0, val)


def eta_prime(s):
    s = np.asarray(s, dtype=float)
    inside = (s > 0) & (s < 0.5)
    t = np.where(inside, s, 0.25)
    u = 0.5 - t
    a = np.exp(-1.0 / u)
    b = np.exp(-1.0 / t)
    # d/ds of a / (a + b) with a' = -a/u^2, b' = b/t^2
    d = -a * b * (1.0 / u ** 2 + 1.0 / t ** 2) / (a + b) ** 2
    return np.where(inside, d, 0.0)


@lru_cache(maxsize=1)
def _h_spline(nodes=4097):
    """Cubic Hermite interpolant of ``h(y) = int_0^y eta`` on ``[0, 1/2]``."""
    y = np.linspace(0.0, 0.5, nodes)
    pieces = [sp_integrate.quad(lambda s: float(eta(s)), a, b, epsabs=1e-15, epsrel=1e-13)[0]
              for a, b in zip(y[:-1], y[1:])]
    vals = np.concatenate([[0.0], np.cumsum(pieces)])
    return CubicHermiteSpline(y, vals, eta(y))


H_PLATEAU = 0.25  # int_0^{1/2} eta, exact since eta(s) + eta(1/2 - s) = 1


def h_func(y):
    """``h(y) = int_0^y eta``: equals ``y`` for ``y <= 0``, ``1/4`` for ``y >= 1/2``."""
    y = np.asarray(y, dtype=float)
    mid = _h_spline()(np.clip(y, 0.0, 0.5))
    return np.where(y <= 0, y, np.where(y >= 0.5, H_PLATEAU, mid))


@dataclass(frozen=True)
class CutoffProfile:
    R: float

    def __post_init__(self):
        if not self.R >= 1.0:
            raise ValueError(f"cut-off radius must be >= 1, got {self.R}")

    @property
    def log_R(self):
        return float(np.log1p(self.R * self.R))

    @property
    def support(self):
        """Radius beyond which the profile is exactly constant."""
        return float(np.sqrt(np.expm1(self.log_R + 0.5)))


def stream_function(profile, r):
    """``(f_R, f_R', f_R'')`` at radii ``r``."""
    r = np.asarray(r, dtype=float)
    lr = np.log1p(r * r)
    y = lr - profile.log_R
    k = 2.0 * r / (1.0 + r * r)
    dk = 2.0 * (1.0 - r * r) / (1.0 + r * r) ** 2
    e = eta(y)
    f = h_func(y) + profile.log_R
    f1 = e * k
    f2 = eta_prime(y) * k * k + e * dk
    return f, f1, f2


def cutoff_family(profile, x1, x2):
    """``Phi_R``: equal to ``Phi`` on ``B_R`` and to ``e3`` outside ``B_2R``."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    m, (d1, d2) = stereographic(x1, x2)
    r = np.hypot(x1, x2)
    out = r > profile.R
    if not np.any(out):
        return m, (d1, d2)
    ro, y1, y2 = r[out], x1[out], x2[out]
    _, f1, f2 = stream_function(profile, ro)
    a = f1 / ro
    da = (f2 - a) / ro  # d/dr (f'/r)
    c = np.sqrt(np.clip(1.0 - f1 * f1, 0.0, None))
    dc = -f1 * f2 / np.where(c > 0, c, 1.0)
    mo = np.stack([-a * y2, a * y1, c], axis=-1)
    jac = []
    for i, xi in ((0, y1), (1, y2)):
        ur = xi / ro
        dm = np.empty_like(mo)
        dm[:, 0] = -da * ur * y2 - (a if i == 1 else 0.0)
        dm[:, 1] = da * ur * y1 + (a if i == 0 else 0.0)
        dm[:, 2] = dc * ur
        jac.append(dm)
    m[out], d1[out], d2[out] = mo, jac[0], jac[1]
    return m, (d1, d2)


def p2_parameters(eps):
    """``(R, lambda)`` of the p=2 construction: ``R = |ln eps| / sqrt(eps)``, ``lambda = |ln eps| / 4``."""
    if not 0.0 < eps < 0.1:
        raise ValueError(f"eps must lie in (0, 0.1), got {eps}")
    le = abs(np.log(eps))
    return le / np.sqrt(eps), le / 4.0


@dataclass
class P2UpperBound:
    eps: float
    profile: CutoffProfile
    lam: float
    predicted: float

    @property
    def support_radius(self):
        """The sampled field is exactly ``e3`` beyond this radius."""
        return self.profile.support / self.lam

    def __call__(self, x1, x2):
        m, (d1, d2) = cutoff_family(self.profile, self.lam * np.asarray(x1, float),
                                    self.lam * np.asarray(x2, float))
        return m, (self.lam * d1, self.lam * d2)


def p2_upper_bound_field(eps):
    """Sampler for ``m(x) = Phi_R(lambda x)`` and the bound ``4pi (1 - 4 eps/|ln eps|)``."""
    R, lam = p2_parameters(eps)
    predicted = FOUR_PI * (1.0 - 4.0 * eps / abs(np.log(eps)))
    return P2UpperBound(eps, CutoffProfile(R), lam, predicted)


def p2_radial_energies(eps, n=200001):
    """Radial-quadrature ``(D, H, V_2, E)`` of the p=2 upper-bound field.

    Uses the polar-angle profile ``sin(theta) = f_R'`` and is independent of
    the Cartesian Jacobian code; dilation enters through the exact scalings
    ``H / lambda`` and ``V / lambda^2``.
    """
    g = p2_upper_bound_field(eps)
    R = g.profile.R
    r_in = np.linspace(0.0, R, n)
    s_in = 2.0 * r_in / (1.0 + r_in ** 2)
    c_in = (r_in ** 2 - 1.0) / (1.0 + r_in ** 2)
    t_in = -2.0 / (1.0 + r_in ** 2)
    r_out = np.linspace(R, g.profile.support, n)
    _, s_out, f2 = stream_function(g.profile, r_out)
    c_out = np.sqrt(1.0 - s_out ** 2)
    t_out = f2 / c_out

    def parts(r, s, c, t):
        rs = np.where(r > 0, r, 1.0)
        sin_over_r = np.where(r > 0, s / rs, 2.0)
        dD = 0.5 * (t * t + sin_over_r ** 2)
        # curl of s(r) e_phi is (r s)'/r = s' + s/r, with s' = c theta'
        curl = c * t + sin_over_r
        dH = s * s * t + (c - 1.0) * curl
        dV = 0.5 * (1.0 - c)
        w = 2.0 * np.pi * r
        return [sp_integrate.simpson(d * w, x=r) for d in (dD, dH, dV)]

    D, H, V = (a + b for a, b in zip(parts(r_in, s_in, c_in, t_in), parts(r_out, s_out, c_out, t_out)))
    H, V = H / g.lam, V / g.lam ** 2
    return D, H, V, D + eps * (H + V)


# ----------------------------------------------------------------- sampling

FAMILIES = ("stereo", "moduli", "cutoff", "p2")


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def _smoothstep_prime(t):
    inside = (t > 0) & (t < 1)
    return np.where(inside, 30.0 * t * t * (1.0 - t) ** 2, 0.0)


def far_field_taper(grid, width):
    """Window ``chi`` and its gradient, 1 on ``|x|_inf <= L - width``, 0 on the ring."""
    x1, x2 = grid.mesh
    L = grid.L
    t1 = (L - np.abs(x1)) / width
    t2 = (L - np.abs(x2)) / width
    s1, s2 = _smoothstep(t1), _smoothstep(t2)
    ds1 = -np.sign(x1) * _smoothstep_prime(t1) / width
    ds2 = -np.sign(x2) * _smoothstep_prime(t2) / width
    return s1 * s2, (ds1 * s2, s1 * ds2)


def sample(evaluator, grid, taper=0.5, tag=None):
    """Sample a closed-form family on ``grid`` as a :class:`SpinField`.

    The lattice ring must equal ``e3``, while the families reach ``e3`` only
    at infinity.  Pinning the raw samples would put a jump next to the ring,
    so by default the field is blended into ``e3`` over an outer frame of
    width ``taper * L`` (normalised blend, exact Jacobian carried along).
    Inside ``|x|_inf <= L - taper*L`` the samples are untouched and
    ``field.window`` records that half-width.  ``taper=0`` only pins the
    ring, which is right for compactly supported fields.
    """
    x1, x2 = grid.mesh
    m, (d1, d2) = evaluator(x1, x2)
    window = grid.L
    if taper:
        width = taper * grid.L
        chi, (c1, c2) = far_field_taper(grid, width)
        diff = m - E3
        u = chi[..., None] * diff + E3
        norm = np.linalg.norm(u, axis=-1)
        if np.min(norm) < 0.5:
            raise ValueError("far-field taper passes near the antipode of e3; enlarge the domain")
        mt = u / norm[..., None]
        jac = []
        for d, c in ((d1, c1), (d2, c2)):
            du = chi[..., None] * d + c[..., None] * diff
            du -= np.einsum("...k,...k->...", mt, du)[..., None] * mt
            jac.append(du / norm[..., None])
        m, (d1, d2) = mt, tuple(jac)
        window = grid.L - width
    pin_ring(m)
    for d in (d1, d2):
        d[0] = d[-1] = 0.0
        d[:, 0] = d[:, -1] = 0.0
    m /= np.linalg.norm(m, axis=-1, keepdims=True)
    pin_ring(m)
    return SpinField(grid, m, tag=tag, jacobian=(d1, d2), window=window)


def make_evaluator(kind, **kw):
    """Evaluator for ``kind`` in :data:`FAMILIES`.

    ``moduli`` takes ``rho, phi, b``; ``cutoff`` takes ``R``; ``p2`` takes ``eps``.
    """
    if kind == "stereo":
        return stereographic
    if kind == "moduli":
        pt = ModuliPoint(kw.get("rho", 1.0), kw.get("phi", 0.0), kw.get("b", (0.0, 0.0)))
        return lambda x1, x2: moduli_map(pt, x1, x2)
    if kind == "cutoff":
        prof = CutoffProfile(kw.get("R", 10.0))
        return lambda x1, x2: cutoff_family(prof, x1, x2)
    if kind == "p2":
        return p2_upper_bound_field(kw["eps"])
    raise ValueError(f"unknown family {kind!r}; choose from {FAMILIES}")


def sample_moduli(grid, rho=1.0, phi=0.0, b=(0.0, 0.0), taper=0.5):
    pt = ModuliPoint(rho, phi, b)
    return sample(lambda x1, x2: moduli_map(pt, x1, x2), grid, taper,
                  tag=f"moduli(rho={rho:g},phi={phi:g},b=({pt.b[0]:g},{pt.b[1]:g}))")


def sample_stereographic(grid, scale=1.0, taper=0.5):
    """Sampled ``Phi(scale * x)``."""
    return sample_moduli(grid, rho=scale, taper=taper)


def perturbed_skyrmion(grid, amplitude, scale=0.25, bump_center=(2.0, 1.0), bump_width=2.0,
                       direction=(1.0, 0.5, 0.0), taper=0.5):
    """``normalize(Phi(scale x) + amplitude * exp(-|x - x0|^2 / (2 w^2)) * d)``, ring pinned.

    The bump is in-plane and off-centre, so the perturbed field is neither
    radially symmetric nor a member of the anti-conformal class.
    """
    base = sample_stereographic(grid, scale, taper)
    x1, x2 = grid.mesh
    bump = np.exp(-((x1 - bump_center[0]) ** 2 + (x2 - bump_center[1]) ** 2) / (2.0 * bump_width ** 2))
    v = base.values + amplitude * bump[..., None] * np.asarray(direction, dtype=float)
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    pin_ring(v)
    return SpinField(grid, v, tag=f"perturbed(scale={scale:g},amp={amplitude:.6g})")


def matched_perturbation(grid, params, margin, scale=0.25, max_amplitude=3.0, **kw):
    """Perturbed skyrmion whose compact-scheme energy is ``4pi - margin * eps``.

    Matching ``margin = (4pi - E0) / eps`` across ``eps`` keeps the initial
    data on the same footing when the small-quantity scalings are compared.
    """
    def gap(a):
        f = perturbed_skyrmion(grid, a, scale, **kw)
        return (FOUR_PI - energy_breakdown(f, params, scheme="compact", with_charge=False).E) / params.eps - margin

    lo, hi = gap(0.0), gap(max_amplitude)
    if lo < 0 or hi > 0:
        raise ValueError(f"margin {margin:g} not reachable: (4pi - E)/eps spans [{hi + margin:g}, {lo + margin:g}]")
    a = brentq(gap, 0.0, max_amplitude, xtol=1e-10)
    return perturbed_skyrmion(grid, a, scale, **kw), a
