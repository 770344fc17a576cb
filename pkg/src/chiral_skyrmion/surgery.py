"""Splitting a field across a low-energy annulus into inner and outer parts.

Given ``m`` whose energy in ``B_4R \\ B_R`` is small, a radius ``c`` in
``[R, 2R]`` is chosen and two fields are built: ``m1`` keeps ``m`` on ``B_c``
and is blended to a constant outside, ``m2`` is constant inside ``B_c`` and
keeps ``m`` outside ``B_2c``.  Values on circles are read by bilinear
interpolation of the node values.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.ndimage import map_coordinates

from .energy import potential_density
from .families import eta
from .grid_field import E3, SpinField, dot, gradient, pin_ring, topological_charge


class AnchorDegenerate(ValueError):
    """Mean spin on the cut circle is too short to define an anchor direction."""


class DomainTooSmall(ValueError):
    """The construction needs more room than the grid provides."""

    def __init__(self, msg, required_radius=None):
        super().__init__(msg)
        self.required_radius = required_radius


@dataclass(frozen=True)
class SplitConfig:
    R: float
    sigma: int = 1
    delta: float = 0.1
    center: tuple = (0.0, 0.0)
    p: float = 4.0
    n_theta: int = 256

    def __post_init__(self):
        if not self.R >= 1.0:
            raise ValueError(f"R must be >= 1, got {self.R}")
        if self.sigma not in (0, 1):
            raise ValueError("sigma must be 0 or 1")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.n_theta < 8:
            raise ValueError("need at least 8 angular samples")


@dataclass
class SplitResult:
    c: float
    inner: SpinField
    outer: SpinField
    q: int
    q1: int
    q2: int
    annulus_energy: float
    inner_tail_energy: float
    outer_core_energy: float
    K: float
    anchors: tuple
    log_length: float = 0.0
    g_table: dict = dc_field(default_factory=dict)

    @property
    def additive(self):
        return self.q1 + self.q2 == self.q


def _polar(grid, center):
    x1, x2 = grid.mesh
    d1 = x1 - center[0]
    d2 = x2 - center[1]
    return np.hypot(d1, d2), np.arctan2(d2, d1)


def _interp(grid, arr, px, py):
    """Bilinear interpolation of node data at physical points."""
    ii = (np.asarray(px) + grid.L) / grid.h
    jj = (np.asarray(py) + grid.L) / grid.h
    if arr.ndim == 2:
        return map_coordinates(arr, [ii, jj], order=1, mode="nearest")
    return np.stack([map_coordinates(arr[..., k], [ii, jj], order=1, mode="nearest")
                     for k in range(arr.shape[-1])], axis=-1)


def _check_inside(grid, center, radius):
    reach = max(abs(center[0]), abs(center[1])) + radius
    if reach > grid.L - grid.h:
        raise DomainTooSmall(
            f"circle of radius {radius:g} about {tuple(center)} touches the boundary ring "
            f"(needs half-width > {reach + grid.h:g}, grid has {grid.L:g})", reach + grid.h)


def _annulus_density(f, cfg):
    d1, d2 = gradient(f)
    dens = dot(d1, d1) + dot(d2, d2)
    if cfg.sigma:
        dens = dens + potential_density(f.values, cfg.p)
    return dens


def circle_values(f, arr, center, r, n_theta):
    th = 2.0 * np.pi * np.arange(n_theta) / n_theta
    return _interp(f.grid, arr, center[0] + r * np.cos(th), center[1] + r * np.sin(th))


def choose_radius(f, cfg):
    """Cut radius ``c`` minimising ``(g(c) + g(2c)) c`` over ``[R, 2R]`` at spacing h.

    ``g(r)`` is the angular integral of ``|grad m|^2`` (plus, for sigma=1,
    the potential density) on the circle of radius ``r``.
    """
    grid = f.grid
    _check_inside(grid, cfg.center, 4.0 * cfg.R)
    dens = _annulus_density(f, cfg)
    k = int(np.floor(cfg.R / grid.h + 1e-9))
    radii = cfg.R + grid.h * np.arange(k + 1)
    dth = 2.0 * np.pi / cfg.n_theta

    def g(r):
        return float(np.sum(circle_values(f, dens, cfg.center, r, cfg.n_theta)) * dth)

    g1 = np.array([g(r) for r in radii])
    g2 = np.array([g(2.0 * r) for r in radii])
    obj = (g1 + g2) * radii
    i = int(np.argmin(obj))
    table = {"r": radii, "g_r": g1, "g_2r": g2, "objective": obj, "mean": float(np.mean(obj))}
    return float(radii[i]), table


def _mean_anchor(f, center, r, n_theta):
    mbar = np.mean(circle_values(f, f.values, center, r, n_theta), axis=0)
    size = float(np.linalg.norm(mbar))
    if size < 0.5:
        raise AnchorDegenerate(
            f"|mean spin| = {size:.3f} < 1/2 on the circle r={r:g}; the annulus is not low-energy")
    return mbar / size


def _blend(a, b, w):
    """``normalize(w a + (1 - w) b)`` with a lower bound on the length of the blend."""
    u = w[..., None] * a + (1.0 - w[..., None]) * b
    norm = np.linalg.norm(u, axis=-1)
    if norm.size and np.min(norm) < 0.5:
        raise AnchorDegenerate(f"blend length {np.min(norm):.3f} < 1/2 in the transition annulus")
    return u / norm[..., None]


def great_circle(e, s):
    """Shorter great-circle arc from ``e`` (s=0) to ``e3`` (s=1)."""
    s = np.asarray(s, dtype=float)
    cosw = float(np.clip(np.dot(e, E3), -1.0, 1.0))
    w = np.arccos(cosw)
    if w < 1e-14:
        return np.broadcast_to(E3, s.shape + (3,)).copy()
    axis_dir = E3 - cosw * e
    if np.linalg.norm(axis_dir) < 1e-14:  # e = -e3: every meridian is shortest
        axis_dir = np.array([1.0, 0.0, 0.0])
    t = axis_dir / np.linalg.norm(axis_dir)
    ang = (w * s)[..., None]
    return np.cos(ang) * e + np.sin(ang) * t


def _region_energy(f, cfg, mask):
    return float(np.sum(_annulus_density(f, cfg) * f.grid.weights * mask))


def split(f, cfg, c=None):
    """Split ``f`` across the annulus described by ``cfg``.

    Raises :class:`AnchorDegenerate` when a mean spin is shorter than 1/2 and
    :class:`DomainTooSmall` when the sigma=0 logarithmic tail
    ``2c + L, L = 2c (e^{1/delta} - 1)`` does not fit in the grid.
    """
    grid = f.grid
    table = {}
    if c is None:
        c, table = choose_radius(f, cfg)
    else:
        _check_inside(grid, cfg.center, 2.0 * c)
    r, th = _polar(grid, cfg.center)
    m = f.values
    n_th = cfg.n_theta

    log_len = 0.0
    if cfg.sigma == 0:
        e1 = _mean_anchor(f, cfg.center, c, n_th)
        log_len = 2.0 * c * np.expm1(1.0 / cfg.delta)
        _check_inside(grid, cfg.center, 2.0 * c + log_len)
    else:
        e1 = E3.copy()
    e2 = _mean_anchor(f, cfg.center, 2.0 * c, n_th)

    ring_c = _interp(grid, m, cfg.center[0] + c * np.cos(th), cfg.center[1] + c * np.sin(th))
    ring_2c = _interp(grid, m, cfg.center[0] + 2 * c * np.cos(th), cfg.center[1] + 2 * c * np.sin(th))
    mid = (r > c) & (r < 2.0 * c)
    w = eta((r[mid] - c) / c)

    m1 = m.copy()
    m1[mid] = _blend(ring_c[mid], np.broadcast_to(e1, ring_c[mid].shape), w)
    far = r >= 2.0 * c
    if cfg.sigma == 1:
        m1[far] = E3
    else:
        s = np.clip(np.log(r[far] / (2.0 * c)) / np.log1p(log_len / (2.0 * c)), 0.0, 1.0)
        m1[far] = great_circle(e1, s)
    pin_ring(m1)

    m2 = m.copy()
    m2[r <= c] = e2
    m2[mid] = _blend(np.broadcast_to(e2, ring_2c[mid].shape), ring_2c[mid], w)
    pin_ring(m2)

    inner = SpinField(grid, m1, tag="split-inner")
    outer = SpinField(grid, m2, tag="split-outer")
    q = topological_charge(f).q_int
    q1 = topological_charge(inner).q_int
    q2 = topological_charge(outer).q_int
    budget = cfg.delta + cfg.sigma * (cfg.delta / cfg.R ** 2) ** (2.0 / cfg.p)
    annulus = _region_energy(f, cfg, (r >= cfg.R) & (r <= 4.0 * cfg.R))
    tail1 = _region_energy(inner, cfg, r > c)
    core2 = _region_energy(outer, cfg, r < 2.0 * c)
    return SplitResult(c, inner, outer, q, q1, q2, annulus, tail1, core2,
                       max(tail1, core2) / budget, (e1, e2), log_len, table)
