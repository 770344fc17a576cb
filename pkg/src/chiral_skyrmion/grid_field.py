"""Square lattice, S^2-valued fields, stencils, quadrature and degree."""

from dataclasses import dataclass, field as dc_field
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np

from . import kernels

E3 = np.array([0.0, 0.0, 1.0])
MAX_NODES_PER_SIDE = 8193
UNIT_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Node lattice on ``[-L, L]^2`` with ``n`` nodes per side."""

    L: float
    h: float
    n: int

    def __post_init__(self):
        if not (self.L > 0 and self.h > 0):
            raise ValueError("grid half-width and spacing must be positive")
        if self.n < 5:
            raise ValueError(f"grid needs at least 5 nodes per side, got {self.n}")

    @cached_property
    def x(self):
        """1-D node coordinates; exact at both ends."""
        xs = -self.L + self.h * np.arange(self.n)
        xs[-1] = self.L
        return xs

    @cached_property
    def mesh(self):
        return np.meshgrid(self.x, self.x, indexing="ij")

    @cached_property
    def weights(self):
        w = np.ones(self.n)
        w[0] = w[-1] = 0.5
        return np.outer(w, w) * (self.h * self.h)

    def coords(self, i, j):
        return (self.x[i], self.x[j])

    def box_slice(self, half_width):
        """Index slice of the nodes with ``|x_k| <= half_width``."""
        lo = int(np.searchsorted(self.x, -half_width - 1e-9 * self.h))
        hi = int(np.searchsorted(self.x, half_width + 1e-9 * self.h, side="right"))
        if hi - lo < 2:
            raise ValueError(f"window {half_width} holds fewer than two nodes")
        return slice(lo, hi)


def make_grid(L, h, max_nodes=MAX_NODES_PER_SIDE):
    """Build the lattice for half-width ``L`` and requested spacing ``h``.

    The node count is ``round(2L/h) + 1``; the spacing actually used,
    ``2L/(n-1)``, is available as ``grid.h``.
    """
    if not (L > 0 and h > 0):
        raise ValueError(f"L and h must be positive (got L={L}, h={h})")
    ratio = 2.0 * L / h
    if ratio < 4:
        raise ValueError(f"too few nodes: 2L/h = {ratio:g} < 4")
    n = int(round(ratio)) + 1
    if n > max_nodes:
        raise ValueError(f"{n} nodes per side exceeds the budget of {max_nodes}")
    return Grid(float(L), 2.0 * L / (n - 1), n)


@dataclass
class SpinField:
    """Unit vector per node with the outer ring pinned to ``e3``.

    ``jacobian`` optionally holds the exact ``(d1 m, d2 m)`` of the closed-form
    family the field was sampled from, and ``window`` the half-width of the
    central box on which ``values`` are untouched samples of that family.
    """

    grid: Grid
    values: np.ndarray
    tag: Optional[str] = None
    jacobian: Optional[tuple] = None
    window: Optional[float] = None
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        n = self.grid.n
        if self.values.shape != (n, n, 3):
            raise ValueError(f"values must have shape {(n, n, 3)}, got {self.values.shape}")

    @classmethod
    def from_array(cls, grid, values, normalize=True, pin_boundary=True, **kw):
        v = np.array(values, dtype=np.float64, copy=True)
        if normalize:
            norm = np.linalg.norm(v, axis=-1, keepdims=True)
            if np.any(norm == 0):
                raise ValueError("cannot normalize a zero vector")
            v /= norm
        if pin_boundary:
            pin_ring(v)
        return cls(grid, v, **kw)

    @classmethod
    def constant(cls, grid, direction=E3):
        v = np.empty((grid.n, grid.n, 3))
        v[...] = np.asarray(direction, dtype=float) / np.linalg.norm(direction)
        pin_ring(v)
        return cls(grid, v, tag="constant")

    def copy(self):
        jac = None if self.jacobian is None else tuple(a.copy() for a in self.jacobian)
        return SpinField(self.grid, self.values.copy(), self.tag, jac, self.window, dict(self.meta))

    def replaced(self, values, tag=None):
        """New field on the same grid; analytic metadata is dropped."""
        return SpinField(self.grid, values, tag if tag is not None else self.tag)

    def norm_defect(self):
        return float(np.max(np.abs(np.linalg.norm(self.values, axis=-1) - 1.0)))

    def validate(self, tol=UNIT_TOL):
        """Raise ``ValueError`` unless the unit-norm and pinned-ring invariants hold."""
        defect = self.norm_defect()
        if defect > tol:
            raise ValueError(f"unit-norm violated by {defect:.3e}")
        v = self.values
        ring = np.concatenate([v[0], v[-1], v[:, 0], v[:, -1]])
        if not np.all(ring == E3):
            raise ValueError("outer ring is not pinned to e3")
        return self


def pin_ring(v):
    v[0] = E3
    v[-1] = E3
    v[:, 0] = E3
    v[:, -1] = E3
    return v


def normalize(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def dot(a, b):
    return np.einsum("...k,...k->...", a, b)


# ----------------------------------------------------------------- stencils

def gradient(f):
    """``(d1 m, d2 m)`` per node, each of shape ``(n, n, 3)``."""
    return kernels.gradient(f.values, f.grid.h)


def curl_from_derivs(d1, d2):
    """3-vector curl ``(curl m3, curl m)`` = ``(d2 m3, -d1 m3, d1 m2 - d2 m1)``."""
    return np.stack([d2[..., 2], -d1[..., 2], d1[..., 1] - d2[..., 0]], axis=-1)


def curl(f, derivs=None):
    """Returns ``(curl_m3, curl_m)``: the in-plane 2-vector and the scalar."""
    d1, d2 = derivs if derivs is not None else gradient(f)
    c3 = curl_from_derivs(d1, d2)
    return c3[..., :2], c3[..., 2]


def dz_from_derivs(m, d1, d2):
    return 0.5 * (d1 - np.cross(m, d2))


def dz(f, derivs=None):
    """Cauchy-Riemann operator ``(d1 m - m x d2 m) / 2``."""
    d1, d2 = derivs if derivs is not None else gradient(f)
    return dz_from_derivs(f.values, d1, d2)


def integrate(density, grid, window=None):
    """Tensor trapezoidal rule; ``window`` restricts to ``|x|_inf <= window``."""
    density = np.asarray(density, dtype=np.float64)
    if density.shape[:2] != (grid.n, grid.n):
        raise ValueError("density shape does not match the grid")
    if window is None:
        return float(np.sum(density * grid.weights))
    s = grid.box_slice(window)
    m = s.stop - s.start
    w = np.ones(m)
    w[0] = w[-1] = 0.5
    return float(np.sum(density[s, s] * np.outer(w, w)) * grid.h * grid.h)


def charge_density_from_derivs(m, d1, d2):
    return dot(m, np.cross(d1, d2))


def charge_density(f, derivs=None):
    """``m . (d1 m x d2 m)`` per node."""
    d1, d2 = derivs if derivs is not None else gradient(f)
    return charge_density_from_derivs(f.values, d1, d2)


class TopologicalCharge(NamedTuple):
    q_real: float
    q_int: int
    n_degenerate: int = 0
    q_lattice: float = 0.0


def topological_charge(f):
    """Degree of the field.

    ``q_int`` comes from the lattice solid-angle sum (two triangles per
    plaquette), ``q_real`` from quadrature of the charge density.
    """
    angles, ndeg = kernels.solid_angles(f.values)
    q_lat = float(np.sum(angles)) / (4.0 * np.pi)
    q_real = integrate(charge_density(f), f.grid) / (4.0 * np.pi)
    return TopologicalCharge(q_real, int(round(q_lat)), ndeg, q_lat)
