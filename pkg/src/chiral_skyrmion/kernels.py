"""Hot per-node stencil kernels with a numba path and a pure-numpy path.

Every public function here dispatches on :func:`chiral_skyrmion._accel.use_numba`.
Arrays are node-major: a vector field on an ``n x n`` lattice has shape
``(n, n, k)``.  Axis 0 is ``x1``, axis 1 is ``x2``.
"""

import numpy as np

from ._accel import njit, use_numba

try:
    from numba import prange
except ImportError:  # pragma: no cover
    prange = range


def _as3(a):
    return a[..., None] if a.ndim == 2 else a


# ---------------------------------------------------------------- gradient

def _gradient_numpy(f, h):
    d1 = np.empty_like(f)
    d2 = np.empty_like(f)
    two_h = 2.0 * h
    d1[1:-1] = (f[2:] - f[:-2]) / two_h
    d1[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / two_h
    d1[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / two_h
    d2[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / two_h
    d2[:, 0] = (-3.0 * f[:, 0] + 4.0 * f[:, 1] - f[:, 2]) / two_h
    d2[:, -1] = (3.0 * f[:, -1] - 4.0 * f[:, -2] + f[:, -3]) / two_h
    return d1, d2


@njit(parallel=True)
def _gradient_numba(f, h):
    n0, n1, k = f.shape
    d1 = np.empty_like(f)
    d2 = np.empty_like(f)
    two_h = 2.0 * h
    for i in prange(n0):
        for j in range(n1):
            for c in range(k):
                if i == 0:
                    d1[i, j, c] = (-3.0 * f[0, j, c] + 4.0 * f[1, j, c] - f[2, j, c]) / two_h
                elif i == n0 - 1:
                    d1[i, j, c] = (3.0 * f[i, j, c] - 4.0 * f[i - 1, j, c] + f[i - 2, j, c]) / two_h
                else:
                    d1[i, j, c] = (f[i + 1, j, c] - f[i - 1, j, c]) / two_h
                if j == 0:
                    d2[i, j, c] = (-3.0 * f[i, 0, c] + 4.0 * f[i, 1, c] - f[i, 2, c]) / two_h
                elif j == n1 - 1:
                    d2[i, j, c] = (3.0 * f[i, j, c] - 4.0 * f[i, j - 1, c] + f[i, j - 2, c]) / two_h
                else:
                    d2[i, j, c] = (f[i, j + 1, c] - f[i, j - 1, c]) / two_h
    return d1, d2


def gradient(f, h):
    """Second-order partial derivatives ``(d/dx1 f, d/dx2 f)``.

    Central differences inside, one-sided three-point stencils on the
    outer ring.
    """
    f3 = np.ascontiguousarray(_as3(f), dtype=np.float64)
    if use_numba():
        d1, d2 = _gradient_numba(f3, float(h))
    else:
        d1, d2 = _gradient_numpy(f3, float(h))
    if f.ndim == 2:
        return d1[..., 0], d2[..., 0]
    return d1, d2


# ------------------------------------------------------- gradient adjoint

def _gradient_adjoint_numpy(a, h, axis):
    a = np.moveaxis(a, axis, 0)
    out = np.zeros_like(a)
    two_h = 2.0 * h
    inner = a[1:-1] / two_h
    # rows 1..n-2: -1 at column i-1, +1 at column i+1
    out[:-2] -= inner
    out[2:] += inner
    out[0] += -3.0 * a[0] / two_h
    out[1] += 4.0 * a[0] / two_h
    out[2] += -1.0 * a[0] / two_h
    out[-3] += 1.0 * a[-1] / two_h
    out[-2] += -4.0 * a[-1] / two_h
    out[-1] += 3.0 * a[-1] / two_h
    return np.moveaxis(out, 0, axis)


@njit(parallel=True)
def _gradient_adjoint_numba(a, h, axis):
    n0, n1, k = a.shape
    out = np.zeros_like(a)
    two_h = 2.0 * h
    n = n0 if axis == 0 else n1
    for i in prange(n0):
        for j in range(n1):
            q = i if axis == 0 else j
            for c in range(k):
                s = 0.0
                # interior rows touching column q
                if q - 1 >= 1 and q - 1 <= n - 2:
                    s += (a[i - 1, j, c] if axis == 0 else a[i, j - 1, c]) / two_h
                if q + 1 >= 1 and q + 1 <= n - 2:
                    s -= (a[i + 1, j, c] if axis == 0 else a[i, j + 1, c]) / two_h
                first = a[0, j, c] if axis == 0 else a[i, 0, c]
                last = a[n0 - 1, j, c] if axis == 0 else a[i, n1 - 1, c]
                if q == 0:
                    s += -3.0 * first / two_h
                elif q == 1:
                    s += 4.0 * first / two_h
                elif q == 2:
                    s += -1.0 * first / two_h
                if q == n - 3:
                    s += 1.0 * last / two_h
                elif q == n - 2:
                    s += -4.0 * last / two_h
                elif q == n - 1:
                    s += 3.0 * last / two_h
                out[i, j, c] = s
    return out


def gradient_adjoint(a, h, axis):
    """Transpose of the ``gradient`` stencil along ``axis`` applied to ``a``."""
    a3 = np.ascontiguousarray(_as3(a), dtype=np.float64)
    if use_numba():
        out = _gradient_adjoint_numba(a3, float(h), int(axis))
    else:
        out = _gradient_adjoint_numpy(a3, float(h), int(axis))
    return out[..., 0] if a.ndim == 2 else out


# --------------------------------------------------------------- laplacian

def _laplacian_numpy(f, h):
    out = np.zeros_like(f)
    h2 = h * h
    out[1:-1, 1:-1] = (
        f[2:, 1:-1] + f[:-2, 1:-1] + f[1:-1, 2:] + f[1:-1, :-2] - 4.0 * f[1:-1, 1:-1]
    ) / h2
    return out


@njit(parallel=True)
def _laplacian_numba(f, h):
    n0, n1, k = f.shape
    out = np.zeros_like(f)
    h2 = h * h
    for i in prange(1, n0 - 1):
        for j in range(1, n1 - 1):
            for c in range(k):
                out[i, j, c] = (
                    f[i + 1, j, c] + f[i - 1, j, c] + f[i, j + 1, c] + f[i, j - 1, c]
                    - 4.0 * f[i, j, c]
                ) / h2
    return out


def laplacian(f, h):
    """Five-point Laplacian at interior nodes, zero on the outer ring."""
    f3 = np.ascontiguousarray(_as3(f), dtype=np.float64)
    out = _laplacian_numba(f3, float(h)) if use_numba() else _laplacian_numpy(f3, float(h))
    return out[..., 0] if f.ndim == 2 else out


# ------------------------------------------------------------ solid angle

def _solid_angles_numpy(m, tol):
    a = m[:-1, :-1]
    b = m[1:, :-1]
    c = m[1:, 1:]
    d = m[:-1, 1:]
    out = np.empty(a.shape[:2] + (2,))
    ndeg = 0
    for k, (p, q, r) in enumerate(((a, b, c), (a, c, d))):
        num = np.einsum("ijk,ijk->ij", p, np.cross(q, r))
        den = (1.0 + np.einsum("ijk,ijk->ij", p, q) + np.einsum("ijk,ijk->ij", q, r)
               + np.einsum("ijk,ijk->ij", r, p))
        out[..., k] = 2.0 * np.arctan2(num, den)
        ndeg += int(np.count_nonzero((den <= tol) & (np.abs(num) <= tol)))
    return out, ndeg


@njit(parallel=True)
def _solid_angles_numba(m, tol):
    n0, n1, _ = m.shape
    out = np.empty((n0 - 1, n1 - 1, 2))
    deg = np.zeros(n0 - 1, dtype=np.int64)
    for i in prange(n0 - 1):
        for j in range(n1 - 1):
            for t in range(2):
                # t=0: (ij, i+1 j, i+1 j+1); t=1: (ij, i+1 j+1, i j+1)
                q0 = i + 1
                q1 = j + t
                r0 = i + 1 - t
                r1 = j + 1
                px, py, pz = m[i, j, 0], m[i, j, 1], m[i, j, 2]
                qx, qy, qz = m[q0, q1, 0], m[q0, q1, 1], m[q0, q1, 2]
                rx, ry, rz = m[r0, r1, 0], m[r0, r1, 1], m[r0, r1, 2]
                num = (px * (qy * rz - qz * ry) + py * (qz * rx - qx * rz)
                       + pz * (qx * ry - qy * rx))
                den = (1.0 + (px * qx + py * qy + pz * qz) + (qx * rx + qy * ry + qz * rz)
                       + (rx * px + ry * py + rz * pz))
                out[i, j, t] = 2.0 * np.arctan2(num, den)
                if den <= tol and abs(num) <= tol:
                    deg[i] += 1
    return out, deg.sum()


def solid_angles(m, tol=1e-12):
    """Signed solid angle of the two triangles of every plaquette.

    Returns ``(angles, n_degenerate)`` with ``angles`` of shape
    ``(n-1, n-1, 2)``.  A triangle is degenerate when its three spins are
    coplanar through the origin with a non-positive denominator, where the
    sign of the solid angle is undefined.
    """
    m = np.ascontiguousarray(m, dtype=np.float64)
    if use_numba():
        out, ndeg = _solid_angles_numba(m, tol)
        return out, int(ndeg)
    return _solid_angles_numpy(m, tol)


# --------------------------------------------------------- effective field

def _trap_weights_1d(n):
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return w


def _effective_field_numpy(m, h, eps, p):
    n = m.shape[0]
    out = _laplacian_numpy(m, h)
    if eps != 0.0:
        d1, d2 = _gradient_numpy(m, h)
        curl = np.stack([d2[..., 2], -d1[..., 2], d1[..., 1] - d2[..., 0]], axis=-1)
        w1 = _trap_weights_1d(n)
        w = np.outer(w1, w1)[..., None]
        a = (m - np.array([0.0, 0.0, 1.0])) * w
        g0 = _gradient_adjoint_numpy(a, h, 0)
        g1 = _gradient_adjoint_numpy(a, h, 1)
        ct = np.stack([-g1[..., 2], g0[..., 2], g1[..., 0] - g0[..., 1]], axis=-1)
        diff = m.copy()
        diff[..., 2] -= 1.0
        sq = np.einsum("...k,...k->...", diff, diff)
        if p == 2.0:
            mag = np.full(sq.shape, 0.5)
        else:
            mag = p * 2.0 ** (-p) * sq ** ((p - 2.0) / 2.0)
        out -= eps * (curl + ct / w + mag[..., None] * diff)
    out[0] = 0.0
    out[-1] = 0.0
    out[:, 0] = 0.0
    out[:, -1] = 0.0
    return out


@njit
def _adj_at(a, i, j, c, axis, n, two_h):
    """Entry (i, j, c) of the gradient-stencil transpose along ``axis``."""
    q = i if axis == 0 else j
    s = 0.0
    if q - 1 >= 1 and q - 1 <= n - 2:
        s += (a[i - 1, j, c] if axis == 0 else a[i, j - 1, c]) / two_h
    if q + 1 >= 1 and q + 1 <= n - 2:
        s -= (a[i + 1, j, c] if axis == 0 else a[i, j + 1, c]) / two_h
    first = a[0, j, c] if axis == 0 else a[i, 0, c]
    last = a[n - 1, j, c] if axis == 0 else a[i, n - 1, c]
    if q == 0:
        s -= 3.0 * first / two_h
    elif q == 1:
        s += 4.0 * first / two_h
    elif q == 2:
        s -= first / two_h
    if q == n - 3:
        s += last / two_h
    elif q == n - 2:
        s -= 4.0 * last / two_h
    elif q == n - 1:
        s += 3.0 * last / two_h
    return s


@njit
def _d_at(m, i, j, c, axis, n, two_h):
    """Gradient stencil entry (central inside, one-sided on the ring)."""
    q = i if axis == 0 else j
    if q == 0:
        if axis == 0:
            return (-3.0 * m[0, j, c] + 4.0 * m[1, j, c] - m[2, j, c]) / two_h
        return (-3.0 * m[i, 0, c] + 4.0 * m[i, 1, c] - m[i, 2, c]) / two_h
    if q == n - 1:
        if axis == 0:
            return (3.0 * m[n - 1, j, c] - 4.0 * m[n - 2, j, c] + m[n - 3, j, c]) / two_h
        return (3.0 * m[i, n - 1, c] - 4.0 * m[i, n - 2, c] + m[i, n - 3, c]) / two_h
    if axis == 0:
        return (m[i + 1, j, c] - m[i - 1, j, c]) / two_h
    return (m[i, j + 1, c] - m[i, j - 1, c]) / two_h


@njit(parallel=True)
def _effective_field_numba(m, h, eps, p):
    n = m.shape[0]
    out = np.zeros_like(m)
    two_h = 2.0 * h
    h2 = h * h
    a = np.empty_like(m)
    for i in prange(n):
        wi = 0.5 if (i == 0 or i == n - 1) else 1.0
        for j in range(n):
            wj = 0.5 if (j == 0 or j == n - 1) else 1.0
            a[i, j, 0] = m[i, j, 0] * wi * wj
            a[i, j, 1] = m[i, j, 1] * wi * wj
            a[i, j, 2] = (m[i, j, 2] - 1.0) * wi * wj
    for i in prange(1, n - 1):
        for j in range(1, n - 1):
            l0 = (m[i + 1, j, 0] + m[i - 1, j, 0] + m[i, j + 1, 0] + m[i, j - 1, 0]
                  - 4.0 * m[i, j, 0]) / h2
            l1 = (m[i + 1, j, 1] + m[i - 1, j, 1] + m[i, j + 1, 1] + m[i, j - 1, 1]
                  - 4.0 * m[i, j, 1]) / h2
            l2 = (m[i + 1, j, 2] + m[i - 1, j, 2] + m[i, j + 1, 2] + m[i, j - 1, 2]
                  - 4.0 * m[i, j, 2]) / h2
            if eps != 0.0:
                if 3 <= i <= n - 4 and 3 <= j <= n - 4:
                    # far from the ring the helicity variation is exactly 2 curl m
                    c0 = (m[i, j + 1, 2] - m[i, j - 1, 2]) / h
                    c1 = -(m[i + 1, j, 2] - m[i - 1, j, 2]) / h
                    c2 = ((m[i + 1, j, 1] - m[i - 1, j, 1]) - (m[i, j + 1, 0] - m[i, j - 1, 0])) / h
                else:
                    wi = 0.5 if (i == 0 or i == n - 1) else 1.0
                    wj = 0.5 if (j == 0 or j == n - 1) else 1.0
                    w = wi * wj
                    c0 = _d_at(m, i, j, 2, 1, n, two_h) - _adj_at(a, i, j, 2, 1, n, two_h) / w
                    c1 = -_d_at(m, i, j, 2, 0, n, two_h) + _adj_at(a, i, j, 2, 0, n, two_h) / w
                    c2 = (_d_at(m, i, j, 1, 0, n, two_h) - _d_at(m, i, j, 0, 1, n, two_h)
                          + (_adj_at(a, i, j, 0, 1, n, two_h) - _adj_at(a, i, j, 1, 0, n, two_h)) / w)
                x0 = m[i, j, 0]
                x1 = m[i, j, 1]
                x2 = m[i, j, 2] - 1.0
                sq = x0 * x0 + x1 * x1 + x2 * x2
                if p == 2.0:
                    mag = 0.5
                elif p == 4.0:
                    mag = 0.25 * sq
                else:
                    mag = p * 2.0 ** (-p) * sq ** ((p - 2.0) / 2.0)
                l0 -= eps * (c0 + mag * x0)
                l1 -= eps * (c1 + mag * x1)
                l2 -= eps * (c2 + mag * x2)
            out[i, j, 0] = l0
            out[i, j, 1] = l1
            out[i, j, 2] = l2
    return out


def effective_field(m, h, eps, p):
    """Compact-scheme effective field ``lap m - eps (curl-variation + f_p(m))``.

    The curl part is the exact variation of the discrete helicity divided by
    the node weight, ``C m + W^-1 C^T W (m - e3)``; it equals ``2 curl m``
    three or more rows away from the ring.  Zero on the ring.
    """
    m = np.ascontiguousarray(m, dtype=np.float64)
    if use_numba():
        return _effective_field_numba(m, float(h), float(eps), float(p))
    return _effective_field_numpy(m, float(h), float(eps), float(p))


# ------------------------------------------------------ projected update

def _projected_step_numpy(m, field, dt, weights):
    pf = field - np.einsum("...k,...k->...", field, m)[..., None] * m
    res = float(np.sum(np.einsum("...k,...k->...", pf, pf) * weights))
    new = m + dt * pf
    new /= np.linalg.norm(new, axis=-1, keepdims=True)
    new[0] = m[0]
    new[-1] = m[-1]
    new[:, 0] = m[:, 0]
    new[:, -1] = m[:, -1]
    return new, res


@njit(parallel=True)
def _projected_step_numba(m, field, dt, weights):
    n = m.shape[0]
    new = m.copy()
    rows = np.zeros(n)
    for i in prange(1, n - 1):
        acc = 0.0
        for j in range(1, n - 1):
            d = field[i, j, 0] * m[i, j, 0] + field[i, j, 1] * m[i, j, 1] + field[i, j, 2] * m[i, j, 2]
            p0 = field[i, j, 0] - d * m[i, j, 0]
            p1 = field[i, j, 1] - d * m[i, j, 1]
            p2 = field[i, j, 2] - d * m[i, j, 2]
            acc += (p0 * p0 + p1 * p1 + p2 * p2) * weights[i, j]
            y0 = m[i, j, 0] + dt * p0
            y1 = m[i, j, 1] + dt * p1
            y2 = m[i, j, 2] + dt * p2
            nrm = np.sqrt(y0 * y0 + y1 * y1 + y2 * y2)
            new[i, j, 0] = y0 / nrm
            new[i, j, 1] = y1 / nrm
            new[i, j, 2] = y2 / nrm
        rows[i] = acc
    return new, rows.sum()


def projected_step(m, field, dt, weights):
    """``normalize(m + dt P_m field)`` on interior nodes and ``int |P_m field|^2``."""
    m = np.ascontiguousarray(m, dtype=np.float64)
    field = np.ascontiguousarray(field, dtype=np.float64)
    if use_numba():
        new, res = _projected_step_numba(m, field, float(dt), weights)
        return new, float(res)
    return _projected_step_numpy(m, field, float(dt), weights)


# ------------------------------------------------ fused relaxation step

@njit
def _heff_at(m, i, j, n, h, eps, p):
    """Effective field at an interior node, reading ``m`` directly."""
    h2 = h * h
    two_h = 2.0 * h
    l0 = (m[i + 1, j, 0] + m[i - 1, j, 0] + m[i, j + 1, 0] + m[i, j - 1, 0] - 4.0 * m[i, j, 0]) / h2
    l1 = (m[i + 1, j, 1] + m[i - 1, j, 1] + m[i, j + 1, 1] + m[i, j - 1, 1] - 4.0 * m[i, j, 1]) / h2
    l2 = (m[i + 1, j, 2] + m[i - 1, j, 2] + m[i, j + 1, 2] + m[i, j - 1, 2] - 4.0 * m[i, j, 2]) / h2
    if eps != 0.0:
        if 3 <= i <= n - 4 and 3 <= j <= n - 4:
            c0 = (m[i, j + 1, 2] - m[i, j - 1, 2]) / h
            c1 = -(m[i + 1, j, 2] - m[i - 1, j, 2]) / h
            c2 = ((m[i + 1, j, 1] - m[i - 1, j, 1]) - (m[i, j + 1, 0] - m[i, j - 1, 0])) / h
        else:
            c0, c1, c2 = _adj_curl_local(m, i, j, n, two_h)
        x0 = m[i, j, 0]
        x1 = m[i, j, 1]
        x2 = m[i, j, 2] - 1.0
        sq = x0 * x0 + x1 * x1 + x2 * x2
        if p == 2.0:
            mag = 0.5
        elif p == 4.0:
            mag = 0.25 * sq
        else:
            mag = p * 2.0 ** (-p) * sq ** ((p - 2.0) / 2.0)
        l0 -= eps * (c0 + mag * x0)
        l1 -= eps * (c1 + mag * x1)
        l2 -= eps * (c2 + mag * x2)
    return l0, l1, l2


@njit
def _wa(m, i, j, c, n):
    w = (0.5 if i == 0 or i == n - 1 else 1.0) * (0.5 if j == 0 or j == n - 1 else 1.0)
    return (m[i, j, c] - (1.0 if c == 2 else 0.0)) * w


@njit
def _adj_local(m, i, j, c, axis, n, two_h):
    """``_adj_at`` with ``a = w (m - e3)`` evaluated on the fly."""
    q = i if axis == 0 else j
    s = 0.0
    if q - 1 >= 1 and q - 1 <= n - 2:
        s += (_wa(m, i - 1, j, c, n) if axis == 0 else _wa(m, i, j - 1, c, n)) / two_h
    if q + 1 >= 1 and q + 1 <= n - 2:
        s -= (_wa(m, i + 1, j, c, n) if axis == 0 else _wa(m, i, j + 1, c, n)) / two_h
    first = _wa(m, 0, j, c, n) if axis == 0 else _wa(m, i, 0, c, n)
    last = _wa(m, n - 1, j, c, n) if axis == 0 else _wa(m, i, n - 1, c, n)
    if q == 0:
        s -= 3.0 * first / two_h
    elif q == 1:
        s += 4.0 * first / two_h
    elif q == 2:
        s -= first / two_h
    if q == n - 3:
        s += last / two_h
    elif q == n - 2:
        s -= 4.0 * last / two_h
    elif q == n - 1:
        s += 3.0 * last / two_h
    return s


@njit
def _adj_curl_local(m, i, j, n, two_h):
    w = (0.5 if i == 0 or i == n - 1 else 1.0) * (0.5 if j == 0 or j == n - 1 else 1.0)
    c0 = _d_at(m, i, j, 2, 1, n, two_h) - _adj_local(m, i, j, 2, 1, n, two_h) / w
    c1 = -_d_at(m, i, j, 2, 0, n, two_h) + _adj_local(m, i, j, 2, 0, n, two_h) / w
    c2 = (_d_at(m, i, j, 1, 0, n, two_h) - _d_at(m, i, j, 0, 1, n, two_h)
          + (_adj_local(m, i, j, 0, 1, n, two_h) - _adj_local(m, i, j, 1, 0, n, two_h)) / w)
    return c0, c1, c2


@njit(parallel=True)
def _relax_step_numba(m, new, h, eps, p, dt):
    n = m.shape[0]
    rows = np.zeros(n)
    for i in prange(1, n - 1):
        acc = 0.0
        for j in range(1, n - 1):
            f0, f1, f2 = _heff_at(m, i, j, n, h, eps, p)
            d = f0 * m[i, j, 0] + f1 * m[i, j, 1] + f2 * m[i, j, 2]
            p0 = f0 - d * m[i, j, 0]
            p1 = f1 - d * m[i, j, 1]
            p2 = f2 - d * m[i, j, 2]
            acc += p0 * p0 + p1 * p1 + p2 * p2
            y0 = m[i, j, 0] + dt * p0
            y1 = m[i, j, 1] + dt * p1
            y2 = m[i, j, 2] + dt * p2
            nrm = np.sqrt(y0 * y0 + y1 * y1 + y2 * y2)
            new[i, j, 0] = y0 / nrm
            new[i, j, 1] = y1 / nrm
            new[i, j, 2] = y2 / nrm
        rows[i] = acc
    return rows.sum() * h * h


def relax_step(m, new, h, eps, p, dt, weights):
    """One projected-descent step written into ``new``; returns ``int |P_m h|^2``.

    ``new`` must already hold the ring values.  Interior weights are ``h^2``.
    """
    if use_numba():
        return float(_relax_step_numba(m, new, float(h), float(eps), float(p), float(dt)))
    heff = _effective_field_numpy(m, h, eps, p)
    out, res = _projected_step_numpy(m, heff, dt, weights)
    new[...] = out
    return res
