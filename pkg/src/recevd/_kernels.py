"""Compiled inner loops.

Everything here works on plain arrays and integer codes so that numba can
compile it in nopython mode; the typed, validated surface lives in
:mod:`recevd.systems` and :mod:`recevd.recurrence`.

Status codes returned by the orbit kernels: 0 ok, 1 diverged, 2 no return.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

# map codes
DOUBLING, QUADRATIC, INTERMITTENCY, ALVES_VIANA, HENON, ANOSOV, ARNOLD, ROTATION = range(8)

# metric codes
TORUS_1D, TORUS_3D, INTERVAL_EUCLID, SKEW_PRODUCT, EUCLID_2D, EUCLID_3D = range(6)

OK, DIVERGED, NO_RETURN = 0, 1, 2

TWO_PI = 2.0 * math.pi


@njit(cache=True, inline="always")
def frac(v):
    r = v - math.floor(v)
    # v slightly below an integer can round up to exactly 1.0
    if r >= 1.0:
        r = 0.0
    return r


@njit(cache=True)
def map_step(code, p, x, out):
    if code == DOUBLING:
        out[0] = frac(2.0 * x[0] + p[0] * math.sin(TWO_PI * x[0]))
    elif code == QUADRATIC:
        out[0] = p[0] * x[0] * (1.0 - x[0])
    elif code == INTERMITTENCY:
        v = x[0]
        if v < 0.5:
            out[0] = v * (1.0 + (2.0 * v) ** p[0])
        else:
            out[0] = 2.0 * v - 1.0
    elif code == ALVES_VIANA:
        xv = x[0]
        out[0] = frac(p[2] * xv)
        out[1] = p[0] + p[1] * math.sin(TWO_PI * xv) - x[1] * x[1]
    elif code == HENON:
        xv = x[0]
        out[0] = 1.0 - p[0] * xv * xv + x[1]
        out[1] = p[1] * xv
    elif code == ANOSOV:
        x1, x2, x3 = x[0], x[1], x[2]
        out[0] = frac(x1 + x2 + x3 + p[0] * math.cos(TWO_PI * x2))
        out[1] = frac(x1 + 2.0 * x2)
        out[2] = frac(x1 + x3)
    elif code == ARNOLD:
        out[0] = frac(x[0] + p[0] + p[1] * math.sin(TWO_PI * x[0]))
    else:  # ROTATION
        out[0] = frac(x[0] + p[0])


@njit(cache=True)
def _escaped(x, bound):
    for c in range(x.shape[0]):
        v = x[c]
        if not (abs(v) <= bound):  # also catches nan
            return True
    return False


@njit(cache=True)
def iterate_map(code, p, x0, n_out, transient, bound):
    """Return (orbit[n_out, d], status); orbit[0] is f^transient(x0)."""
    d = x0.shape[0]
    orbit = np.empty((n_out, d))
    cur = x0.copy()
    nxt = np.empty(d)
    for _ in range(transient):
        map_step(code, p, cur, nxt)
        if _escaped(nxt, bound):
            return orbit, DIVERGED
        cur, nxt = nxt, cur
    for i in range(n_out):
        orbit[i] = cur
        if i + 1 < n_out:
            map_step(code, p, cur, nxt)
            if _escaped(nxt, bound):
                return orbit, DIVERGED
            cur, nxt = nxt, cur
    return orbit, OK


# --- exact generators -----------------------------------------------------

@njit(cache=True)
def shift_orbit(words, shift, n_out):
    """Orbit of x -> 2**shift * x mod 1 for x given by a random bit string.

    ``words`` holds the binary expansion of x, most significant bit first.
    Point j is the 53-bit truncation of the expansion starting at bit j*shift,
    i.e. exactly frac(2**(j*shift) x) rounded down to double precision.
    """
    out = np.empty(n_out)
    scale = 2.0 ** -53
    for j in range(n_out):
        pos = j * shift
        q = pos // 64
        r = pos % 64
        if r == 0:
            w = words[q]
        else:
            w = (words[q] << np.uint64(r)) | (words[q + 1] >> np.uint64(64 - r))
        out[j] = float(w >> np.uint64(11)) * scale
    return out


@njit(cache=True)
def skew_fiber_orbit(xs, a, eps, y0, bound):
    """Fiber coordinate of the Alves-Viana map driven by a precomputed base orbit."""
    n = xs.shape[0]
    ys = np.empty(n)
    y = y0
    for j in range(n):
        ys[j] = y
        y = a + eps * math.sin(TWO_PI * xs[j]) - y * y
        if not (abs(y) <= bound):
            return ys, DIVERGED
    return ys, OK


@njit(cache=True)
def lattice_cat_orbit(x1, x2, x3, n_out, transient):
    """Unperturbed torus automorphism on the lattice (2**-64 Z / Z)**3.

    Integer arithmetic wraps modulo 2**64, so the linear map is computed
    exactly; the matrix has determinant -1, hence the dynamics is a
    bijection of the lattice and never collapses.
    """
    out = np.empty((n_out, 3))
    scale = 2.0 ** -53
    eleven = np.uint64(11)
    for _ in range(transient):
        x1, x2, x3 = x1 + x2 + x3, x1 + x2 + x2, x1 + x3
    for i in range(n_out):
        out[i, 0] = float(x1 >> eleven) * scale
        out[i, 1] = float(x2 >> eleven) * scale
        out[i, 2] = float(x3 >> eleven) * scale
        x1, x2, x3 = x1 + x2 + x3, x1 + x2 + x2, x1 + x3
    return out


# --- metrics --------------------------------------------------------------

@njit(cache=True, inline="always")
def _circ(a, b):
    t = abs(a - b)
    t = t - math.floor(t)
    return min(t, 1.0 - t)


@njit(cache=True)
def pair_distance(metric, X, i, Y, j):
    if metric == TORUS_1D:
        return _circ(X[i, 0], Y[j, 0])
    if metric == INTERVAL_EUCLID:
        return abs(X[i, 0] - Y[j, 0])
    if metric == TORUS_3D:
        a = _circ(X[i, 0], Y[j, 0])
        b = _circ(X[i, 1], Y[j, 1])
        c = _circ(X[i, 2], Y[j, 2])
        return math.sqrt(a * a + b * b + c * c)
    if metric == SKEW_PRODUCT:
        a = _circ(X[i, 0], Y[j, 0])
        b = X[i, 1] - Y[j, 1]
        return math.sqrt(a * a + b * b)
    if metric == EUCLID_2D:
        a = X[i, 0] - Y[j, 0]
        b = X[i, 1] - Y[j, 1]
        return math.sqrt(a * a + b * b)
    a = X[i, 0] - Y[j, 0]
    b = X[i, 1] - Y[j, 1]
    c = X[i, 2] - Y[j, 2]
    return math.sqrt(a * a + b * b + c * c)


@njit(cache=True, nogil=True)
def scan_recurrence(orbit, base, metric, j_lo, j_hi, radii):
    """Recurrence indicators for many (horizon, radius) pairs in one pass.

    For every base index i and every k, hits[p, k] is True iff
    min_{j_lo <= j <= j_hi[k]} dist(x_i, x_{i+j}) <= radii[k].
    ``j_hi`` must be nondecreasing.
    """
    n_base = base.shape[0]
    K = j_hi.shape[0]
    hits = np.zeros((n_base, K), dtype=np.bool_)
    # suffix minimum of the radii: once the running minimum drops below it,
    # every remaining (larger) horizon is a hit as well
    suffix = np.empty(K)
    m = np.inf
    for k in range(K - 1, -1, -1):
        m = min(m, radii[k])
        suffix[k] = m
    j_max = j_hi[K - 1] if K > 0 else 0
    for p in range(n_base):
        i = base[p]
        k = 0
        while k < K and j_hi[k] < j_lo:
            k += 1
        running = np.inf
        j = j_lo
        while k < K and j <= j_max:
            dj = pair_distance(metric, orbit, i, orbit, i + j)
            if dj < running:
                running = dj
            while k < K and j_hi[k] == j:
                hits[p, k] = running <= radii[k]
                k += 1
            if k < K and running <= suffix[k]:
                for kk in range(k, K):
                    hits[p, kk] = True
                break
            j += 1
    return hits


@njit(cache=True)
def distances_to(orbit, metric, target):
    t = target.reshape(1, -1)
    n = orbit.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = pair_distance(metric, orbit, i, t, 0)
    return out


# --- flows ----------------------------------------------------------------

@njit(cache=True)
def lorenz_rhs(x1, x2, x3, p):
    return (p[0] * (x2 - x1), x1 * (p[1] - x3) - x2, x1 * x2 - p[2] * x3)


@njit
def rk4_step(rhs, p, x1, x2, x3, h):
    a1, a2, a3 = rhs(x1, x2, x3, p)
    hh = 0.5 * h
    b1, b2, b3 = rhs(x1 + hh * a1, x2 + hh * a2, x3 + hh * a3, p)
    c1, c2, c3 = rhs(x1 + hh * b1, x2 + hh * b2, x3 + hh * b3, p)
    d1, d2, d3 = rhs(x1 + h * c1, x2 + h * c2, x3 + h * c3, p)
    s = h / 6.0
    return (
        x1 + s * (a1 + 2.0 * b1 + 2.0 * c1 + d1),
        x2 + s * (a2 + 2.0 * b2 + 2.0 * c2 + d2),
        x3 + s * (a3 + 2.0 * b3 + 2.0 * c3 + d3),
    )


@njit
def _out_of_bounds(x1, x2, x3, bound):
    return not (abs(x1) <= bound and abs(x2) <= bound and abs(x3) <= bound)


@njit
def integrate(rhs, p, x, nsteps, h, bound):
    x1, x2, x3 = x[0], x[1], x[2]
    for _ in range(nsteps):
        x1, x2, x3 = rk4_step(rhs, p, x1, x2, x3, h)
        if _out_of_bounds(x1, x2, x3, bound):
            return np.array([x1, x2, x3]), DIVERGED
    return np.array([x1, x2, x3]), OK


@njit
def strobe_orbit(rhs, p, x, n_out, transient, steps_per_sample, h, bound):
    out = np.empty((n_out, 3))
    x1, x2, x3 = x[0], x[1], x[2]
    for i in range(transient + n_out):
        if i >= transient:
            out[i - transient, 0] = x1
            out[i - transient, 1] = x2
            out[i - transient, 2] = x3
        if i + 1 < transient + n_out:
            for _ in range(steps_per_sample):
                x1, x2, x3 = rk4_step(rhs, p, x1, x2, x3, h)
            if _out_of_bounds(x1, x2, x3, bound):
                return out, DIVERGED
    return out, OK


@njit
def _crossed(s_prev, s_new, direction):
    # direction: -1 downward, +1 upward, 0 both
    down = s_prev > 0.0 and s_new <= 0.0
    up = s_prev < 0.0 and s_new >= 0.0
    if direction < 0:
        return down
    if direction > 0:
        return up
    return down or up


@njit
def next_crossing(rhs, p, x1, x2, x3, h, level, direction, max_steps, tol, bound):
    """Integrate to the next crossing of {x3 = level}; returns (x1, x2, x3, status)."""
    s_prev = x3 - level
    skip_first = abs(s_prev) <= tol
    for step in range(max_steps):
        y1, y2, y3 = rk4_step(rhs, p, x1, x2, x3, h)
        if _out_of_bounds(y1, y2, y3, bound):
            return y1, y2, y3, DIVERGED
        s_new = y3 - level
        if not (skip_first and step == 0) and _crossed(s_prev, s_new, direction):
            if abs(s_new) <= tol:
                return y1, y2, y3, OK
            lo, hi = 0.0, h
            z1, z2, z3 = y1, y2, y3
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                z1, z2, z3 = rk4_step(rhs, p, x1, x2, x3, mid)
                s = z3 - level
                if abs(s) <= tol:
                    break
                if (s > 0.0) == (s_prev > 0.0):
                    lo = mid
                else:
                    hi = mid
            return z1, z2, z3, OK
        x1, x2, x3 = y1, y2, y3
        s_prev = s_new
    return x1, x2, x3, NO_RETURN


@njit
def return_orbit(rhs, p, x, n_out, transient, h, level, direction, max_steps, tol, bound):
    out = np.empty((n_out, 3))
    x1, x2, x3 = x[0], x[1], x[2]
    for i in range(transient + n_out):
        if i >= transient:
            out[i - transient, 0] = x1
            out[i - transient, 1] = x2
            out[i - transient, 2] = x3
        if i + 1 < transient + n_out:
            x1, x2, x3, status = next_crossing(
                rhs, p, x1, x2, x3, h, level, direction, max_steps, tol, bound
            )
            if status != OK:
                return out, status
    return out, OK
