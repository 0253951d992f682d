"""Compiled inner loops for orthonormal associated Legendre functions.

``Pbar(l, m, x) = sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) P_l^m(x)`` without the
Condon-Shortley phase.  Recurrences run on a scaled value with a separate
log-scale so that sectoral seeds ``sin(theta)**m`` do not underflow for
degrees into the thousands.
"""

import math

import numpy as np
from numba import njit

_RESCALE = 1e150
_LOG_RESCALE = 150.0 * math.log(10.0)


@njit(cache=True)
def sectoral_log_seeds(mmax):
    """log of ``sqrt((2m+1)/(4pi) * prod_{k<=m} (2k-1)/(2k))`` for m = 0..mmax."""
    out = np.empty(mmax + 1)
    logprod = 0.0
    for m in range(mmax + 1):
        if m > 0:
            logprod += math.log((2.0 * m - 1.0) / (2.0 * m))
        out[m] = 0.5 * (math.log((2.0 * m + 1.0) / (4.0 * math.pi)) + logprod)
    return out


@njit(cache=True)
def _recurrence_coeffs(m, lmax):
    a = np.zeros(lmax + 1)
    b = np.zeros(lmax + 1)
    for l in range(m + 1, lmax + 1):
        d = float(l * l - m * m)
        a[l] = math.sqrt((4.0 * l * l - 1.0) / d)
        if l >= m + 2:
            b[l] = -math.sqrt((2.0 * l + 1.0) * ((l - 1.0) ** 2 - m * m) / ((2.0 * l - 3.0) * d))
    return a, b


@njit(cache=True)
def _scale_factor(s):
    # below exp(-700) the scaled value (< 1e150) contributes under 1e-150
    return math.exp(s) if s > -700.0 else 0.0


@njit(cache=True)
def plm_block(x, logsin, m, lmin, lmax, logseed):
    """``Pbar(l, m, x_i)`` for ``l = max(m, lmin)..lmax``; shape (n, nl)."""
    n = x.size
    l0 = max(m, lmin)
    out = np.zeros((n, lmax - l0 + 1))
    if l0 > lmax:
        return out
    a, b = _recurrence_coeffs(m, lmax)
    for i in range(n):
        s = logseed if m == 0 else logseed + m * logsin[i]
        fac = _scale_factor(s)
        pprev = 0.0
        p = 1.0
        if l0 == m:
            out[i, 0] = p * fac
        xi = x[i]
        for l in range(m + 1, lmax + 1):
            pnew = a[l] * xi * p + b[l] * pprev
            pprev = p
            p = pnew
            if abs(p) > _RESCALE:
                p /= _RESCALE
                pprev /= _RESCALE
                s += _LOG_RESCALE
                fac = _scale_factor(s)
            if l >= l0:
                out[i, l - l0] = p * fac
    return out


@njit(cache=True)
def ylm_rows(x, logsin, phi, lmin, lmax):
    """Real orthonormal harmonics at points; shape (n, (lmax+1)**2 - lmin**2).

    Column of (l, m) is ``l*l - lmin*lmin + l + m``.  ``m > 0`` carries
    ``sqrt(2) Pbar cos(m phi)``, ``m < 0`` carries ``sqrt(2) Pbar sin(|m| phi)``.
    """
    n = x.size
    ncoef = (lmax + 1) * (lmax + 1) - lmin * lmin
    out = np.zeros((n, ncoef))
    seeds = sectoral_log_seeds(lmax)
    root2 = math.sqrt(2.0)
    for m in range(lmax + 1):
        a, b = _recurrence_coeffs(m, lmax)
        l0 = max(m, lmin)
        for i in range(n):
            s = seeds[m] if m == 0 else seeds[m] + m * logsin[i]
            fac = _scale_factor(s)
            cm = root2 * math.cos(m * phi[i])
            sm = root2 * math.sin(m * phi[i])
            pprev = 0.0
            p = 1.0
            for l in range(m, lmax + 1):
                if l > m:
                    pnew = a[l] * x[i] * p + b[l] * pprev
                    pprev = p
                    p = pnew
                    if abs(p) > _RESCALE:
                        p /= _RESCALE
                        pprev /= _RESCALE
                        s += _LOG_RESCALE
                        fac = _scale_factor(s)
                if l >= l0:
                    v = p * fac
                    base = l * l - lmin * lmin + l
                    if m == 0:
                        out[i, base] = v
                    else:
                        out[i, base + m] = v * cm
                        out[i, base - m] = v * sm
    return out


@njit(cache=True)
def synth_points(x, logsin, phi, coeffs, wl, lmin, lmax):
    """``sum_l wl[l - lmin] sum_m a_lm Y_lm`` at each point, one replicate."""
    n = x.size
    out = np.zeros(n)
    seeds = sectoral_log_seeds(lmax)
    root2 = math.sqrt(2.0)
    for m in range(lmax + 1):
        a, b = _recurrence_coeffs(m, lmax)
        l0 = max(m, lmin)
        for i in range(n):
            s = seeds[m] if m == 0 else seeds[m] + m * logsin[i]
            fac = _scale_factor(s)
            pprev = 0.0
            p = 1.0
            acc_c = 0.0
            acc_s = 0.0
            for l in range(m, lmax + 1):
                if l > m:
                    pnew = a[l] * x[i] * p + b[l] * pprev
                    pprev = p
                    p = pnew
                    if abs(p) > _RESCALE:
                        p /= _RESCALE
                        pprev /= _RESCALE
                        s += _LOG_RESCALE
                        fac = _scale_factor(s)
                if l >= l0 and fac != 0.0:
                    v = p * fac * wl[l - lmin]
                    base = l * l - lmin * lmin + l
                    acc_c += v * coeffs[base + m]
                    if m > 0:
                        acc_s += v * coeffs[base - m]
            if m == 0:
                out[i] += acc_c
            else:
                out[i] += root2 * (acc_c * math.cos(m * phi[i]) + acc_s * math.sin(m * phi[i]))
    return out


@njit(cache=True)
def legendre_sum(weights, x):
    """``sum_l weights[l] P_l(x_i)`` by Bonnet's recurrence, for flat ``x``."""
    n = x.size
    nl = weights.size
    out = np.zeros(n)
    ca = np.zeros(nl)
    cb = np.zeros(nl)
    for l in range(1, nl - 1):
        ca[l] = (2.0 * l + 1.0) / (l + 1.0)
        cb[l] = l / (l + 1.0)
    for i in range(n):
        xi = x[i]
        p_prev = 1.0
        p = xi
        acc = weights[0]
        if nl > 1:
            acc += weights[1] * xi
        for l in range(1, nl - 1):
            p_prev, p = p, ca[l] * xi * p - cb[l] * p_prev
            acc += weights[l + 1] * p
        out[i] = acc
    return out


@njit(cache=True)
def recurrence_tables(lmax):
    """Rows ``m`` of the upward recurrence coefficients, shape (lmax+1, lmax+1) each."""
    ta = np.zeros((lmax + 1, lmax + 1))
    tb = np.zeros((lmax + 1, lmax + 1))
    for m in range(lmax + 1):
        a, b = _recurrence_coeffs(m, lmax)
        ta[m, :] = a
        tb[m, :] = b
    return ta, tb


@njit(cache=True)
def _field_value(v0, v1, v2, coeffs, wl, lmin, lmax, seeds, ta, tb):
    nrm = math.sqrt(v0 * v0 + v1 * v1 + v2 * v2)
    x = min(1.0, max(-1.0, v2 / nrm))
    st = math.sqrt(max(0.0, 1.0 - x * x))
    logsin = math.log(st) if st > 0.0 else -np.inf
    phi = math.atan2(v1, v0)
    root2 = math.sqrt(2.0)
    total = 0.0
    for m in range(lmax + 1):
        l0 = max(m, lmin)
        s = seeds[m] if m == 0 else seeds[m] + m * logsin
        fac = _scale_factor(s)
        pprev = 0.0
        p = 1.0
        acc_c = 0.0
        acc_s = 0.0
        for l in range(m, lmax + 1):
            if l > m:
                pnew = ta[m, l] * x * p + tb[m, l] * pprev
                pprev = p
                p = pnew
                if abs(p) > _RESCALE:
                    p /= _RESCALE
                    pprev /= _RESCALE
                    s += _LOG_RESCALE
                    fac = _scale_factor(s)
            if l >= l0 and fac != 0.0:
                val = p * fac * wl[l - lmin]
                base = l * l - lmin * lmin + l
                acc_c += val * coeffs[base + m]
                if m > 0:
                    acc_s += val * coeffs[base - m]
        if m == 0:
            total += acc_c
        else:
            total += root2 * (acc_c * math.cos(m * phi) + acc_s * math.sin(m * phi))
    return total


@njit(cache=True)
def refine_golden(starts, start_values, coeffs, wl, lmin, lmax, half_width, tol, max_sweeps):
    """Coordinate-wise golden-section ascent from each start vector.

    Each sweep maximizes along the two tangent directions at the current
    point, moving only on strict improvement, so the returned values never
    fall below ``start_values``.
    """
    g = (math.sqrt(5.0) - 1.0) / 2.0
    seeds = sectoral_log_seeds(lmax)
    ta, tb = recurrence_tables(lmax)
    n = starts.shape[0]
    pts = starts.copy()
    best = start_values.copy()
    for i in range(n):
        p = pts[i].copy()
        fb = best[i]
        for sweep in range(max_sweeps):
            prev = fb
            for axis in range(2):
                # tangent basis at p
                if abs(p[2]) < 0.9:
                    r0, r1, r2 = 0.0, 0.0, 1.0
                else:
                    r0, r1, r2 = 1.0, 0.0, 0.0
                e0 = r1 * p[2] - r2 * p[1]
                e1 = r2 * p[0] - r0 * p[2]
                e2 = r0 * p[1] - r1 * p[0]
                en = math.sqrt(e0 * e0 + e1 * e1 + e2 * e2)
                e0 /= en
                e1 /= en
                e2 /= en
                if axis == 1:
                    f0 = p[1] * e2 - p[2] * e1
                    f1 = p[2] * e0 - p[0] * e2
                    f2 = p[0] * e1 - p[1] * e0
                    e0, e1, e2 = f0, f1, f2
                a = -half_width
                b = half_width
                c = b - g * (b - a)
                d = a + g * (b - a)
                fc = _field_value(p[0] + c * e0, p[1] + c * e1, p[2] + c * e2,
                                  coeffs, wl, lmin, lmax, seeds, ta, tb)
                fd = _field_value(p[0] + d * e0, p[1] + d * e1, p[2] + d * e2,
                                  coeffs, wl, lmin, lmax, seeds, ta, tb)
                while b - a > tol:
                    if fc > fd:
                        b = d
                        d = c
                        fd = fc
                        c = b - g * (b - a)
                        fc = _field_value(p[0] + c * e0, p[1] + c * e1, p[2] + c * e2,
                                          coeffs, wl, lmin, lmax, seeds, ta, tb)
                    else:
                        a = c
                        c = d
                        fc = fd
                        d = a + g * (b - a)
                        fd = _field_value(p[0] + d * e0, p[1] + d * e1, p[2] + d * e2,
                                          coeffs, wl, lmin, lmax, seeds, ta, tb)
                if fc > fd:
                    t, ft = c, fc
                else:
                    t, ft = d, fd
                if ft > fb:
                    q0 = p[0] + t * e0
                    q1 = p[1] + t * e1
                    q2 = p[2] + t * e2
                    qn = math.sqrt(q0 * q0 + q1 * q1 + q2 * q2)
                    p[0] = q0 / qn
                    p[1] = q1 / qn
                    p[2] = q2 / qn
                    fb = ft
            if fb - prev < 1e-13:
                break
        pts[i] = p
        best[i] = fb
    return pts, best
