"""Legendre polynomials, real spherical harmonics, J0 and Gaussian tails."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp

from . import _kernels

SQRT_2PI = math.sqrt(2.0 * math.pi)


def legendre_p(ell: int, x):
    """``P_l(x)`` by Bonnet's recurrence ``(k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}``."""
    if ell < 0:
        raise ValueError("degree must be nonnegative")
    x_arr = np.asarray(x, dtype=float)
    if np.any(np.abs(x_arr) > 1.0):
        raise ValueError("Legendre argument must satisfy |x| <= 1")
    p_prev = np.ones_like(x_arr)
    if ell == 0:
        return float(p_prev) if p_prev.ndim == 0 else p_prev
    p = x_arr.copy()
    for k in range(1, ell):
        p_prev, p = p, ((2 * k + 1) * x_arr * p - k * p_prev) / (k + 1)
    return float(p) if p.ndim == 0 else p


def legendre_series(weights, x):
    """``sum_l weights[l] P_l(x)`` by the three-term recurrence (compiled)."""
    x_arr = np.asarray(x, dtype=float)
    w = np.ascontiguousarray(weights, dtype=float)
    if w.size == 0:
        return 0.0 if x_arr.ndim == 0 else np.zeros_like(x_arr)
    out = _kernels.legendre_sum(w, np.ascontiguousarray(x_arr.ravel())).reshape(x_arr.shape)
    return float(out) if out.ndim == 0 else out


def legendre_p_deriv_at_one(ell: int) -> float:
    """``P_l'(1) = l(l+1)/2``."""
    return ell * (ell + 1) / 2


def _check_angles(theta, phi):
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any((theta < 0) | (theta > np.pi)):
        raise ValueError("colatitude must lie in [0, pi]")
    return theta, phi


def _logsin(theta):
    with np.errstate(divide="ignore"):
        return np.log(np.sin(theta))


def spherical_harmonic(ell: int, m: int, theta, phi):
    """Real orthonormal ``Y_lm(theta, phi)``.

    ``Y_l0 = Pbar_l0``, ``Y_lm = sqrt(2) Pbar_lm cos(m phi)`` for ``m > 0`` and
    ``sqrt(2) Pbar_l|m| sin(|m| phi)`` for ``m < 0``, with ``Pbar`` the
    orthonormalized associated Legendre function (no Condon-Shortley phase).
    """
    if abs(m) > ell:
        raise ValueError(f"|m| = {abs(m)} exceeds degree l = {ell}")
    theta, phi = _check_angles(theta, phi)
    t = np.atleast_1d(theta).ravel()
    ph = np.broadcast_to(phi, theta.shape).ravel() if phi.ndim else np.full(t.size, float(phi))
    mm = abs(m)
    seeds = _kernels.sectoral_log_seeds(ell)
    pbar = _kernels.plm_block(np.cos(t), _logsin(t), mm, ell, ell, seeds[mm])[:, 0]
    if m == 0:
        val = pbar
    elif m > 0:
        val = math.sqrt(2.0) * pbar * np.cos(mm * ph)
    else:
        val = math.sqrt(2.0) * pbar * np.sin(mm * ph)
    val = val.reshape(theta.shape)
    return float(val) if val.ndim == 0 else val


def ylm_matrix(theta, phi, lmin: int, lmax: int) -> np.ndarray:
    """All real harmonics with ``lmin <= l <= lmax`` at the given points."""
    theta, phi = _check_angles(theta, phi)
    t = np.atleast_1d(theta).ravel()
    return _kernels.ylm_rows(np.cos(t), _logsin(t), np.atleast_1d(phi).astype(float).ravel(), lmin, lmax)


def _j0_series(x):
    # sum_{k>=0} (-1)^k (x/2)^{2k} / (k!)^2
    q = -(x * x) / 4.0
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 60):
        term = term * q / (k * k)
        total = total + term
        if np.all(np.abs(term) < 1e-18 * np.maximum(np.abs(total), 1e-300)):
            break
    return total


def _j0_hankel(x):
    # Hankel asymptotic expansion, truncated at the smallest term
    mu = 0.0
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, 40):
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if k > 1:
            active &= np.abs(term) < np.abs(prev)
        contrib = np.where(active, term, 0.0)
        if k % 2 == 1:
            q = q + (-1) ** ((k - 1) // 2) * contrib
        else:
            p = p + (-1) ** (k // 2) * contrib
        prev = term
    chi = x - np.pi / 4
    return np.sqrt(2.0 / (np.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def bessel_j0(x):
    """Bessel function of the first kind, order zero.

    Power series for ``|x| <= 12``, Hankel's asymptotic expansion beyond.
    """
    x_arr = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(x_arr)
    small = x_arr <= 12.0
    out[small] = _j0_series(x_arr[small])
    if np.any(~small):
        out[~small] = _j0_hankel(x_arr[~small])
    return float(out) if out.ndim == 0 else out


def gaussian_pdf_cdf(u):
    """Standard normal density and distribution function at ``u``."""
    u_arr = np.asarray(u, dtype=float)
    pdf = np.exp(-0.5 * u_arr * u_arr) / SQRT_2PI
    cdf = sp.ndtr(u_arr)
    if u_arr.ndim == 0:
        return float(pdf), float(cdf)
    return pdf, cdf


def gaussian_sf(u):
    """``1 - Phi(u)`` without cancellation in the upper tail."""
    out = sp.ndtr(-np.asarray(u, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def mills_lower_bound(z):
    """``z / (1 + z^2) * phi(z)``, a lower bound for ``P(Z > z)``."""
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr <= 0):
        raise ValueError("Mills lower bound requires z > 0")
    pdf, _ = gaussian_pdf_cdf(z_arr)
    out = z_arr / (1.0 + z_arr * z_arr) * pdf
    return float(out) if out.ndim == 0 else out


def one_minus_j0(x):
    """``1 - J0(x)``, summed directly from the series tail for ``|x| <= 2``."""
    x_arr = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(x_arr)
    small = x_arr <= 2.0
    xs = x_arr[small]
    q = -(xs * xs) / 4.0
    term = -q
    total = term.copy()
    for k in range(2, 40):
        term = term * q / (k * k)
        total = total + term
    out[small] = total
    out[~small] = 1.0 - bessel_j0(x_arr[~small])
    return float(out) if out.ndim == 0 else out


def one_minus_legendre_p(ell: int, theta: float) -> float:
    """``1 - P_l(cos theta)`` by Bonnet's recurrence on ``Q_l = 1 - P_l``."""
    omx = 2.0 * math.sin(0.5 * theta) ** 2
    x = math.cos(theta)
    if ell == 0:
        return 0.0
    q_prev, q = 0.0, omx
    for k in range(1, ell):
        q_prev, q = q, ((2 * k + 1) * omx + (2 * k + 1) * x * q - k * q_prev) / (k + 1)
    return q


def _theta_minus_sin(t: float) -> float:
    if t > 0.5:
        return t - math.sin(t)
    # t^3/3! - t^5/5! + ...
    term = t ** 3 / 6.0
    total = term
    for k in range(2, 12):
        term *= -t * t / ((2 * k) * (2 * k + 1))
        total += term
    return total


@dataclass(frozen=True)
class HilbComparison:
    """``exact = P_l(cos theta)``, ``hilb = sqrt(theta/sin theta) J0((l+1/2) theta)``.

    ``residual = exact - hilb`` is formed from ``1 - P_l`` and ``1 - J0`` so
    that it keeps full relative accuracy when both sides are close to 1.
    """

    ell: int
    theta: float
    exact: float
    hilb: float
    residual: float


def hilb_compare(ell: int, theta: float) -> HilbComparison:
    """Compare ``P_l(cos t)`` with ``sqrt(t / sin t) J0((l + 1/2) t)``."""
    if not 0.0 < theta < math.pi:
        raise ValueError(f"theta must lie in (0, pi), got {theta}")
    st = math.sin(theta)
    r = theta / st
    sq = math.sqrt(r)
    one_minus_sq = -(_theta_minus_sin(theta) / st) / (1.0 + sq)
    one_minus_hilb = one_minus_sq + sq * one_minus_j0((ell + 0.5) * theta)
    one_minus_exact = one_minus_legendre_p(ell, theta)
    exact = legendre_p(ell, math.cos(theta))
    hilb = sq * bessel_j0((ell + 0.5) * theta)
    return HilbComparison(ell, theta, exact, hilb, one_minus_hilb - one_minus_exact)
