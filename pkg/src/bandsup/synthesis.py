"""Gaussian harmonic coefficients, band-limited field evaluation, covariance.

Coefficients live in the real orthonormal basis: degree ``l`` carries
``2l + 1`` independent ``N(0, C_l)`` reals ordered ``m = -l..l``.  This is
equivalent in law to the complex convention ``a_{l,-m} = (-1)^m conj(a_lm)``
with ``E|a_lm|^2 = C_l`` (the real and imaginary parts of a complex ``a_lm``,
``m > 0``, map to the ``+m`` and ``-m`` real coefficients scaled by
``sqrt(2)``).

Flat storage for a band ``[lo, hi]`` puts ``(l, m)`` at
``l*l - lo*lo + l + m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import irfft, next_fast_len
from scipy.interpolate import CubicSpline

from . import _kernels
from .geometry import SpherePoints, as_points
from .rng import PURPOSE_ALM, RNGStream
from .special import ylm_matrix
from .spectrum import (BandConfig, BandWindow, DegenerateBandError, PowerSpectrum,
                       band_normalization, evaluate_spectrum, second_spectral_moment,
                       window_eval)


def n_coefficients(lo: int, hi: int) -> int:
    return (hi + 1) ** 2 - lo ** 2


def coef_index(lo: int, ell, m):
    return np.asarray(ell) ** 2 - lo * lo + np.asarray(ell) + np.asarray(m)


@dataclass
class HarmonicCoefficients:
    band: tuple[int, int]
    coeffs: np.ndarray
    seed_path: dict = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = self.band
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (n_coefficients(lo, hi),):
            raise ValueError(f"band {self.band} needs {n_coefficients(lo, hi)} coefficients, "
                             f"got shape {self.coeffs.shape}")

    def degree(self, ell: int) -> np.ndarray:
        lo, _ = self.band
        start = ell * ell - lo * lo
        return self.coeffs[start:start + 2 * ell + 1]

    @classmethod
    def zeros(cls, band) -> "HarmonicCoefficients":
        return cls(tuple(band), np.zeros(n_coefficients(*band)))

    @classmethod
    def single(cls, band, ell: int, m: int = 0, value: float = 1.0) -> "HarmonicCoefficients":
        out = cls.zeros(band)
        out.coeffs[int(coef_index(band[0], ell, m))] = value
        return out


def _degree_draws(spec: PowerSpectrum, stream: RNGStream, ell: int) -> np.ndarray:
    c = 0.0 if spec.is_null else evaluate_spectrum(spec, ell)
    z = stream.generator(PURPOSE_ALM, ell).standard_normal(2 * ell + 1)
    return math.sqrt(c) * z


def sample_alm(spec: PowerSpectrum, w: BandWindow | None, cfg: BandConfig | None,
               rng_stream: RNGStream, band: tuple[int, int] | None = None) -> HarmonicCoefficients:
    """Draw ``N(0, C_l)`` real coefficients on the band of ``cfg``.

    Each degree reads its own stream ``(seed, replicate, l)``, so a degree's
    coefficients do not depend on which band they are drawn for.  The
    window enters only at evaluation time.
    """
    if band is None:
        band = cfg.band
    lo, hi = band
    coeffs = np.concatenate([_degree_draws(spec, rng_stream, ell) for ell in range(lo, hi + 1)])
    path = {**rng_stream.identity(), "band": [lo, hi]}
    return HarmonicCoefficients((lo, hi), coeffs, path)


def sample_alm_batch(spec: PowerSpectrum, band: tuple[int, int], master_seed: int,
                     replicates) -> np.ndarray:
    """Coefficient matrix ``(len(replicates), ncoef)``; row ``r`` equals ``sample_alm`` for replicate ``r``."""
    lo, hi = band
    reps = list(replicates)
    out = np.empty((len(reps), n_coefficients(lo, hi)))
    for k, rep in enumerate(reps):
        stream = RNGStream(master_seed, rep)
        out[k] = np.concatenate([_degree_draws(spec, stream, ell) for ell in range(lo, hi + 1)])
    return out


def degree_weights(w: BandWindow | None, cfg: BandConfig | None, band: tuple[int, int]) -> np.ndarray:
    """Window factor ``b(l / 2^j)`` per degree of the band (ones without a window)."""
    lo, hi = band
    ells = np.arange(lo, hi + 1)
    if w is None:
        return np.ones(ells.size)
    return np.asarray(window_eval(w, ells / float(cfg.ell_j)), dtype=float).reshape(ells.size)


FIELD_KINDS = ("full", "beta", "beta_tilde")


@dataclass
class FieldSample:
    points: SpherePoints
    values: np.ndarray
    scale: BandConfig | None
    kind: str = "beta"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(self.points) != self.values.size:
            raise ValueError("points and values differ in length")
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")

    @property
    def normalized(self) -> bool:
        return self.kind == "beta_tilde"


def evaluate_field(alm: HarmonicCoefficients, w: BandWindow | None, cfg: BandConfig | None,
                   points) -> FieldSample:
    """``sum_l b(l/2^j) sum_m a_lm Y_lm(x)`` at each point.

    With ``w=None`` every degree of ``alm.band`` has unit weight, which gives
    the truncated full field.
    """
    pts = as_points(points)
    lo, hi = alm.band
    wl = degree_weights(w, cfg, alm.band)
    with np.errstate(divide="ignore"):
        logsin = np.log(np.sin(pts.theta))
    values = _kernels.synth_points(np.cos(pts.theta), logsin, pts.phi, alm.coeffs, wl, lo, hi)
    kind = "full" if w is None else "beta"
    return FieldSample(pts, values, cfg, kind, {"seed": alm.seed_path})


def evaluate_batch(coeffs: np.ndarray, wl: np.ndarray, band: tuple[int, int], points,
                   chunk: int = 2048) -> np.ndarray:
    """Many replicates at a fixed point set: ``coeffs @ (Y * w)^T``, shape (R, n)."""
    pts = as_points(points)
    lo, hi = band
    ells = np.arange(lo, hi + 1)
    col_w = np.repeat(wl, 2 * ells + 1)
    out = np.empty((coeffs.shape[0], len(pts)))
    for s in range(0, len(pts), chunk):
        y = ylm_matrix(pts.theta[s:s + chunk], pts.phi[s:s + chunk], lo, hi)
        out[:, s:s + chunk] = coeffs @ (y * col_w).T
    return out


class DoubleNormalizationError(ValueError):
    pass


def normalize_beta(sample: FieldSample, spec: PowerSpectrum, w: BandWindow, cfg: BandConfig) -> FieldSample:
    """Divide a band field by the square root of its variance."""
    if sample.kind == "beta_tilde":
        raise DoubleNormalizationError("field sample is already normalized")
    if sample.kind != "beta":
        raise ValueError("only band-limited samples can be normalized")
    norm = band_normalization(spec, w, cfg)
    return FieldSample(sample.points, sample.values / math.sqrt(norm), cfg, "beta_tilde",
                       dict(sample.metadata))


def one_minus_legendre_series(weights: np.ndarray, theta) -> np.ndarray:
    """``sum_l weights[l] (1 - P_l(cos theta))`` without cancellation at small angles.

    Runs Bonnet's recurrence on ``Q_l = 1 - P_l`` with ``1 - x = 2 sin^2(theta/2)``.
    """
    theta = np.asarray(theta, dtype=float)
    x = np.cos(theta)
    omx = 2.0 * np.sin(0.5 * theta) ** 2
    total = np.zeros_like(theta)
    q_prev = np.zeros_like(theta)
    q = omx.copy()
    if weights.size > 1:
        total += weights[1] * q
    for k in range(1, weights.size - 1):
        q_prev, q = q, ((2 * k + 1) * omx + (2 * k + 1) * x * q - k * q_prev) / (k + 1)
        if weights[k + 1] != 0.0:
            total += weights[k + 1] * q
    return total


@dataclass
class CovarianceProfile:
    """Correlation ``rho_j`` of the normalized band field as a function of angle."""

    scale: BandConfig
    weights: np.ndarray  # normalized, indexed by degree from 0
    lambda_j: float
    smooth: bool = True  # window family admits the smooth-window decay inequality
    _spline: CubicSpline | None = field(default=None, repr=False)

    @property
    def ell_max(self) -> int:
        return self.weights.size - 1

    def one_minus_rho(self, theta):
        out = one_minus_legendre_series(self.weights, theta)
        return float(out) if np.ndim(out) == 0 else out

    def rho(self, theta):
        out = 1.0 - np.asarray(self.one_minus_rho(theta))
        return float(out) if np.ndim(out) == 0 else out

    def dudley(self, theta):
        """Canonical distance ``sqrt(2 - 2 rho)`` at angle ``theta``."""
        out = np.sqrt(2.0 * np.maximum(np.asarray(self.one_minus_rho(theta)), 0.0))
        return float(out) if np.ndim(out) == 0 else out

    def rho_fast(self, theta, nodes_per_degree: int = 64):
        """Cubic-spline interpolant of ``rho`` on a grid of spacing ``1/(nodes_per_degree * l_max)``.

        Interpolation error is below ~1e-10 at the default density; used for
        very large pair sets.
        """
        if self._spline is None:
            n = int(math.ceil(math.pi * nodes_per_degree * max(self.ell_max, 1))) + 1
            grid = np.linspace(0.0, math.pi, n)
            self._spline = CubicSpline(grid, self.rho(grid))
        return self._spline(np.asarray(theta, dtype=float))

    def to_dict(self) -> dict:
        return {"j": self.scale.j, "lambda_j": self.lambda_j, "ell_max": self.ell_max,
                "smooth": self.smooth}


def covariance_profile(spec: PowerSpectrum, w: BandWindow, cfg: BandConfig) -> CovarianceProfile:
    lo, hi = cfg.band
    ells = np.arange(lo, hi + 1)
    b = np.asarray(window_eval(w, ells / float(cfg.ell_j)), dtype=float).reshape(ells.size)
    raw = b * b * (2 * ells + 1) / (4 * np.pi) * evaluate_spectrum(spec, ells)
    norm = band_normalization(spec, w, cfg)
    weights = np.zeros(hi + 1)
    weights[lo:] = raw / norm
    return CovarianceProfile(cfg, weights, second_spectral_moment(spec, w, cfg), w.is_smooth)


def dudley_metric_bounds(profile: CovarianceProfile, cfg: BandConfig, K: float = 0.5,
                         thetas=None) -> tuple[float, float]:
    """Extremes of ``d_j^2(theta) / (ell_j^2 theta^2)`` over a grid of ``theta < K / ell_j``."""
    if thetas is None:
        thetas = np.linspace(K / cfg.ell_j / 100.0, K / cfg.ell_j, 100)
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    if thetas.size == 0:
        raise ValueError("empty angle grid")
    if np.any(thetas <= 0):
        raise ValueError("angles must be positive")
    ratio = 2.0 * np.asarray(profile.one_minus_rho(thetas)) / (cfg.ell_j ** 2 * thetas ** 2)
    return float(ratio.min()), float(ratio.max())


class RingGrid:
    """Iso-latitude grid: ``theta_i = (i + 1/2) pi / n_theta``, ``phi_k = 2 pi k / n_phi``."""

    def __init__(self, n_theta: int, n_phi: int):
        self.n_theta = int(n_theta)
        self.n_phi = int(n_phi)
        self.theta = (np.arange(self.n_theta) + 0.5) * np.pi / self.n_theta
        self.phi = 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi

    @classmethod
    def for_scale(cls, cfg: BandConfig, density_factor: float, ell_max: int | None = None) -> "RingGrid":
        """Spacing at most ``1 / (density_factor * ell_j)`` in both directions."""
        ell_max = cfg.band[1] if ell_max is None else ell_max
        step = 1.0 / (density_factor * cfg.ell_j)
        n_theta = int(math.ceil(math.pi / step))
        n_phi = max(int(math.ceil(2 * math.pi / step)), 2 * ell_max + 2)
        return cls(n_theta, next_fast_len(n_phi, real=True))

    @property
    def spacing(self) -> float:
        return max(np.pi / self.n_theta, 2 * np.pi / self.n_phi)

    @property
    def size(self) -> int:
        return self.n_theta * self.n_phi

    def point(self, i: int, k: int) -> tuple[float, float]:
        return float(self.theta[i]), float(self.phi[k])


class RingSynthesizer:
    """Band field on a :class:`RingGrid` by per-ring Legendre sums and an FFT in longitude.

    Associated Legendre blocks for the northern rings are cached when they fit
    ``cache_bytes``; southern rings follow from ``Pbar(pi - t) = (-1)^(l+m) Pbar(t)``.
    """

    def __init__(self, band: tuple[int, int], wl: np.ndarray, grid: RingGrid,
                 cache_bytes: int = 320 * 2 ** 20):
        self.band = (int(band[0]), int(band[1]))
        self.wl = np.asarray(wl, dtype=float)
        self.grid = grid
        lo, hi = self.band
        if grid.n_phi // 2 <= hi:
            raise ValueError("longitude sampling too coarse for the band")
        self.n_half = (grid.n_theta + 1) // 2
        th = grid.theta[: self.n_half]
        self._x = np.cos(th)
        self._logsin = np.log(np.sin(th))
        self._seeds = _kernels.sectoral_log_seeds(hi)
        self._plan = []
        total = 0
        for m in range(hi + 1):
            l0 = max(m, lo)
            ells = np.arange(l0, hi + 1)
            keep = self.wl[ells - lo] != 0.0
            idx_c = coef_index(lo, ells, m)
            idx_s = coef_index(lo, ells, -m)
            sign = np.where((ells + m) % 2 == 0, 1.0, -1.0)
            self._plan.append((m, l0, ells, keep, idx_c, idx_s, sign, self.wl[ells - lo]))
            total += self.n_half * ells.size * 8
        self._cache = {} if total <= cache_bytes else None

    def _block(self, m: int, l0: int) -> np.ndarray:
        if self._cache is not None and m in self._cache:
            return self._cache[m]
        blk = _kernels.plm_block(self._x, self._logsin, m, l0, self.band[1], self._seeds[m])
        if self._cache is not None:
            self._cache[m] = blk
        return blk

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Field values, shape ``(R, n_theta, n_phi)`` for coefficient rows ``(R, ncoef)``."""
        coeffs = np.atleast_2d(coeffs)
        r = coeffs.shape[0]
        g = self.grid
        nh = self.n_half
        south = g.n_theta - nh  # rings mirrored from the north, excluding an equatorial ring
        spec = np.zeros((r, g.n_theta, g.n_phi // 2 + 1), dtype=complex)
        root2 = math.sqrt(2.0)
        for m, l0, ells, keep, idx_c, idx_s, sign, wv in self._plan:
            if ells.size == 0 or not np.any(keep):
                continue
            blk = self._block(m, l0)
            c = coeffs[:, idx_c] * wv
            if m == 0:
                stacked = np.concatenate([c, c * sign]).T
                res = blk @ stacked
                north = res[:, :r].T
                southv = res[:, r:].T
                spec[:, :nh, 0] = north
                spec[:, nh:, 0] = southv[:, :south][:, ::-1]
            else:
                s = coeffs[:, idx_s] * wv
                stacked = np.concatenate([c, s, c * sign, s * sign]).T
                res = blk @ stacked
                a_n, b_n = res[:, :r].T, res[:, r:2 * r].T
                a_s, b_s = res[:, 2 * r:3 * r].T, res[:, 3 * r:].T
                spec[:, :nh, m] = (a_n - 1j * b_n) * (root2 / 2.0)
                spec[:, nh:, m] = ((a_s - 1j * b_s) * (root2 / 2.0))[:, :south][:, ::-1]
        return irfft(spec, n=g.n_phi, axis=-1, overwrite_x=True) * g.n_phi
