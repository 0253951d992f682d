"""Angular power spectra, band windows and per-scale spectral constants.

The spectrum follows ``C_l = G(l) * l**(-alpha)`` with ``G`` a positive
rational function bounded away from zero and infinity.  A band at scale
``j`` covers the degrees ``[2**(j-1), 2**(j+1)]`` and is weighted by a
window ``b(l / 2**j)`` supported on ``[1/2, 2]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

WINDOW_KINDS = ("smooth-bump", "raised-cosine", "indicator")
SUPPORT = (0.5, 2.0)


class SpectrumDomainError(ValueError):
    """Degree outside the validity range of a spectrum."""


class DegenerateBandError(ValueError):
    """All window weights vanish on the band, so the band carries no energy."""


def _polyval(coeffs: Sequence[float], x):
    # coefficients in increasing powers
    return np.polynomial.polynomial.polyval(x, np.asarray(coeffs, dtype=float))


@dataclass(frozen=True)
class PowerSpectrum:
    """Power-law spectrum ``G(l) l**-alpha`` with rational ``G``.

    ``g_numerator`` and ``g_denominator`` hold polynomial coefficients in
    increasing powers of ``l``.  The admissibility constants ``c1 < G < c2``
    are checked numerically on ``[ell_min_valid, ell_check_max]``; when they
    are not supplied they are taken as the observed extremes widened by 1%.
    An identically zero numerator is accepted as the null spectrum.
    """

    alpha: float = 2.5
    g_numerator: tuple[float, ...] = (1.0,)
    g_denominator: tuple[float, ...] = (1.0,)
    c1: float | None = None
    c2: float | None = None
    ell_min_valid: int = 1
    ell_check_max: int = 4096

    def __post_init__(self):
        object.__setattr__(self, "g_numerator", tuple(float(c) for c in self.g_numerator))
        object.__setattr__(self, "g_denominator", tuple(float(c) for c in self.g_denominator))
        if not self.alpha > 2:
            raise ValueError(f"spectral exponent alpha must exceed 2, got {self.alpha}")
        if self.ell_min_valid < 0:
            raise ValueError("ell_min_valid must be nonnegative")
        ells = np.arange(max(self.ell_min_valid, 0), self.ell_check_max + 1, dtype=float)
        den = _polyval(self.g_denominator, ells)
        if np.any(den == 0):
            bad = int(ells[np.flatnonzero(den == 0)[0]])
            raise ValueError(f"G denominator vanishes at integer degree {bad}")
        if self.is_null:
            return
        g = _polyval(self.g_numerator, ells) / den
        if np.any(g <= 0):
            bad = int(ells[np.flatnonzero(g <= 0)[0]])
            raise ValueError(f"G must be positive on the validity range; G({bad}) = {g[ells == bad][0]}")
        c1 = float(g.min()) * 0.99 if self.c1 is None else self.c1
        c2 = float(g.max()) * 1.01 if self.c2 is None else self.c2
        if not (0 < c1 < g.min() and g.max() < c2 < math.inf):
            raise ValueError(
                f"admissibility bounds violated: need 0 < c1={c1} < min G={g.min()} "
                f"and max G={g.max()} < c2={c2}")
        object.__setattr__(self, "c1", c1)
        object.__setattr__(self, "c2", c2)

    @property
    def is_null(self) -> bool:
        return all(c == 0 for c in self.g_numerator)

    @classmethod
    def null(cls, alpha: float = 2.5) -> "PowerSpectrum":
        return cls(alpha=alpha, g_numerator=(0.0,))

    def G(self, ell):
        ell = np.asarray(ell, dtype=float)
        return _polyval(self.g_numerator, ell) / _polyval(self.g_denominator, ell)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "g_num": list(self.g_numerator),
                "g_den": list(self.g_denominator), "ell_min_valid": self.ell_min_valid}


def evaluate_spectrum(spec: PowerSpectrum, ell):
    """Return ``C_l``; accepts a scalar degree or an integer array."""
    arr = np.asarray(ell)
    if np.any(arr < spec.ell_min_valid):
        bad = int(np.min(arr))
        raise SpectrumDomainError(
            f"degree l={bad} is below the spectrum validity range l >= {spec.ell_min_valid}")
    out = spec.G(arr) * np.power(arr.astype(float), -spec.alpha)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BandWindow:
    """Window ``b`` on ``[1/2, 2]``.

    Families (``u = log2 t``):

    * ``smooth-bump``: ``A * exp(1 - 1/(1 - u**2))``, C-infinity, peak ``A`` at t = 1.
    * ``raised-cosine``: ``A * cos(pi u / 2)**2``, C1 at the support edges.
    * ``indicator``: ``A`` on ``[lo, hi]`` (default the full support), zero elsewhere.

    ``parameters`` maps ``amplitude`` and, for the indicator, ``lo``/``hi``.
    """

    kind: str = "smooth-bump"
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in WINDOW_KINDS:
            raise ValueError(f"unknown window kind {self.kind!r}; expected one of {WINDOW_KINDS}")
        if self.amplitude < 0:
            raise ValueError("window amplitude must be nonnegative")
        if self.kind == "indicator":
            lo, hi = self.indicator_range
            if not (SUPPORT[0] <= lo <= hi <= SUPPORT[1]):
                raise ValueError(f"indicator range [{lo}, {hi}] must lie inside [1/2, 2]")

    @property
    def amplitude(self) -> float:
        return float(self.parameters.get("amplitude", 1.0))

    @property
    def indicator_range(self) -> tuple[float, float]:
        return float(self.parameters.get("lo", SUPPORT[0])), float(self.parameters.get("hi", SUPPORT[1]))

    @property
    def is_smooth(self) -> bool:
        return self.kind != "indicator"

    @classmethod
    def single_degree(cls, ell: int, j: int, amplitude: float = 1.0) -> "BandWindow":
        """Indicator selecting exactly degree ``ell`` at scale ``j``."""
        t = ell / 2.0 ** j
        return cls("indicator", {"lo": t, "hi": t, "amplitude": amplitude})

    def scaled(self, c: float) -> "BandWindow":
        params = dict(self.parameters)
        params["amplitude"] = self.amplitude * c
        return BandWindow(self.kind, params)

    def __call__(self, t):
        return window_eval(self, t)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.parameters)}


def window_eval(w: BandWindow, t):
    """``b(t)``; zero outside ``[1/2, 2]``.  Scalar in, scalar out."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("window argument must be nonnegative")
    out = np.zeros_like(t_arr)
    if w.kind == "indicator":
        lo, hi = w.indicator_range
        # tolerate representation error of l / 2**j
        inside = (t_arr >= lo * (1 - 1e-12)) & (t_arr <= hi * (1 + 1e-12))
        out[inside] = w.amplitude
    else:
        inside = (t_arr > SUPPORT[0]) & (t_arr < SUPPORT[1])
        u = np.log2(t_arr[inside])
        if w.kind == "smooth-bump":
            out[inside] = w.amplitude * np.exp(1.0 - 1.0 / (1.0 - u * u))
        else:
            out[inside] = w.amplitude * np.cos(0.5 * np.pi * u) ** 2
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BandConfig:
    """Scale-``j`` band: ``ell_j = 2**j``, degrees ``[2**(j-1), 2**(j+1)]``."""

    j: int

    def __post_init__(self):
        if int(self.j) != self.j or self.j < 1:
            raise ValueError(f"scale j must be an integer >= 1, got {self.j}")

    @property
    def ell_j(self) -> int:
        return 2 ** self.j

    @property
    def band(self) -> tuple[int, int]:
        return 2 ** (self.j - 1), 2 ** (self.j + 1)

    @property
    def degree(self) -> int:
        """Polynomial degree ``p_j = 2 ell_j`` of the restricted field."""
        return 2 * self.ell_j

    @property
    def ells(self) -> np.ndarray:
        lo, hi = self.band
        return np.arange(lo, hi + 1)


def band_weights(spec: PowerSpectrum, w: BandWindow, cfg: BandConfig) -> tuple[np.ndarray, np.ndarray]:
    """Degrees of the band and their weights ``b^2(l/2^j) (2l+1)/(4 pi) C_l``."""
    ells = cfg.ells
    b = window_eval(w, ells / float(cfg.ell_j))
    c = evaluate_spectrum(spec, ells)
    return ells, b * b * (2 * ells + 1) / (4 * np.pi) * c


def band_normalization(spec: PowerSpectrum, w: BandWindow, cfg: BandConfig) -> float:
    """Variance of the un-normalized band field, summed with ``math.fsum``."""
    _, weights = band_weights(spec, w, cfg)
    total = math.fsum(weights.tolist())
    if not total > 0:
        raise DegenerateBandError(
            f"band {cfg.band} at j={cfg.j} carries zero energy under window {w.kind}")
    return total


def second_spectral_moment(spec: PowerSpectrum, w: BandWindow, cfg: BandConfig) -> float:
    """Weighted mean of ``l(l+1)/2`` over the band."""
    ells, weights = band_weights(spec, w, cfg)
    norm = band_normalization(spec, w, cfg)
    return math.fsum((weights * (ells * (ells + 1) / 2.0)).tolist()) / norm


def full_field_lambda(spec: PowerSpectrum, ell_max: int) -> float:
    """Second spectral moment of the truncated (un-normalized) full field."""
    if ell_max < spec.ell_min_valid:
        raise SpectrumDomainError(f"ell_max={ell_max} below validity range {spec.ell_min_valid}")
    ells = np.arange(max(spec.ell_min_valid, 1), ell_max + 1)
    c = evaluate_spectrum(spec, ells)
    return math.fsum(((2 * ells + 1) / (4 * np.pi) * c * ells * (ells + 1) / 2.0).tolist())


def partition_of_unity_defect(w: BandWindow, ell_max: int, j_max: int | None = None) -> float:
    """``max_l |sum_j b^2(l/2^j) - 1|`` over ``2 <= l <= ell_max``.

    Informational only: nothing else in the package depends on it.
    """
    if j_max is None:
        j_max = int(math.ceil(math.log2(max(ell_max, 2)))) + 2
    ells = np.arange(2, ell_max + 1, dtype=float)
    total = np.zeros_like(ells)
    for j in range(0, j_max + 1):
        total += window_eval(w, ells / 2.0 ** j) ** 2
    return float(np.max(np.abs(total - 1.0)))
