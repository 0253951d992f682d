"""Monte Carlo experiments on suprema of normalized band fields."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels
from .geometry import CapacityError, EpsilonNet
from .rng import PURPOSE_BERMAN, RNGStream
from .special import gaussian_pdf_cdf, gaussian_sf, legendre_series
from .spectrum import (BandConfig, BandWindow, PowerSpectrum, band_normalization,
                       second_spectral_moment)
from .synthesis import (CovarianceProfile, HarmonicCoefficients, RingGrid, RingSynthesizer,
                        degree_weights, sample_alm_batch)

DEFAULT_EIGEN_CAPACITY = 4096


class PreconditionError(ValueError):
    pass


class PowerGuardError(ValueError):
    """Too few expected exceedances for a meaningful frequency estimate."""


class ConditioningError(np.linalg.LinAlgError):
    pass


class InapplicableError(ValueError):
    pass


class CapacityExceeded(CapacityError):
    pass


# ---------------------------------------------------------------------------
# supremum estimation

@dataclass(frozen=True)
class SupremumEstimate:
    scale: BandConfig | None
    grid_size: int
    sup_value: float
    coarse_value: float
    refined: bool
    replicate_id: int = 0
    location: tuple[float, float] = (0.0, 0.0)


_SYNTH_CACHE: dict = {}


def _synthesizer(band, wl, grid: RingGrid) -> RingSynthesizer:
    key = (band, wl.tobytes(), grid.n_theta, grid.n_phi)
    rs = _SYNTH_CACHE.get(key)
    if rs is None:
        _SYNTH_CACHE.clear()
        rs = RingSynthesizer(band, wl, grid)
        _SYNTH_CACHE[key] = rs
    return rs


def _vectors(theta, phi):
    st = np.sin(theta)
    return np.column_stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])


def _distinct_top_cells(values, grid: RingGrid, n_cells: int, min_sep: float):
    flat = values.ravel()
    k = min(flat.size, max(64, 16 * n_cells))
    top = np.argpartition(flat, -k)[-k:]
    top = top[np.argsort(flat[top])[::-1]]
    ti, pk = np.divmod(top, grid.n_phi)
    vec = _vectors(grid.theta[ti], grid.phi[pk])
    chosen = []
    cos_sep = math.cos(min_sep)
    for idx in range(top.size):
        if all(vec[idx] @ vec[c] < cos_sep for c in chosen):
            chosen.append(idx)
            if len(chosen) == n_cells:
                break
    return vec[chosen], flat[top[chosen]]


def refine_maxima(coeffs, wl, band, start_vectors, start_values, half_width,
                  tol=1e-9, max_sweeps=8):
    """Coordinate-wise golden-section ascent in local tangent coordinates.

    Returns refined unit vectors and field values; a start is only moved when
    the field strictly increases.
    """
    return _kernels.refine_golden(np.ascontiguousarray(start_vectors, dtype=float),
                                  np.asarray(start_values, dtype=float),
                                  np.ascontiguousarray(coeffs, dtype=float),
                                  np.ascontiguousarray(wl, dtype=float),
                                  int(band[0]), int(band[1]), float(half_width), float(tol),
                                  int(max_sweeps))


def _check_density(grid_density_factor):
    if grid_density_factor < 4:
        raise PreconditionError(
            f"grid density factor {grid_density_factor} is below 4 points per correlation length 1/ell_j")


def estimate_sups(coeffs: np.ndarray, w: BandWindow | None, cfg: BandConfig, band=None,
                  grid_density_factor: float = 4.0, normalization: float = 1.0, refine: bool = True,
                  n_cells: int = 5, replicate_ids=None, batch: int = 4) -> list[SupremumEstimate]:
    """Suprema for each coefficient row: grid maximum plus local refinement."""
    _check_density(grid_density_factor)
    coeffs = np.atleast_2d(coeffs)
    band = cfg.band if band is None else tuple(band)
    wl = degree_weights(w, cfg, band)
    grid = RingGrid.for_scale(cfg, grid_density_factor, band[1])
    rs = _synthesizer(band, wl, grid)
    scale = 1.0 / math.sqrt(normalization)
    ids = list(range(coeffs.shape[0])) if replicate_ids is None else list(replicate_ids)
    out = []
    for s in range(0, coeffs.shape[0], batch):
        vals = rs.synthesize(coeffs[s:s + batch])
        for k in range(vals.shape[0]):
            row = coeffs[s + k]
            v = vals[k]
            coarse = float(v.max())
            i, kk = np.unravel_index(int(np.argmax(v)), v.shape)
            loc = (float(grid.theta[i]), float(grid.phi[kk]))
            sup = coarse
            if refine and np.any(row != 0):
                starts, start_vals = _distinct_top_cells(v, grid, n_cells, 1.0 / cfg.ell_j)
                pts, best = refine_maxima(row, wl, band, starts, start_vals, grid.spacing)
                top = int(np.argmax(best))
                if best[top] > sup:
                    sup = float(best[top])
                    p = pts[top]
                    loc = (float(math.acos(max(-1.0, min(1.0, p[2])))),
                           float(math.atan2(p[1], p[0]) % (2 * math.pi)))
            out.append(SupremumEstimate(cfg, grid.size, sup * scale, coarse * scale, refine,
                                        ids[s + k], loc))
    return out


def estimate_sup(alm: HarmonicCoefficients, w: BandWindow | None, cfg: BandConfig,
                 grid_density_factor: float = 4.0, normalization: float = 1.0,
                 refine: bool = True) -> SupremumEstimate:
    """Supremum of one field; pass ``normalization`` to report ``sup / sqrt(normalization)``."""
    rep = alm.seed_path.get("replicate", 0) if alm.seed_path else 0
    return estimate_sups(alm.coeffs, w, cfg, alm.band, grid_density_factor, normalization,
                         refine, replicate_ids=[rep])[0]


def _sup_chunk(args):
    spec, w, j, seed, reps, factor, refine = args
    cfg = BandConfig(j)
    norm = band_normalization(spec, w, cfg)
    coeffs = sample_alm_batch(spec, cfg.band, seed, reps)
    return [e.sup_value for e in estimate_sups(coeffs, w, cfg, grid_density_factor=factor,
                                               normalization=norm, refine=refine,
                                               replicate_ids=reps)]


def normalized_sups(spec: PowerSpectrum, w: BandWindow, cfg: BandConfig, replicates: int,
                    master_seed: int, grid_density_factor: float = 4.0, refine: bool = True,
                    workers: int = 1, chunk: int = 20) -> np.ndarray:
    """Suprema of the normalized band field for replicates ``0..replicates-1``."""
    tasks = [(spec, w, cfg.j, master_seed, list(range(s, min(s + chunk, replicates))),
              grid_density_factor, refine) for s in range(0, replicates, chunk)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sup_chunk, tasks))
    else:
        parts = [_sup_chunk(t) for t in tasks]
    return np.array([v for part in parts for v in part])


@dataclass
class ScalingRow:
    j: int
    ell_j: int
    mean_sup: float
    se: float
    ratio: float
    ratio_se: float
    lambda_j: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ScalingReport:
    rows: list[ScalingRow]
    replicates: int
    master_seed: int
    sups: dict = field(default_factory=dict)

    @property
    def gamma_hat(self) -> float:
        return max(r.ratio for r in self.rows)

    def to_dict(self) -> dict:
        return {"replicates": self.replicates, "master_seed": self.master_seed,
                "gamma_hat": self.gamma_hat, "rows": [r.to_dict() for r in self.rows],
                "sups": {str(j): [float(x) for x in v] for j, v in self.sups.items()}}


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    mean = math.fsum(x.tolist()) / x.size
    if x.size < 2:
        return mean, 0.0
    var = math.fsum(((x - mean) ** 2).tolist()) / (x.size - 1)
    return mean, math.sqrt(var / x.size)


def sup_scaling_experiment(spec: PowerSpectrum, w: BandWindow, j_range, replicates: int,
                           master_seed: int, grid_density_factor: float = 4.0, workers: int = 1,
                           max_j: int = 9, min_replicates: int = 50) -> ScalingReport:
    """Mean of ``sup / sqrt(4 log ell_j)`` per scale."""
    js = sorted(set(int(j) for j in j_range))
    if replicates < min_replicates:
        raise PreconditionError(f"at least {min_replicates} replicates required, got {replicates}")
    if js and js[-1] > max_j:
        raise CapacityExceeded(f"scale j={js[-1]} exceeds the configured capacity j <= {max_j}")
    rows, sups = [], {}
    for j in js:
        cfg = BandConfig(j)
        s = normalized_sups(spec, w, cfg, replicates, master_seed, grid_density_factor,
                            workers=workers)
        mean, se = _mean_se(s)
        tau = math.sqrt(4.0 * math.log(cfg.ell_j))
        rows.append(ScalingRow(j, cfg.ell_j, mean, se, mean / tau, se / tau,
                               second_spectral_moment(spec, w, cfg)))
        sups[j] = s
    return ScalingReport(rows, replicates, master_seed, sups)


# ---------------------------------------------------------------------------
# excursions

def ec_heuristic(u, lambda_j: float):
    """The two printed approximations of ``P(sup > u)``.

    ``ec_value = 2 {(1 - Phi(u)) + u phi(u) lambda_j}`` and
    ``ec_l0_value = 2 {1 - Phi(u)} + 4 pi lambda_j u phi(u) / sqrt((2 pi)^3)``.
    """
    if not lambda_j > 0:
        raise ValueError("lambda_j must be positive")
    pdf, _ = gaussian_pdf_cdf(u)
    tail = gaussian_sf(u)
    u_arr = np.asarray(u, dtype=float)
    ec = 2.0 * (tail + u_arr * pdf * lambda_j)
    ec_l0 = 2.0 * tail + 4.0 * math.pi * lambda_j * u_arr * pdf / math.sqrt((2.0 * math.pi) ** 3)
    if np.ndim(ec) == 0:
        return float(ec), float(ec_l0)
    return ec, ec_l0


def expected_exceedances(u: float, lambda_j: float, replicates: int) -> float:
    """Power-guard estimate ``replicates * min(1, ec_value)`` of the exceedance count."""
    ec, _ = ec_heuristic(u, lambda_j)
    return replicates * min(1.0, max(ec, 0.0))


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi


def borell_tis_bound(esup: float, t: float) -> float:
    """``exp(-t^2/2)`` bounds ``P(sup > esup + t)`` for a unit-variance field."""
    if not t > 0:
        raise ValueError("deviation t must be positive")
    return math.exp(-0.5 * t * t)


@dataclass
class ExcursionReport:
    scale: BandConfig
    u: float
    mc_prob: float
    ci: tuple[float, float]
    events: int
    replicates: int
    ec_value: float
    ec_l0_value: float
    borell_bound: float
    lambda_j: float
    tail_alpha: float = math.nan
    mu_plus: float | None = None

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "scale"}
        d["j"] = self.scale.j
        d["ci"] = list(self.ci)
        return d


def _tail_alpha(mc, ec, lam, u):
    diff = abs(mc - ec)
    if u <= 0 or diff == 0:
        return math.inf if diff == 0 else math.nan
    return -2.0 * math.log(diff / (4.0 * math.pi * lam)) / (u * u)


def excursion_from_sups(sups, cfg: BandConfig, lambda_j: float, u: float,
                        power_guard: bool = True) -> ExcursionReport:
    sups = np.asarray(sups, dtype=float)
    n = sups.size
    ec, ec_l0 = ec_heuristic(u, lambda_j)
    expected = expected_exceedances(u, lambda_j, n)
    if power_guard and expected < 20:
        raise PowerGuardError(
            f"u={u} at j={cfg.j} expects about {expected:.2g} exceedances in {n} replicates; "
            "lower u or raise the replicate count so that at least 20 are expected")
    k = int(np.count_nonzero(sups > u))
    p = k / n
    esup = float(np.mean(sups))
    borell = borell_tis_bound(esup, u - esup) if u > esup else 1.0
    return ExcursionReport(cfg, float(u), p, wilson_interval(k, n), k, n, ec, ec_l0, borell,
                           lambda_j, _tail_alpha(p, ec, lambda_j, u))


def mc_excursion(spec: PowerSpectrum, w: BandWindow, cfg: BandConfig, u: float, replicates: int,
                 master_seed: int, grid_density_factor: float = 4.0, power_guard: bool = True,
                 sups=None) -> ExcursionReport:
    """Monte Carlo ``P(sup > u)`` with a Wilson interval, EC values and the Borell-TIS bound."""
    lam = second_spectral_moment(spec, w, cfg)
    if power_guard and expected_exceedances(u, lam, replicates) < 20:
        raise PowerGuardError(
            f"u={u} at j={cfg.j} expects fewer than 20 exceedances in {replicates} replicates; "
            "lower u or raise the replicate count")
    if sups is None:
        sups = normalized_sups(spec, w, cfg, replicates, master_seed, grid_density_factor)
    return excursion_from_sups(sups, cfg, lam, u, power_guard=False)


def excursion_sweep(sups, cfg: BandConfig, lambda_j: float, u_values,
                    tolerance: float = 0.25) -> list[ExcursionReport]:
    """Reports over thresholds; ``mu_plus`` is the smallest ``u`` with relative EC error within tolerance."""
    reports = [excursion_from_sups(sups, cfg, lambda_j, u, power_guard=False) for u in u_values]
    mu = None
    for r in sorted(reports, key=lambda r: r.u):
        if r.mc_prob > 0 and abs(r.mc_prob - r.ec_value) / r.ec_value <= tolerance:
            mu = r.u
            break
    for r in reports:
        r.mu_plus = mu
    return reports


def borell_tis_check(sups, ell_j: int, epsilon: float = 0.5, multipliers=(0.5, 1.0, 1.5)):
    """Exceedance frequencies above ``mean(sup) + t`` against ``exp(-t^2/2)``."""
    sups = np.asarray(sups, dtype=float)
    esup = float(np.mean(sups))
    rows = []
    for k in multipliers:
        t = k * epsilon * math.sqrt(4.0 * math.log(ell_j))
        freq = float(np.mean(sups > esup + t))
        se = math.sqrt(freq * (1 - freq) / sups.size)
        bound = borell_tis_bound(esup, t)
        rows.append({"multiplier": k, "t": t, "frequency": freq, "se": se, "bound": bound,
                     "passes": freq <= bound + 3 * se})
    return rows


# ---------------------------------------------------------------------------
# nets, covariance and whitening

@dataclass
class WhiteningReport:
    net: EpsilonNet
    sigma: np.ndarray
    lambda_max: float
    lambda_min: float
    max_offdiag: float
    decay_params: dict
    whitened_max_deviation: float | None = None
    spot_checks: dict = field(default_factory=dict)
    _eig: tuple | None = field(default=None, repr=False)

    @property
    def spread(self) -> float:
        return self.lambda_max - self.lambda_min

    def to_dict(self) -> dict:
        return {"net": self.net.to_dict(), "lambda_max": self.lambda_max,
                "lambda_min": self.lambda_min, "spread": self.spread,
                "max_offdiag": self.max_offdiag, "decay_params": self.decay_params,
                "whitened_max_deviation": self.whitened_max_deviation,
                "spot_checks": self.spot_checks}


def net_covariance(profile: CovarianceProfile, net: EpsilonNet,
                   capacity: int = DEFAULT_EIGEN_CAPACITY) -> WhiteningReport:
    """``Sigma[k, k'] = rho_j(<x_k, x_k'>)`` on the net with its extreme eigenvalues."""
    n = net.cardinality
    if n > capacity:
        raise CapacityExceeded(f"net of {n} points exceeds the eigen-solve capacity {capacity}")
    vecs = net.points.unit_vectors
    iu = np.triu_indices(n, 1)
    sigma = np.eye(n)
    if n > 1:
        cosines = np.clip(np.einsum("ij,ij->i", vecs[iu[0]], vecs[iu[1]]), -1.0, 1.0)
        sigma[iu] = legendre_series(profile.weights, cosines)
        sigma.T[iu] = sigma[iu]
    evals, evecs = np.linalg.eigh(sigma)
    off = sigma - np.diag(np.diag(sigma))
    delta = net.delta_exponent
    decay = {"delta_exponent": delta, "j": profile.scale.j,
             "scale_factor": (1.0 + 2.0 ** (profile.scale.j * delta)) if delta is not None else None}
    return WhiteningReport(net, sigma, float(evals[-1]), float(evals[0]),
                           float(np.max(np.abs(off))) if n > 1 else 0.0, decay,
                           _eig=(evals, evecs))


def inverse_sqrt(sigma: np.ndarray, eig=None, min_eigenvalue: float = 1e-8) -> np.ndarray:
    evals, evecs = np.linalg.eigh(sigma) if eig is None else eig
    if evals[0] <= min_eigenvalue:
        raise ConditioningError(f"covariance is near singular: smallest eigenvalue {evals[0]:.3g}")
    return (evecs / np.sqrt(evals)) @ evecs.T


def whiten_and_compare(report: WhiteningReport, samples: np.ndarray, n_checks: int = 10) -> WhiteningReport:
    """Whitened vectors ``Sigma^{-1/2} beta``; records ``E max_k |beta - beta_hat|`` and spot checks.

    ``samples`` has one replicate per row.  Spot checks compare the sample
    variance of the first ``n_checks`` whitened components to 1 (standard error
    ``sqrt(2/R)``) and the correlation of consecutive pairs among them to 0
    (standard error ``1/sqrt(R)``), both at three standard errors.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    root = inverse_sqrt(report.sigma, report._eig)
    hat = samples @ root  # root is symmetric
    dev = np.max(np.abs(samples - hat), axis=1)
    r = samples.shape[0]
    checks = {}
    k = min(n_checks, hat.shape[1])
    if r >= 2 and k >= 1:
        sub = hat[:, :k]
        var = sub.var(axis=0, ddof=1)
        se_var = math.sqrt(2.0 / r)
        checks["variance"] = {"values": var.tolist(), "se": se_var,
                              "passes": bool(np.all(np.abs(var - 1.0) <= 3 * se_var))}
        if k >= 2:
            corr = [float(np.corrcoef(sub[:, i], sub[:, i + 1])[0, 1]) for i in range(k - 1)]
            se_c = 1.0 / math.sqrt(r)
            checks["correlation"] = {"values": corr, "se": se_c,
                                     "passes": bool(np.all(np.abs(corr) <= 3 * se_c))}
    mean_dev = math.fsum(dev.tolist()) / dev.size
    return replace(report, whitened_max_deviation=mean_dev, spot_checks=checks)


def _tail_sup(profile: CovarianceProfile, start: float, n_per_degree: int = 16) -> float:
    n = int(math.ceil((math.pi - start) * n_per_degree * profile.ell_max)) + 2
    grid = np.linspace(start, math.pi, n)
    # grid spacing ~1/(16 l_max); 1% margin covers the interpolation gap
    return 1.01 * float(np.max(np.abs(profile.rho(grid))))


def max_offdiag_correlation(profile: CovarianceProfile, net: EpsilonNet) -> float:
    """``max |rho_j(<x_k, x_k'>)|`` over distinct net pairs.

    Pairs within a cut-off are evaluated exactly; the cut-off grows until a
    dense scan shows ``|rho|`` beyond it cannot exceed the maximum found.
    """
    if net.cardinality < 2:
        return 0.0
    vecs = net.points.unit_vectors
    tree = cKDTree(vecs)
    radius = 3.0 * net.separation
    while True:
        pairs = tree.query_pairs(2.0 * math.sin(0.5 * min(radius, math.pi)), output_type="ndarray")
        best = 0.0
        if pairs.size:
            cosines = np.clip(np.einsum("ij,ij->i", vecs[pairs[:, 0]], vecs[pairs[:, 1]]), -1.0, 1.0)
            best = float(np.max(np.abs(legendre_series(profile.weights, cosines))))
        if radius >= math.pi or _tail_sup(profile, radius) <= best:
            return best
        radius *= 1.5


@dataclass(frozen=True)
class DecayCheck:
    j: int
    max_offdiag: float
    envelope: float  # (1 + 2^{j delta})^{-M}

    @property
    def scaled(self) -> float:
        return self.max_offdiag / self.envelope


def correlation_decay_check(profile: CovarianceProfile, net: EpsilonNet, M: int,
                            smooth: bool | None = None) -> tuple[float, float]:
    """Maximum off-diagonal correlation and the smallest ``C_M`` with ``max <= C_M / (1 + 2^{j delta})^M``."""
    smooth = profile.smooth if smooth is None else smooth
    if not smooth:
        raise InapplicableError("the correlation decay inequality needs a smooth window; "
                                "indicator windows are not admissible")
    if net.delta_exponent is None:
        raise ValueError("net must carry its delta exponent")
    mx = max_offdiag_correlation(profile, net)
    env = (1.0 + 2.0 ** (profile.scale.j * net.delta_exponent)) ** (-M)
    return mx, mx / env


def correlation_decay_sweep(spec: PowerSpectrum, w: BandWindow, j_values, M: int = 2,
                            delta_exponent: float = 0.3, master_seed: int = 0):
    """Fit ``C_M`` over scales; returns ``(C_M, rows)`` with per-scale residuals."""
    from .geometry import scale_net
    from .synthesis import covariance_profile

    if not w.is_smooth:
        raise InapplicableError("the correlation decay inequality needs a smooth window")
    checks = []
    for j in j_values:
        cfg = BandConfig(j)
        prof = covariance_profile(spec, w, cfg)
        net = scale_net(cfg, delta_exponent, RNGStream(master_seed, j))
        mx, _ = correlation_decay_check(prof, net, M)
        checks.append(DecayCheck(j, mx, (1.0 + 2.0 ** (j * delta_exponent)) ** (-M)))
    c_m = max(c.scaled for c in checks)
    rows = [{"j": c.j, "max_offdiag": c.max_offdiag, "bound": c_m * c.envelope,
             "residual": c.max_offdiag - c_m * c.envelope} for c in checks]
    return c_m, rows


# ---------------------------------------------------------------------------
# i.i.d. baseline

def berman_baseline(n: int, replicates: int, master_seed: int, chunk: int = 1_000_000):
    """Mean and standard error of ``max of n iid N(0,1) / sqrt(2 log n)``."""
    if n < 2:
        raise PreconditionError("the maximum of fewer than two variables has no log-normalization")
    maxima = np.empty(replicates)
    for r in range(replicates):
        rng = RNGStream(master_seed, r).generator(PURPOSE_BERMAN)
        m = -math.inf
        left = n
        while left > 0:
            k = min(chunk, left)
            m = max(m, float(rng.standard_normal(k).max()))
            left -= k
        maxima[r] = m
    tau = math.sqrt(2.0 * math.log(n))
    mean, se = _mean_se(maxima / tau)
    return mean, se
