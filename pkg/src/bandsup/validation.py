"""Acceptance criteria, shared by ``bandsup validate-all`` and the test suite.

Each criterion returns a :class:`CriterionResult` whose ``summary`` is a
deterministic one-line description; wall time is kept separately.  Pilot
constants come from ``data/fixtures.json`` (see ``scripts/pin_fixtures.py``).
"""

from __future__ import annotations

import json
import math
import tempfile
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .extremes import (berman_baseline, borell_tis_check, net_covariance, normalized_sups,
                       sup_scaling_experiment, whiten_and_compare, WhiteningReport)
from .geometry import SpherePoints, dudley_entropy_integral, scale_net
from .rng import PURPOSE_PROBE, RNGStream
from .special import bessel_j0, hilb_compare, legendre_p, one_minus_j0, ylm_matrix
from .spectrum import BandConfig, band_normalization, evaluate_spectrum
from .synthesis import (covariance_profile, degree_weights, dudley_metric_bounds, evaluate_batch,
                        sample_alm_batch)

HILB_SCALES = (16, 64, 256)
DETERMINISM_COMMANDS = ("synth", "covariance", "sup-scaling", "excursion", "entropy",
                        "net-whiten", "berman")


def load_fixtures() -> dict:
    text = resources.files("bandsup").joinpath("data/fixtures.json").read_text()
    return json.loads(text)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] criterion {self.number} ({self.name}): {self.summary}"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "summary": self.summary, "details": self.details}


def _check(checks: dict) -> bool:
    return all(bool(v) for v in checks.values())


# ---------------------------------------------------------------------------

def hilb_sweep(ells=HILB_SCALES, k_delta: float = 1.82, n: int = 80):
    """``max |residual| / theta^2`` over ``theta in (0, K/l)`` (geometric grid)."""
    worst = 0.0
    for ell in ells:
        for th in np.geomspace(1e-4 * k_delta / ell, k_delta / ell, n):
            h = hilb_compare(ell, float(th))
            worst = max(worst, abs(h.residual) / th ** 2)
    return worst


def j0_bracket_holds(ell: int, k_delta: float, delta: float = 0.05, n: int = 400) -> bool:
    """``(1/4 - d) x^2 <= 1 - J0(x) <= (1/4 + d) x^2`` for ``x = (l + 1/2) theta``, ``theta < K/l``."""
    th = np.linspace(k_delta / ell / n, k_delta / ell, n)
    x = (ell + 0.5) * th
    q = np.asarray(one_minus_j0(x)) / x ** 2
    return bool(np.all((q >= 0.25 - delta) & (q <= 0.25 + delta)))


def criterion_special(cfg: ExperimentConfig, fx: dict) -> CriterionResult:
    x, wq = np.polynomial.legendre.leggauss(64)
    p = np.array([legendre_p(ell, x) for ell in range(33)])
    gram = (p * wq) @ p.T
    orth = float(np.max(np.abs(gram - np.diag(2.0 / (2 * np.arange(33) + 1)))))

    rng = RNGStream(cfg.monte_carlo.master_seed).generator(PURPOSE_PROBE, 1)
    n_pairs = 25
    va = rng.standard_normal((n_pairs, 3))
    vb = rng.standard_normal((n_pairs, 3))
    va /= np.linalg.norm(va, axis=1)[:, None]
    vb /= np.linalg.norm(vb, axis=1)[:, None]

    def angles(v):
        return np.arccos(np.clip(v[:, 2], -1, 1)), np.mod(np.arctan2(v[:, 1], v[:, 0]), 2 * np.pi)

    ya, yb = ylm_matrix(*angles(va), 0, 16), ylm_matrix(*angles(vb), 0, 16)
    dots = np.clip(np.einsum("ij,ij->i", va, vb), -1, 1)
    add = 0.0
    for ell in range(17):
        sl = slice(ell * ell, (ell + 1) ** 2)
        lhs = np.einsum("ij,ij->i", ya[:, sl], yb[:, sl])
        add = max(add, float(np.max(np.abs(lhs - (2 * ell + 1) / (4 * math.pi) * legendre_p(ell, dots)))))

    j0_lim = abs((1.0 - bessel_j0(1e-3)) / 1e-6 - 0.25)
    c_hilb, k_delta = fx["hilb_C"], fx["hilb_K_delta"]
    hilb_worst = hilb_sweep(HILB_SCALES, k_delta)
    checks = {"orthogonality": orth <= 1e-10, "addition": add <= 1e-10, "j0_limit": j0_lim < 1e-6,
              "hilb": hilb_worst <= c_hilb}
    details = {"orthogonality_error": orth, "addition_error": add, "j0_limit_error": j0_lim,
               "hilb_max_ratio": hilb_worst, "hilb_C": c_hilb, "hilb_K_delta": k_delta,
               "checks": checks}
    summary = (f"orth {orth:.1e}<=1e-10, addition {add:.1e}<=1e-10, J0 limit {j0_lim:.1e}<1e-6, "
               f"Hilb |res|/theta^2 {hilb_worst:.4f}<=C={c_hilb}")
    return CriterionResult(1, "special functions", _check(checks), summary, details)


def criterion_synthesis(cfg: ExperimentConfig, fx: dict, replicates: int = 10_000) -> CriterionResult:
    spec, w = cfg.power_spectrum(), cfg.band_window()
    seed = cfg.monte_carlo.master_seed
    bc = BandConfig(4)
    lo, hi = bc.band
    coeffs = sample_alm_batch(spec, bc.band, seed, range(replicates))
    # per-degree variance: mean of squares over m and replicates, SE = C_l sqrt(2 / (R (2l+1)))
    var_z = []
    for ell in range(lo, hi + 1):
        s = ell * ell - lo * lo
        block = coeffs[:, s:s + 2 * ell + 1]
        c = evaluate_spectrum(spec, ell)
        est = float(np.mean(block ** 2))
        se = c * math.sqrt(2.0 / (replicates * (2 * ell + 1)))
        var_z.append((est - c) / se)
    var_z = np.array(var_z)

    # covariance at angle theta: pairs along a meridian from (1.0, 0.3)
    thetas = (0.01, 0.1, 0.5)
    base = (1.0, 0.3)
    pts_t = np.array([base[0]] + [base[0] + t for t in thetas])
    pts_p = np.full(pts_t.size, base[1])
    vals = evaluate_batch(coeffs, degree_weights(w, bc, bc.band), bc.band,
                          SpherePoints(pts_t, pts_p))
    vals /= math.sqrt(band_normalization(spec, w, bc))
    prof = covariance_profile(spec, w, bc)
    cov_z = []
    for k, t in enumerate(thetas, start=1):
        prod = vals[:, 0] * vals[:, k]
        se = float(np.std(prod, ddof=1) / math.sqrt(replicates))
        cov_z.append((float(prod.mean()) - prof.rho(t)) / se)
    cov_z = np.array(cov_z)
    v0 = float(np.mean(vals[:, 0] ** 2))
    var_field_z = (v0 - 1.0) / math.sqrt(2.0 / replicates)
    checks = {"degree_variance": bool(np.all(np.abs(var_z) <= 3)),
              "covariance": bool(np.all(np.abs(cov_z) <= 3)),
              "normalized_variance": abs(var_field_z) <= 3}
    details = {"replicates": replicates, "degree_variance_z": var_z.tolist(),
               "covariance_z": dict(zip(map(str, thetas), cov_z.tolist())),
               "normalized_variance": v0, "normalized_variance_z": var_field_z, "checks": checks}
    summary = (f"max |z| degree variance {np.max(np.abs(var_z)):.2f}, covariance "
               f"{np.max(np.abs(cov_z)):.2f}, field variance {abs(var_field_z):.2f} (limit 3)")
    return CriterionResult(2, "synthesis correctness", _check(checks), summary, details)


def criterion_dudley(cfg: ExperimentConfig, fx: dict) -> CriterionResult:
    spec, w = cfg.power_spectrum(), cfg.band_window()
    pairs = {}
    for j in (4, 6, 8):
        bc = BandConfig(j)
        pairs[j] = dudley_metric_bounds(covariance_profile(spec, w, bc), bc, 0.5)
    c1 = np.array([p[0] for p in pairs.values()])
    c2 = np.array([p[1] for p in pairs.values()])
    var1 = float(c1.max() / c1.min() - 1.0)
    var2 = float(c2.max() / c2.min() - 1.0)
    checks = {"positive": bool(np.all(c1 > 0) and np.all(c2 >= c1)), "c1_stable": var1 < 0.2,
              "c2_stable": var2 < 0.2}
    details = {"bounds": {str(j): list(p) for j, p in pairs.items()}, "c1_variation": var1,
               "c2_variation": var2, "checks": checks}
    summary = (f"c1' in [{c1.min():.4f}, {c1.max():.4f}] ({100 * var1:.1f}%), c2' in "
               f"[{c2.min():.4f}, {c2.max():.4f}] ({100 * var2:.1f}%), limit 20%")
    return CriterionResult(3, "Dudley-metric bracket", _check(checks), summary, details)


def criterion_entropy(cfg: ExperimentConfig, fx: dict) -> CriterionResult:
    e = cfg.entropy
    reps = [dudley_entropy_integral(BandConfig(j), math.pi, e.covering_constant, e.k_star)
            for j in range(3, 11)]
    disagree = max(r.relative_disagreement for r in reps)
    ratios = [r.ratio for r in reps]
    bound = fx["entropy_ratio_bound"]
    checks = {"paths_agree": disagree <= 1e-6, "ratio_bounded": max(ratios) <= bound}
    details = {"relative_disagreement": disagree, "ratios": ratios, "ratio_bound": bound,
               "checks": checks}
    summary = (f"max path disagreement {disagree:.1e}<=1e-6, max ratio {max(ratios):.4f}"
               f"<={bound} over j=3..10")
    return CriterionResult(4, "entropy integral", _check(checks), summary, details)


def criterion_scaling(cfg: ExperimentConfig, fx: dict) -> CriterionResult:
    spec, w = cfg.power_spectrum(), cfg.band_window()
    rep = sup_scaling_experiment(spec, w, range(4, 8), 200, cfg.monte_carlo.master_seed,
                                 cfg.grids.density_factor, workers=cfg.monte_carlo.workers)
    pinned = fx["scaling_ratio"]
    ratios = {r.j: r.ratio for r in rep.rows}
    in_band = all(0.8 <= v <= 1.8 for v in ratios.values())
    dev = max(abs(ratios[j] - pinned[str(j)]) for j in ratios)
    checks = {"band": in_band, "fixture": dev <= 0.05, "stabilization": abs(ratios[7] - ratios[6]) <= 0.15}
    details = {"ratios": {str(j): v for j, v in ratios.items()}, "fixture": pinned,
               "max_fixture_deviation": dev, "report": rep.to_dict() | {"sups": None},
               "checks": checks}
    summary = ("ratios " + ", ".join(f"j={j}: {v:.4f}" for j, v in ratios.items())
               + f" in [0.8, 1.8]; max fixture deviation {dev:.4f}<=0.05")
    return CriterionResult(5, "scaling law", _check(checks), summary, details)


def borell_identity(epsilon: float, ell_j: int) -> dict:
    """``exp(-4 eps^2 log l / 2)`` against ``l^(-2 eps^2)`` in floating point."""
    e2 = epsilon * epsilon
    lg = math.log(ell_j)
    lhs = math.exp(-(4.0 * e2 * lg) / 2.0)
    rhs = float(ell_j) ** (-2.0 * e2)
    # scaling by 4 then halving is exact in binary floating point
    exponent_exact = -(4.0 * e2 * lg) / 2.0 == -2.0 * e2 * lg
    return {"lhs": lhs, "rhs": rhs, "exponent_exact": exponent_exact,
            "ulps": abs(lhs - rhs) / math.ulp(rhs)}


def criterion_borell(cfg: ExperimentConfig, fx: dict) -> CriterionResult:
    spec, w = cfg.power_spectrum(), cfg.band_window()
    bc = BandConfig(4)
    reps = cfg.thresholds.excursion_replicates
    sups = normalized_sups(spec, w, bc, reps, cfg.monte_carlo.master_seed, cfg.grids.density_factor,
                           workers=cfg.monte_carlo.workers)
    rows = borell_tis_check(sups, bc.ell_j, 0.5, (0.5, 1.0, 1.5))
    ident = borell_identity(0.5, bc.ell_j)
    checks = {"dominance": all(r["passes"] for r in rows), "identity": ident["exponent_exact"]
              and ident["ulps"] <= 2}
    details = {"replicates": reps, "rows": rows, "identity": ident, "checks": checks}
    summary = ("freq/bound " + ", ".join(f"{r['frequency']:.4f}/{r['bound']:.4f}" for r in rows)
               + f"; identity {ident['lhs']!r} vs {ident['rhs']!r}")
    return CriterionResult(6, "Borell-TIS dominance", _check(checks), summary, details)


def identity_injection_deviation(report: WhiteningReport, samples) -> float:
    """Whitening with ``Sigma = I`` must return the input unchanged."""
    n = report.sigma.shape[0]
    eye = WhiteningReport(report.net, np.eye(n), 1.0, 1.0, 0.0, report.decay_params)
    return whiten_and_compare(eye, samples).whitened_max_deviation


def criterion_whitening(cfg: ExperimentConfig, fx: dict, replicates: int = 500) -> CriterionResult:
    spec, w = cfg.power_spectrum(), cfg.band_window()
    seed = cfg.monte_carlo.master_seed
    bc = BandConfig(6)
    prof = covariance_profile(spec, w, bc)
    net = scale_net(bc, 0.3, RNGStream(seed, 6))
    rep = net_covariance(prof, net)
    coeffs = sample_alm_batch(spec, bc.band, seed, range(replicates))
    samples = evaluate_batch(coeffs, degree_weights(w, bc, bc.band), bc.band, net.points, chunk=512)
    samples /= math.sqrt(band_normalization(spec, w, bc))
    rep = whiten_and_compare(rep, samples)
    inj = identity_injection_deviation(rep, samples)
    spread_fx = fx["whitening_spread"]
    dev_fx = fx["whitened_deviation"]
    checks = {"bracket": rep.lambda_min <= 1.0 <= rep.lambda_max, "spread": rep.spread < spread_fx,
              "identity_injection": inj <= 1e-10,
              "spot_checks": all(c["passes"] for c in rep.spot_checks.values()),
              "deviation": rep.whitened_max_deviation < dev_fx}
    details = {"cardinality": net.cardinality, "lambda_min": rep.lambda_min,
               "lambda_max": rep.lambda_max, "spread": rep.spread, "spread_fixture": spread_fx,
               "injection_deviation": inj, "whitened_max_deviation": rep.whitened_max_deviation,
               "deviation_fixture": dev_fx, "spot_checks": rep.spot_checks, "checks": checks}
    summary = (f"{net.cardinality} net points, lambda in [{rep.lambda_min:.4f}, {rep.lambda_max:.4f}], "
               f"spread {rep.spread:.4f}<{spread_fx}, identity deviation {inj:.1e}, spot checks "
               f"{'pass' if checks['spot_checks'] else 'fail'}")
    return CriterionResult(7, "whitening", _check(checks), summary, details)


def criterion_berman(cfg: ExperimentConfig, fx: dict) -> CriterionResult:
    mean, se = berman_baseline(10 ** 6, 100, cfg.monte_carlo.master_seed)
    checks = {"interval": 0.92 <= mean <= 1.0}
    details = {"mean_ratio": mean, "se": se, "oracle_expectation": fx["berman_expectation"],
               "checks": checks}
    summary = f"mean ratio {mean:.5f} +- {se:.5f} in [0.92, 1.0] (quadrature expectation " \
              f"{fx['berman_expectation']:.5f})"
    return CriterionResult(8, "Berman baseline", _check(checks), summary, details)


def determinism_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Small but complete settings so that every subcommand runs in seconds."""
    return cfg.with_overrides([
        "scales.j=[3,4]", "monte_carlo.replicates=50", "thresholds.j=3",
        "thresholds.u=[2.5,3.0]", "thresholds.excursion_replicates=100", "nets.j=4",
        "nets.decay_j=[3,4]", "nets.whitening_replicates=50", "berman.n=10000",
        "berman.replicates=20", "synth.n_points=200",
    ])


def payload_digests(directory: Path) -> dict:
    import hashlib
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(directory.iterdir()) if p.name != "manifest.json" and p.suffix in (".csv", ".json")}


def criterion_determinism(cfg: ExperimentConfig, fx: dict, workdir=None,
                          commands=DETERMINISM_COMMANDS) -> CriterionResult:
    from .cli import RunOptions, run_subcommand

    small = determinism_config(cfg)
    mismatches, counted = {}, 0
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(workdir) if workdir is not None else Path(tmp)
        opts = RunOptions(plot_data=True)
        for name in commands:
            digests = []
            for run in ("a", "b"):
                _, d = run_subcommand(name, small, (), root / run, opts, quiet=True)
                digests.append(payload_digests(d))
            counted += len(digests[0])
            if digests[0] != digests[1] or not digests[0]:
                mismatches[name] = sorted(k for k in set(digests[0]) | set(digests[1])
                                          if digests[0].get(k) != digests[1].get(k))
    checks = {"byte_identical": not mismatches}
    details = {"commands": list(commands), "files_compared": counted, "mismatches": mismatches,
               "checks": checks}
    summary = f"{counted} payload files from {len(commands)} subcommands byte-identical across reruns" \
        if not mismatches else f"mismatched payloads: {mismatches}"
    return CriterionResult(9, "determinism", _check(checks), summary, details)


CRITERIA = {
    1: criterion_special,
    2: criterion_synthesis,
    3: criterion_dudley,
    4: criterion_entropy,
    5: criterion_scaling,
    6: criterion_borell,
    7: criterion_whitening,
    8: criterion_berman,
    9: criterion_determinism,
}


def run_criterion(number: int, cfg: ExperimentConfig | None = None, fixtures: dict | None = None,
                  **kwargs) -> CriterionResult:
    cfg = cfg or ExperimentConfig.default()
    fixtures = fixtures or load_fixtures()
    t0 = time.perf_counter()
    res = CRITERIA[number](cfg, fixtures, **kwargs)
    res.seconds = time.perf_counter() - t0
    return res


def run_acceptance(cfg: ExperimentConfig | None = None, criteria=None, workdir=None,
                   echo: bool = False) -> list[CriterionResult]:
    out = []
    for n in criteria or sorted(CRITERIA):
        kwargs = {"workdir": workdir} if n == 9 else {}
        res = run_criterion(n, cfg, **kwargs)
        if echo:
            print(res.line(), f"[{res.seconds:.1f}s]", flush=True)
        out.append(res)
    return out
