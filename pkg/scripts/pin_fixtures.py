"""Regenerate ``src/bandsup/data/fixtures.json`` from pilot runs.

Run from the repository root after any change that legitimately moves a
pilot value::

    python3 scripts/pin_fixtures.py

Every value is written next to a ``_provenance`` note that says how it was
obtained and which margin (if any) was added.
"""

import json
import math
import sys
from pathlib import Path

import mpmath as mp
import numpy as np

from bandsup.config import ExperimentConfig
from bandsup.extremes import (net_covariance, sup_scaling_experiment, whiten_and_compare)
from bandsup.geometry import dudley_entropy_integral, scale_net
from bandsup.rng import RNGStream
from bandsup.special import one_minus_j0
from bandsup.spectrum import BandConfig, band_normalization
from bandsup.synthesis import covariance_profile, degree_weights, evaluate_batch, sample_alm_batch
from bandsup.validation import HILB_SCALES, hilb_sweep

OUT = Path(__file__).resolve().parents[1] / "src" / "bandsup" / "data" / "fixtures.json"


def k_delta(delta=0.05):
    """Largest K with the two-sided J0 bracket for x = (l + 1/2) theta, theta < K/l, all l in the sweep."""
    xs = np.linspace(1e-3, 3.0, 300001)
    q = np.asarray(one_minus_j0(xs)) / xs ** 2
    bad = np.flatnonzero(np.abs(q - 0.25) > delta)
    x_max = xs[bad[0] - 1]
    k = min(x_max * ell / (ell + 0.5) for ell in HILB_SCALES)
    return math.floor(k * 100) / 100, float(x_max)


def berman_expectation(n=10 ** 6):
    mp.mp.dps = 30
    f = lambda x: x * n * mp.npdf(x) * mp.ncdf(x) ** (n - 1)
    e = mp.quad(f, [-2, 3, 4, 4.5, 5, 5.5, 6, 7, 9])
    return float(e / mp.sqrt(2 * mp.log(n)))


def main():
    cfg = ExperimentConfig.default()
    spec, w = cfg.power_spectrum(), cfg.band_window()
    seed = cfg.monte_carlo.master_seed
    fx, prov = {}, {}

    kd, x_max = k_delta()
    fx["hilb_K_delta"] = kd
    prov["hilb_K_delta"] = (f"bracket |(1-J0(x))/x^2 - 1/4| <= 0.05 holds for x <= {x_max:.4f}; "
                            "K = min over l in (16, 64, 256) of x_max l/(l+1/2), floored to 0.01")
    fit = hilb_sweep(HILB_SCALES, kd)
    fx["hilb_C"] = round(2.0 * fit, 4)
    prov["hilb_C"] = f"2 x fitted max |residual|/theta^2 = 2 x {fit:.6f} over l in (16, 64, 256), theta < K/l"

    ratios = [dudley_entropy_integral(BandConfig(j), math.pi).ratio for j in range(3, 11)]
    fx["entropy_ratio_bound"] = math.ceil(max(ratios) * 100) / 100
    prov["entropy_ratio_bound"] = (f"pilot max ratio {max(ratios):.6f} over j=3..10 (c=1, delta=pi), "
                                   "rounded up to 0.01; the large-j limit is pi/sqrt(2)")

    rep = sup_scaling_experiment(spec, w, range(4, 8), 200, seed, cfg.grids.density_factor)
    fx["scaling_ratio"] = {str(r.j): round(r.ratio, 6) for r in rep.rows}
    prov["scaling_ratio"] = f"pilot mean sup/sqrt(4 log l_j), 200 replicates, master seed {seed}"

    bc = BandConfig(6)
    net = scale_net(bc, 0.3, RNGStream(seed, 6))
    wr = net_covariance(covariance_profile(spec, w, bc), net)
    coeffs = sample_alm_batch(spec, bc.band, seed, range(500))
    samples = evaluate_batch(coeffs, degree_weights(w, bc, bc.band), bc.band, net.points, chunk=512)
    samples /= math.sqrt(band_normalization(spec, w, bc))
    wr = whiten_and_compare(wr, samples)
    fx["whitening_spread"] = math.ceil(wr.spread * 100) / 100
    prov["whitening_spread"] = (f"pilot lambda_max - lambda_min = {wr.spread:.6f} on the j=6, delta=0.3 "
                                f"net ({net.cardinality} points), rounded up to 0.01")
    fx["whitened_deviation"] = math.ceil(wr.whitened_max_deviation * 1.05 * 100) / 100
    prov["whitened_deviation"] = (f"pilot mean max_k |beta - beta_hat| = {wr.whitened_max_deviation:.6f} "
                                  "(500 replicates), plus 5%, rounded up to 0.01")

    fx["berman_expectation"] = round(berman_expectation(), 6)
    prov["berman_expectation"] = "E[max of 1e6 iid N(0,1)]/sqrt(2 log 1e6) by mpmath quadrature"

    fx["_provenance"] = prov
    OUT.write_text(json.dumps(fx, indent=2, sort_keys=True) + "\n")
    json.dump(fx, sys.stdout, indent=2, sort_keys=True)
    print()


if __name__ == "__main__":
    main()
