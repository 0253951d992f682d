"""Command-line front end.

``bandsup SUBCOMMAND [--config PATH] [--set key=value ...] [--output-dir DIR]``

Each subcommand writes its tables (CSV) and structured report (JSON) into
``<output>/<subcommand>/`` together with ``manifest.json``.  ``--plot-data``
adds tidy ``(figure, series, x, y)`` CSV files and ``--figures`` renders
them to PNG.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 capacity error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig
from .extremes import (PowerGuardError, PreconditionError, berman_baseline, borell_tis_check,
                       correlation_decay_sweep, excursion_sweep, expected_exceedances,
                       net_covariance, normalized_sups, sup_scaling_experiment,
                       whiten_and_compare)
from .geometry import (CapacityError, SpherePoints, dudley_entropy_integral, fibonacci_lattice,
                       scale_net)
from .reports import ReportWriter
from .rng import RNGStream
from .spectrum import (BandConfig, DegenerateBandError, SpectrumDomainError, band_normalization,
                       full_field_lambda, second_spectral_moment)
from .synthesis import (covariance_profile, degree_weights, dudley_metric_bounds, evaluate_batch,
                        evaluate_field, normalize_beta, sample_alm, sample_alm_batch)

ENV_OUTPUT_DIR = "BANDSUP_OUTPUT_DIR"
EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_CAPACITY = 0, 1, 2, 3
HELP_WIDTH = 100


class RunOptions:
    def __init__(self, plot_data=False, figures=False, power_guard=True, criteria=None):
        self.plot_data = plot_data
        self.figures = figures
        self.power_guard = power_guard
        self.criteria = criteria


def _emit_plot(out: ReportWriter, opts: RunOptions, name: str, records, **labels):
    if opts.plot_data:
        out.plot_data(name, records)
    if opts.figures:
        out.figure(name, records, **labels)


# ---------------------------------------------------------------------------
# subcommands; each returns (exit status, summary lines)

def cmd_synth(cfg: ExperimentConfig, out: ReportWriter, opts: RunOptions):
    spec, w = cfg.power_spectrum(), cfg.band_window()
    j = cfg.scales.j[0]
    bc = BandConfig(j)
    stream = RNGStream(cfg.monte_carlo.master_seed, 0)
    pts = SpherePoints.from_vectors(fibonacci_lattice(cfg.synth.n_points), tol=1e-9)
    meridian = SpherePoints(np.linspace(0.0, math.pi, 361), np.zeros(361))
    if cfg.synth.full_field:
        band = (spec.ell_min_valid, bc.band[1])
        alm = sample_alm(spec, None, bc, stream, band=band)
        samples = [evaluate_field(alm, None, bc, p) for p in (pts, meridian)]
        norm = None
    else:
        alm = sample_alm(spec, w, bc, stream)
        samples = [evaluate_field(alm, w, bc, p) for p in (pts, meridian)]
        norm = None
        if not spec.is_null:
            norm = band_normalization(spec, w, bc)
            samples = [normalize_beta(s, spec, w, bc) for s in samples]
    field, cut = samples
    out.csv("field", ["theta", "phi", "value"],
            zip(field.points.theta, field.points.phi, field.values))
    v = field.values
    out.json("field", {"j": j, "alpha": spec.alpha, "window": w.to_dict(), "seed": alm.seed_path,
                       "kind": field.kind, "band": list(alm.band), "normalization": norm,
                       "n_points": int(v.size), "min": float(v.min()), "max": float(v.max()),
                       "mean": float(v.mean()), "variance": float(v.var())})
    _emit_plot(out, opts, "field_meridian",
               [("meridian phi=0", field.kind, t, y) for t, y in zip(cut.points.theta, cut.values)],
               title=f"field along a meridian, j={j}", xlabel="theta", ylabel="value")
    return EXIT_OK, [f"synth: j={j} kind={field.kind} points={v.size} max={v.max():.6g}"]


def cmd_covariance(cfg: ExperimentConfig, out: ReportWriter, opts: RunOptions):
    spec, w = cfg.power_spectrum(), cfg.band_window()
    summary_rows, curve_rows, plot, lines = [], [], [], []
    for j in cfg.scales.j:
        bc = BandConfig(j)
        prof = covariance_profile(spec, w, bc)
        c1, c2 = dudley_metric_bounds(prof, bc, 0.5)
        lam_full = full_field_lambda(spec, bc.band[1])
        summary_rows.append([j, bc.ell_j, bc.band[0], bc.band[1], band_normalization(spec, w, bc),
                             prof.lambda_j, lam_full, c1, c2])
        theta = np.linspace(0.0, min(math.pi, 20.0 / bc.ell_j), 201)
        rho, dud = prof.rho(theta), prof.dudley(theta)
        for t, r, d in zip(theta, rho, dud):
            curve_rows.append([j, t, r, d])
            plot.append(("rho", f"j={j}", bc.ell_j * t, r))
            plot.append(("dudley", f"j={j}", bc.ell_j * t, d))
        lines.append(f"covariance: j={j} lambda_j={prof.lambda_j:.6g} c1'={c1:.4f} c2'={c2:.4f}")
    header = ["j", "ell_j", "band_lo", "band_hi", "normalization", "lambda_j",
              "full_field_lambda", "c1_prime", "c2_prime"]
    out.csv("spectral", header, summary_rows)
    out.csv("covariance", ["j", "theta", "rho", "dudley"], curve_rows)
    out.json("covariance", {"rows": [dict(zip(header, r)) for r in summary_rows],
                            "dudley_grid": "theta in (0.005, 0.5] / ell_j, 100 points"})
    _emit_plot(out, opts, "covariance", plot, title="correlation and canonical distance",
               xlabel="ell_j * theta", ylabel="value")
    return EXIT_OK, lines


def cmd_sup_scaling(cfg: ExperimentConfig, out: ReportWriter, opts: RunOptions):
    spec, w = cfg.power_spectrum(), cfg.band_window()
    rep = sup_scaling_experiment(spec, w, cfg.scales.j, cfg.monte_carlo.replicates,
                                 cfg.monte_carlo.master_seed, cfg.grids.density_factor,
                                 workers=cfg.monte_carlo.workers, max_j=cfg.nets.max_j)
    header = ["j", "ell_j", "mean_sup", "se", "ratio", "ratio_se", "lambda_j"]
    out.csv("scaling", header, [[getattr(r, k) for k in header] for r in rep.rows])
    out.csv("sups", ["j", "replicate", "sup"],
            [[j, k, s] for j, v in rep.sups.items() for k, s in enumerate(v)])
    out.json("scaling", rep.to_dict())
    plot = [("ratio", "mean sup / sqrt(4 log ell_j)", r.j, r.ratio) for r in rep.rows]
    plot += [("ratio", "reference 1", r.j, 1.0) for r in rep.rows]
    _emit_plot(out, opts, "scaling", plot, title="supremum scaling", xlabel="j", ylabel="ratio")
    lines = [f"sup-scaling: j={r.j} mean={r.mean_sup:.5f} ratio={r.ratio:.5f} +- {r.ratio_se:.5f}"
             for r in rep.rows]
    return EXIT_OK, lines + [f"gamma_hat={rep.gamma_hat:.5f}"]


def cmd_excursion(cfg: ExperimentConfig, out: ReportWriter, opts: RunOptions):
    spec, w = cfg.power_spectrum(), cfg.band_window()
    j = cfg.thresholds.j
    bc = BandConfig(j)
    reps = cfg.thresholds.excursion_replicates
    lam = second_spectral_moment(spec, w, bc)
    if opts.power_guard:
        for u in cfg.thresholds.u:
            exp_k = expected_exceedances(u, lam, reps)
            if exp_k < 20:
                raise PowerGuardError(
                    f"u={u} at j={j} expects about {exp_k:.3g} exceedances in {reps} replicates; "
                    "lower thresholds.u, raise thresholds.excursion_replicates, "
                    "or pass --no-power-guard")
    sups = normalized_sups(spec, w, bc, reps, cfg.monte_carlo.master_seed,
                           cfg.grids.density_factor, workers=cfg.monte_carlo.workers)
    reports = excursion_sweep(sups, bc, lam, cfg.thresholds.u)
    header = ["u", "mc_prob", "ci_lo", "ci_hi", "events", "replicates", "ec_value",
              "ec_l0_value", "borell_bound", "tail_alpha"]
    rows = [[r.u, r.mc_prob, r.ci[0], r.ci[1], r.events, r.replicates, r.ec_value,
             r.ec_l0_value, r.borell_bound, r.tail_alpha] for r in reports]
    out.csv("excursion", header, rows)
    borell = borell_tis_check(sups, bc.ell_j, cfg.thresholds.borell_epsilon)
    bh = ["multiplier", "t", "frequency", "se", "bound", "passes"]
    out.csv("borell", bh, [[b[k] for k in bh] for b in borell])
    hit = [r for r in reports if r.mc_prob > 0]
    err_ec = sum(abs(r.mc_prob - r.ec_value) for r in hit)
    err_l0 = sum(abs(r.mc_prob - r.ec_l0_value) for r in hit)
    closer = None if not hit else ("ec_value" if err_ec <= err_l0 else "ec_l0_value")
    out.json("excursion", {"j": j, "lambda_j": lam, "replicates": reps,
                           "mu_plus": reports[0].mu_plus if reports else None,
                           "closer_formula": closer, "thresholds": [r.to_dict() for r in reports],
                           "borell_tis": borell})
    plot = []
    for r in reports:
        plot += [("excursion", "monte carlo", r.u, r.mc_prob), ("excursion", "ec_value", r.u, r.ec_value),
                 ("excursion", "ec_l0_value", r.u, r.ec_l0_value)]
    _emit_plot(out, opts, "excursion", plot, title=f"P(sup > u), j={j}", xlabel="u",
               ylabel="probability", logy=True)
    lines = [f"excursion: u={r.u} mc={r.mc_prob:.4f} ec={r.ec_value:.4f} ec_l0={r.ec_l0_value:.4f}"
             for r in reports]
    lines.append(f"mu_plus={reports[0].mu_plus if reports else None} closer={closer}")
    lines += [f"borell-tis: t={b['t']:.4f} freq={b['frequency']:.4f} bound={b['bound']:.4f}"
              for b in borell]
    return EXIT_OK, lines


def cmd_entropy(cfg: ExperimentConfig, out: ReportWriter, opts: RunOptions):
    e = cfg.entropy
    reps = [dudley_entropy_integral(BandConfig(j), e.delta_upper, e.covering_constant, e.k_star)
            for j in cfg.scales.j]
    docs = [r.to_dict() for r in reps]
    header = ["j", "ell_j", "delta_upper", "covering_constant", "integral_value",
              "quadrature_value", "bound_value", "k_star", "mills_upper", "ratio"]
    out.csv("entropy", header, [[d[k] for k in header] for d in docs])
    out.json("entropy", {"reports": docs})
    _emit_plot(out, opts, "entropy", [("entropy", "integral / sqrt(4 log ell_j)", d["j"], d["ratio"])
                                      for d in docs],
               title="entropy integral scaling", xlabel="j", ylabel="ratio")
    return EXIT_OK, [f"entropy: j={d['j']} integral={d['integral_value']:.6g} ratio={d['ratio']:.5f}"
                     for d in docs]


def cmd_net_whiten(cfg: ExperimentConfig, out: ReportWriter, opts: RunOptions):
    spec, w = cfg.power_spectrum(), cfg.band_window()
    n = cfg.nets
    j = n.j
    bc = BandConfig(j)
    seed = cfg.monte_carlo.master_seed
    prof = covariance_profile(spec, w, bc)
    net = scale_net(bc, n.delta_exponent, RNGStream(seed, j), cap=n.net_cap)
    out.csv("net", ["theta", "phi"], zip(net.points.theta, net.points.phi))
    out.json("net", net.to_dict())
    rep = net_covariance(prof, net, capacity=n.eigen_capacity)
    coeffs = sample_alm_batch(spec, bc.band, seed, range(n.whitening_replicates))
    samples = evaluate_batch(coeffs, degree_weights(w, bc, bc.band), bc.band, net.points, chunk=512)
    samples /= math.sqrt(band_normalization(spec, w, bc))
    rep = whiten_and_compare(rep, samples)
    lines = [f"net-whiten: j={j} points={net.cardinality} lambda_min={rep.lambda_min:.5f} "
             f"lambda_max={rep.lambda_max:.5f} mean_max_dev={rep.whitened_max_deviation:.5f}"]
    doc = rep.to_dict()
    evals = rep._eig[0]
    out.csv("eigenvalues", ["index", "eigenvalue"], enumerate(evals))
    plot = [("eigenvalues", "sorted", k, v) for k, v in enumerate(evals)]
    if w.is_smooth:
        c_m, rows = correlation_decay_sweep(spec, w, n.decay_j, n.decay_M, n.delta_exponent, seed)
        dh = ["j", "max_offdiag", "bound", "residual"]
        out.csv("decay", dh, [[r[k] for k in dh] for r in rows])
        doc["decay"] = {"M": n.decay_M, "C_M": c_m, "rows": rows}
        plot += [("decay", "max off-diagonal", r["j"], r["max_offdiag"]) for r in rows]
        plot += [("decay", "fitted C_M envelope", r["j"], r["bound"]) for r in rows]
        lines.append(f"decay: M={n.decay_M} C_M={c_m:.5f}")
    else:
        doc["decay"] = {"skipped": "indicator window: decay inequality needs a smooth window"}
    out.json("whitening", doc)
    _emit_plot(out, opts, "whitening", plot, title=f"net covariance, j={j}", xlabel="index or j",
               ylabel="value")
    return EXIT_OK, lines


def berman_second_order(n: int) -> float:
    """Ratio implied by ``E max ~ b_n + gamma / a_n`` with Gumbel centring ``b_n``."""
    a = math.sqrt(2.0 * math.log(n))
    b = a - (math.log(math.log(n)) + math.log(4.0 * math.pi)) / (2.0 * a)
    return (b + 0.5772156649015329 / a) / a


def cmd_berman(cfg: ExperimentConfig, out: ReportWriter, opts: RunOptions):
    b = cfg.berman
    ladder = [10 ** k for k in range(2, int(math.floor(math.log10(b.n))) + 1) if 10 ** k < b.n] + [b.n]
    rows = []
    for n in ladder:
        mean, se = berman_baseline(n, b.replicates, cfg.monte_carlo.master_seed)
        rows.append([n, b.replicates, mean, se, berman_second_order(n)])
    header = ["n", "replicates", "mean_ratio", "se", "second_order"]
    out.csv("berman", header, rows)
    out.json("berman", {"rows": [dict(zip(header, r)) for r in rows]})
    plot = [("berman", "monte carlo", r[0], r[2]) for r in rows]
    plot += [("berman", "second-order expansion", r[0], r[4]) for r in rows]
    _emit_plot(out, opts, "berman", plot, title="max of n iid normals / sqrt(2 log n)",
               xlabel="n", ylabel="ratio")
    return EXIT_OK, [f"berman: n={r[0]} ratio={r[2]:.5f} +- {r[3]:.5f} (second order {r[4]:.5f})"
                     for r in rows]


def cmd_validate_all(cfg: ExperimentConfig, out: ReportWriter, opts: RunOptions):
    from .validation import run_acceptance

    results = run_acceptance(cfg, opts.criteria, workdir=out.directory / "determinism",
                             echo=True)
    out.csv("acceptance", ["criterion", "name", "passed", "summary"],
            [[r.number, r.name, r.passed, r.summary] for r in results])
    out.json("acceptance", {"criteria": [r.to_dict() for r in results]})
    status = EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION
    n_ok = sum(r.passed for r in results)
    return status, [f"validate-all: {n_ok}/{len(results)} criteria passed"]


SUBCOMMANDS = {
    "synth": (cmd_synth, "sample one field and write its values on a point set"),
    "covariance": (cmd_covariance, "correlation profile, spectral moments and Dudley-metric constants"),
    "sup-scaling": (cmd_sup_scaling, "Monte Carlo supremum scaling against sqrt(4 log ell_j)"),
    "excursion": (cmd_excursion, "exceedance probabilities against the EC approximations and Borell-TIS"),
    "entropy": (cmd_entropy, "Dudley entropy integral by quadrature and in closed form"),
    "net-whiten": (cmd_net_whiten, "net covariance spectrum, whitening and correlation decay"),
    "berman": (cmd_berman, "maximum of n iid Gaussians over sqrt(2 log n)"),
    "validate-all": (cmd_validate_all, "run every acceptance criterion; exit 1 on any failure"),
}


# ---------------------------------------------------------------------------
# entry points

def resolve_output_dir(cfg: ExperimentConfig, output_dir=None) -> Path:
    if output_dir:
        return Path(output_dir)
    env = os.environ.get(ENV_OUTPUT_DIR)
    return Path(env) if env else Path(cfg.output.directory)


def run_subcommand(name: str, config: ExperimentConfig | None = None, overrides=(),
                   output_dir=None, options: RunOptions | None = None, quiet: bool = False):
    """Run one subcommand; returns ``(exit status, directory written)``."""
    if name not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {name!r}; expected one of {sorted(SUBCOMMANDS)}")
    cfg = (config or ExperimentConfig.default()).with_overrides(overrides)
    opts = options or RunOptions()
    directory = resolve_output_dir(cfg, output_dir) / name
    out = ReportWriter(directory, cfg, name, cfg.output.formats)
    func, _ = SUBCOMMANDS[name]
    status, lines = func(cfg, out, opts)
    out.finish(status, {"lines": lines})
    if not quiet:
        for line in lines:
            print(line)
        print(f"wrote {len(out.files)} file(s) and manifest.json to {directory}")
    return status, directory


def _formatter(prog):
    return argparse.RawDescriptionHelpFormatter(prog, width=HELP_WIDTH, max_help_position=32)


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="experiment configuration JSON (default: the shipped default config)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted-path override such as monte_carlo.replicates=50; repeatable")
    common.add_argument("--output-dir", metavar="DIR",
                        help=f"report root directory; overrides ${ENV_OUTPUT_DIR} and output.directory")
    common.add_argument("--plot-data", action="store_true",
                        help="also write tidy long-format CSV (figure, series, x, y)")
    common.add_argument("--figures", action="store_true",
                        help="also render PNG figures of the plot data")
    return common


EPILOG = f"""\
options shared by every subcommand:
  --config PATH        experiment configuration JSON (default: the shipped default config)
  --set KEY=VALUE      dotted-path override such as monte_carlo.replicates=50; repeatable
  --output-dir DIR     report root directory; overrides ${ENV_OUTPUT_DIR} and output.directory
  --plot-data          also write tidy long-format CSV (figure, series, x, y)
  --figures            also render PNG figures of the plot data

subcommand-specific options:
  excursion --no-power-guard    allow thresholds with fewer than 20 expected exceedances
  validate-all --criteria LIST  comma-separated criterion numbers to run (default: all)

exit status: 0 success, 1 validation failure, 2 configuration error, 3 capacity error
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bandsup", formatter_class=_formatter, epilog=EPILOG,
        description="Simulation laboratory for suprema of band-limited Gaussian fields on the sphere.")
    parser.add_argument("--version", action="version", version=f"bandsup {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", required=True)
    common = _common_parser()
    for name, (_, help_text) in SUBCOMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=help_text, description=help_text,
                            formatter_class=_formatter)
        if name == "excursion":
            sp.add_argument("--no-power-guard", dest="power_guard", action="store_false",
                            help="allow thresholds with fewer than 20 expected exceedances")
        if name == "validate-all":
            sp.add_argument("--criteria", metavar="LIST",
                            help="comma-separated criterion numbers to run (default: all)")
    return parser


def _parse_criteria(text):
    if not text:
        return None
    try:
        out = sorted({int(t) for t in text.split(",") if t.strip()})
    except ValueError:
        raise ConfigError(f"--criteria expects comma-separated integers, got {text!r}") from None
    bad = [c for c in out if not 1 <= c <= 9]
    if bad:
        raise ConfigError(f"--criteria: no criteria numbered {bad}; valid numbers are 1-9")
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.default()
        opts = RunOptions(plot_data=args.plot_data, figures=args.figures,
                          power_guard=getattr(args, "power_guard", True),
                          criteria=_parse_criteria(getattr(args, "criteria", None)))
        status, _ = run_subcommand(args.command, cfg, args.overrides, args.output_dir, opts)
        return status
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        print("hint: reduce the scale or net resolution, or raise nets.max_j / nets.net_cap / "
              "nets.eigen_capacity with --set", file=sys.stderr)
        return EXIT_CAPACITY
    except (ConfigError, PowerGuardError, PreconditionError, DegenerateBandError,
            SpectrumDomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
