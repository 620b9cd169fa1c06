"""Command-line entry point.

    csdyn compare --rho 0.1 --delta 0.5 --lambda 3 --c 3 --n 2000 --t 8 --trials 20 --seed 42 --out DIR

Exit codes: 0 success, 1 configuration error, 2 numerical abort.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .errors import ConfigError, NumericalAbort

log = logging.getLogger("csdyn")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2

# flag -> ExperimentConfig field
_FLAGS = [
    ("--rho", "rho", float),
    ("--delta", "delta", float),
    ("--lambda", "lam", float),
    ("--c", "c", float),
    ("--sigma-omega", "sigma_omega", float),
    ("--n", "N", int),
    ("--t", "T", int),
    ("--algorithm", "algorithm", str),
    ("--trials", "trials", int),
    ("--mc-samples", "mc_samples", int),
    ("--seed", "seed", int),
    ("--schedule-mode", "schedule_mode", str),
    ("--lambda-interpretation", "lambda_interpretation", str),
    ("--shard-count", "shard_count", int),
]


def _add_config_flags(p):
    p.add_argument("--config", type=Path, help="JSON config file; explicit flags override it")
    p.add_argument("--scenario", choices=sorted(harness.SCENARIOS),
                   help="preset (rho, delta, lambda, c) of one of the three reference scenarios")
    for flag, dest, typ in _FLAGS:
        p.add_argument(flag, dest=dest, type=typ, default=None)
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="csdyn", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("simulate", "simulate the algorithm over independent trials"),
        ("predict-gfa", "Monte Carlo dynamical mean-field prediction for IST/ITA"),
        ("predict-se", "state evolution prediction for AMP"),
        ("compare", "simulate and predict, then write CSV/JSON/SVG"),
    ]:
        _add_config_flags(sub.add_parser(name, help=help_))
    plot = sub.add_parser("plot", help="render a comparison CSV as SVG")
    plot.add_argument("csv", type=Path)
    plot.add_argument("--svg", type=Path, default=None, help="output path (default: alongside the CSV)")
    plot.add_argument("--log", action="store_true", help="logarithmic y axis")
    plot.add_argument("--title", default="")
    return parser


def load_config(args):
    doc = {}
    if args.config is not None:
        try:
            doc.update(json.loads(args.config.read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    if args.scenario is not None:
        rho, delta, lam, c = harness.SCENARIOS[args.scenario]
        doc.update(rho=rho, delta=delta, lam=lam, c=c)
    for _, dest, _ in _FLAGS:
        value = getattr(args, dest)
        if value is not None:
            doc[dest] = value
    return harness.ExperimentConfig.from_dict(doc)


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


def cmd_simulate(config, out):
    trajectories = harness.simulate(config)
    rows = harness.aggregate(trajectories)
    cols = ("t", "mse_sim_mean", "mse_sim_stderr", "msez_sim_mean", "msez_sim_stderr", "lam_hat")
    _write(out / "simulate.csv", harness.report_csv(rows, cols))
    doc = dict(config=config.to_dict(), rows=rows, diverged=[tr.diverged for tr in trajectories],
               trials=[tr.rows() for tr in trajectories])
    _write(out / "simulate.json", harness.dumps_json(doc))


def cmd_predict_gfa(config, out):
    if config.algorithm == "AMP":
        raise ConfigError("the mean-field prediction covers IST/ITA; use predict-se for AMP")
    pred = harness.predict_gfa(config)
    cols = ("t", "sigma_sq", "sigma_sq_stderr", "msez", "msez_stderr", "lam_hat")
    _write(out / "gfa.csv", harness.report_csv(pred.rows(), cols))
    _write(out / "gfa.json", harness.dumps_json(dict(config=config.to_dict(), prediction=pred.to_dict())))


def cmd_predict_se(config, out):
    se = harness.predict_se(config)
    rows = [dict(t=t, sigma_sq=a, tau_sq=b, msez=m, lam_hat=l)
            for t, a, b, m, l in zip(se.t, se.sigma_sq, se.tau_sq, se.msez, se.lam_hat)]
    _write(out / "se.csv", harness.report_csv(rows, ("t", "sigma_sq", "tau_sq", "msez", "lam_hat")))
    _write(out / "se.json", harness.dumps_json(dict(config=config.to_dict(), rows=rows)))


def cmd_compare(config, out):
    report = harness.run_experiment(config)
    paths = harness.emit_report(report, out)
    for p in paths.values():
        log.info("wrote %s", p)
    print(f"regime: {report.regime}" + ("  (diverged)" if report.diverged else ""))
    for row in report.rows:
        print(f"t={row['t']:3d}  mse_sim={row['mse_sim_mean']:.6g}  mse_gfa={row['mse_gfa']:.6g}"
              + (f"  mse_se={row['mse_se']:.6g}" if row.get("mse_se") is not None else ""))


def cmd_plot(args):
    rows = harness.read_report_csv(args.csv)
    svg = harness.chart_for_rows(rows, title=args.title, log_y=args.log)
    _write(args.svg or args.csv.with_suffix(".svg"), svg)


_COMMANDS = {
    "simulate": cmd_simulate,
    "predict-gfa": cmd_predict_gfa,
    "predict-se": cmd_predict_se,
    "compare": cmd_compare,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "plot":
            cmd_plot(args)
            return EXIT_OK
        config = load_config(args)
        _COMMANDS[args.command](config, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        partial = getattr(exc, "partial", None)
        if partial is not None and args.command != "plot":
            _write(args.out / "partial.json", harness.dumps_json(partial.to_dict()))
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
