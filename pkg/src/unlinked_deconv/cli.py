"""Command-line front end: ``gen``, ``fit``, ``infer`` and ``experiment``.

Exit codes: 0 success, 1 input error, 2 statistical non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .conditional import conditional_density, infer_batch
from .criterion import CriterionContext
from .data_model import SETTINGS, GaussianNoise, KernelSpec, project, sample_setting
from .density import DensityEstimate, kde, write_density_csv
from .dlse import FitOptions, NonFiniteCriterionError, fit_dlse
from .io import InputError, inference_csv, load_dataset, read_vector_csv, write_dataset

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2
FY_CHOICES = {"empirical": "empirical", "gauss": "gauss_conv", "integrated": "integrated"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _positive(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _float_list(text):
    return tuple(float(v) for v in text.split(","))


def _int_list(text):
    return tuple(int(v) for v in text.split(","))


def _add_data_flags(p):
    p.add_argument("--x", help="covariates CSV (n rows, d columns, header optional)")
    p.add_argument("--y", help="responses CSV (one column)")
    p.add_argument("--meta", help="JSON sidecar with setting, sigma, seed")
    p.add_argument("--setting", choices=SETTINGS, help="simulate data from a built-in setting")
    p.add_argument("--n", type=int, help="sample size for simulated data")
    p.add_argument("--sigma", type=_positive, help="noise standard deviation")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="unlinked-deconv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="write a simulated dataset")
    gen.add_argument("--setting", choices=SETTINGS, required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--sigma", type=float, default=1.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--linked", action="store_true", help="keep rows paired (for diagnostics)")
    gen.add_argument("--out-dir", required=True)
    gen.add_argument("--force", action="store_true")

    fit = sub.add_parser("fit", help="fit the deconvolution least-squares estimator")
    _add_data_flags(fit)
    fit.add_argument("--starts", type=int, default=8)
    fit.add_argument("--polish", action="store_true", help="finish each start with gradient steps")
    fit.add_argument("--out", help="output JSON (default: stdout)")

    infer = sub.add_parser("infer", help="conditional inference on Z given observed responses")
    _add_data_flags(infer)
    infer.add_argument("--fit", help="fit JSON from the fit command (otherwise fit on the fly)")
    infer.add_argument("--oracle-gaussian", type=_positive, metavar="TAU", help="use the exact N(0, TAU^2) density for Z")
    infer.add_argument("--y0", help="one-column CSV of observed responses")
    infer.add_argument("--y0-values", type=_float_list, help="comma-separated responses")
    infer.add_argument("--fy", choices=sorted(FY_CHOICES), default="integrated")
    infer.add_argument("--alpha", type=float, default=0.05)
    infer.add_argument("--bandwidth", type=_positive, help="KDE bandwidth (default rule otherwise)")
    infer.add_argument("--method", choices=("quadrature", "importance_sampling"), default="quadrature")
    infer.add_argument("--starts", type=int, default=8)
    infer.add_argument("--density-dir", help="also write z,density CSVs of each conditional density")
    infer.add_argument("--out", help="output CSV (default: stdout)")

    exp = sub.add_parser("experiment", help="run a Monte Carlo study")
    exp.add_argument("--experiment", choices=("rates", "comparison", "mse-grid"), required=True)
    exp.add_argument("--setting", choices=SETTINGS)
    exp.add_argument("--scale", choices=("desk", "paper"), default="desk")
    exp.add_argument("--reps", type=int)
    exp.add_argument("--seed", type=int)
    exp.add_argument("--n-list", type=_int_list)
    exp.add_argument("--sigma2-list", type=_float_list)
    exp.add_argument("--test-size", type=int)
    exp.add_argument("--reference-size", type=int)
    exp.add_argument("--alpha", type=float)
    exp.add_argument("--fy", choices=sorted(FY_CHOICES))
    exp.add_argument("--bandwidth", type=_positive)
    exp.add_argument("--starts", type=int)
    exp.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    exp.add_argument("--threads", type=int, default=1)
    exp.add_argument("--dump-raw", action="store_true", help="also write per-replication values")
    exp.add_argument("--out-dir", required=True)
    exp.add_argument("--force", action="store_true")
    return parser


def _prepare_out_dir(path, force: bool) -> Path:
    out = Path(path)
    if out.exists() and not out.is_dir():
        raise InputError(f"{out} exists and is not a directory")
    if out.exists() and any(out.iterdir()) and not force:
        raise InputError(f"{out} is not empty; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(text: str, path) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _dataset(args):
    if args.x or args.y:
        if not (args.x and args.y):
            raise InputError("--x and --y must be given together")
        data = load_dataset(args.x, args.y, args.meta, args.sigma)
    elif args.setting:
        if args.n is None:
            raise InputError("--setting needs --n")
        sigma = 1.0 if args.sigma is None else args.sigma
        data = sample_setting(args.setting, args.n, sigma, seed=args.seed)
    else:
        raise InputError("give either --x/--y files or --setting/--n")
    if data.sigma is None or not data.sigma > 0:
        raise InputError("the noise scale is unknown; pass --sigma or a sidecar with sigma")
    return data


def _fit(args, data):
    ctx = CriterionContext(data, GaussianNoise(data.sigma))
    opts = FitOptions(n_starts=args.starts, refine_with_gradient=getattr(args, "polish", False))
    return fit_dlse(ctx, opts, seed=np.random.SeedSequence(args.seed, spawn_key=(1,)))


def cmd_gen(args) -> int:
    out = _prepare_out_dir(args.out_dir, args.force)
    write_dataset(out, sample_setting(args.setting, args.n, args.sigma, seed=args.seed, linked=args.linked))
    return EXIT_OK


def cmd_fit(args) -> int:
    data = _dataset(args)
    result = _fit(args, data)
    payload = result.to_dict()
    payload.update(n=data.n, d=data.d, sigma=data.sigma, setting=data.setting_tag, seed=args.seed)
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
    if not result.converged:
        print("warning: optimizer did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _y0_values(args) -> np.ndarray:
    if args.y0 and args.y0_values:
        raise InputError("give --y0 or --y0-values, not both")
    if args.y0:
        return read_vector_csv(args.y0)
    if args.y0_values:
        return np.array(args.y0_values)
    raise InputError("no responses given; pass --y0 or --y0-values")


def cmd_infer(args) -> int:
    if not 0 < args.alpha < 1:
        raise InputError("--alpha must lie in (0, 1)")
    y0s = _y0_values(args)
    variant = FY_CHOICES[args.fy]
    if args.oracle_gaussian:
        sigma = 1.0 if args.sigma is None else args.sigma
        fz = DensityEstimate.gaussian(0.0, args.oracle_gaussian)
        if variant != "integrated":
            raise InputError("--oracle-gaussian supports only --fy integrated")
    else:
        data = _dataset(args)
        sigma = data.sigma
        if args.fit:
            beta = np.asarray(json.loads(Path(args.fit).read_text())["beta_hat"], dtype=float)
        else:
            beta = _fit(args, data).beta_hat
        kernel = KernelSpec("gaussian", args.bandwidth) if args.bandwidth else None
        fz = kde(project(data.covariates, beta), kernel)
    noise = GaussianNoise(sigma)
    rows = infer_batch(fz, noise, y0s, args.alpha, variant, args.method, seed=args.seed)
    _emit(inference_csv(rows), args.out)
    if args.density_dir:
        out = Path(args.density_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, row in enumerate(rows):
            if row.flagged:
                continue
            cd = conditional_density(fz, noise, row.y0, variant)
            write_density_csv(out / f"conditional_{i:04d}.csv", _as_density(cd), cd.grid)
    for row in rows:
        if row.flagged:
            print(f"warning: y0={row.y0:g} lies outside the estimated support", file=sys.stderr)
    return EXIT_OK


def _as_density(cd) -> DensityEstimate:
    lo, hi = cd.support_hint
    return DensityEstimate(cd.log_pdf, (lo, hi), "conditional", float(cd.grid[1] - cd.grid[0]))


def _experiment_config(args) -> ex.ExperimentConfig:
    overrides = {}
    if args.config:
        try:
            overrides.update(json.loads(Path(args.config).read_text()))
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.config}: line {exc.lineno}: invalid JSON ({exc.msg})") from None
        known = {f.name for f in dataclasses.fields(ex.ExperimentConfig)}
        unknown = set(overrides) - known
        if unknown:
            raise InputError(f"{args.config}: unknown config keys {sorted(unknown)}")
    flag_map = {
        "setting": args.setting,
        "reps": args.reps,
        "master_seed": args.seed,
        "n_list": args.n_list,
        "sigma2_list": args.sigma2_list,
        "test_size": args.test_size,
        "reference_size": args.reference_size,
        "alpha": args.alpha,
        "fy_variant": FY_CHOICES[args.fy] if args.fy else None,
        "bandwidth": args.bandwidth,
        "n_starts": args.starts,
    }
    overrides.update({k: v for k, v in flag_map.items() if v is not None})
    overrides["workers"] = max(1, min(args.threads, os.cpu_count() or 1))
    try:
        return ex.ExperimentConfig.preset(args.experiment, args.scale, **overrides)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from None


def rate_plot_svg(result: ex.RateStudyResult) -> str:
    """Log-log scatter of the W1 moments and 99% quantile against n, with
    fitted lines and slopes in the legend."""
    import io

    import matplotlib

    matplotlib.use("Agg")
    from matplotlib import pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "unlinked-deconv", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4.5))
        ns = np.array(result.ns, dtype=float)
        series = {f"W1^{k}": result.moments[:, i] for i, k in enumerate(ex.MOMENT_ORDERS)}
        series["q0.99"] = result.quantiles
        slopes = result.slopes
        for label, values in series.items():
            (line,) = ax.loglog(ns, values, "o")
            lx = np.log(ns)
            intercept = np.mean(np.log(values)) - slopes[label] * np.mean(lx)
            ax.loglog(ns, np.exp(intercept + slopes[label] * lx), "-", color=line.get_color(),
                      label=f"{label}: slope {slopes[label]:.3f}")
        ax.set_xlabel("n")
        ax.set_ylabel("Monte Carlo statistic of W1")
        ax.set_title(f"setting ({result.setting})")
        ax.legend()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def cmd_experiment(args) -> int:
    cfg = _experiment_config(args)
    out = _prepare_out_dir(args.out_dir, args.force)
    if args.experiment == "rates":
        result = ex.run_rate_study(cfg)
        (out / "rates.csv").write_text(ex.tidy_csv(result.tidy_rows()))
        (out / "slopes.csv").write_text(ex.slopes_csv([result]))
        (out / "rates.svg").write_text(rate_plot_svg(result))
        stats = {"slopes": result.slopes, "failures": {str(n): f for n, f in result.failures.items()}}
        if args.dump_raw:
            header = ("setting", "n", "rep", "w1", "dist", "criterion")
            rows = [(cfg.setting, n, r["rep"], r["w1"], r["dist"], r["criterion"])
                    for n in result.ns for r in result.records[n]]
            (out / "raw.csv").write_text(ex.tidy_csv(rows, header))
    elif args.experiment == "comparison":
        results = ex.run_comparison(cfg)
        rows = [row for r in results for row in r.tidy_rows()]
        (out / "comparison.csv").write_text(ex.tidy_csv(rows))
        stats = {str(r.n): {s: v for _, _, _, s, v in r.tidy_rows()} for r in results}
    else:
        result = ex.run_mse_grid(cfg)
        (out / "mse_grid.csv").write_text(ex.tidy_csv(result.tidy_rows()))
        stats = {"failures": result.failures}
    (out / "summary.json").write_text(ex.json_summary(cfg, stats))
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "fit": cmd_fit, "infer": cmd_infer, "experiment": cmd_experiment}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NonFiniteCriterionError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
