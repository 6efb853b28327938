"""Unified CLI dispatcher for all blocksketch commands."""

import argparse
import logging
import sys
from pathlib import Path

from blocksketch.common.config import Config
from blocksketch.common.errors import ConfigError, NumericalError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

logger = logging.getLogger("blocksketch")


def _read_input(path):
    if path in (None, "-"):
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}")


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
        logger.info("wrote %s", out)


def _sidecar(out, suffix, text):
    if out in (None, "-"):
        return
    path = Path(f"{out}{suffix}")
    path.write_text(text)
    logger.info("wrote %s", path)


def _meta_sidecar(out, meta):
    # the timestamp stays out of the cached payload
    from blocksketch.common.formatting import format_datetime, format_json
    _sidecar(out, ".meta.json", format_json({**meta, "created": format_datetime()}))


def _noise(args):
    from blocksketch.sketching import NoiseModel
    return NoiseModel(args.sigma if args.sigma is not None else 0.0, args.noise)


def _gamma(args, alpha):
    if not args.gamma_preset:
        return Config.default_gamma if args.gamma is None else args.gamma
    if args.gamma is not None:
        raise ConfigError("--gamma and --gamma-preset are mutually exclusive")
    from blocksketch.experiments import gamma_preset
    value = gamma_preset(alpha)
    if value is None:
        raise ConfigError(f"no gamma preset for alpha={alpha}")
    return value


def _cached(args, namespace, run_config, build):
    """Rendered outputs for a deterministic run, from the cache when allowed."""
    from blocksketch.common.cache import FileCache, run_key

    if args.no_cache:
        return build()
    cache = FileCache(namespace)
    key = run_key(run_config)
    hit = cache.get(key)
    if hit is not None:
        logger.info("using cached result %s", key[:12])
        return hit
    value = build()
    cache.set(key, value)
    return value


def cmd_estimate(args):
    from blocksketch.common.formatting import format_csv, format_json
    from blocksketch.estimation import WARNING_MESSAGES, estimate_block_sparsity, sparsity_estimate_to_record
    from blocksketch.signal import read_signal_csv
    from blocksketch.sketching import sketch_pair
    from blocksketch.stable import RngStream

    signal = read_signal_csv(_read_input(args.signal))
    alpha = 2.0 if args.alpha is None else args.alpha
    gamma = _gamma(args, alpha)
    meas = sketch_pair(signal, alpha, gamma, args.m1, args.malpha, _noise(args), RngStream(args.seed, 0))
    est = estimate_block_sparsity(meas, args.beta)
    record = sparsity_estimate_to_record(est)
    for code in est.warnings:
        print(f"warning: {WARNING_MESSAGES.get(code, code)}", file=sys.stderr, flush=True)

    if args.format == "csv":
        columns = [c for c in record if c != "warnings"] + ["warnings"]
        _emit(format_csv([record], columns), args.out)
    else:
        _emit(format_json(record), args.out)


def _spec_from_args(args, design, **extra):
    from blocksketch.experiments import ExperimentSpec

    overrides = dict(
        N=getattr(args, "n", None),
        d=getattr(args, "d", None),
        block_sparsity=getattr(args, "k", None),
        alpha=args.alpha,
        gamma=args.gamma,
        sigma=args.sigma,
        noise_family=args.noise if args.noise != "gaussian" else None,
        m1=args.m1,
        m_alpha=args.malpha,
        replications=args.reps,
        beta=args.beta,
        seed=args.seed,
        m=getattr(args, "m", None),
        trials=getattr(args, "trials", None),
        k_grid=getattr(args, "grid", None),
        example_k=getattr(args, "examples", None),
    )
    overrides.update(extra)
    spec = ExperimentSpec.from_design(design, **overrides)
    if args.gamma_preset:
        from dataclasses import replace
        spec = replace(spec, gamma=_gamma(args, spec.alpha))
    return spec


def _verdict(passed):
    return "n/a" if passed is None else ("normal" if passed else "not normal")


def _render_design(result, fmt):
    from blocksketch.common.formatting import (
        format_csv, format_json, format_number, format_pct, format_section_header,
    )
    from blocksketch.experiments import ReplicationRecord

    summary_rows = [s.to_row() for s in result.summaries]
    record_rows = [r.to_row() for r in result.records]
    spec = result.spec.to_dict()
    if fmt == "json":
        return {"main": format_json({"spec_version": Config.spec_version, "spec": spec,
                                     "summary": summary_rows, "replications": record_rows}),
                "sidecar": None}
    if fmt == "csv":
        return {"main": format_csv(record_rows, ReplicationRecord.COLUMNS),
                "sidecar": format_json({"spec_version": Config.spec_version, "spec": spec,
                                        "summary": summary_rows})}

    lines = [format_section_header(f"Design {result.spec.design} (alpha={result.spec.alpha})")]
    for s in result.summaries:
        lines.append(
            f"  k={s.block_sparsity} sigma={s.sigma}: truth {format_number(s.truth)} | "
            f"mean k_hat {format_number(s.mean_k_hat)} | coverage {format_pct(s.coverage)} | "
            f"KS p {format_number(s.ks_pvalue)} ({_verdict(s.ks_passed)}) | rel.err(l0) {format_pct(s.relative_error_l0)}"
        )
    return {"main": "\n".join(lines) + "\n", "sidecar": None}


def _render_study(study, fmt):
    from blocksketch.common.formatting import format_csv, format_json

    curve_rows = [{"k_in": p.k_in, "mre": p.mre, "trials": p.trials, "failures": p.failures}
                  for p in study.curve]
    example_rows = []
    for ex in study.examples:
        for i, (z, t) in enumerate(zip(ex.x_hat.entries, study.truth.entries)):
            example_rows.append({"k_in": ex.k_in, "index": i, "truth_real": float(t.real),
                                 "truth_imag": float(t.imag), "real": float(z.real), "imag": float(z.imag)})
    meta = {
        "spec_version": Config.spec_version,
        "spec": study.spec.to_dict(),
        "streams": study.streams,
        "argmin_k": study.argmin_k,
        "mean_estimate": study.mean_estimate,
        "examples": [{"k_in": ex.k_in, "relative_error": ex.relative_error, "iterations": ex.iterations}
                     for ex in study.examples],
    }
    if fmt == "json":
        return {"main": format_json({**meta, "curve": curve_rows, "reconstructions": example_rows}),
                "sidecar": None, "examples": None}
    if fmt == "csv":
        examples = None
        if example_rows:
            examples = format_csv(example_rows, ["k_in", "index", "truth_real", "truth_imag", "real", "imag"])
        return {"main": format_csv(curve_rows, ["k_in", "mre", "trials", "failures"]),
                "sidecar": meta, "examples": examples}
    lines = [f"argmin MRE at k_in={study.argmin_k}"]
    lines += [f"  k_in={p.k_in:3d}  MRE={p.mre:.3e}  failures={p.failures}" for p in study.curve]
    if study.mean_estimate is not None:
        lines.append(f"mean block-sparsity estimate: {study.mean_estimate:.3f}")
    return {"main": "\n".join(lines) + "\n", "sidecar": None, "examples": None}


def cmd_simulate(args):
    from blocksketch.experiments import RECOVERY_DESIGNS, run_design, run_recovery_study

    spec = _spec_from_args(args, args.design)
    if spec.design in RECOVERY_DESIGNS:
        rendered = _cached(args, "runs", {"command": "simulate", "format": args.format, **spec.to_dict()},
                           lambda: _render_study(run_recovery_study(spec), args.format))
    else:
        rendered = _cached(args, "runs", {"command": "simulate", "format": args.format, **spec.to_dict()},
                           lambda: _render_design(run_design(spec), args.format))
    _emit(rendered["main"], args.out)
    if rendered.get("sidecar") and spec.design in RECOVERY_DESIGNS:
        _meta_sidecar(args.out, rendered["sidecar"])
    elif rendered.get("sidecar"):
        _sidecar(args.out, ".summary.json", rendered["sidecar"])
    if rendered.get("examples"):
        _sidecar(args.out, ".examples.csv", rendered["examples"])


def cmd_mre(args):
    from blocksketch.experiments import run_recovery_study

    spec = _spec_from_args(args, "mre")
    if args.coarse and not spec.k_grid:
        from dataclasses import replace
        from blocksketch.recovery import default_k_grid
        spec = replace(spec, k_grid=tuple(default_k_grid(spec.N // spec.d, coarse=True)))
    rendered = _cached(
        args, "runs", {"command": "mre", "format": args.format, **spec.to_dict()},
        lambda: _render_study(run_recovery_study(spec, include_examples=False, include_estimates=False),
                              args.format),
    )
    _emit(rendered["main"], args.out)
    if rendered.get("sidecar"):
        _meta_sidecar(args.out, rendered["sidecar"])


def cmd_recover(args):
    from blocksketch.common.formatting import format_csv, format_json
    from blocksketch.experiments import recovery_truth
    from blocksketch.recovery import RecoveryConfig, cosamp_block, gaussian_matrix
    from blocksketch.stable import RngStream

    spec = _spec_from_args(args, "recovery", example_k=())
    truth = recovery_truth(spec)
    A = gaussian_matrix(spec.m, spec.N, RngStream(spec.seed, 0).child(1).child(0))
    k_in = args.kin if args.kin is not None else spec.block_sparsity[0]
    res = cosamp_block(A.apply(truth.entries), A, RecoveryConfig(spec.d, k_in), truth=truth)
    if args.format == "csv":
        rows = [{"index": i, "truth_real": float(t.real), "truth_imag": float(t.imag),
                 "real": float(z.real), "imag": float(z.imag)}
                for i, (z, t) in enumerate(zip(res.x_hat.entries, truth.entries))]
        _emit(format_csv(rows, ["index", "truth_real", "truth_imag", "real", "imag"]), args.out)
    else:
        _emit(format_json({
            "spec_version": Config.spec_version,
            "N": spec.N, "d": spec.d, "k": spec.block_sparsity[0], "m": spec.m, "k_in": k_in,
            "seed": spec.seed, "relative_error": res.relative_error, "iterations": res.iterations,
            "relative_residual": res.relative_residual, "support": list(res.support),
        }), args.out)


def cmd_sketch(args):
    from blocksketch.signal import read_signal_csv
    from blocksketch.sketching import sketch, write_measurements_csv
    from blocksketch.stable import RngStream

    signal = read_signal_csv(_read_input(args.signal))
    alpha = 2.0 if args.alpha is None else args.alpha
    gamma = _gamma(args, alpha)
    noise = _noise(args)
    y = sketch(signal, alpha, gamma, args.m, noise, RngStream(args.seed, 0))
    _emit(write_measurements_csv(y, alpha, gamma, noise), args.out)


def cmd_sample_debug(args):
    from blocksketch.common.formatting import format_csv
    from blocksketch.stable import RngStream, StableLawParams, sample_isotropic_vectors

    alpha = 2.0 if args.alpha is None else args.alpha
    gamma = _gamma(args, alpha)
    draws = sample_isotropic_vectors(StableLawParams(args.dim, alpha, gamma), RngStream(args.seed, 0), args.count)
    columns = [f"v{j}" for j in range(args.dim)]
    rows = ({c: float(v) for c, v in zip(columns, row)} for row in draws)
    _emit(format_csv(rows, columns, comment=f"alpha={alpha!r},gamma={gamma!r},dim={args.dim}"), args.out)


def cmd_cache(args):
    from blocksketch.common.cache import FileCache

    removed = FileCache("runs").clear()
    print(f"Removed {removed} cached run(s).")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="blocksketch",
        description="blocksketch: block-sparsity estimation from stable sketches and CoSaMP studies",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging on stderr")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Only warnings on stderr")
    subparsers = parser.add_subparsers(dest="command")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=float, default=None, help="Projection alpha in (0, 2], not 1")
    common.add_argument("--gamma", type=float, default=None, help="Projection dispersion")
    common.add_argument("--gamma-preset", action="store_true",
                        help="Use the dispersion preset for alpha (alpha=2 gives sqrt(2)/2)")
    common.add_argument("--sigma", type=float, default=None, help="Noise scale")
    common.add_argument("--noise", choices=["gaussian", "cauchy", "none"], default="gaussian")
    common.add_argument("--m1", type=int, default=None, help="Measurements for ||x||_{2,1}")
    common.add_argument("--malpha", type=int, default=None, help="Measurements for ||x||_{2,alpha}")
    common.add_argument("--reps", type=int, default=None, help="Replications")
    common.add_argument("--seed", type=int, default=0, help="Master seed")
    common.add_argument("--beta", type=float, default=Config.default_beta, help="CI level is 1 - beta")
    common.add_argument("--out", type=str, default=None, help="Output file (default stdout)")
    common.add_argument("--format", choices=["csv", "json", "text"], default="csv")
    common.add_argument("--no-cache", action="store_true", help="Ignore and do not write the run cache")

    recovery = argparse.ArgumentParser(add_help=False)
    recovery.add_argument("--n", type=int, default=None, help="Signal length N")
    recovery.add_argument("--d", type=int, default=None, help="Block size")
    recovery.add_argument("--k", type=_int_list, default=None, help="True block sparsity")
    recovery.add_argument("--m", type=int, default=None, help="Rows of the Gaussian matrix")
    recovery.add_argument("--trials", type=int, default=None, help="Trials per input sparsity")

    est_p = subparsers.add_parser("estimate", parents=[common], help="Estimate block sparsity of a signal CSV")
    est_p.add_argument("--signal", type=str, default=None, help="Signal CSV (default stdin)")
    est_p.set_defaults(format="json", m1=1000, malpha=1000)

    sim_p = subparsers.add_parser("simulate", parents=[common, recovery], help="Run a named design")
    sim_p.add_argument("--design", required=True, choices=["a", "b", "c", "d", "e", "f", "g", "recovery", "mre"])
    sim_p.add_argument("--grid", type=_int_list, default=None, help="Input sparsities for recovery designs")
    sim_p.add_argument("--examples", type=_int_list, default=None,
                       help="Input sparsities to reconstruct on the trial-0 matrix")

    rec_p = subparsers.add_parser("recover", parents=[common, recovery], help="One CoSaMP recovery")
    rec_p.add_argument("--kin", type=int, default=None, help="Input block sparsity (default: true k)")
    rec_p.set_defaults(format="json")

    mre_p = subparsers.add_parser("mre", parents=[common, recovery], help="MRE sensitivity curve")
    mre_p.add_argument("--grid", type=_int_list, default=None, help="Input sparsities (default 1..n)")
    mre_p.add_argument("--coarse", action="store_true", help="Grid 4, 8, ... below n")

    sk_p = subparsers.add_parser("sketch", parents=[common], help="Dump measurements of a signal CSV")
    sk_p.add_argument("--signal", type=str, default=None, help="Signal CSV (default stdin)")
    sk_p.add_argument("--m", type=int, default=1000, help="Number of measurements")

    dbg_p = subparsers.add_parser("sample-debug", parents=[common], help="Dump isotropic stable draws")
    dbg_p.add_argument("--dim", type=int, default=2, help="Vector dimension")
    dbg_p.add_argument("--count", type=int, default=1000, help="Number of draws")

    cache_p = subparsers.add_parser("cache", help="Run cache management")
    cache_p.add_argument("action", choices=["clear"])

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("  %(message)s"))
    logger.handlers[:] = [handler]
    logger.setLevel(level)
    logger.propagate = False

    commands = {
        "estimate": cmd_estimate,
        "simulate": cmd_simulate,
        "recover": cmd_recover,
        "mre": cmd_mre,
        "sketch": cmd_sketch,
        "sample-debug": cmd_sample_debug,
        "cache": cmd_cache,
    }

    if args.command not in commands:
        parser.print_help()
        return EXIT_CONFIG

    try:
        commands[args.command](args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr, flush=True)
        return EXIT_CONFIG
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr, flush=True)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
