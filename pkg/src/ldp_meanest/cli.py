"""Command-line front end for the Monte Carlo harness.

Exit codes: 0 on success, 2 on configuration or usage errors, 3 when an
estimator refuses to run (insufficient sample) outside sweep mode.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import ConfigurationError, ContractError, DomainError
from .harness import (
    Estimator,
    ExperimentConfig,
    GaussianSpec,
    result_to_json,
    run_experiment,
    summaries_to_csv,
    summaries_to_json,
)
from .mean_unknown import UnknownVarConfig, detection_sample_size, min_sample_size_unknown
from .mechanisms import PrivacyParams

SEED_ENV = "LDP_MEANEST_SEED"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _global_flags() -> argparse.ArgumentParser:
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, default=None,
                   help=f"base seed (falls back to ${SEED_ENV}, then 0)")
    g.add_argument("--trials", type=int, default=None, help="Monte Carlo trials (default 1)")
    g.add_argument("--out", type=Path, default=None, help="output file (default: stdout)")
    g.add_argument("--jobs", type=int, default=None,
                   help="worker processes for trials (default: one per CPU)")
    g.add_argument("--format", choices=("csv", "json"), default=None)
    g.add_argument("--records", action="store_true", help="include per-trial records in JSON")
    return g


def _privacy_flags(p: argparse.ArgumentParser, delta: bool = True):
    p.add_argument("--eps", type=_floats, default=[1.0])
    if delta:
        p.add_argument("--delta", type=_floats, default=[1e-9])
    p.add_argument("--beta", type=_floats, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ldp-meanest", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _global_flags()

    p = sub.add_parser("mean-known", parents=[common], help="known-variance interval")
    p.add_argument("--n", type=_ints, default=[400_000])
    p.add_argument("--mu", type=_floats, default=[0.0])
    p.add_argument("--sigma", type=_floats, default=[1.0], help="known (and true) std dev")
    p.add_argument("--R", type=_floats, default=[200.0])
    p.add_argument("--no-sample-bound", action="store_true",
                   help="run below the coverage sample bound")
    p.add_argument("--phase1-cap", type=float, default=None)
    p.add_argument("--noise", choices=("gaussian", "laplace"), default="gaussian")
    _privacy_flags(p)

    p = sub.add_parser("ztest", parents=[common], help="private two-sided Z-test")
    p.add_argument("--n", type=_ints, default=[200_000])
    p.add_argument("--mu-alt", type=_floats, default=[0.0], help="mean the data is drawn from")
    p.add_argument("--mu0", type=float, default=0.0)
    p.add_argument("--sigma", type=_floats, default=[1.0])
    p.add_argument("--R", type=_floats, default=[200.0])
    p.add_argument("--significance", type=float, default=0.05)
    p.add_argument("--no-sample-bound", action="store_true")
    p.add_argument("--phase1-cap", type=float, default=None)
    _privacy_flags(p)

    p = sub.add_parser("quantile", parents=[common], help="private quantile binary search")
    p.add_argument("--n", type=_ints, default=[50_000])
    p.add_argument("--p", type=_floats, default=[0.5], help="target quantile p*")
    p.add_argument("--mu", type=_floats, default=[0.0])
    p.add_argument("--sigma-true", type=_floats, default=[1.0])
    p.add_argument("--q-min", type=float, default=-10.0)
    p.add_argument("--q-max", type=float, default=10.0)
    p.add_argument("--lam", type=_floats, default=[0.05])
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--eps", type=_floats, default=[1.0])

    p = sub.add_parser("mean-unknown", parents=[common], help="bounded unknown-variance interval")
    p.add_argument("--n", type=_ints, default=None, help="pool size (default: the sample bound)")
    p.add_argument("--mu", type=_floats, default=[0.0])
    p.add_argument("--sigma-true", type=_floats, default=[1.0])
    p.add_argument("--sigma-min", type=float, default=0.25)
    p.add_argument("--sigma-max", type=float, default=None, help="default 2R")
    p.add_argument("--R", type=float, default=100.0)
    _privacy_flags(p)

    p = sub.add_parser("mean-large", parents=[common], help="very-large-variance interval")
    p.add_argument("--n", type=_ints, default=[100_000])
    p.add_argument("--mu", type=_floats, default=[0.0])
    p.add_argument("--sigma-true", type=_floats, default=[1000.0])
    p.add_argument("--R", type=_floats, default=[100.0])
    _privacy_flags(p, delta=False)

    p = sub.add_parser("mean-auto", parents=[common], help="detect the regime, then estimate")
    p.add_argument("--n", type=_ints, default=None, help="pool size (default: enough for either branch)")
    p.add_argument("--mu", type=_floats, default=[0.0])
    p.add_argument("--sigma-true", type=_floats, default=[1.0])
    p.add_argument("--sigma-min", type=float, default=0.25)
    p.add_argument("--R", type=float, default=100.0)
    _privacy_flags(p)

    p = sub.add_parser("experiment", parents=[common], help="run an experiment from a JSON config")
    p.add_argument("--config", type=Path, required=True)
    return parser


def _sweep(pairs: list[tuple[str, list]]) -> tuple[dict, list[tuple[str, list]]]:
    """Split flag values into fixed scalars and swept lists."""
    fixed, sweep = {}, []
    for name, values in pairs:
        if values is None:
            continue
        if len(values) == 1:
            fixed[name] = values[0]
        else:
            sweep.append((name, values))
    return fixed, sweep


def _config_from_args(args) -> ExperimentConfig:
    cmd = args.command
    seed = args.seed
    env_seed = os.environ.get(SEED_ENV)
    if seed is None and env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError as exc:
            raise ConfigurationError(f"${SEED_ENV} must be an integer, got {env_seed!r}") from exc

    if cmd == "experiment":
        try:
            raw = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigurationError("config must be a JSON object")
        # an explicit --seed beats the file; the environment only fills a gap
        if args.seed is not None or "seed" not in raw:
            raw["seed"] = 0 if seed is None else seed
        if args.trials is not None:
            raw["trials"] = args.trials
        return ExperimentConfig.from_dict(raw)
    if seed is None:
        seed = 0

    beta = getattr(args, "beta", None)
    common = [("epsilon", args.eps)]
    if hasattr(args, "delta"):
        common.append(("delta", args.delta))
    if beta is not None:
        common.append(("beta", beta))

    if cmd in ("mean-known", "ztest"):
        estimator = Estimator.KNOWN_BF if cmd == "mean-known" else Estimator.ZTEST
        mu_flag = args.mu if cmd == "mean-known" else args.mu_alt
        fixed, sweep = _sweep([("n", args.n), ("mu", mu_flag), ("data_sigma", args.sigma),
                               ("R", args.R), *common])
        params = {k: v for k, v in fixed.items() if k not in ("n", "mu", "data_sigma")}
        params.update(enforce_sample_bound=not args.no_sample_bound, phase1_cap=args.phase1_cap)
        if cmd == "mean-known":
            params["noise"] = args.noise
        else:
            params.update(mu0=args.mu0, significance=args.significance)
            if not sweep:
                # a single-point Z-test run is reported as a one-row sweep over the alternative
                sweep = [("mu", [fixed["mu"]])]
        # the known sigma follows the data sigma, including when it is swept
        return ExperimentConfig(estimator, GaussianSpec(fixed.get("mu", 0.0), fixed.get("data_sigma", 1.0)),
                                fixed.get("n", 0), args.trials or 1, seed, params, sweep)

    if cmd == "quantile":
        fixed, sweep = _sweep([("n", args.n), ("mu", args.mu), ("data_sigma", args.sigma_true),
                               ("p_star", args.p), ("lam", args.lam), ("epsilon", args.eps)])
        params = {k: v for k, v in fixed.items() if k not in ("n", "mu", "data_sigma")}
        params.update(q_min=args.q_min, q_max=args.q_max, tau=args.tau, T=args.T)
        return ExperimentConfig(Estimator.BIN_RR, GaussianSpec(fixed.get("mu", 0.0), fixed.get("data_sigma", 1.0)),
                                fixed.get("n", 0), args.trials or 1, seed, params, sweep)

    if cmd == "mean-large":
        fixed, sweep = _sweep([("n", args.n), ("mu", args.mu), ("data_sigma", args.sigma_true),
                               ("R", args.R), *common])
        params = {k: v for k, v in fixed.items() if k not in ("n", "mu", "data_sigma")}
        return ExperimentConfig(Estimator.LARGE_VAR, GaussianSpec(fixed.get("mu", 0.0), fixed.get("data_sigma", 1.0)),
                                fixed.get("n", 0), args.trials or 1, seed, params, sweep)

    # mean-unknown / mean-auto
    fixed, sweep = _sweep([("mu", args.mu), ("data_sigma", args.sigma_true), *common])
    params = {k: v for k, v in fixed.items() if k not in ("mu", "data_sigma")}
    params.update(sigma_min=args.sigma_min, R=args.R)
    eps = fixed.get("epsilon", 1.0)
    delta = fixed.get("delta", 1e-9)
    b = fixed.get("beta", 0.05)
    if cmd == "mean-unknown":
        estimator = Estimator.UNK_VAR
        params["sigma_max"] = args.sigma_max if args.sigma_max is not None else 2 * args.R
        default_n = min_sample_size_unknown(
            UnknownVarConfig(args.sigma_min, params["sigma_max"], b, PrivacyParams(eps, delta), args.R))
    else:
        estimator = Estimator.AUTO
        default_n = detection_sample_size(eps, b) + min_sample_size_unknown(
            UnknownVarConfig(args.sigma_min, 2 * args.R, b, PrivacyParams(eps, delta), args.R))
    if args.n is None:
        n = default_n
    elif len(args.n) == 1:
        n = args.n[0]
    else:
        n = args.n[0]
        sweep.insert(0, ("n", args.n))
    return ExperimentConfig(estimator, GaussianSpec(fixed.get("mu", 0.0), fixed.get("data_sigma", 1.0)),
                            n, args.trials or 1, seed, params, sweep)


def _render(cfg: ExperimentConfig, summaries, fmt: str) -> str:
    if fmt == "csv":
        return summaries_to_csv(summaries, cfg.estimator)
    return summaries_to_json(cfg, summaries)


def cli_main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:
        # --help exits 0 through argparse
        return int(exc.code or 0)

    try:
        cfg = _config_from_args(args)
    except (ConfigurationError, DomainError, ContractError, ValueError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    single = cfg.trials == 1 and not cfg.sweep
    if single or args.records:
        cfg.keep_records = True

    try:
        summaries = run_experiment(cfg, jobs=max(1, args.jobs or os.cpu_count() or 1))
    except (ConfigurationError, DomainError, ContractError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    sweeping = len(summaries) > 1 or bool(cfg.sweep) and cfg.estimator is not Estimator.ZTEST
    fmt = args.format or ("csv" if cfg.estimator is Estimator.ZTEST or sweeping else "json")
    if single and fmt == "json":
        text = result_to_json(cfg, summaries[0].per_trial_records[0])
    else:
        text = _render(cfg, summaries, fmt)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)

    errors = [s.error for s in summaries if s.error]
    if errors and not sweeping:
        print(f"estimator precondition failed: {errors[0]}", file=sys.stderr)
        return EXIT_PRECONDITION
    return EXIT_OK


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
