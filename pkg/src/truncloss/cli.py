"""``truncloss`` command line: simulate, fit, quantile, reproduce.

Exit codes: 0 success, 1 data or runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .annual_loss import (
    GridTooSmallError,
    PanjerConfig,
    conditional_quantile_distribution,
    mc_quantile,
    panjer_quantile,
    predictive_quantile,
)
from .io import (
    dump_json,
    parse_threshold_spec,
    read_chain_csv,
    read_events,
    sidecar_path,
    write_chain_csv,
    write_events,
)
from .mcmc import McmcConfig, chain_summary, run_chain
from .mle import fit_joint, fit_marginal, fit_misspecified
from .model import DomainError, ModelParams, NoEventsError, ThresholdViolation
from .simulate import TRUE_PARAMS, TRUE_SCHEDULE, SimConfig, simulate_dataset


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _positive(kind=float):
    def conv(s):
        v = kind(s)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {s}")
        return v
    return conv


def _level(s):
    v = float(s)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"level must be in (0, 1), got {s}")
    return v


def _emit(result: dict, out):
    text = dump_json(result, out)
    if out is None:
        sys.stdout.write(text)


# simulate -----------------------------------------------------------------

def cmd_simulate(args):
    try:
        schedule = parse_threshold_spec(args.threshold)
    except DomainError as e:
        raise UsageError(str(e)) from None
    params = ModelParams(args.lam, args.alpha, args.beta)
    cfg = SimConfig(true_params=params, schedule=schedule, years=args.years, seed=args.seed)
    data = simulate_dataset(cfg)
    extra = {"simulation": {"true_params": params.to_dict(), "years": args.years,
                            "seed": args.seed, "threshold": args.threshold}}
    write_events(args.out, data, extra)
    return 0


# fit ---------------------------------------------------------------------

def _load_config(args) -> dict:
    path = args.config or sidecar_path(args.data)
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DomainError(f"config {path} not found") from None
    except json.JSONDecodeError as e:
        raise DomainError(f"config {path}: {e}") from None


def _mcmc_config(cfg: dict, args) -> McmcConfig:
    mc = McmcConfig.from_dict(cfg.get("mcmc", {}))
    kw = {}
    if args.iterations is not None:
        kw["iterations"] = args.iterations
    if args.seed is not None:
        kw["seed"] = args.seed
    return replace(mc, **kw) if kw else mc


def cmd_fit(args):
    cfg = _load_config(args)
    if "window" not in cfg or "schedule" not in cfg:
        raise DomainError("config must define 'window' and 'schedule'")
    data = read_events(args.data, cfg)
    if data.n_events == 0:
        raise NoEventsError("data file contains no events")
    effective = {"data": str(args.data), "mode": args.mode, "window": data.window.to_dict(),
                 "schedule": data.schedule.to_dict()}
    if args.mode == "mcmc":
        mc = _mcmc_config(cfg, args)
        chain = run_chain(data, mc)
        summ = chain_summary(chain)
        chain_out = args.chain_out or Path(args.out or "fit.json").with_suffix(".chain.csv")
        write_chain_csv(chain_out, chain.samples)
        effective["mcmc"] = mc.to_dict()
        result = {
            "mode": "mcmc",
            "posterior": summ.to_dict(),
            "acceptance_rates": dict(zip(("lambda", "alpha", "beta"), chain.acceptance_rates.tolist())),
            "forced_rejections": chain.forced_rejections.tolist(),
            "initial": chain.initial.to_dict(),
            "chain_file": str(chain_out),
        }
    else:
        if args.mode == "joint":
            fit = fit_joint(data)
        elif args.mode == "marginal":
            fit = fit_marginal(data)
        else:
            L0 = cfg.get("assumed_threshold", float(data.schedule.year_levels(1)[0]))
            effective["assumed_threshold"] = L0
            fit = fit_misspecified(data, L0)
        result = fit.to_dict()
    result["n_events"] = data.n_events
    result["config"] = effective
    _emit(result, args.out)
    return 0


# quantile ----------------------------------------------------------------

def _params_from(args) -> ModelParams:
    return ModelParams(args.lam, args.alpha, args.beta)


def cmd_quantile(args):
    eff = {"method": args.method, "level": args.level}
    if args.method in ("mc", "panjer"):
        params = _params_from(args)
        eff["params"] = params.to_dict()
    if args.method == "mc":
        if args.k * (1 - args.level) < 10:
            raise UsageError(f"K={args.k} too small: K*(1-level) must be at least 10")
        eff |= {"k": args.k, "seed": args.seed}
        res = mc_quantile(params, args.level, args.k, args.seed).to_dict()
    elif args.method == "panjer":
        eff |= {"step": args.step, "max_grid": args.max_grid}
        res = panjer_quantile(params, args.level, args.step, args.max_grid).to_dict()
    else:
        if args.chain is None:
            raise UsageError(f"--method {args.method} requires --chain")
        samples = read_chain_csv(args.chain)
        eff |= {"chain": str(args.chain), "burn_in": args.burn_in}
        if args.burn_in >= samples.shape[0]:
            raise UsageError(f"--burn-in {args.burn_in} leaves no samples from {samples.shape[0]}")
        if args.method == "predictive":
            eff["seed"] = args.seed
            res = predictive_quantile(samples, args.level, seed=args.seed, burn_in=args.burn_in).to_dict()
        else:
            cfg = PanjerConfig(n_cells=args.n_cells)
            n = samples.shape[0] - args.burn_in
            sub = min(args.subsample, n)
            eff |= {"subsample": sub, "panjer": cfg.to_dict()}
            qs = conditional_quantile_distribution(samples, args.level, cfg, sub, args.burn_in)
            res = {"method": "conditional-dist", "summary": qs.summary(), "n_failed": qs.n_failed,
                   "n_values": int(qs.values.size)}
    res["config"] = eff
    _emit(res, args.out)
    return 0


# reproduce ---------------------------------------------------------------

def cmd_reproduce(args):
    from .reproduce import Settings, run_target

    settings = Settings.quick() if args.quick else Settings()
    meta = run_target(args.target, args.seed, args.out_dir, settings)
    failed = [k for k, v in meta.get("checks", {}).items() if not v]
    for k, v in meta.get("checks", {}).items():
        print(f"{'PASS' if v else 'FAIL'} {args.target}.{k}")
    if failed:
        print(f"{len(failed)} check(s) failed; see {Path(args.out_dir) / (args.target + '.json')}",
              file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="truncloss", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate event data above a threshold")
    s.add_argument("--lambda", dest="lam", type=_positive(), default=TRUE_PARAMS.lam)
    s.add_argument("--alpha", type=_positive(), default=TRUE_PARAMS.alpha)
    s.add_argument("--beta", type=_positive(), default=TRUE_PARAMS.beta)
    s.add_argument("--years", type=_positive(int), default=5)
    s.add_argument("--threshold", default=f"exp:{TRUE_SCHEDULE.level:g}:{TRUE_SCHEDULE.rate:g}",
                   help="constant:L, exp:L0:r or file:path")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", type=Path, required=True, help="events CSV; sidecar JSON is written next to it")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit by maximum likelihood or MCMC")
    f.add_argument("--data", type=Path, required=True)
    f.add_argument("--config", type=Path,
                   help="JSON with window and schedule (the sidecar format) plus optional 'mcmc' "
                        "and 'assumed_threshold'; defaults to the data sidecar")
    f.add_argument("--mode", choices=("joint", "marginal", "misspecified", "mcmc"), required=True)
    f.add_argument("--out", type=Path, help="result JSON (stdout if omitted)")
    f.add_argument("--chain-out", type=Path, help="chain CSV for --mode mcmc")
    f.add_argument("--iterations", type=_positive(int))
    f.add_argument("--seed", type=int)
    f.set_defaults(func=cmd_fit)

    q = sub.add_parser("quantile", help="annual-loss quantile")
    q.add_argument("--method", choices=("mc", "panjer", "predictive", "conditional-dist"), required=True)
    q.add_argument("--level", type=_level, default=0.999)
    q.add_argument("--lambda", dest="lam", type=_positive(), default=TRUE_PARAMS.lam)
    q.add_argument("--alpha", type=_positive(), default=TRUE_PARAMS.alpha)
    q.add_argument("--beta", type=_positive(), default=TRUE_PARAMS.beta)
    q.add_argument("--k", type=_positive(int), default=1_000_000)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--step", type=_positive(), default=0.25)
    q.add_argument("--max-grid", type=_positive(), default=6000.0)
    q.add_argument("--chain", type=Path)
    q.add_argument("--burn-in", type=int, default=1000)
    q.add_argument("--subsample", type=_positive(int), default=10_000)
    q.add_argument("--n-cells", type=_positive(int), default=8192)
    q.add_argument("--out", type=Path)
    q.set_defaults(func=cmd_quantile)

    r = sub.add_parser("reproduce", help="regenerate a table or figure data")
    r.add_argument("--target", choices=("table1", "table2", "table3", "table4",
                                        "fig1", "fig2", "fig3", "fig4"), required=True)
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--out-dir", type=Path, required=True)
    r.add_argument("--quick", action="store_true", help="short chains and few replicates")
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 2
    except ThresholdViolation as e:
        print(f"error: data row {e.index + 1}: loss {e.loss!r} is below threshold {e.level!r}",
              file=sys.stderr)
        return 1
    except NoEventsError as e:
        print(f"error: NoEvents: {e}", file=sys.stderr)
        return 1
    except GridTooSmallError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (DomainError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
