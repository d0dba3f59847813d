"""Command line: ``simulate``, ``reserve`` and ``bootstrap``.

Exit codes: 0 ok, 2 usage or configuration error, 3 numerical or
degenerate fit, 4 I/O error.  Every flag can be set through an environment
variable ``ONESHOT_<FLAG>`` (e.g. ``ONESHOT_SEED``, ``ONESHOT_BOOT_B``);
explicit flags win.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import pandas as pd

from . import __version__
from .bootstrap import DEFAULT_B, RegressionMethod, bootstrap_estimation_error, make_method
from .chain_ladder import mack_msep, predict_oneshot
from .claims import aggregate, load_portfolio, write_portfolio
from .errors import ConfigError, NumericalError, ReservingError, SchemaError
from .fnn import FnnConfig, FnnRegressor
from .ibnr import assemble_report, build_s_triangle, predict_ibnr_from_s, write_report_json
from .rbns import cl_split, observed_view, predict_rbns_cl
from .regression import ModelSpec, Variant, coefficients_frame, run_oneshot
from .simulator import SimConfig, simulate

logger = logging.getLogger(__name__)

ENV_PREFIX = "ONESHOT_"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
METHODS_HELP = "mack | cl-oneshot | rbns-cl | lr:<VARIANT> | fnn"


class UsageError(Exception):
    pass


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"), default)


def _read_json(path) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return data


def write_manifest(out: Path, command: str, args: argparse.Namespace, outputs: list[str]) -> None:
    """Replace the single manifest of ``out``."""
    manifest = {
        "command": command,
        "config": args.config,
        "seed": getattr(args, "seed", None),
        "inputs": {k: getattr(args, k, None) for k in ("data", "truth", "method", "boot_B", "workers") if
                   getattr(args, k, None) is not None},
        "outputs": sorted(outputs),
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_json(path: Path, data) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def _outdir(args) -> Path:
    if args.out is None:
        raise UsageError("--out is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands --------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg_data = _read_json(args.config)
    cfg = SimConfig.from_dict(cfg_data.get("simulator", cfg_data))
    if args.seed is not None:
        cfg = cfg.replace(seed=int(args.seed))
    out = _outdir(args)
    p = simulate(cfg)
    write_portfolio(p, out / "portfolio.csv")
    _write_json(out / "simulator.json", cfg.to_dict())
    args.seed = cfg.seed
    write_manifest(out, "simulate", args, ["portfolio.csv", "simulator.json"])
    print(f"simulated {len(p)} claims (I={p.I}, J={p.J}) -> {out / 'portfolio.csv'}")
    return EXIT_OK


def _load(args):
    if args.data is None:
        raise UsageError("--data is required")
    p = load_portfolio(args.data)
    truth = load_portfolio(args.truth) if args.truth else None
    if truth is not None and not truth.has_lower_triangle:
        raise SchemaError("--truth must be a full square (ground truth for the lower triangle)")
    return p, truth


def _model_spec(method: str, cfg: dict) -> ModelSpec:
    model = dict(cfg.get("model", {}))
    if method == "fnn":
        model["variant"] = Variant.FNN_ALL_COV.value
        model.setdefault("month_encoding", "continuous")
    else:
        model["variant"] = method[3:]
    return ModelSpec.from_dict(model)


def _check_method(method: str) -> None:
    if method in ("mack", "cl-oneshot", "rbns-cl", "fnn"):
        return
    if method.startswith("lr:"):
        try:
            Variant(method[3:])
        except ValueError:
            raise UsageError(f"unknown regression variant in {method!r}") from None
        return
    raise UsageError(f"unknown method {method!r}; expected {METHODS_HELP}")


def cmd_reserve(args) -> int:
    method = args.method
    if method is None:
        raise UsageError("--method is required")
    _check_method(method)
    cfg = _read_json(args.config)
    p, truth = _load(args)
    obs = observed_view(p)
    out = _outdir(args)
    outputs = ["report.csv", "report.json"]
    summary: dict = {"method": method, "I": obs.I, "J": obs.J, "n_claims": len(obs)}

    rmsep = None
    if method in ("mack", "cl-oneshot"):
        tri = aggregate(obs)
        if method == "mack":
            mack = mack_msep(tri)
            pd.DataFrame(mack.to_rows()).to_csv(out / "mack.csv", index=False, lineterminator="\n")
            outputs.append("mack.csv")
            rmsep = mack.rmsep
            summary.update(total_reserve=mack.total_reserve, rmsep=mack.rmsep,
                           process_sd=mack.process_sd, estimation_sd=mack.estimation_sd)
        else:
            ult, F = predict_oneshot(tri)
            summary.update(total_reserve=float(sum(ult.values()) - tri.latest().sum()), ptu_factors=F.tolist())
        _, pred = cl_split(obs)
        ibnr = pred.ibnr_by_period
        summary["ibnr_source"] = "cl-minus-rbns"
    else:
        if method == "rbns-cl":
            pred = predict_rbns_cl(obs)
            summary["ptu_factors"] = pred.rbns_factors.tolist()
        else:
            spec = _model_spec(method, cfg)
            regressor = FnnRegressor(FnnConfig.from_dict({**cfg.get("fnn", {}), "seed": args.seed or 0})) \
                if method == "fnn" else None
            pred = run_oneshot(obs, spec, regressor)
            summary["balance_residuals"] = [s.fit.balance_residual for s in pred.steps]
            if method != "fnn":
                coefficients_frame(pred).to_csv(out / "coefficients.csv", index=False, lineterminator="\n")
                outputs.append("coefficients.csv")
        st = build_s_triangle(obs, pred)
        st.to_frame().to_csv(out / "s_triangle.csv", index=False, lineterminator="\n")
        outputs.append("s_triangle.csv")
        ibnr = predict_ibnr_from_s(st)
        summary["ibnr_source"] = "s-triangle"
        summary["total_reserve"] = pred.total_rbns_reserve + float(sum(ibnr.values()))
        ult = pred.per_claim_ultimates
        pd.DataFrame({"accident_period": [k[0] for k in ult], "claim_id": [k[1] for k in ult],
                      "ultimate": list(ult.values())}).to_csv(out / "claims.csv", index=False, lineterminator="\n")
        outputs.append("claims.csv")

    report = assemble_report(obs, pred, ibnr, truth=truth, rmsep=rmsep)
    report.to_csv(out / "report.csv")
    summary["truth_columns_present"] = report.has_truth
    write_report_json(report, out / "report.json", extra={"summary": summary})
    write_manifest(out, "reserve", args, outputs)
    total = report.total
    print(f"{method}: RBNS {total['rbns_reserve']:.6g}, IBNR {total['ibnr_reserve']:.6g}, "
          f"total reserve {summary['total_reserve']:.6g}; truth columns {'present' if report.has_truth else 'absent'}")
    return EXIT_OK


def cmd_bootstrap(args) -> int:
    method = args.method or "cl"
    B = int(args.boot_B)
    if B < 2:
        raise ConfigError("boot-B", "need at least 2 bootstrap replicates")
    cfg = _read_json(args.config)
    if method in ("mack", "cl-oneshot", "cl"):
        m = make_method("cl")
    elif method in ("rbns-cl", "s-ibnr"):
        m = make_method(method)
    else:
        _check_method(method)
        spec = _model_spec(method, cfg)
        regressor = FnnRegressor(FnnConfig.from_dict({**cfg.get("fnn", {}), "seed": args.seed or 0})) \
            if method == "fnn" else None
        m = RegressionMethod(spec, regressor)
    p, truth = _load(args)
    out = _outdir(args)
    res = bootstrap_estimation_error(p, m, B=B, seed=int(args.seed or 0), workers=int(args.workers),
                                     stratified=args.stratified, truth=truth)
    res.to_csv(out / "replicates.csv")
    res.write_summary(out / "summary.json")
    write_manifest(out, "bootstrap", args, ["replicates.csv", "summary.json"])
    print(f"{res.method}: point {res.point_total:.6g}, bootstrap mean {res.mean:.6g}, "
          f"estimation error {res.sd:.6g} (B={B}, failed {res.n_failed})")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oneshot-reserving", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        sp.add_argument("--config", default=_env("config"), help="JSON config file")
        sp.add_argument("--out", default=_env("out"), help="output directory")
        sp.add_argument("--seed", type=int, default=_env("seed"), help="single source of randomness")
        if data:
            sp.add_argument("--data", default=_env("data"), help="long-format claims CSV")
            sp.add_argument("--truth", default=_env("truth"), help="full-square CSV with the ground truth")
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("simulate", help="write a simulated full-square portfolio")
    common(sp, data=False)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("reserve", help="run a reserving method and write the reserve report")
    common(sp)
    sp.add_argument("--method", default=_env("method"), help=METHODS_HELP)
    sp.set_defaults(func=cmd_reserve)

    sp = sub.add_parser("bootstrap", help="bootstrap estimation error")
    common(sp)
    sp.add_argument("--method", default=_env("method", "cl"), help=METHODS_HELP + " | s-ibnr")
    sp.add_argument("--boot-B", dest="boot_B", type=int, default=_env("boot_B", DEFAULT_B))
    sp.add_argument("--workers", type=int, default=_env("workers", 1))
    sp.add_argument("--stratified", action="store_true", default=bool(_env("stratified", "")))
    sp.set_defaults(func=cmd_bootstrap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, ArithmeticError, ReservingError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
