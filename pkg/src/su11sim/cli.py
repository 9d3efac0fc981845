"""Command line front end.

Subcommands: limits, likelihood, run, ensemble, threshold, verify. Outputs
are deterministic JSON or CSV (no timestamps), every file embeds the
configuration that produced it, and the master seed resolves as
flag > SU11_SEED environment variable > default 7. Exit codes: 0 success,
1 domain or validation failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from ._version import __version__
from .analysis import benchmarks, quantum_fisher
from .checks import run_verify
from .ensemble import (
    CampaignConfig,
    DEFAULT_MASTER_SEED,
    run_campaign,
    threshold_scan,
)
from .errors import SU11Error
from .measurement import (
    POLICY_EXACT_TAIL,
    POLICY_RENORMALIZE,
    Scheme,
    make_model,
    _plus_minus_from_amps,
)
from .posterior import PhaseGrid
from .protocols import (
    MODE_FIXED,
    MODE_LADDER,
    MODE_OPTIMAL,
    ProtocolConfig,
    run_trial,
    scheme_for_mode,
)
from .tmsq import pair_amplitude_matrix


def _resolve_seed(flag_value: int | None) -> int:
    if flag_value is not None:
        return flag_value
    env = os.environ.get("SU11_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise SU11Error(f"SU11_SEED must be an integer, got {env!r}") from exc
    return DEFAULT_MASTER_SEED


def _emit_json(obj: dict, path: str | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _write_csv(path, schema: str, config: dict, header: list[str], rows) -> None:
    fh = sys.stdout if path is None else open(path, "w", newline="")
    try:
        fh.write(f"# {schema} version={__version__}\n")
        fh.write(f"# config={json.dumps(config, sort_keys=True)}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    finally:
        if path is not None:
            fh.close()


def _csv_cell(value):
    if value is None:
        return ""
    return value


def _parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise SU11Error(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _grid_from_args(args) -> PhaseGrid:
    return PhaseGrid(lo=args.grid_lo, hi=args.grid_hi, n_points=args.grid_points)


def _add_grid_flags(parser) -> None:
    parser.add_argument("--grid-lo", type=float, default=0.0, help="grid lower edge (default 0)")
    parser.add_argument(
        "--grid-hi", type=float, default=math.pi, help="grid upper edge, exclusive (default pi)"
    )
    parser.add_argument(
        "--grid-points", type=int, default=4096, help="number of grid points (default 4096)"
    )


def _add_model_flags(parser) -> None:
    parser.add_argument(
        "--n-max", type=int, default=16, help="deepest tabulated pair count (default 16)"
    )
    parser.add_argument(
        "--tail-tol", type=float, default=1e-12, help="table truncation tolerance (default 1e-12)"
    )
    parser.add_argument(
        "--residual-policy",
        choices=[POLICY_EXACT_TAIL, POLICY_RENORMALIZE],
        default=POLICY_EXACT_TAIL,
        help="how sampling treats pair counts beyond n-max (default exact_tail)",
    )


def _cmd_limits(args) -> int:
    b = benchmarks(args.measurements, args.mean_photons)
    _emit_json(
        {
            "schema": "su11sim/limits/v1",
            "version": __version__,
            "mean_photons": b.mean_photons,
            "measurements": b.measurements,
            "quantum_fisher_per_shot": quantum_fisher(args.mean_photons),
            "qcrb": b.qcrb,
            "heisenberg": b.heisenberg,
            "shot_noise": b.shot_noise,
        },
        args.out,
    )
    return 0


def _cmd_likelihood(args) -> int:
    model = make_model(
        args.scheme, args.mean_photons, tail_tol=args.tail_tol, n_max=args.n_max
    )
    offsets = np.linspace(args.lo, args.hi, args.points)
    amps = pair_amplitude_matrix(model.table, offsets)
    pair_probs = np.abs(amps) ** 2
    if model.scheme is Scheme.PHOTON_NUMBER:
        labels = [f"pair:{n}" for n in range(model.n_max + 1)]
        table = pair_probs
    else:
        p_plus, p_minus = _plus_minus_from_amps(amps[:, 0], amps[:, 1])
        labels = ["plus", "minus"] + [f"null:{n}" for n in range(2, model.n_max + 1)]
        table = np.column_stack([p_plus, p_minus, pair_probs[:, 2:]])
    tail = 1.0 - table.sum(axis=1)
    config = {
        "scheme": model.scheme.value,
        "mean_photons": args.mean_photons,
        "n_max": args.n_max,
        "tail_tol": args.tail_tol,
        "lo": args.lo,
        "hi": args.hi,
        "points": args.points,
    }
    rows = []
    for i, u in enumerate(offsets):
        for j, label in enumerate(labels):
            rows.append([float(u), label, float(table[i, j])])
        rows.append([float(u), "tail", float(max(tail[i], 0.0))])
    _write_csv(
        args.out,
        "su11sim/likelihood-curves/v1",
        config,
        ["delta_phi", "outcome", "probability"],
        rows,
    )
    return 0


def _protocol_config_from_args(args, *, phi_true: float | None = None) -> ProtocolConfig:
    return ProtocolConfig(
        mode=args.protocol,
        measurements=args.measurements,
        phi_true=phi_true,
        fixed_theta=args.theta,
        pre_rounds=args.pre_rounds,
        ramp_cap_fraction=args.ramp_cap,
        final_fraction=args.final_fraction,
        initial_theta=args.initial_theta,
    )


def _cmd_run(args) -> int:
    config = _protocol_config_from_args(args, phi_true=args.phi_true)
    grid = _grid_from_args(args)
    model = make_model(
        scheme_for_mode(config.mode),
        args.mean_photons,
        tail_tol=args.tail_tol,
        n_max=args.n_max,
        residual_policy=args.residual_policy,
    )
    seed = _resolve_seed(args.seed)
    record = run_trial(config, model, grid, seed)
    _emit_json(record.to_dict(), args.out)
    if args.trajectory_out is not None:
        rows = [
            [s.step, s.theta, s.outcome.label(), s.map_estimate] for s in record.steps
        ]
        _write_csv(
            args.trajectory_out,
            "su11sim/trajectory/v1",
            record.to_dict()["config"] | {"seed": seed},
            ["step", "theta", "outcome", "map"],
            rows,
        )
    return 0


def _cmd_ensemble(args) -> int:
    if args.config is not None:
        with open(args.config) as fh:
            config = CampaignConfig.from_dict(json.load(fh))
        if args.seed is not None or os.environ.get("SU11_SEED"):
            config = CampaignConfig.from_dict(
                config.to_dict() | {"master_seed": _resolve_seed(args.seed)}
            )
    else:
        if args.phi_true is None:
            raise SU11Error("ensemble needs --phi-true (or --config)")
        protocol = _protocol_config_from_args(args)
        config = CampaignConfig(
            protocol=protocol,
            mean_photons=_parse_float_list(args.mean_photons_list),
            phi_true=_parse_float_list(args.phi_true),
            trials=args.trials,
            master_seed=_resolve_seed(args.seed),
            grid=_grid_from_args(args),
            tail_tol=args.tail_tol,
            n_max=args.n_max,
            residual_policy=args.residual_policy,
            label=args.label,
        )
    result = run_campaign(config, workers=args.workers)
    _emit_json(result.to_dict(), args.out)
    if args.cells_csv is not None:
        header = [
            "cell_index", "phi_true", "phi_true_snapped", "mean_photons", "trials",
            "failures", "mse", "mse_ci_low", "mse_ci_high", "bias",
            "mean_posterior_variance", "median_posterior_variance",
            "qcrb", "heisenberg", "shot_noise",
        ]
        rows = [[getattr(c, k) for k in header] for c in result.cells]
        _write_csv(args.cells_csv, "su11sim/campaign-cells/v1", config.to_dict(), header, rows)
    if args.trials_csv is not None:
        header = [
            "cell_index", "phi_true", "mean_photons", "trial_index", "seed",
            "estimate", "map_estimate", "posterior_variance", "m_threshold",
            "rival_ratio", "pruned", "edge_mass",
        ]
        rows = [[_csv_cell(getattr(t, k)) for k in header] for t in result.trials]
        _write_csv(args.trials_csv, "su11sim/campaign-trials/v1", config.to_dict(), header, rows)
    return 0


def _cmd_threshold(args) -> int:
    result = threshold_scan(
        _parse_float_list(args.thetas),
        phi_true=args.phi_true,
        mean_photons=args.mean_photons,
        trials=args.trials,
        max_measurements=args.max_measurements,
        master_seed=_resolve_seed(args.seed),
        grid=_grid_from_args(args),
        tail_tol=args.tail_tol,
        n_max=args.n_max,
    )
    _emit_json(result.to_dict(), args.out)
    if args.csv is not None:
        header = ["theta", "trials", "censored", "median", "q25", "q75"]
        rows = [[_csv_cell(getattr(r, k)) for k in header] for r in result.rows]
        _write_csv(
            args.csv,
            "su11sim/threshold-scan/v1",
            {k: v for k, v in result.to_dict().items() if k != "rows"},
            header,
            rows,
        )
    return 0


def _cmd_verify(args) -> int:
    report = run_verify(fast=args.fast)
    for check in report["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"{status}  {check['name']}: {check['detail']}", file=sys.stderr)
    _emit_json(report, args.out)
    return 0 if report["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="su11sim",
        description=(
            "Adaptive phase estimation in a vacuum-seeded twin-beam interferometer: "
            "exact likelihoods, Bayesian feedback protocols, quantum-limit benchmarks."
        ),
    )
    parser.add_argument("--version", action="version", version=f"su11sim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("limits", help="print variance benchmarks for one configuration")
    p.add_argument("--mean-photons", type=float, required=True)
    p.add_argument("--measurements", type=int, required=True)
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")
    p.set_defaults(func=_cmd_limits)

    p = sub.add_parser("likelihood", help="dump outcome probability curves to CSV")
    p.add_argument("--scheme", choices=["photon", "optimal"], required=True)
    p.add_argument("--mean-photons", type=float, required=True)
    p.add_argument("--lo", type=float, default=-math.pi, help="lowest offset (default -pi)")
    p.add_argument("--hi", type=float, default=math.pi, help="highest offset (default pi)")
    p.add_argument("--points", type=int, default=201, help="number of offsets (default 201)")
    _add_model_flags(p)
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")
    p.set_defaults(func=_cmd_likelihood)

    p = sub.add_parser("run", help="run a single seeded trial and print its record")
    p.add_argument("--protocol", choices=[MODE_FIXED, MODE_LADDER, MODE_OPTIMAL], required=True)
    p.add_argument("--phi-true", type=float, required=True)
    p.add_argument("--mean-photons", type=float, required=True)
    p.add_argument("--measurements", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None, help="trial seed (default: SU11_SEED or 7)")
    p.add_argument("--theta", type=float, default=None, help="feedback phase (fixed mode)")
    p.add_argument("--pre-rounds", type=int, default=100, help="ladder rough-stage length")
    p.add_argument("--ramp-cap", type=float, default=0.5, help="ladder cap as fraction of MAP")
    p.add_argument("--final-fraction", type=float, default=0.93, help="ladder lock fraction")
    p.add_argument("--initial-theta", type=float, default=None, help="first feedback (optimal)")
    _add_grid_flags(p)
    _add_model_flags(p)
    p.add_argument("--out", default=None, help="write the trial record JSON here")
    p.add_argument("--trajectory-out", default=None, help="write per-step CSV here")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("ensemble", help="run a seeded campaign over phase/photon cells")
    p.add_argument("--config", default=None, help="campaign JSON (flags override the seed)")
    p.add_argument("--protocol", choices=[MODE_FIXED, MODE_LADDER, MODE_OPTIMAL], default=MODE_OPTIMAL)
    p.add_argument("--phi-true", default=None, help="comma-separated true phases")
    p.add_argument(
        "--mean-photons",
        dest="mean_photons_list",
        default="4",
        help="comma-separated mean photon numbers (default 4)",
    )
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--measurements", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None, help="master seed (default: SU11_SEED or 7)")
    p.add_argument("--theta", type=float, default=None, help="feedback phase (fixed mode)")
    p.add_argument("--pre-rounds", type=int, default=100)
    p.add_argument("--ramp-cap", type=float, default=0.5)
    p.add_argument("--final-fraction", type=float, default=0.93)
    p.add_argument("--initial-theta", type=float, default=None)
    p.add_argument("--workers", type=int, default=1, help="worker processes over cells")
    p.add_argument("--label", default="", help="free-form label echoed in outputs")
    _add_grid_flags(p)
    _add_model_flags(p)
    p.add_argument("--out", default=None, help="write campaign JSON here instead of stdout")
    p.add_argument("--cells-csv", default=None, help="write per-cell statistics CSV here")
    p.add_argument("--trials-csv", default=None, help="write per-trial estimates CSV here")
    p.set_defaults(func=_cmd_ensemble)

    p = sub.add_parser("threshold", help="scan ambiguity-breaking time over feedback phases")
    p.add_argument("--thetas", required=True, help="comma-separated feedback phases")
    p.add_argument("--phi-true", type=float, required=True)
    p.add_argument("--mean-photons", type=float, required=True)
    p.add_argument("--trials", type=int, default=60)
    p.add_argument("--max-measurements", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None, help="master seed (default: SU11_SEED or 7)")
    _add_grid_flags(p)
    p.add_argument("--n-max", type=int, default=16)
    p.add_argument("--tail-tol", type=float, default=1e-12)
    p.add_argument("--out", default=None, help="write scan JSON here instead of stdout")
    p.add_argument("--csv", default=None, help="write scan rows CSV here")
    p.set_defaults(func=_cmd_threshold)

    p = sub.add_parser("verify", help="run the self-verification battery")
    p.add_argument("--fast", action="store_true", help="smaller draw counts and coarser sweeps")
    p.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SU11Error, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
