"""Command-line surface: analytic tables, simulation runs, bunch reports,
timescales, and the cross-validation suite.

All times are in units of 1/gamma (gamma defaults to 1). Report commands
emit CSV tables and render the corresponding matplotlib figures next to
them.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bunching, conditional, figures, steady, timescales, verify
from .dicke import SystemParams
from .records import (
    ExperimentConfig,
    check_same_manifest,
    manifest_hash,
    read_clicks,
    read_manifest,
    read_snapshots,
    write_clicks,
    write_csv,
    write_manifest,
    write_snapshots,
)
from .trajectory import TrajectoryConfig, run_batch

_VARIANT_BY_LETTER = {"a": "recount_all", "b": "quiet_trans", "c": "quiet_all"}


def _parse_orders(text):
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",")]


def _emit(rows, header, path=None, digest=None):
    if path is None:
        print(",".join(header))
        for row in rows:
            print(",".join(str(c) for c in row))
    else:
        write_csv(path, header, rows, digest)
        print(f"wrote {path}")


def cmd_analytic(args):
    params = SystemParams(n_atoms=args.n_atoms, omega=args.g * args.gamma, gamma=args.gamma)
    outdir = Path(args.output) if args.output else None
    if outdir:
        outdir.mkdir(parents=True, exist_ok=True)

    rows = []
    if args.g > 0:
        d = steady.normalization_d(params.n_atoms, params.g_abs)
        rates = steady.scattered_rates(params)
        rows += [
            ("normalization_D", repr(d)),
            ("n_ref", repr(rates.n_ref)),
            ("n_trans", repr(rates.n_trans)),
            ("n_ref_coh", repr(rates.n_ref_coh)),
            ("n_trans_coh", repr(rates.n_trans_coh)),
            ("n_inc", repr(rates.n_inc)),
            ("balance_residual", repr(rates.total - params.gamma * params.g_abs**2)),
        ]
        for order in args.orders:
            for channel in ("trans", "ref"):
                rows.append(
                    (f"G{order}_{channel}", repr(steady.g_correlation(params, order, channel)))
                )
            g1 = steady.g_correlation(params, 1, "trans")
            if g1 > 0:
                rows.append(
                    (f"g{order}_trans", repr(steady.g_coherence(params, order, "trans")))
                )
    if args.conditional:
        state = {
            "any": conditional.conditional_any_click,
            "first": conditional.first_click_distribution,
            "full": conditional.fully_excited_conditional,
        }[args.conditional](params.n_atoms)
        for k, p in enumerate(state.populations):
            rows.append((f"population_k{k}_{state.scheme}", repr(float(p))))
    if args.timescales or args.quantile:
        rows.append(("T_in", repr(timescales.t_in(params.n_atoms, params.gamma))))
        rows.append(("T_out_avg", repr(timescales.t_out_avg(params.n_atoms, params.gamma))))
        model = timescales.relaxation_model(params.n_atoms, params.gamma)
        for p in args.quantile or [0.99]:
            rows.append((f"T_out_q{p}", repr(timescales.t_out_quantile(model, p))))
    _emit(rows, ["quantity", "value"], outdir / "analytic.csv" if outdir else None)
    if outdir and args.g > 0:
        grid = np.logspace(-2, 2, 60)
        figures.save_figure(
            figures.rates_figure(params.n_atoms, grid, params.gamma),
            outdir / "scattered_rates.png",
        )
        print(f"wrote {outdir / 'scattered_rates.png'}")
    return 0


def cmd_timescales(args):
    rows = [
        ("T_in", repr(timescales.t_in(args.n_atoms, args.gamma))),
        ("T_in_large_N", repr(timescales.t_in_large_n(args.n_atoms, args.gamma))),
        ("T_out_avg", repr(timescales.t_out_avg(args.n_atoms, args.gamma))),
    ]
    model = timescales.relaxation_model(args.n_atoms, args.gamma)
    for p in args.quantile or [0.99]:
        rows.append((f"T_out_q{p}", repr(timescales.t_out_quantile(model, p))))
    if args.n_atoms == 2:
        # the closed form gives sqrt(3) ~ 1.732; 1.70 appears in some
        # tabulations and the difference is reported rather than hidden
        rows.append(("T_in_exact_sqrt3", repr(float(np.sqrt(3.0)))))
    _emit(rows, ["quantity", "value"])
    return 0


def _load_config(args) -> ExperimentConfig:
    if args.config:
        return ExperimentConfig.from_json(Path(args.config).read_text())
    if not args.drives:
        raise SystemExit("either --config or --drives is required")
    return ExperimentConfig(
        n_atoms=args.n_atoms,
        drive_grid=[float(d) for d in args.drives],
        t_end=args.t_end,
        burn_in=args.burn_in,
        gamma=args.gamma,
        seed=args.seed,
        n_trajectories=args.trajectories,
        output_dir=args.output,
    )


def cmd_simulate(args):
    config = _load_config(args)
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    digest = write_manifest(outdir / "manifest.json", config)
    print(f"manifest {digest}")
    for i, drive in enumerate(config.drive_grid):
        params = SystemParams.from_drive(config.n_atoms, drive, config.gamma)
        tc = TrajectoryConfig(
            params=params,
            t_end=config.t_end,
            n_trajectories=config.n_trajectories,
            seed=config.seed,
            burn_in=config.burn_in,
            dt=config.dt,
            record_conditional_states=True,
            stream_offset=i * (1 << 32),
        )
        stream, snapshots, _ = run_batch(tc, n_workers=args.workers)
        write_clicks(outdir / f"clicks_{i:02d}.jsonl", stream, digest)
        write_snapshots(outdir / f"snapshots_{i:02d}.jsonl", snapshots, digest)
        print(
            f"drive {drive:g}: {len(stream)} clicks, {len(snapshots)} snapshots "
            f"-> clicks_{i:02d}.jsonl"
        )
    return 0


def cmd_bunches(args):
    rundir = Path(args.input)
    manifest_path = rundir / "manifest.json"
    if not manifest_path.exists():
        raise SystemExit(f"no manifest.json under {rundir}")
    digest, config = read_manifest(manifest_path)
    outdir = Path(args.output) if args.output else rundir
    outdir.mkdir(parents=True, exist_ok=True)

    t_in_window = config.resolve_t_in()
    t_out_window = config.resolve_t_out()
    variants = [_VARIANT_BY_LETTER[v] for v in args.definitions]

    prob_rows, pop_rows = [], []
    hists_by_variant = {v: [] for v in variants}
    weakest = min(config.drive_grid)
    for i, drive in enumerate(sorted(config.drive_grid)):
        index = config.drive_grid.index(drive)
        stream, d1 = read_clicks(rundir / f"clicks_{index:02d}.jsonl")
        snapshots, d2 = read_snapshots(rundir / f"snapshots_{index:02d}.jsonl")
        check_same_manifest([digest, d1, d2])
        params = SystemParams.from_drive(config.n_atoms, drive, config.gamma)
        for variant in variants:
            definition = bunching.FirstClickDefinition(variant, t_in_window)
            first = bunching.find_first_clicks(stream, definition)
            if first.size == 0:
                continue
            hist = bunching.bunch_sizes(
                stream, first, t_out_window, drive=drive,
                definition=definition, alpha_sq=params.alpha_sq,
            )
            hists_by_variant[variant].append(hist)
            for size in sorted(hist.probabilities):
                p, err = hist.probabilities[size]
                prob_rows.append((drive, variant, size, repr(p), repr(err)))
            mean, err = bunching.conditional_populations(snapshots, stream, first)
            for k, (m, e) in enumerate(zip(mean, err)):
                pop_rows.append((drive, variant, k, repr(m), repr(e)))
            if drive == weakest:
                reference = {
                    "recount_all": conditional.conditional_any_click,
                    "quiet_trans": conditional.first_click_distribution,
                    "quiet_all": conditional.fully_excited_conditional,
                }[variant](config.n_atoms).populations
                figures.save_figure(
                    figures.population_figure(
                        mean, err, reference,
                        title=f"{variant}, drive {drive:g}",
                    ),
                    outdir / f"populations_{variant}.png",
                )

    write_csv(
        outdir / "bunch_probabilities.csv",
        ["drive", "definition", "bunch_size", "probability", "stderr"],
        prob_rows,
        digest,
    )
    write_csv(
        outdir / "conditional_populations.csv",
        ["drive", "definition", "k_excited", "population", "stderr"],
        pop_rows,
        digest,
    )
    print(f"wrote {outdir / 'bunch_probabilities.csv'}")
    print(f"wrote {outdir / 'conditional_populations.csv'}")

    fit = None
    if args.fit:
        quiet_hists = hists_by_variant.get("quiet_all", [])
        if len(quiet_hists) >= 2:
            fit = bunching.fit_timescales(quiet_hists, config.n_atoms, config.gamma)
            write_csv(
                outdir / "fitted_timescales.csv",
                ["t_in_hat", "t_out_hat", "residual", "n_points"],
                [(repr(fit.t_in_hat), repr(fit.t_out_hat), repr(fit.residual), fit.n_points)],
                digest,
            )
            print(
                f"fitted t_in_hat={fit.t_in_hat:.4f} t_out_hat={fit.t_out_hat:.4f} "
                f"-> {outdir / 'fitted_timescales.csv'}"
            )
        else:
            print("fit skipped: need quiet_all histograms at >= 2 drive points")

    for variant, hists in hists_by_variant.items():
        if not hists:
            continue
        model_curves = None
        if variant == "quiet_all" and fit is not None:
            drives = np.geomspace(min(config.drive_grid), max(config.drive_grid), 40)
            sizes = sorted({s for h in hists for s in h.probabilities})
            model_curves = {}
            for size in sizes:
                ys = []
                for d in drives:
                    alpha_sq = config.n_atoms * d * d * config.gamma
                    model = bunching.BunchModel(
                        config.n_atoms, alpha_sq, fit.t_in_hat, fit.t_out_hat
                    )
                    ys.append(bunching.model_pk(model, size))
                model_curves[size] = (drives, np.array(ys))
        figures.save_figure(
            figures.bunch_probability_figure(hists, model_curves),
            outdir / f"bunches_{variant}.png",
        )
        print(f"wrote {outdir / f'bunches_{variant}.png'}")
    return 0


def cmd_verify(args):
    results = verify.run_suite("full" if args.full else "quick")
    width = max(len(r.name) for r in results)
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.name:<{width}}  [{r.seconds:6.2f}s]  {r.detail}")
        failed += not r.passed
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bunchlab",
        description="Photon bunching statistics of waveguide-coupled emitters",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", help="closed-form rates, correlations, states")
    p.add_argument("-N", "--n-atoms", type=int, required=True)
    p.add_argument("-g", type=float, default=0.0, help="normalized drive |g| = Omega/gamma")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--orders", type=_parse_orders, default=[1, 2])
    p.add_argument("--conditional", choices=["any", "first", "full"])
    p.add_argument("--timescales", action="store_true")
    p.add_argument("--quantile", type=float, action="append")
    p.add_argument("-o", "--output", help="directory for CSV + figures")
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("timescales", help="arrival window and relaxation quantiles")
    p.add_argument("-N", "--n-atoms", type=int, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--quantile", type=float, action="append")
    p.set_defaults(func=cmd_timescales)

    p = sub.add_parser("simulate", help="run trajectory batches over a drive grid")
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("-N", "--n-atoms", type=int, default=3)
    p.add_argument("--drives", nargs="*", type=float,
                   help="effective drive amplitudes Omega/(gamma sqrt(N))")
    p.add_argument("--t-end", type=float, default=50.0)
    p.add_argument("--burn-in", type=float, default=10.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=7041)
    p.add_argument("--trajectories", type=int, default=2000)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("-o", "--output", default="runs")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bunches", help="bunch histograms and conditional populations")
    p.add_argument("-i", "--input", required=True, help="simulate output directory")
    p.add_argument("--definitions", default="abc",
                   help="subset of 'abc': recounted / quiet-trans / quiet-all")
    p.add_argument("--fit", action="store_true", help="fit model timescales")
    p.add_argument("-o", "--output", help="report directory (default: input)")
    p.set_defaults(func=cmd_bunches)

    p = sub.add_parser("verify", help="run the cross-validation suite")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--quick", action="store_true", default=True)
    group.add_argument("--full", action="store_true")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
