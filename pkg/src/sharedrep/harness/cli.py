"""``shared-rep`` command line.

Exit status: 0 on success, 2 for configuration or input errors, 3 for
numeric failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..errors import CovarianceError, NumericError, SharedRepError
from ..io import load_bundle, load_estimate, read_client_csv, save_bundle, save_estimate
from ..model import generate_ground_truth, sample_dataset, sample_partitions
from ..subspace import principal_angle_distance
from ..transfer import fit_new_client, private_fit_new_client
from .._rng import derive_seed
from .analysis import classify_phase
from .config import FIGURES, PROFILES, load_config_file, preset_grid
from .plots import RECIPES, emit_plot_data
from .runner import _estimate, read_results, sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
_FIGURE_RECIPE = {"fig2": "fig2_style", "fig3": "fig3_style", "fig4": "fig4_style", "fig5": "fig5_style"}


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="key-value experiment file (INI syntax)")
    p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    p.add_argument("--parallelism", type=int, default=1, help="worker processes for sweeps")
    p.add_argument("--out-dir", default=".", help="directory for output files")
    p.add_argument("--profile", choices=sorted(PROFILES), default="desk", help="scale preset")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="shared-rep", description="Shared linear representation estimation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="sample a synthetic federated dataset bundle")
    g.add_argument("--d", type=int)
    g.add_argument("--k", type=int, default=10)
    g.add_argument("--M", type=int)
    g.add_argument("--partitions", help="equal:n, uniform:lo:hi or explicit:n1,n2,...")
    g.add_argument("--gamma", default="identity", help="identity, diagonal or dense[:cond]")
    g.add_argument("--noise-sigma", type=float, default=1.0)

    e = sub.add_parser("estimate", parents=[common], help="estimate the shared basis from a bundle")
    e.add_argument("bundle", help="bundle directory written by 'generate'")
    e.add_argument("--estimator", default="replica", help="replica, multigroup[:g], mom or pairwise")
    e.add_argument("--k", type=int, help="basis rank (defaults to the bundle's k)")

    s = sub.add_parser("sweep", parents=[common], help="run an experiment grid and write results.csv")
    s.add_argument("--figure", choices=FIGURES, default="fig2", help="preset grid when --config is absent")
    s.add_argument("--setup", type=int, choices=(1, 2), default=1, help="client setup for fig4/fig5")
    s.add_argument("--repetitions", type=int, default=10)
    s.add_argument("--timings", action="store_true", help="record wallclock_ms instead of NA")
    s.add_argument("--plot", action="store_true", help="also emit plot data for the preset figure")

    t = sub.add_parser("transfer", parents=[common], help="fit a new client on a saved basis")
    t.add_argument("estimate", help="estimate CSV written by 'estimate'")
    t.add_argument("client", help="client CSV with columns x_1..x_d,y")
    t.add_argument("--epsilon", type=float)
    t.add_argument("--delta", type=float)
    t.add_argument("--clip-bound", type=float, default=10.0)

    ph = sub.add_parser("phase", parents=[common], help="classify a (beta, gamma, delta) scaling point")
    ph.add_argument("beta", type=float)
    ph.add_argument("gamma", type=float)
    ph.add_argument("delta", type=float)

    pl = sub.add_parser("plot", parents=[common], help="summarise a results CSV for plotting")
    pl.add_argument("results", help="results.csv from 'sweep'")
    pl.add_argument("--recipe", choices=sorted(RECIPES), required=True)
    pl.add_argument("--svg", action="store_true")
    return parser


def _seed(args) -> int:
    return 0 if args.seed is None else args.seed


def _cmd_generate(args) -> int:
    prof = PROFILES[args.profile]
    d = args.d or prof["d"]
    M = args.M or prof["M"]
    parts_spec = args.partitions or f"equal:{prof['n']}"
    seed = _seed(args)
    gt = generate_ground_truth(d, args.k, M, args.gamma, seed=derive_seed(seed, 0), noise_sigma=args.noise_sigma)
    partitions = sample_partitions(parts_spec, M, seed=derive_seed(seed, 1))
    ds = sample_dataset(gt, partitions, derive_seed(seed, 2))
    out = save_bundle(args.out_dir, ds, gt, seed=seed, partition_scheme=parts_spec, gamma_profile=args.gamma)
    print(f"wrote bundle with N={ds.N} samples from M={M} clients to {out}")
    return EXIT_OK


def _cmd_estimate(args) -> int:
    ds, gt, manifest = load_bundle(args.bundle)
    k = args.k or manifest.get("k")
    if k is None:
        raise SharedRepError("bundle has no ground truth; pass --k")
    seed = _seed(args)
    est = _estimate(args.estimator, ds, int(k), seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"estimate_{args.estimator.replace(':', '_')}.csv"
    meta = {"seed": seed, "bundle": str(args.bundle), "degenerate": est.degenerate}
    if gt is not None:
        meta["sin_theta_error"] = principal_angle_distance(est, gt.B_star)
        print(f"sin-theta distance to the true basis: {meta['sin_theta_error']:.6f}")
    save_estimate(path, est, **meta)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    if args.config:
        grid = load_config_file(args.config, master_seed=args.seed)
    else:
        grid = preset_grid(args.profile, args.figure, master_seed=_seed(args), repetitions=args.repetitions, setup=args.setup)
    result = sweep(grid, args.parallelism)
    path = result.write(args.out_dir, include_timing=args.timings)
    failed = sum(r.failed for r in result.rows)
    print(f"wrote {len(result)} rows to {path}" + (f" ({failed} failed, see diagnostics.txt)" if failed else ""))
    if args.plot and not args.config:
        for p in emit_plot_data(result.rows, _FIGURE_RECIPE[args.figure], args.out_dir, svg=True):
            print(f"wrote {p}")
    return EXIT_OK


def _cmd_transfer(args) -> int:
    est, _ = load_estimate(args.estimate)
    X, y = read_client_csv(args.client)
    if args.epsilon is not None or args.delta is not None:
        fit = private_fit_new_client(est, X, y, args.epsilon, args.delta, args.clip_bound, _seed(args))
    else:
        fit = fit_new_client(est, X, y)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    record = {
        "method": fit.method,
        "alpha_hat": fit.alpha_hat.tolist(),
        "theta_hat": fit.theta_hat.tolist(),
        "underdetermined": fit.underdetermined,
        "privacy": None if fit.privacy is None else vars(fit.privacy),
    }
    path = out / "transfer.json"
    path.write_text(json.dumps(record, indent=2) + "\n")
    if fit.underdetermined:
        print("warning: fewer samples than basis columns; minimum-norm head returned", file=sys.stderr)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_phase(args) -> int:
    print(classify_phase(args.beta, args.gamma, args.delta))
    return EXIT_OK


def _cmd_plot(args) -> int:
    rows = read_results(args.results)
    for p in emit_plot_data(rows, args.recipe, args.out_dir, svg=args.svg):
        print(f"wrote {p}")
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate,
    "estimate": _cmd_estimate,
    "sweep": _cmd_sweep,
    "transfer": _cmd_transfer,
    "phase": _cmd_phase,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (NumericError, CovarianceError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SharedRepError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
