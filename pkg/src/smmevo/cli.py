"""Command-line experiment runner.

Subcommands:

* ``evolve``            — run one paradigm for several trials
* ``sweep``             — run all nine selection paradigms
* ``validate-mutation`` — gene-value distribution fits and bias traces
* ``payoff``            — inspect one pairwise interaction on all backends
* ``figures``           — regenerate SVG plots from an existing run directory

Artifacts are plain CSV/JSON plus SVG plots; every run directory carries a
manifest that pins the config, seed, and PRNG scheme, so a finished run can
be reproduced bit for bit. Exit codes: 0 success, 1 bad configuration,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import seeds
from .automaton import CANONICAL_NAMES, canonical, load_file
from .config import ConfigError, RunConfig, config_from_mapping, load_config
from .evolution import PARADIGMS, get_paradigm, run_simulation
from .games import get_game
from .metrics import density_fit, mutation_bias_trace
from .mutation import with_mechanism
from .payoff import (EngineParams, joint_chain_payoff, marginal_fixed_point,
                     monte_carlo_payoff)

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "SMMEVO_OUTPUT_ROOT"
CSV_SCHEMA = 1
RECORD_COLUMNS = ("generation", "mean_score", "ratio_cc", "ratio_cd",
                  "ratio_dd", "homogeneity")
SUMMARY_COLUMNS = ("trial", "mean_score", "min_cooperation_bound")


def _version() -> str:
    try:
        return metadata.version("smmevo")
    except metadata.PackageNotFoundError:
        return "unknown"


def _out_dir(config: RunConfig) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV, "")
    path = Path(config.out_dir)
    if root and not path.is_absolute():
        path = Path(root) / path
    path.mkdir(parents=True, exist_ok=True)
    return path


# -- manifest -----------------------------------------------------------------


def _write_manifest(out: Path, config: RunConfig, status: str,
                    trials=None, timings=None):
    game = get_game(config.game)
    manifest = {
        "status": status,
        "config": config.as_dict(),
        # resolved stage-game cells, so a run directory is self-describing
        # even when the game was given by name
        "game": {"name": game.name, "payoff": {
            "CC": list(game.table[0, 0]), "CD": list(game.table[0, 1]),
            "DC": list(game.table[1, 0]), "DD": list(game.table[1, 1])}},
        "seed": config.seed,
        "version": _version(),
        "prng": seeds.PRNG_FAMILY,
        "csv_schema": CSV_SCHEMA,
        "trial_paths": trials or [],
        "timings_sec": timings or {},
    }
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    return manifest


# -- CSV helpers --------------------------------------------------------------


def _write_csv(path: Path, columns, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(columns)
        w.writerows(rows)


def _read_csv(path: Path, columns) -> np.ndarray:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != list(columns):
            raise ConfigError(
                f"{path}: unexpected CSV header {header}; expected {list(columns)}")
        return np.array([[float(x) for x in row] for row in reader])


def _records_to_rows(records):
    return [(r.generation, f"{r.mean_score:.12g}", f"{r.ratio_cc:.12g}",
             f"{r.ratio_cd:.12g}", f"{r.ratio_dd:.12g}",
             f"{r.homogeneity:.12g}") for r in records]


# -- plotting -----------------------------------------------------------------


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    # deterministic SVG output: stable element ids, no embedded timestamp
    matplotlib.rcParams["svg.hashsalt"] = "smmevo"
    import matplotlib.pyplot as plt
    return plt


def _savefig(fig, path):
    fig.savefig(path, metadata={"Date": None})


def _windowed(series: np.ndarray, window: int) -> np.ndarray:
    if window <= 1:
        return series
    kernel = np.ones(window) / window
    return np.convolve(series, kernel, mode="valid")


def _plot_score_histogram(out: Path, means, title: str):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist(means, bins=10, range=(2.0, 3.0), edgecolor="black")
    ax.set_xlabel("trial mean score")
    ax.set_ylabel("trials")
    ax.set_title(title)
    fig.tight_layout()
    _savefig(fig, out / "score_histogram.svg")
    plt.close(fig)


def _plot_ratios(out: Path, table: np.ndarray, window: int, title: str):
    plt = _plt()
    gens = table[:, 0]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for idx, label in ((1, "CC"), (2, "CD"), (3, "DD")):
        smoothed = _windowed(table[:, idx + 1], window)
        ax.plot(gens[len(gens) - len(smoothed):], smoothed, label=label)
    ax.set_xlabel("generation")
    ax.set_ylabel(f"interaction ratio ({window}-generation mean)")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    ax.set_title(title)
    fig.tight_layout()
    _savefig(fig, out / "interaction_ratios.svg")
    plt.close(fig)


def _plot_homogeneity(out: Path, tables, title: str):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for t, table in enumerate(tables):
        ax.plot(table[:, 0], table[:, 5], alpha=0.6, label=f"trial {t}")
    ax.set_xlabel("generation")
    ax.set_ylabel("homogeneity D(t)")
    if len(tables) <= 10:
        ax.legend(fontsize="x-small")
    ax.set_title(title)
    fig.tight_layout()
    _savefig(fig, out / "homogeneity.svg")
    plt.close(fig)


# -- evolve / sweep -----------------------------------------------------------


def _trial_dir(out: Path, trial: int) -> Path:
    return out / f"trial_{trial:03d}"


def run_evolve(config: RunConfig, out: Path | None = None) -> dict:
    """Run ``config.trials`` simulations; returns the finalized manifest."""
    out = _out_dir(config) if out is None else out
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, config, "running")
    game = get_game(config.game)
    paradigm = get_paradigm(config.paradigm)
    trial_paths, timings = [], {}
    for trial in range(config.trials):
        tdir = _trial_dir(out, trial)
        records_path = tdir / "records.csv"
        trial_paths.append(str(records_path.relative_to(out)))
        if records_path.exists():
            log.info("trial %d: %s exists, skipping (resume)", trial, records_path)
            continue
        tdir.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        records = run_simulation(
            config.n_agents, config.n_states, config.generations, paradigm,
            game, config.mutation_params(), config.engine_params(),
            seed=config.seed, trial=trial, survival_eval=config.survival_eval,
            snapshot_every=config.snapshot_every)
        _write_csv(records_path, RECORD_COLUMNS, _records_to_rows(records))
        if config.snapshot_every > 0:
            snaps = {str(r.generation): r.genotypes
                     for r in records if r.genotypes is not None}
            with open(tdir / "genotypes.json", "w") as f:
                json.dump(snaps, f)
        timings[f"trial_{trial}"] = round(time.perf_counter() - start, 3)
    summary_rows = []
    for trial in range(config.trials):
        table = _read_csv(_trial_dir(out, trial) / "records.csv", RECORD_COLUMNS)
        scores = table[config.burn_in:, 1]  # row 0 is generation 0
        mean = float(scores.mean())
        bound = min(1.0, max(0.0, 2.0 * (mean - 2.5)))
        summary_rows.append((trial, f"{mean:.12g}", f"{bound:.12g}"))
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary_rows)
    if config.plot:
        render_figures(out)
    return _write_manifest(out, config, "done", trial_paths, timings)


def run_sweep(config: RunConfig, out: Path | None = None) -> dict:
    """Run every paradigm (a)-(i) with otherwise identical settings."""
    out = _out_dir(config) if out is None else out
    rows = []
    for label in sorted(PARADIGMS):
        sub = config_from_mapping({**config.as_dict(), "kind": "evolve",
                                   "paradigm": label,
                                   "out_dir": str(out / f"paradigm_{label}")})
        run_evolve(sub, out / f"paradigm_{label}")
        table = _read_csv(out / f"paradigm_{label}" / "summary.csv", SUMMARY_COLUMNS)
        means = table[:, 1]
        rows.append((label, f"{means.mean():.12g}",
                     f"{(means >= 2.75).mean():.12g}"))
    _write_csv(out / "sweep_summary.csv",
               ("paradigm", "mean_of_trial_means", "fraction_at_2.75"), rows)
    return _write_manifest(out, config, "done",
                           [f"paradigm_{label}" for label in sorted(PARADIGMS)])


# -- validate-mutation --------------------------------------------------------


def run_validate_mutation(config: RunConfig, out: Path | None = None) -> dict:
    """Distribution fits across dims plus the bias-trace comparison."""
    out = _out_dir(config) if out is None else out
    _write_manifest(out, config, "running")
    base = config.mutation_params()
    mechanisms = ("pairwise", "linear_normalization")
    fits = []
    hist_rows = []
    for dim in config.dims:
        for m, mech in enumerate(mechanisms):
            params = with_mechanism(base, mech)
            rng = seeds.stream(config.seed, 3, dim, m)
            fit = density_fit(params, dim, config.iterations, bins=config.bins,
                              rng=rng)
            fits.append({
                "mechanism": mech, "dim": dim, "samples": fit.samples,
                "statistic": fit.gof.statistic, "dof": fit.gof.degrees_of_freedom,
                "p_value": fit.gof.p_value, "rejected_at_0.05": fit.gof.rejected(),
            })
            for lo, hi, count in zip(fit.bin_edges[:-1], fit.bin_edges[1:],
                                     fit.histogram):
                hist_rows.append((mech, dim, f"{lo:.6g}", f"{hi:.6g}", int(count)))
    with open(out / "fits.json", "w") as f:
        json.dump({"fits": fits}, f, indent=2)
        f.write("\n")
    _write_csv(out / "histograms.csv",
               ("mechanism", "dim", "bin_lo", "bin_hi", "count"), hist_rows)

    trace_dim = min(config.dims)
    trace_rows = []
    traces = {}
    for m, mech in enumerate(mechanisms):
        params = with_mechanism(base, mech)
        rng = seeds.stream(config.seed, 4, m)
        trace = mutation_bias_trace(params, trace_dim, config.iterations, rng=rng)
        traces[mech] = trace
        trace_rows += [(mech, t, f"{cp:.12g}") for t, cp in trace]
    _write_csv(out / "bias_trace.csv",
               ("mechanism", "iteration", "complement_p"), trace_rows)

    if config.plot:
        plt = _plt()
        fig, axes = plt.subplots(1, 2, figsize=(8, 3.2), sharey=True)
        for ax, mech in zip(axes, mechanisms):
            rows = [r for r in hist_rows if r[0] == mech and r[1] == trace_dim]
            centers = [(float(r[2]) + float(r[3])) / 2 for r in rows]
            counts = [r[4] for r in rows]
            ax.bar(centers, counts, width=1.0 / config.bins * 0.9)
            ax.set_title(f"{mech}, dim {trace_dim}")
            ax.set_xlabel("gene value")
        axes[0].set_ylabel("count")
        fig.tight_layout()
        _savefig(fig, out / "gene_value_histograms.svg")
        plt.close(fig)
        fig, ax = plt.subplots(figsize=(5.5, 3.5))
        for mech in mechanisms:
            ts = [t for t, _ in traces[mech]]
            cs = [c for _, c in traces[mech]]
            ax.plot(ts, cs, marker="o", label=mech)
        ax.set_xscale("log")
        ax.set_xlabel("iterations")
        ax.set_ylabel("complement p-value")
        ax.set_ylim(-0.05, 1.05)
        ax.legend()
        fig.tight_layout()
        _savefig(fig, out / "bias_trace.svg")
        plt.close(fig)
    return _write_manifest(out, config, "done")


# -- payoff inspection --------------------------------------------------------


def _load_genotype(ref: str):
    if ref in CANONICAL_NAMES:
        return canonical(ref)
    return load_file(ref)


def run_payoff(ref_i: str, ref_j: str, game_spec, engine: EngineParams,
               seed: int, out_path: str | None = None) -> dict:
    """Evaluate one pair on all three backends side by side."""
    m_i = _load_genotype(ref_i)
    m_j = _load_genotype(ref_j)
    game = get_game(game_spec)
    results = {
        "marginal": marginal_fixed_point(m_i, m_j, game, engine.tol,
                                         engine.max_iter, engine.action_update),
        "joint": joint_chain_payoff(m_i, m_j, game, engine.tol,
                                    max(engine.max_iter, 1000)),
        "monte_carlo": monte_carlo_payoff(m_i, m_j, game, engine.k, engine.reps,
                                          seeds.stream(seed, 5)),
    }
    report = {"machine_i": ref_i, "machine_j": ref_j, "game": game.name,
              "backends": {name: r.as_dict() for name, r in results.items()}}
    print(f"{m_i.output_string()!r} vs {m_j.output_string()!r} on {game.name}")
    print(f"{'backend':<14} {'u_i':>8} {'u_j':>8} {'P(C)_i':>8} {'P(C)_j':>8} "
          f"{'iters':>6} {'conv':>5}")
    for name, r in results.items():
        print(f"{name:<14} {r.u_i:8.4f} {r.u_j:8.4f} {r.a_i_horizon[0]:8.4f} "
              f"{r.a_j_horizon[0]:8.4f} {r.iterations:6d} {str(r.converged):>5}")
    if out_path:
        with open(out_path, "w") as f:
            json.dump(report, f, indent=2)
            f.write("\n")
    return report


# -- figures ------------------------------------------------------------------


def render_figures(out: Path) -> None:
    """(Re)draw all SVGs for a run directory from its CSVs alone."""
    summary = _read_csv(out / "summary.csv", SUMMARY_COLUMNS)
    _plot_score_histogram(out, summary[:, 1], out.name)
    tables = []
    trial = 0
    while _trial_dir(out, trial).exists():
        tables.append(_read_csv(_trial_dir(out, trial) / "records.csv",
                                RECORD_COLUMNS))
        trial += 1
    if tables:
        with open(out / "manifest.json") as f:
            window = int(json.load(f)["config"].get("window", 5))
        _plot_ratios(out, tables[0], window, f"{out.name} trial 0")
        _plot_homogeneity(out, tables, out.name)


def run_figures(config: RunConfig) -> None:
    out = _out_dir(config)
    if not (out / "summary.csv").exists():
        raise ConfigError(f"out_dir: no summary.csv under {out}; "
                          "run `smmevo evolve` first")
    render_figures(out)


# -- argument parsing ---------------------------------------------------------


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML or JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--no-plot", dest="plot", action="store_false", default=None)


def _add_evolve_flags(p: argparse.ArgumentParser):
    p.add_argument("--game")
    p.add_argument("--paradigm", help='label "(a)"-"(i)"')
    p.add_argument("--n-agents", dest="n_agents", type=int)
    p.add_argument("--n-states", dest="n_states", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--mechanism")
    p.add_argument("--boundary")
    p.add_argument("--backend")
    p.add_argument("--snapshot-every", dest="snapshot_every", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smmevo",
        description="Evolve populations of stochastic Moore machines "
                    "playing iterated 2x2 games.")
    parser.add_argument("--version", action="version", version=_version())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="run one selection paradigm")
    _add_common(p)
    _add_evolve_flags(p)

    p = sub.add_parser("sweep", help="run all nine selection paradigms")
    _add_common(p)
    _add_evolve_flags(p)

    p = sub.add_parser("validate-mutation",
                       help="distribution fits and bias traces")
    _add_common(p)
    p.add_argument("--dims", type=int, nargs="+")
    p.add_argument("--iterations", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--bins", type=int)

    p = sub.add_parser("payoff", help="inspect one pairwise interaction")
    p.add_argument("machine_i", help="genotype JSON file or canonical name")
    p.add_argument("machine_j", help="genotype JSON file or canonical name")
    p.add_argument("--game", default="prisoners_dilemma")
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="also write the report as JSON")

    p = sub.add_parser("figures", help="regenerate SVGs from an existing run")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    return parser


_CONFIG_KEYS = ("game", "paradigm", "n_agents", "n_states", "generations",
                "trials", "burn_in", "sigma", "mechanism", "boundary",
                "backend", "seed", "out_dir", "plot", "snapshot_every",
                "dims", "iterations", "bins")


def _make_config(args, kind: str) -> RunConfig:
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if getattr(args, "dims", None) is not None:
        overrides["dims"] = tuple(args.dims)
    if args.config:
        return load_config(args.config, kind=kind, **overrides)
    return config_from_mapping({"kind": kind}, **overrides)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "evolve":
            run_evolve(_make_config(args, "evolve"))
        elif args.command == "sweep":
            run_sweep(_make_config(args, "sweep"))
        elif args.command == "validate-mutation":
            run_validate_mutation(_make_config(args, "validate-mutation"))
        elif args.command == "payoff":
            run_payoff(args.machine_i, args.machine_j, args.game,
                       EngineParams(tol=args.tol, k=args.k, reps=args.reps),
                       args.seed, args.out)
        elif args.command == "figures":
            run_figures(config_from_mapping(
                {"kind": "figures", "out_dir": args.out_dir, "seed": 0}))
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - CLI boundary
        log.exception("run failed")
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
