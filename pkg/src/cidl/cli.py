"""Command-line pipeline: simulate, learn, evaluate, export.

Exit codes: 0 success, 1 validation/usage error, 2 I/O error.  Thread
count comes from --threads, falling back to the CIDL_THREADS environment
variable, falling back to 1.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys
from pathlib import Path

from .config import RunConfig, kernel_from_config, parse_config
from .errors import CidlError, ConfigError, TensorFormatError, ValidationError
from .learn import default_prune_threshold, learn, prune_report
from .metrics import match_components
from .model import CoefficientMaps, DataCube, Dictionary
from .simulate import simulate_movie
from .tensorio import read_tensor, write_tensor

_FLOAT_FMT = "{:.17g}"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _fmt(v: float) -> str:
    return _FLOAT_FMT.format(float(v))


def _load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig.defaults()
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    return parse_config(p.read_text(encoding="utf-8"))


def _read_components(dirpath: Path) -> tuple[Dictionary, CoefficientMaps | None]:
    """Read a learned-output or ground-truth directory.

    Accepts either naming so evaluate can compare any two result sets:
    dictionary.tnsr/traces.tnsr and coefficients.tnsr/maps.tnsr.
    """
    traces = None
    for name in ("dictionary.tnsr", "traces.tnsr"):
        if (dirpath / name).exists():
            traces = read_tensor(dirpath / name)
            break
    if traces is None:
        raise FileNotFoundError(f"no dictionary.tnsr or traces.tnsr in {dirpath}")
    maps = None
    for name in ("coefficients.tnsr", "maps.tnsr"):
        if (dirpath / name).exists():
            maps = read_tensor(dirpath / name)
            break
    return Dictionary(traces), None if maps is None else CoefficientMaps(maps)


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    sim = cfg.sim if args.seed is None else dataclasses.replace(cfg.sim, seed=args.seed)
    movie, truth = simulate_movie(sim)
    write_tensor(args.out_movie, movie.data)
    out = Path(args.out_truth)
    out.mkdir(parents=True, exist_ok=True)
    write_tensor(out / "traces.tnsr", truth.true_dictionary.traces)
    write_tensor(out / "maps.tnsr", truth.true_maps.maps)
    with open(out / "spikes.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["component", "frame", "amplitude"])
        for k, ev in enumerate(truth.spike_trains):
            for t, a in ev:
                w.writerow([k, t, _fmt(a)])
    (out / "meta.txt").write_text(f"noise_sigma = {_fmt(truth.noise_sigma)}\n")
    print(f"wrote movie {movie.data.shape} to {args.out_movie}, truth to {out}")
    return 0


def _cmd_learn(args) -> int:
    cfg = _load_config(args.config)
    movie_path = Path(args.movie)
    if not movie_path.exists():
        raise FileNotFoundError(f"movie file not found: {movie_path}")
    Y = DataCube(read_tensor(movie_path))
    W = kernel_from_config(cfg)
    seed = args.seed if args.seed is not None else 0
    threads = _resolve_threads(args.threads)

    def progress(it, row):
        print(f"iter {it + 1:3d}  objective {row['objective']:.6e}  "
              f"dict change {row['rel_dict_change']:.3e}  "
              f"active {row['n_active_coeffs']}", flush=True)

    result = learn(Y, W, cfg.model, cfg.n_atoms, seed=seed,
                   solver_opts=cfg.solver, n_threads=threads, progress=progress)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_tensor(out / "dictionary.tnsr", result.dictionary.traces)
    write_tensor(out / "coefficients.tnsr", result.coefficients.maps)
    write_tensor(out / "weights.tnsr", result.weights.weights)
    with open(out / "diagnostics.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["iteration", "objective", "rel_dict_change",
                    "n_active_coeffs", "wall_time_s"])
        d = result.diagnostics
        for i in range(d.n_iters):
            w.writerow([i + 1, _fmt(d.objective[i]), _fmt(d.rel_dict_change[i]),
                        d.n_active_coeffs[i], _fmt(d.wall_time_s[i])])
    thresh = default_prune_threshold(result.dictionary, result.coefficients)
    pruned = prune_report(result.dictionary, result.coefficients, thresh)
    with open(out / "prune_report.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["column", "trace_norm", "spatial_energy"])
        for k, tn, sn in pruned:
            w.writerow([k, _fmt(tn), _fmt(sn)])
    from .figures import save_diagnostics_figure
    save_diagnostics_figure(result.diagnostics, out / "diagnostics.png")
    status = "converged" if result.converged else "max iterations reached"
    print(f"{status} after {result.diagnostics.n_iters} iterations; "
          f"{len(pruned)} columns below prune threshold; output in {out}")
    return 0


def _cmd_evaluate(args) -> int:
    learned_dir, truth_dir = Path(args.learned), Path(args.truth)
    for d in (learned_dir, truth_dir):
        if not d.exists():
            raise FileNotFoundError(f"directory not found: {d}")
    learned, learned_maps = _read_components(learned_dir)
    truth, true_maps = _read_components(truth_dir)
    report = match_components(learned, truth, learned_maps, true_maps,
                              learned_coeffs=learned_maps)
    out = Path(args.out)
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["learned_index", "true_index", "trace_correlation",
                    "spatial_cosine"])
        for (a, b), corr, cos in zip(report.assignment,
                                     report.trace_correlations,
                                     report.spatial_cosines):
            w.writerow([a, b, _fmt(corr), _fmt(cos)])
    from .figures import save_match_figure
    save_match_figure(report, learned, truth, out.with_suffix(".png"))
    print(f"{report.n_recovered}/{len(report.assignment)} pairs at "
          f"correlation >= {report.correlation_threshold}; report in {out}")
    return 0


def _cmd_export(args) -> int:
    learned_dir = Path(args.learned)
    if not learned_dir.exists():
        raise FileNotFoundError(f"directory not found: {learned_dir}")
    if args.format != "csv":
        raise ValidationError(f"unsupported export format {args.format!r}")
    dictionary, maps = _read_components(learned_dir)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "traces.csv", "w", newline="") as f:
        w = csv.writer(f)
        for row in dictionary.traces:
            w.writerow([_fmt(v) for v in row])
    if maps is not None:
        for k in range(maps.n_atoms):
            with open(out / f"map_{k:03d}.csv", "w", newline="") as f:
                w = csv.writer(f)
                for row in maps.slice(k):
                    w.writerow([_fmt(v) for v in row])
    print(f"exported {dictionary.n_atoms} traces to {out}")
    return 0


def _resolve_threads(flag_value: int | None) -> int:
    if flag_value is not None:
        n = flag_value
    else:
        env = os.environ.get("CIDL_THREADS", "").strip()
        n = int(env) if env else 1
    if n < 1:
        raise ValidationError("thread count must be >= 1")
    return n


def _build_parser() -> _Parser:
    p = _Parser(prog="cidl", description="Temporal trace dictionary learning "
                "for fluorescence movies")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic movie with ground truth")
    s.add_argument("--config", default=None)
    s.add_argument("--out-movie", required=True)
    s.add_argument("--out-truth", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(func=_cmd_simulate)

    s = sub.add_parser("learn", help="learn a trace dictionary from a movie")
    s.add_argument("--config", default=None)
    s.add_argument("--movie", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--threads", type=int, default=None)
    s.set_defaults(func=_cmd_learn)

    s = sub.add_parser("evaluate", help="match learned components against truth")
    s.add_argument("--learned", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_evaluate)

    s = sub.add_parser("export", help="export learned results as delimited text")
    s.add_argument("--learned", required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--format", default="csv", choices=["csv"])
    s.set_defaults(func=_cmd_export)
    return p


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (FileNotFoundError, OSError, TensorFormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValidationError, CidlError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():  # console entry point
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
