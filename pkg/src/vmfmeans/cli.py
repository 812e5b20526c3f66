"""Command-line entry points.

Every long option can also be supplied through the environment as
``VMFMEANS_<OPTION>`` (dashes become underscores, e.g. ``VMFMEANS_PHI_LAMBDA``).
Explicit flags win over the environment.

Exit codes: 0 success, 2 usage, 3 data error, 4 non-convergence (outputs are
still written).
"""

from __future__ import annotations

import argparse
import glob
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import bench, dp, io, spkm, synth
from .ddp import DdpConfig, DDPvMFMeans
from .geodesic import NoPrincipalSolution, NonConvergence
from .metrics import LengthMismatch, SingleCluster, nmi, silhouette_cosine
from .sphere import DegenerateGeodesic, DegenerateVector, DimensionMismatch

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NONCONVERGED = 4
ENV_PREFIX = "VMFMEANS_"

DATA_ERRORS = (io.ParseError, io.NormViolation, DegenerateVector, DegenerateGeodesic,
               DimensionMismatch, LengthMismatch, SingleCluster, synth.SeparationInfeasible,
               NoPrincipalSolution, NonConvergence, OSError)


class UsageError(Exception):
    pass


class FrameError(Exception):
    def __init__(self, index: int, path, exc: Exception):
        super().__init__(f"frame {index} ({path}): {exc}")


class _Timer:
    def __init__(self):
        self.ms: dict[str, float] = {}

    def phase(self, name):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.ms[name] = timer.ms.get(name, 0.0) + 1e3 * (time.perf_counter() - self.t0)
        return _Ctx()


# ---------------------------------------------------------------- arguments

def _add_common(p, seed=True):
    p.add_argument("--max-iters", type=int, default=100, dest="max_iters")
    if seed:
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="label-pass worker threads (default: CPU count)")
    p.add_argument("--out-dir", default=".", dest="out_dir")
    p.add_argument("--no-timing", action="store_true", dest="no_timing",
                   help="write zero timings so repeated runs are byte-identical")


def _add_input(p):
    p.add_argument("--auto-normalize", action="store_true", dest="auto_normalize")
    p.add_argument("--format", choices=["text", "bin"], default=None,
                   help="input format (default: detect from magic bytes)")


def _add_lambda(p):
    p.add_argument("--phi-lambda", type=float, default=None, dest="phi_lambda",
                   help="maximum cluster radius in degrees")
    p.add_argument("--lambda", type=float, default=None, dest="lam",
                   help="raw new-cluster offset in [-2, 0]")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vmfmeans", description="Clustering of unit vectors.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dp-fit", help="batch DP-vMF-means")
    p.add_argument("input")
    _add_lambda(p)
    _add_input(p)
    _add_common(p)
    p.add_argument("--truth", default=None, help="true labels for an NMI report")

    p = sub.add_parser("spkm-fit", help="spherical k-means")
    p.add_argument("input")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--restarts", type=int, default=10)
    _add_input(p)
    _add_common(p)
    p.add_argument("--truth", default=None)

    p = sub.add_parser("ddp-stream", help="DDP-vMF-means over a sequence of frames")
    p.add_argument("frames", nargs="*")
    p.add_argument("--manifest", default=None, help="file listing one frame path per line")
    p.add_argument("--glob", default=None, dest="pattern", help="frame glob, sorted lexicographically")
    _add_lambda(p)
    p.add_argument("--beta", type=float, default=1e5)
    p.add_argument("--q", type=float, default=None, dest="q")
    p.add_argument("--q-frac", type=float, default=None, dest="q_frac",
                   help="Q = lambda / q_frac (default 400)")
    _add_input(p)
    _add_common(p, seed=False)

    p = sub.add_parser("synth", help="generate synthetic data")
    p.add_argument("--scenario", default=None, help="JSON stream scenario")
    p.add_argument("--k-t", type=int, default=30, dest="k_t")
    p.add_argument("--n", type=int, default=6000)
    p.add_argument("--tau", type=float, default=120.0)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--min-sep-deg", type=float, default=20.0, dest="min_sep_deg")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["text", "bin"], default="text")
    p.add_argument("--out-dir", default=".", dest="out_dir")

    p = sub.add_parser("eval", help="NMI and silhouette of a labeling")
    p.add_argument("--points", required=True)
    p.add_argument("--truth", required=True, help="reference labels")
    p.add_argument("--pred", required=True, help="labels to score")
    p.add_argument("--max-sample", type=int, default=10000, dest="max_sample")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=None,
                   help="sweep silhouette subsampling over this many seeds")
    _add_input(p)
    p.add_argument("--out-dir", default=".", dest="out_dir")

    p = sub.add_parser("bench", help="seeded K / NMI / silhouette sweep over phi_lambda")
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0, help="first data seed")
    p.add_argument("--phi-grid", default="15:55:2.5", dest="phi_grid",
                   help="start:stop:step or comma list, degrees")
    p.add_argument("--k", type=int, default=30, help="spkm K (0 disables the baseline)")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--k-t", type=int, default=30, dest="k_t")
    p.add_argument("--n", type=int, default=6000)
    p.add_argument("--tau", type=float, default=120.0)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--min-sep-deg", type=float, default=20.0, dest="min_sep_deg")
    p.add_argument("--max-iters", type=int, default=100, dest="max_iters")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", default=".", dest="out_dir")
    return ap


def _apply_env(parser: argparse.ArgumentParser, env) -> None:
    """Turn ``VMFMEANS_*`` variables into parser defaults."""
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sp in action.choices.values():
                _apply_env(sp, env)
            continue
        if not action.option_strings:
            continue
        key = ENV_PREFIX + action.dest.upper()
        long = [o for o in action.option_strings if o.startswith("--")]
        alt = ENV_PREFIX + long[0][2:].replace("-", "_").upper() if long else key
        raw = env.get(alt, env.get(key))
        if raw is None:
            continue
        if isinstance(action, argparse._StoreTrueAction):
            action.default = raw.strip().lower() in ("1", "true", "yes", "on")
        else:
            action.default = action.type(raw) if action.type else raw


def _explicit(argv, *flags) -> bool:
    return any(a == f or a.startswith(f + "=") for a in argv for f in flags)


def resolve_lambda(args, argv) -> float:
    phi, lam = args.phi_lambda, args.lam
    if phi is not None and lam is not None:
        # a flag on the command line beats the environment
        cli_phi = _explicit(argv, "--phi-lambda")
        cli_lam = _explicit(argv, "--lambda")
        if cli_phi == cli_lam:
            raise UsageError("give exactly one of --phi-lambda and --lambda")
        phi, lam = (phi, None) if cli_phi else (None, lam)
    if phi is None and lam is None:
        raise UsageError("one of --phi-lambda or --lambda is required")
    if lam is None:
        if not 0.0 <= phi <= 180.0:
            raise UsageError("--phi-lambda must lie in [0, 180] degrees")
        return dp.lambda_from_angle(np.deg2rad(phi))
    if not -2.0 <= lam <= 0.0:
        raise UsageError("--lambda must lie in [-2, 0]")
    return float(lam)


# ---------------------------------------------------------------- commands

def _finish(args, out: Path, summary: io.RunSummary, timer: _Timer) -> int:
    summary.timing_ms = ({k: 0.0 for k in timer.ms} if args.no_timing else
                         {k: round(v, 3) for k, v in timer.ms.items()})
    (out / "summary.json").write_text(summary.to_json())
    print(summary.to_json(), end="")
    return EXIT_OK if summary.converged else EXIT_NONCONVERGED


def _fit_metrics(X, labels, truth_path, seed):
    metrics = {}
    try:
        metrics["silhouette"] = silhouette_cosine(X, labels, seed=seed)
    except SingleCluster:
        metrics["silhouette"] = None
    if truth_path:
        metrics["nmi"] = nmi(io.read_labels(truth_path), labels)
    return metrics


def cmd_dp_fit(args, argv) -> int:
    lam = resolve_lambda(args, argv)
    timer = _Timer()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with timer.phase("read"):
        X = io.read_points(args.input, args.auto_normalize, args.format)
    cfg = dp.DpConfig(lam, args.max_iters, args.threads)
    with timer.phase("fit"):
        r = dp.fit(X, cfg)
    with timer.phase("metrics"):
        metrics = _fit_metrics(X, r.labels, args.truth, args.seed)
    with timer.phase("write"):
        io.write_labels(out / "labels.txt", r.labels)
        io.write_cluster_table(out / "clusters.txt", range(r.K), r.means,
                               np.bincount(r.labels, minlength=r.K))
    summary = io.RunSummary(
        "dp-fit", r.K, r.objective, r.iterations, r.restarts, r.converged,
        config={"lambda": lam, "phi_lambda_deg": float(np.rad2deg(cfg.phi_lambda)),
                "max_iterations": args.max_iters, "input": str(args.input),
                "auto_normalize": args.auto_normalize},
        metrics=metrics)
    return _finish(args, out, summary, timer)


def cmd_spkm_fit(args, argv) -> int:
    if args.k is None:
        raise UsageError("--k is required")
    if args.k < 1 or args.restarts < 1:
        raise UsageError("--k and --restarts must be positive")
    timer = _Timer()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with timer.phase("read"):
        X = io.read_points(args.input, args.auto_normalize, args.format)
    if args.k > X.shape[0]:
        raise UsageError(f"--k {args.k} exceeds the number of points {X.shape[0]}")
    with timer.phase("fit"):
        r = spkm.fit(X, spkm.SpkmConfig(args.k, args.max_iters, args.restarts, args.seed))
    with timer.phase("metrics"):
        metrics = _fit_metrics(X, r.labels, args.truth, args.seed)
    with timer.phase("write"):
        io.write_labels(out / "labels.txt", r.labels)
        io.write_cluster_table(out / "clusters.txt", range(r.K), r.means,
                               np.bincount(r.labels, minlength=r.K))
    summary = io.RunSummary(
        "spkm-fit", r.K, r.objective, r.iterations, 0, r.converged,
        config={"K": args.k, "restarts": args.restarts, "seed": args.seed,
                "max_iterations": args.max_iters, "input": str(args.input),
                "auto_normalize": args.auto_normalize, "empty_cluster_repairs": r.repairs},
        metrics=metrics)
    return _finish(args, out, summary, timer)


def frame_paths(args) -> list[str]:
    given = [bool(args.frames), args.manifest is not None, args.pattern is not None]
    if sum(given) != 1:
        raise UsageError("give frames as arguments, --manifest or --glob (exactly one)")
    if args.manifest:
        base = Path(args.manifest).parent
        paths = []
        for line in Path(args.manifest).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                paths.append(str(base / line) if not os.path.isabs(line) else line)
    elif args.pattern:
        paths = sorted(glob.glob(args.pattern))
    else:
        paths = list(args.frames)
    if not paths:
        raise UsageError("no frames found")
    return paths


def cmd_ddp_stream(args, argv) -> int:
    lam = resolve_lambda(args, argv)
    if args.q is not None and args.q_frac is not None:
        if _explicit(argv, "--q") == _explicit(argv, "--q-frac"):
            raise UsageError("give at most one of --q and --q-frac")
        if _explicit(argv, "--q"):
            args.q_frac = None
        else:
            args.q = None
    if args.q is not None:
        Q = float(args.q)
    else:
        frac = 400.0 if args.q_frac is None else float(args.q_frac)
        if frac <= 0:
            raise UsageError("--q-frac must be positive")
        Q = lam / frac
    try:
        cfg = DdpConfig(lam, beta=args.beta, Q=Q, max_iterations=args.max_iters,
                        workers=args.threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    paths = frame_paths(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = DDPvMFMeans(cfg)
    frames = []
    converged = True
    total_it = total_r = 0
    stream_t0 = time.perf_counter()
    for i, path in enumerate(paths):
        t0 = time.perf_counter()
        try:
            X = io.read_points(path, args.auto_normalize, args.format)
            t_read = 1e3 * (time.perf_counter() - t0)
            res = model.step(X)
        except (ValueError, ArithmeticError, OSError) as exc:
            raise FrameError(i, path, exc) from exc
        io.write_labels(out / f"frame_{i:05d}.labels", res.labels)
        timing = dict(res.timing_ms, read=t_read)
        if args.no_timing:
            timing = {k: 0.0 for k in timing}
        else:
            timing = {k: round(v, 3) for k, v in timing.items()}
        frames.append({
            "t": res.t, "path": str(path), "N": int(X.shape[0]),
            "K": len(res.fractions), "born": res.born_ids, "revived": res.revived_ids,
            "removed": res.removed_ids,
            "fractions": {str(k): v for k, v in res.fractions.items()},
            "iterations": res.iterations, "restarts": res.restarts,
            "converged": res.converged, "degenerate_geodesic": res.degenerate,
            "timing_ms": timing,
        })
        converged &= res.converged
        total_it += res.iterations
        total_r += res.restarts
    ledger = model.ledger()
    stream = {"config": {"lambda": lam, "phi_lambda_deg": float(np.rad2deg(np.arccos(lam + 1.0))),
                         "beta": cfg.beta, "Q": cfg.Q, "max_iterations": cfg.max_iterations},
              "frames": frames, "ledger": ledger}
    io.write_json(out / "stream.json", stream)
    total_ms = 0.0 if args.no_timing else round(1e3 * (time.perf_counter() - stream_t0), 3)
    summary = io.RunSummary(
        "ddp-stream", len(ledger["clusters"]), None, total_it, total_r, converged,
        config=stream["config"] | {"frames": len(paths)},
        metrics={"born": sum(len(f["born"]) for f in frames),
                 "revived": sum(len(f["revived"]) for f in frames),
                 "removed": len(ledger["removed"])},
        timing_ms={"total": total_ms})
    (out / "summary.json").write_text(summary.to_json())
    print(summary.to_json(), end="")
    return EXIT_OK if converged else EXIT_NONCONVERGED


def cmd_synth(args, argv) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ext = "bin" if args.format == "bin" else "txt"
    if args.scenario:
        try:
            scen = synth.StreamScenario.from_dict(io.read_json(args.scenario))
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"bad scenario: {exc}") from None
        frames = synth.generate_stream(scen)
        names = []
        for i, fr in enumerate(frames):
            name = f"frame_{i:05d}.{ext}"
            io.write_points(out / name, fr.X, args.format)
            io.write_labels(out / f"frame_{i:05d}.labels", fr.labels)
            names.append(name)
        (out / "manifest.txt").write_text("\n".join(names) + "\n")
        io.write_points(out / "means.txt", frames[0].means)
        print(f"wrote {len(frames)} frames to {out}")
        return EXIT_OK
    spec = synth.SynthSpec(args.k_t, args.n, args.tau, args.dim,
                           float(np.deg2rad(args.min_sep_deg)), None, args.seed)
    X, z, means = synth.generate(spec)
    io.write_points(out / f"points.{ext}", X, args.format)
    io.write_labels(out / "labels.txt", z)
    io.write_points(out / "means.txt", means)
    print(f"wrote {X.shape[0]} points to {out}")
    return EXIT_OK


def cmd_eval(args, argv) -> int:
    X = io.read_points(args.points, args.auto_normalize, args.format)
    a = io.read_labels(args.truth)
    b = io.read_labels(args.pred)
    if b.shape[0] != X.shape[0]:
        raise LengthMismatch(f"{X.shape[0]} points vs {b.shape[0]} labels")
    res = {"nmi": nmi(a, b)}
    if args.seeds:
        vals = [silhouette_cosine(X, b, args.max_sample, s)
                for s in range(args.seed, args.seed + args.seeds)]
        res["silhouette_mean"] = float(np.mean(vals))
        res["silhouette_std"] = float(np.std(vals))
        res["seeds"] = args.seeds
    else:
        res["silhouette"] = silhouette_cosine(X, b, args.max_sample, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "eval.json", res)
    print(io.json.dumps(res, indent=2, sort_keys=True))
    return EXIT_OK


def parse_grid(text: str) -> list[float]:
    try:
        if ":" in text:
            a, b, s = (float(v) for v in text.split(":"))
            if s <= 0:
                raise ValueError
            return [float(v) for v in np.arange(a, b + 1e-9 * max(1.0, abs(b)), s)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad --phi-grid {text!r}") from None


def cmd_bench(args, argv) -> int:
    grid = parse_grid(args.phi_grid)
    if not grid or args.runs < 1:
        raise UsageError("empty grid or run count")
    spec = synth.SynthSpec(args.k_t, args.n, args.tau, args.dim,
                           float(np.deg2rad(args.min_sep_deg)))
    t0 = time.perf_counter()
    res = bench.sweep(range(args.seed, args.seed + args.runs), grid, spec,
                      spkm_k=args.k or None, spkm_restarts=args.restarts,
                      max_iterations=args.max_iters, workers=args.threads)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {"runs": args.runs, "table": res.table(), "best": res.best(),
              "spkm": res.spkm.stats() if res.spkm else None,
              "truth_silhouette_mean": float(np.nanmean(res.truth_silhouette)),
              "seconds": round(time.perf_counter() - t0, 3)}
    io.write_json(out / "bench.json", report)
    print(bench.format_table(res))
    return EXIT_OK


COMMANDS = {"dp-fit": cmd_dp_fit, "spkm-fit": cmd_spkm_fit, "ddp-stream": cmd_ddp_stream,
            "synth": cmd_synth, "eval": cmd_eval, "bench": cmd_bench}


def main(argv=None, env=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    _apply_env(parser, os.environ if env is None else env)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"vmfmeans: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FrameError as exc:
        print(f"vmfmeans: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DATA_ERRORS as exc:
        print(f"vmfmeans: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
