"""Command line: generate -> run -> detect -> evaluate.

Every command writes its outputs plus a ``<out>.manifest.json`` holding the
resolved options, version and per-phase wall-clock timings. ``sgmrd replay
MANIFEST`` re-runs a command from its manifest.

Options can also be set through the environment as ``SGMRD_<OPTION>``
(e.g. ``SGMRD_SEED=3``, ``SGMRD_THREADS=4``); explicit flags win.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from sgmrd import __version__
from sgmrd.benchgen import GeneratorConfig, generate, write_benchmark
from sgmrd.engine import POLICIES, EngineConfig, SGMRD, read_snapshots, write_snapshots
from sgmrd.metrics import MonitorLog, monitor_metrics, ranking_metrics, write_report
from sgmrd.outliers import K_GRID, best_k_sweep, score_stream, read_scores, write_scores
from sgmrd.stream import DataError, ShapeError, load_csv

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
ENV_PREFIX = "SGMRD_"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


class _Timer:
    def __init__(self):
        self.phases = {}

    def __call__(self, name):
        timer = self

        class _Phase:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.phases[name] = round(time.perf_counter() - self.t0, 6)
        return _Phase()


def _write_manifest(out: Path, command: str, args: dict, outputs: list, timer: _Timer,
                    extra: dict | None = None) -> Path:
    path = Path(str(out) + ".manifest.json")
    rec = {"tool": "sgmrd", "version": __version__, "command": command,
           "options": args, "outputs": [str(p) for p in outputs],
           "timings_s": timer.phases}
    if extra:
        rec.update(extra)
    path.write_text(json.dumps(rec, indent=2, default=str) + "\n", encoding="utf-8")
    return path


def _csv_header(path) -> list:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"no such file: {p}")
    with p.open(encoding="utf-8") as fh:
        return [h.strip() for h in fh.readline().strip().split(",")]


def _load(path, label_column):
    """Load a CSV; the label column is used only if present in the header."""
    col = label_column if label_column and label_column in _csv_header(path) else None
    return load_csv(path, col)


def _progress_every(total: int) -> int:
    return max(1, total // 20)


# -- commands -------------------------------------------------------------------

def cmd_generate(a) -> int:
    timer = _Timer()
    cfg = GeneratorConfig(d=a.dims, n=a.phases, e=a.per_phase, p=a.outlier_prob,
                          max_subspace_dim=a.max_subspace_dim, n_subspaces=a.subspaces,
                          seed=a.seed)
    out = Path(a.out)
    with timer("generate"):
        bench = generate(cfg)
    spec_path = out.with_suffix(".spec.json")
    with timer("write"):
        write_benchmark(bench, out, spec_path)
    _write_manifest(out, "generate", vars(a), [out, spec_path], timer)
    _log(f"wrote {bench.X.shape[0]} rows x {bench.X.shape[1]} dims to {out} "
         f"(outlier rate {bench.labels.mean():.4f})")
    return EXIT_OK


def cmd_run(a) -> int:
    timer = _Timer()
    with timer("load"):
        X, _ = _load(a.input, a.label_column)
    n, d = X.shape
    if n < a.window:
        raise DataError(f"input has {n} rows but the window needs {a.window}")
    cfg = EngineConfig(window_size=a.window, step_size=a.step, plays=a.plays, gamma=a.gamma,
                       iterations=a.iterations, seed=a.seed, policy=a.policy,
                       monitor_every_step=not a.monitor_on_update, threads=a.threads)
    engine = SGMRD(d, cfg)
    out = Path(a.out)
    every = _progress_every(n)
    written = 0
    try:
        with timer("stream"), out.open("w", encoding="utf-8") as fh:
            for i in range(n):
                snap = engine.process(X[i])
                if snap is not None:
                    fh.write(snap.to_json() + "\n")
                    written += 1
                if (i + 1) % every == 0:
                    _log(f"run: {i + 1}/{n} observations")
    finally:
        engine.close()
    _write_manifest(out, "run", vars(a), [out], timer,
                    {"evaluations": engine.evaluation_counter(), "snapshots": written})
    _log(f"wrote {written} snapshots to {out}")
    return EXIT_OK


def cmd_detect(a) -> int:
    timer = _Timer()
    with timer("load"):
        X, labels = _load(a.input, a.label_column)
        snaps = read_snapshots(a.snapshots)
    if not snaps:
        raise DataError(f"{a.snapshots} holds no snapshots")
    if snaps[-1].t > X.shape[0]:
        raise DataError(f"snapshots run to t={snaps[-1].t} but the input has {X.shape[0]} rows")
    if a.full_space:
        full = [tuple(range(X.shape[1]))]
        snaps = {s.t: full for s in snaps}
    out = Path(a.out)
    extra = {}
    with timer("score"):
        if a.k_sweep:
            if labels is None:
                raise DataError("--k-sweep needs a label column in the input")
            k, scores, aucs = best_k_sweep(X, snaps, labels, a.window, a.eval_every,
                                           a.k_grid, a.threads)
            extra = {"chosen_k": k, "auc_by_k": {str(kk): v for kk, v in aucs.items()}}
            _log(f"detect: best k = {k} (AUC {aucs[k]:.4f})")
        else:
            scores = score_stream(X, snaps, a.window, a.eval_every, a.k, labels, a.threads)
    with timer("write"):
        write_scores(scores, out)
    _write_manifest(out, "detect", vars(a), [out], timer, extra)
    _log(f"wrote {scores.score.shape[0]} scores to {out}")
    return EXIT_OK


def cmd_evaluate(a) -> int:
    timer = _Timer()
    report: dict = {}
    if a.scores is None and a.monitor_log is None:
        raise UsageError("evaluate: give --scores and/or --monitor-log")
    with timer("evaluate"):
        if a.scores is not None:
            sc, lab = read_scores(a.scores)
            if a.labels is not None:
                _, lab = load_csv(a.labels, a.label_column)
            if lab is None:
                raise DataError("ranking metrics need labels (score file column or --labels)")
            if lab.shape[0] != sc.shape[0]:
                raise DataError(f"{sc.shape[0]} scores but {lab.shape[0]} labels")
            keep = ~np.isnan(sc)
            report["ranking"] = ranking_metrics(sc[keep], lab[keep]).to_dict()
            report["ranking"]["scored"] = int(keep.sum())
        if a.monitor_log is not None:
            gold = read_snapshots(a.gold_log) if a.gold_log else None
            log = MonitorLog.from_snapshots(read_snapshots(a.monitor_log), gold)
            report["monitoring"] = monitor_metrics(log)
    out = Path(a.out)
    write_report(report, out)
    _write_manifest(out, "evaluate", vars(a), [out], timer)
    print(_summary(report))
    return EXIT_OK


def _fmt(v):
    return "NA" if v is None or (isinstance(v, float) and v != v) else f"{v:.4f}"


def _summary(report: dict) -> str:
    cols = []
    if "ranking" in report:
        r = report["ranking"]
        cols += [("AUC", r["auc"]), ("AP", r["ap"])]
        cols += [(f"P@{k}", v) for k, v in r["precision"].items()]
        cols += [(f"R@{k}", v) for k, v in r["recall"].items()]
    if "monitoring" in report:
        m = report["monitoring"]
        cols += [("Qbar", m["average_quality"]), ("U_T", m["success_rate"]["per_attempt"])]
        if "regret" in m:
            cols += [("R_T", m["regret"])]
    head = " ".join(f"{name:>9}" for name, _ in cols)
    vals = " ".join(f"{_fmt(v):>9}" for _, v in cols)
    return head + "\n" + vals


def cmd_replay(a) -> int:
    rec = json.loads(Path(a.manifest).read_text(encoding="utf-8"))
    opts = rec.get("options", {})
    command = rec.get("command")
    if command not in _COMMANDS:
        raise DataError(f"{a.manifest}: unknown command {command!r}")
    ns = argparse.Namespace(**opts)
    if a.out is not None:
        ns.out = a.out
    if "k_grid" in opts and opts["k_grid"] is not None:
        ns.k_grid = tuple(opts["k_grid"])
    return _COMMANDS[command](ns)


_COMMANDS = {"generate": cmd_generate, "run": cmd_run, "detect": cmd_detect,
             "evaluate": cmd_evaluate}


# -- parser -------------------------------------------------------------------------

def _env(name, default, cast=str):
    raw = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError:
        raise UsageError(f"bad value for {ENV_PREFIX}{name.upper()}: {raw!r}") from None


def _flag(p, name, cast, default, **kw):
    p.add_argument(f"--{name}", type=cast, default=_env(name, default, cast), **kw)


def _k_list(text):
    try:
        ks = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("k values must be >= 1")
    return ks


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sgmrd", description="Streaming subspace search and outlier detection.")
    p.add_argument("--version", action="version", version=f"sgmrd {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic drifting stream with hidden outliers")
    _flag(g, "dims", int, 10, help="number of dimensions d")
    _flag(g, "phases", int, 10, help="number of distributions n")
    _flag(g, "per-phase", int, 1000, help="observations per distribution e")
    _flag(g, "outlier-prob", float, 0.0045, help="outlier probability per point and subspace")
    _flag(g, "max-subspace-dim", int, 5)
    _flag(g, "subspaces", int, 2, help="planted subspaces per distribution")
    _flag(g, "seed", int, 0)
    g.add_argument("--out", required=True)

    r = sub.add_parser("run", help="stream a CSV through the subspace search engine")
    r.add_argument("--input", required=True)
    _flag(r, "label-column", str, "label", help="column to drop from the values if present")
    _flag(r, "window", int, 1000)
    _flag(r, "step", int, 1, help="update every this many observations")
    _flag(r, "plays", int, 1, help="dimensions re-searched per update")
    _flag(r, "gamma", float, 0.9)
    _flag(r, "iterations", int, 100, help="Monte-Carlo iterations per contrast")
    _flag(r, "policy", str, "ts", choices=POLICIES)
    _flag(r, "seed", int, 0)
    _flag(r, "threads", int, 1)
    r.add_argument("--monitor-on-update", action="store_true",
                   help="refresh qualities only at update rounds")
    r.add_argument("--out", required=True)

    dt = sub.add_parser("detect", help="ensemble LOF scores from engine snapshots")
    dt.add_argument("--input", required=True)
    dt.add_argument("--snapshots", required=True)
    _flag(dt, "label-column", str, "label")
    kg = dt.add_mutually_exclusive_group()
    kg.add_argument("--k", type=int, default=_env("k", 10, int))
    kg.add_argument("--k-sweep", action="store_true", help="try every k in --k-grid, keep best AUC")
    _flag(dt, "k-grid", _k_list, K_GRID)
    _flag(dt, "window", int, 1000)
    _flag(dt, "eval-every", int, 100)
    _flag(dt, "threads", int, 1)
    dt.add_argument("--full-space", action="store_true",
                    help="ignore the snapshots' subspaces and use all dimensions")
    dt.add_argument("--out", required=True)

    ev = sub.add_parser("evaluate", help="ranking and monitoring metrics")
    ev.add_argument("--scores")
    ev.add_argument("--labels", help="CSV with a label column (overrides the score file's)")
    _flag(ev, "label-column", str, "label")
    ev.add_argument("--monitor-log")
    ev.add_argument("--gold-log")
    ev.add_argument("--out", required=True)

    rp = sub.add_parser("replay", help="re-run a command from its manifest")
    rp.add_argument("manifest")
    rp.add_argument("--out", help="write outputs here instead of the recorded path")
    return p


def main(argv=None) -> int:
    try:
        parser = build_parser()
        a = parser.parse_args(argv)
        if a.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        if getattr(a, "threads", 1) < 1:
            raise UsageError("--threads must be >= 1")
        fn = cmd_replay if a.command == "replay" else _COMMANDS[a.command]
        args = {k: v for k, v in vars(a).items() if k != "command"}
        return fn(argparse.Namespace(**args))
    except UsageError as exc:
        _log(f"usage error: {exc}")
        return EXIT_USAGE
    except (DataError, ShapeError, FileNotFoundError, IsADirectoryError, PermissionError,
            KeyError, ValueError, json.JSONDecodeError) as exc:
        _log(f"error: {exc}")
        return EXIT_DATA
    except Exception as exc:  # invariant violations and bugs
        _log(f"internal error: {type(exc).__name__}: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
