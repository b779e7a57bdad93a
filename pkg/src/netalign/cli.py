"""``netalign`` command line: synthesis, splits, runs, noise, benchmarks, re-scoring.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import gc
import json
import logging
import os
import shutil
import statistics
import sys
from pathlib import Path

import numpy as np

from . import registry
from .errors import FormatError, InvalidInputError, NumericError
from .evaluation import AVERAGED, DEFAULT_KS, LEFT, RIGHT, evaluate, evaluate_topk, run_with_telemetry, top_k
from .graph import AlignmentTask, GroundTruth
from .splits_io import (
    DEFAULT_SEEDS, RunRecord, SplitRecord, append_result, import_edgelist, make_task, read_dataset, read_graph,
    read_meta, read_split, split_anchors, write_dataset, write_split,
)
from .synthesis import gen_er, inject_attr_noise, inject_edge_noise, inject_supervision_noise, make_permuted_pair

log = logging.getLogger("netalign")

# dense score matrices above this many entries need --topk
DENSE_CAP = 2 ** 28
BENCH_TOPK = 100


class UsageError(Exception):
    pass


def _int_list(text: str) -> list:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _fraction(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0.0 <= x <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {x}")
    return x


def _results_root() -> Path:
    return Path(os.environ.get("NA_RESULTS_DIR", "results"))


def _load_params(args) -> dict:
    params = {}
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {args.config}: {e}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object of parameters")
        params.update(cfg)
    try:
        params.update(registry.parse_params(args.param))
    except InvalidInputError as e:
        raise UsageError(str(e)) from None
    return params


def _check_params(algo: str, params: dict) -> None:
    try:
        registry.resolve(algo, params, seed=0)
    except InvalidInputError as e:
        raise UsageError(str(e)) from None


# ------------------------------------------------------------------ synth


def cmd_synth(args) -> int:
    if args.kind == "er":
        g = gen_er(args.nodes, args.avg_degree, args.seed, name=args.name or "er")
        ident = GroundTruth(np.repeat(np.arange(g.num_nodes)[:, None], 2, axis=1))
        meta = {"generator": {"kind": "er", "nodes": args.nodes, "avg_degree": args.avg_degree, "seed": args.seed}}
        write_dataset(args.out, g, g, ident, name=args.name, extra_meta=meta)
        log.info("wrote ER graph with %d nodes and %d edges to %s", g.num_nodes, g.num_edges, args.out)
        return 0
    base = _load_base(Path(args.base))
    g1, g2, truth = make_permuted_pair(base, args.insert, args.delete, args.seed)
    meta = {"generator": {"kind": "pair", "base": str(args.base), "insert": args.insert,
                          "delete": args.delete, "seed": args.seed}}
    write_dataset(args.out, g1, g2, truth, name=args.name, extra_meta=meta)
    log.info("wrote pair: g1 %d edges, g2 %d edges, %d anchors", g1.num_edges, g2.num_edges, len(truth))
    return 0


def _load_base(path: Path):
    if path.is_dir():
        return read_graph(path, "g1")
    if path.suffix == ".edges" and path.stem in ("g1", "g2") and (path.parent / "meta.json").exists():
        return read_graph(path.parent, path.stem)
    return import_edgelist(path)[0]


# ------------------------------------------------------------------ split


def cmd_split(args) -> int:
    _, _, truth = read_dataset(args.data)
    split = split_anchors(truth, args.train_ratio, args.seed)
    write_split(args.out, split)
    print(f"train={len(split.train)} test={len(split.test)} -> {args.out}")
    return 0


# -------------------------------------------------------------------- run


def _metrics_line(hits: dict, mrr: float) -> str:
    return " ".join(f"hits@{k}={v:.4f}" for k, v in hits.items()) + f" mrr={mrr:.4f}"


def _save_scores(directory: Path, stem: str, scores, topk) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    if topk is None:
        np.save(directory / f"{stem}.npy", scores.scores)
        return
    ri, rv = top_k(scores, topk)
    ci, cv = top_k(scores.scores.T, topk)
    np.savez(directory / f"{stem}.npz", row_idx=ri, row_val=rv, col_idx=ci, col_val=cv,
             shape=np.asarray(scores.shape))


def execute(algo: str, task: AlignmentTask, params: dict, ks, topk=None, seed=None):
    """Run one aligner under telemetry and score it. Returns
    ``(scores, metrics, telemetry, resolved_params)``."""
    job, resolved = registry.make_job(algo, task, params, seed)
    scores, tel = run_with_telemetry(job)
    metrics = evaluate(scores, task.test_pairs, ks, AVERAGED, topk)
    return scores, metrics, tel, resolved


def cmd_run(args) -> int:
    params = _load_params(args)
    _check_params(args.algo, params)
    ks = sorted(set(args.k))
    g1, g2, truth = read_dataset(args.data)
    dataset = read_meta(args.data).get("name", Path(args.data).name)
    if g1.num_nodes * g2.num_nodes > DENSE_CAP and args.topk is None:
        raise UsageError(f"{g1.num_nodes}x{g2.num_nodes} exceeds the dense cap of 2^28 entries; pass --topk")
    if args.split:
        splits = [read_split(args.split)]
    else:
        seeds = args.seeds if args.seeds is not None else ([args.seed] if args.seed is not None else DEFAULT_SEEDS)
        splits = [split_anchors(truth, args.train_ratio, s) for s in seeds]
    out = Path(args.out) if args.out else _results_root() / "results.jsonl"
    records = []
    for split in splits:
        task = make_task(g1, g2, truth, split)
        try:
            scores, metrics, tel, resolved = execute(args.algo, task, params, ks, args.topk, split.seed)
        except InvalidInputError as e:
            raise InvalidInputError(f"seed {split.seed}: {e}") from None
        run_params = dict(resolved, dataset_dir=str(args.data), k_list=ks, topk=args.topk)
        if args.split:
            run_params["split_file"] = str(args.split)
        flags = {}
        if "iterations" in scores.info:
            flags["iterations"] = int(scores.info["iterations"])
        if args.topk is not None:
            flags["truncated"] = metrics["truncated"]
            flags["mrr_slack"] = metrics["truncated"] / (args.topk + 1)
        if split.info:
            flags["split_info"] = split.info
        rec = RunRecord(
            algo=args.algo, dataset=dataset, seed=split.seed, train_ratio=split.train_ratio, params=run_params,
            hits=metrics["hits"], mrr=metrics["mrr"], direction=AVERAGED, time_s=tel.wall_time_s,
            peak_mem_bytes=tel.peak_mem_bytes, converged=tel.converged, flags=flags,
        )
        append_result(out, rec)
        records.append(rec)
        if args.save_scores:
            _save_scores(Path(args.save_scores), f"{args.algo}_seed{split.seed}", scores, args.topk)
        print(f"seed={split.seed} {_metrics_line(rec.hits, rec.mrr)} time={rec.time_s:.3f}s "
              f"peak_mem={rec.peak_mem_bytes / 2**20:.1f}MiB converged={rec.converged}")
        del scores
    summary = []
    for k in ks:
        vals = [r.hits[k] for r in records]
        summary.append(f"hits@{k}={statistics.fmean(vals):.4f}±{statistics.pstdev(vals):.4f}")
    mrrs = [r.mrr for r in records]
    summary.append(f"mrr={statistics.fmean(mrrs):.4f}±{statistics.pstdev(mrrs):.4f}")
    print(f"summary {args.algo} on {dataset} over {len(records)} seed(s): " + " ".join(summary))
    return 0


# ------------------------------------------------------------------ noise


def cmd_noise(args) -> int:
    src, dst = Path(args.data), Path(args.out)
    if src.resolve() == dst.resolve():
        raise UsageError("--out must differ from --data")
    meta = read_meta(src)
    g1, g2, truth = read_dataset(src)
    provenance = {"kind": args.kind, "p": args.p, "seed": args.seed, "source": str(src)}
    new_g2, split = g2, None
    if args.kind == "edge":
        provenance["mode"] = args.mode
        new_g2 = inject_edge_noise(g2, args.p, args.seed, mode=args.mode)
    elif args.kind == "attr":
        if g2.node_attrs is None:
            raise InvalidInputError("attribute noise needs node attributes on g2; this dataset has none")
        new_g2 = inject_attr_noise(g2, args.p, args.seed)
    else:
        base = read_split(args.split) if args.split else split_anchors(truth, args.train_ratio, args.split_seed)
        task = inject_supervision_noise(make_task(g1, g2, truth, base), args.p, args.seed)
        corrupted = task.info.get("supervision_noise", {}).get("corrupted", [])
        provenance.update(split_seed=base.seed, train_ratio=base.train_ratio, corrupted=len(corrupted))
        split = SplitRecord(seed=base.seed, train_ratio=base.train_ratio,
                            train=[tuple(p) for p in task.train_anchors.tolist()], test=list(base.test),
                            info=dict(base.info, supervision_noise=task.info.get("supervision_noise", {})))
    if dst.exists():
        shutil.rmtree(dst)
    shutil.copytree(src, dst)
    if new_g2 is not g2:
        write_dataset(dst, g1, new_g2, truth, name=meta.get("name"),
                      extra_meta={k: v for k, v in meta.items() if k != "name"})
        meta = read_meta(dst)
    meta["noise"] = list(meta.get("noise", [])) + [provenance]
    (dst / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if split is not None:
        write_split(dst / "split.json", split)
    print(json.dumps(provenance, sort_keys=True))
    return 0


# ------------------------------------------------------------------ bench

BENCH_FIELDS = ["algo", "n", "edges", "time_s", "peak_mem_bytes", "iterations", "time_per_iter_s",
                "hits1", "mrr", "converged", "status", "message"]


def bench_size(algo: str, n: int, avg_degree: float, seed: int, train_ratio: float, params: dict,
               repeats: int = 1) -> dict:
    """Synthesize a noise-free ER pair of ``n`` nodes and time ``algo`` on it.

    Out-of-memory and numeric failures become a row with ``status`` set
    instead of an exception; time and memory then describe the failed call.
    """
    base = gen_er(n, avg_degree, seed)
    g1, g2, truth = make_permuted_pair(base, 0.0, 0.0, seed)
    task = make_task(g1, g2, truth, split_anchors(truth, train_ratio, seed))
    topk = BENCH_TOPK if n * n > DENSE_CAP else None
    row = {"algo": algo, "n": n, "edges": base.num_edges, "status": "ok", "message": ""}
    times, peaks = [], []
    for _ in range(repeats):
        try:
            scores, metrics, tel, _ = execute(algo, task, params, (1,), topk, seed)
        except (MemoryError, NumericError) as e:
            tel = getattr(e, "telemetry", None)
            row.update(status="oom" if isinstance(e, MemoryError) else "numeric-error", message=str(e))
            times.append(tel.wall_time_s if tel else 0.0)
            peaks.append(tel.peak_mem_bytes if tel else 0)
            break
        times.append(tel.wall_time_s)
        peaks.append(tel.peak_mem_bytes)
        iters = int(scores.info.get("iterations", 1))
        row.update(iterations=iters, hits1=metrics["hits"][1], mrr=metrics["mrr"], converged=tel.converged)
        del scores
        gc.collect()
    row["time_s"] = statistics.median(times)
    row["peak_mem_bytes"] = max(peaks)
    if row["status"] == "ok":
        row["time_per_iter_s"] = row["time_s"] / row["iterations"]
    return row


def cmd_bench(args) -> int:
    params = _load_params(args)
    _check_params(args.algo, params)
    out = Path(args.out) if args.out else _results_root() / f"bench_{args.algo}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=BENCH_FIELDS, restval="")
        writer.writeheader()
        print(",".join(BENCH_FIELDS))
        for n in args.sizes:
            row = bench_size(args.algo, n, args.avg_degree, args.seed, args.train_ratio, params, args.repeats)
            writer.writerow(row)
            f.flush()
            print(",".join(str(row.get(k, "")) for k in BENCH_FIELDS), flush=True)
            gc.collect()
    return 0


# ------------------------------------------------------------------- eval


def cmd_eval(args) -> int:
    _, _, truth = read_dataset(args.data)
    if args.split:
        split = read_split(args.split)
    else:
        split = split_anchors(truth, args.train_ratio, args.seed if args.seed is not None else 0)
    ks = sorted(set(args.k))
    path = Path(args.scores)
    if path.suffix == ".npz":
        z = np.load(path)
        metrics = evaluate_topk(z["row_idx"], z["col_idx"], split.test, ks, args.direction)
    else:
        metrics = evaluate(np.load(path), split.test, ks, args.direction, args.topk)
    metrics["hits"] = {str(k): v for k, v in metrics["hits"].items()}
    print(json.dumps(dict(metrics, direction=args.direction, seed=split.seed), sort_keys=True))
    return 0


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netalign", description="Network alignment toolkit and benchmark harness.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate synthetic datasets")
    ssub = s.add_subparsers(dest="kind", required=True)
    er = ssub.add_parser("er", help="Erdos-Renyi graph (g2 is an identical copy)")
    er.add_argument("--nodes", type=int, required=True)
    er.add_argument("--avg-degree", type=float, default=10.0)
    er.add_argument("--seed", type=int, default=0)
    er.add_argument("--name")
    er.add_argument("--out", required=True)
    pair = ssub.add_parser("pair", help="permuted pair with inserted/deleted edges")
    pair.add_argument("--base", required=True, help="edges file or dataset directory")
    pair.add_argument("--insert", type=_fraction, default=0.10)
    pair.add_argument("--delete", type=_fraction, default=0.15)
    pair.add_argument("--seed", type=int, default=0)
    pair.add_argument("--name")
    pair.add_argument("--out", required=True)

    sp = sub.add_parser("split", help="write a seeded anchor split")
    sp.add_argument("--data", required=True)
    sp.add_argument("--train-ratio", type=_fraction, default=0.2)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)

    r = sub.add_parser("run", help="run an aligner over seeds and record metrics")
    r.add_argument("--algo", required=True, choices=list(registry.ALGORITHMS))
    r.add_argument("--data", required=True)
    r.add_argument("--train-ratio", type=_fraction, default=0.2)
    g = r.add_mutually_exclusive_group()
    g.add_argument("--seeds", type=_int_list)
    g.add_argument("--seed", type=int)
    g.add_argument("--split", help="stored split file (overrides seeds)")
    r.add_argument("--param", action="append", default=[], metavar="K=V")
    r.add_argument("--config", help="JSON object of parameters (overridden by --param)")
    r.add_argument("--k", type=_int_list, default=list(DEFAULT_KS))
    r.add_argument("--topk", type=int)
    r.add_argument("--save-scores", metavar="DIR")
    r.add_argument("--out", help="JSONL results file (default $NA_RESULTS_DIR/results.jsonl)")

    n = sub.add_parser("noise", help="copy a dataset with injected noise")
    n.add_argument("--data", required=True)
    n.add_argument("--kind", required=True, choices=["edge", "attr", "supervision"])
    n.add_argument("--p", type=_fraction, required=True)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--mode", choices=["split", "add-only", "delete-only"], default="split")
    n.add_argument("--split", help="split to corrupt (supervision noise)")
    n.add_argument("--train-ratio", type=_fraction, default=0.2)
    n.add_argument("--split-seed", type=int, default=0)
    n.add_argument("--out", required=True)

    b = sub.add_parser("bench", help="scaling benchmark on ER pairs")
    b.add_argument("--algo", required=True, choices=list(registry.ALGORITHMS))
    b.add_argument("--sizes", type=_int_list, required=True)
    b.add_argument("--avg-degree", type=float, default=10.0)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--train-ratio", type=_fraction, default=0.2)
    b.add_argument("--repeats", type=int, default=1)
    b.add_argument("--param", action="append", default=[], metavar="K=V")
    b.add_argument("--config")
    b.add_argument("--out", help="CSV file (default $NA_RESULTS_DIR/bench_<algo>.csv)")

    e = sub.add_parser("eval", help="re-score a stored score matrix")
    e.add_argument("--scores", required=True, help=".npy dense matrix or .npz top-k lists")
    e.add_argument("--data", required=True)
    e.add_argument("--split")
    e.add_argument("--seed", type=int)
    e.add_argument("--train-ratio", type=_fraction, default=0.2)
    e.add_argument("--k", type=_int_list, default=list(DEFAULT_KS))
    e.add_argument("--topk", type=int)
    e.add_argument("--direction", choices=[LEFT, RIGHT, AVERAGED], default=AVERAGED)
    return p


COMMANDS = {"synth": cmd_synth, "split": cmd_split, "run": cmd_run, "noise": cmd_noise,
            "bench": cmd_bench, "eval": cmd_eval}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "repeats", 1) < 1 or (getattr(args, "topk", None) is not None and args.topk < 1):
        parser.print_usage(sys.stderr)
        print("netalign: error: --repeats and --topk must be >= 1", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"netalign: error: {e}", file=sys.stderr)
        return 2
    except (InvalidInputError, FormatError, NumericError, MemoryError, OSError) as e:
        print(f"netalign: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
