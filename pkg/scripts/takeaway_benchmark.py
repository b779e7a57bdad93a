"""Mean MRR of every aligner on a noisy permuted ER pair, optionally with extra
edge noise on the second graph."""
import argparse
from dataclasses import dataclass

import numpy as np

from netalign import registry
from netalign.evaluation import evaluate
from netalign.splits_io import make_task, split_anchors
from netalign.synthesis import gen_er, inject_edge_noise, make_permuted_pair


@dataclass
class BenchmarkConfig:
    nodes: int = 1000
    avg_degree: float = 10.0
    insert: float = 0.10
    delete: float = 0.15
    train_ratio: float = 0.2
    edge_noise: float = 0.0
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)


def run(cfg: BenchmarkConfig, algos) -> dict[str, list[float]]:
    g1, g2, truth = make_permuted_pair(gen_er(cfg.nodes, cfg.avg_degree, 0), cfg.insert, cfg.delete, 0)
    if cfg.edge_noise:
        g2 = inject_edge_noise(g2, cfg.edge_noise, 0)
    out = {}
    for algo in algos:
        out[algo] = []
        for seed in cfg.seeds:
            task = make_task(g1, g2, truth, split_anchors(truth, cfg.train_ratio, seed))
            job, _ = registry.make_job(algo, task, {}, seed)
            out[algo].append(evaluate(job(), task.test_pairs)["mrr"])
        print(f"{algo:12s} MRR {np.mean(out[algo]):.4f} +/- {np.std(out[algo]):.4f}", flush=True)
    return out


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=1000)
    ap.add_argument("--edge-noise", type=float, default=0.0)
    ap.add_argument("--algos", default="isorank,final,rwr-align,regal,parrot-lite,gw-align")
    args = ap.parse_args()
    run(BenchmarkConfig(nodes=args.nodes, edge_noise=args.edge_noise), args.algos.split(","))
