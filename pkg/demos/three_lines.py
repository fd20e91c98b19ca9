"""Fit the three regression models to the bundled three-line dataset.

Prints the posterior over the number of occupied clusters for each model and
the clustering metrics against the simulated labels. Takes a few minutes.

    python demos/three_lines.py [--iters 2000]
"""

import argparse

import numpy as np

from repmix import (
    ChainConfig,
    PriorConfig,
    evaluate,
    read_dataset_csv,
    run_method,
    toy_data_path,
)
from repmix.metrics import cluster_counts


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    dataset, z_true = read_dataset_csv(toy_data_path())
    chain = ChainConfig(n_iter=args.iters, burn_in=args.iters // 2, seed=args.seed)
    for method in ("rgrm", "rrm", "mfm"):
        draws = run_method(method, dataset, PriorConfig(), chain)
        counts = cluster_counts(draws)
        ks, freq = np.unique(counts, return_counts=True)
        post = ", ".join(f"K={k}: {f / counts.size:.2f}" for k, f in zip(ks, freq))
        rep = evaluate(dataset, draws, z_true)
        print(f"{method:5s} ARI={rep.ari:.3f} purity={rep.purity:.3f} RMSE={rep.rmse:.3f}  {post}")


if __name__ == "__main__":
    main()
