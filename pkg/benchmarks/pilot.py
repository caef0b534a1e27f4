"""Pilot run behind the magnitude thresholds.

Runs the full train/test experiment for both builtin benchmarks over five
seeds, then the lambda selection and sweep used by the lambda check.

    python3 benchmarks/pilot.py > benchmarks/pilot_output.txt
"""
import time

import numpy as np

from gnmcal.dataset import generate_synthetic, get_truth
from gnmcal.calibrate import ResponseEvaluator
from gnmcal.evaluate import (ExperimentConfig, derive_seed, run_experiment, select_lambda,
                             sweep_lambda)

SEEDS = range(5)


def main():
    t0 = time.perf_counter()
    print("dataset,seed,method,metric,phase,value,std")
    train = {}
    for name in ("sd1", "sd2"):
        for seed in SEEDS:
            rep = run_experiment(ExperimentConfig(dataset=name, seed=seed))
            for r in rep.rows:
                print(f"{name},{seed},{r[1]},{r[2]},{r[3]},{r[4]:.6g},{r[5]:.6g}")
            train.setdefault(name, []).append(
                (rep.value("gnm", "rmse", "train"), rep.value("gnm", "rmse_theta", "train")))
    print()
    for name, vals in train.items():
        v = np.array(vals)
        print(f"{name} gnm train mean sum-of-squares error {v[:, 0].mean():.6g} "
              f"rmse_theta {v[:, 1].mean():.6g} median {np.median(v[:, 0]):.6g}")
    print()
    print("dataset,seed,lambda_cv,sweep_rmse_at_cv,sweep_best_rmse,best_lambda")
    for name in ("sd1", "sd2"):
        truth = get_truth(name)
        for seed in SEEDS:
            phys, model = generate_synthetic(truth, 30, 900, seed=derive_seed(seed, 11))
            ev = ResponseEvaluator.analytic(truth)
            sel = select_lambda(phys, model, seed=seed, evaluator=ev)
            sw = sweep_lambda(phys, model, seed=seed, evaluator=ev)
            errs = {r[0]: r[1] for r in sw.rows}
            best = min(errs, key=lambda k: (errs[k], k))
            print(f"{name},{seed},{sel.lambda_star},{errs.get(sel.lambda_star, float('nan')):.6g},"
                  f"{errs[best]:.6g},{best}")
    print(f"\ntotal {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
