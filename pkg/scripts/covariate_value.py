"""Ind.RMSE per accident period of the regression variants, averaged over seeds."""
import argparse
import logging

import pandas as pd

from oneshot_reserving import ModelSpec, SimConfig, ind_rmse, run_oneshot, simulate

VARIANTS = ("LR_PAID", "LR_PAID_STATUS", "LR_ALL_COV", "MODEL_C", "MODEL_I", "MODEL_CO", "MODEL_IO", "MODEL_CIO")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--claims", type=float, default=2000)
    args = ap.parse_args()
    logging.basicConfig(level=logging.ERROR)  # the collinear I:O column is pruned at every step
    records = []
    for s in range(args.seeds):
        truth = simulate(SimConfig(claims_per_period=args.claims, seed=s))
        for v in VARIANTS:
            for i, r in ind_rmse(run_oneshot(truth, ModelSpec(variant=v)), truth).items():
                if i > truth.I - truth.J:
                    records.append({"seed": s, "variant": v, "i": i, "ind_rmse": r})
    df = pd.DataFrame(records)
    table = df.groupby(["variant", "i"]).ind_rmse.mean().unstack("i")
    print(table.loc[list(VARIANTS)].round(0).to_string())
    last = df[df.i == df.i.max()].pivot(index="seed", columns="variant", values="ind_rmse")
    print(f"\nmost recent period: status helps in {(last.LR_PAID_STATUS <= last.LR_PAID).sum()}/{len(last)} seeds, "
          f"incurred+status helps in {(last.MODEL_CIO <= last.MODEL_C).sum()}/{len(last)} seeds")


if __name__ == "__main__":
    main()
