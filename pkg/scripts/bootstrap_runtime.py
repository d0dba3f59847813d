"""Wall time of the claims bootstrap for a given portfolio size and method."""
import argparse
import time

from oneshot_reserving import ModelSpec, SimConfig, bootstrap_estimation_error, censor, simulate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--claims", type=float, default=5000, help="claims per accident period")
    ap.add_argument("--B", type=int, default=1000)
    ap.add_argument("--method", default="lr:LR_PAID")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    p = censor(simulate(SimConfig(claims_per_period=args.claims, seed=1)))
    method = ModelSpec(variant=args.method[3:]) if args.method.startswith("lr:") else args.method
    t0 = time.perf_counter()
    res = bootstrap_estimation_error(p, method, B=args.B, workers=args.workers)
    dt = time.perf_counter() - t0
    print(f"{res.method}: {len(p)} reported claims, B={args.B}, {dt:.1f}s "
          f"({1000 * dt / args.B:.1f} ms/replicate); point {res.point_total:.0f}, est. sd {res.sd:.0f}")


if __name__ == "__main__":
    main()
