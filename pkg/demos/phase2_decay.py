"""How fast the decaying-step phase is in practice.

Warm-started runs on a 32-dimensional spiked instance, with step sizes
eta_t = alpha / ((beta + t) rho). The table compares the median subspace
distance against the high-probability envelope 2e sqrt((beta+1)/(beta+T))
and reports the fitted log-log slope, which should land near -1/2.
"""

import argparse
import math

import numpy as np

from ojak import StepSchedule, make_spiked_support, run_suite
from ojak import analysis


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--T", type=int, default=4096)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    eigs = np.concatenate([[1.0, 0.9], np.linspace(0.5, 0.1, 30)])
    dist = make_spiked_support(eigs, k=2, noise_scale=0.8, n_pairs=4, seed=71)
    rho = dist.model.rho_k
    beta = 20.0 * (0.8 / rho) ** 2 * math.log(2 * 2 / 0.1)
    sched = StepSchedule(t0=0, phase1_eta=0.0, alpha=8.0, beta=beta, rho_k=rho)

    print("== decaying-step phase, d = 32, k = 2 ==")
    print(f"gap {rho:.2f}, noise bound 0.8, beta {beta:.1f}, "
          f"{args.trials} warm-started trials")

    ts = [2 ** j for j in range(6, int(math.log2(args.T)) + 1)]
    res = run_suite(dist, sched, args.T, trials=args.trials, seed=args.seed,
                    record=[0] + ts, warm_start_w=1.0 - 1e-9,
                    threads=args.threads)

    print(f"{'T':>6s} {'median dist':>12s} {'envelope':>10s} {'survival':>9s}")
    meds = []
    for t in ts:
        r = int(np.searchsorted(res.ts, t))
        med = float(np.median(res.subspace_dist[:, r]))
        env = analysis.phase2_highprob_bound(beta, t)
        surv = float(res.good_event[:, r].mean())
        meds.append(med)
        print(f"{t:>6d} {med:>12.5f} {env:>10.5f} {surv:>9.3f}")

    # the first rows still carry the warm-start transient, so fit the tail
    slope, _ = analysis.fit_power_slope([beta + t for t in ts[2:]], meds[2:])
    print(f"fitted slope of log median vs log(beta + T), T >= {ts[2]}: "
          f"{slope:+.3f}")
    print("a pure 1/sqrt(T) law would give -0.500")


if __name__ == "__main__":
    main()
