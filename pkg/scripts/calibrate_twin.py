"""Fit the per-hop error model from a drifting twin and derive a polling plan."""

import argparse
import json

from prednm.harness import ExperimentConfig, run
from prednm.network import TwinConfig
from prednm.polling import InfeasiblePlan, PollingParams, recommend_interval
from prednm.verification import ErrorModel, calibrate, t_vfail


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--theta", type=float, default=3.0)
    ap.add_argument("--twin-mean", type=float, default=12.0)
    ap.add_argument("--hop-time", type=float, default=100.0,
                    help="mean time a packet spends per switch")
    ap.add_argument("--budget", type=float, default=1.0, help="bandwidth budget, percent")
    args = ap.parse_args()

    samples = []
    for seed in range(1, args.seeds + 1):
        # no tolerance: observe the free-running drift between realignments
        rep = run(ExperimentConfig(5, float("inf"), 5, seed=seed,
                                   twin=TwinConfig(mean_service=args.twin_mean)))
        samples.extend(rep.error_samples)
    model = calibrate(ErrorModel(), samples, hop_time=args.hop_time)
    out = {"samples": len(samples), "eps_per_hop": model.eps, "me_dp": model.me_dp,
           "t_vfail": t_vfail(model, args.theta)}
    params = PollingParams(P=2, S=800, N=3, T=1, delta=0.1, bw_total=1e5)
    try:
        out["plan"] = recommend_interval(model, args.theta, params, args.budget).to_json()
    except InfeasiblePlan as exc:
        out["plan"] = {"infeasible": exc.constraint}
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
