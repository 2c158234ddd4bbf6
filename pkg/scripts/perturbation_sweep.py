"""Mean response and cost of MCMF under wait-prediction perturbation thresholds.

    python3 scripts/perturbation_sweep.py --seed 0 --wt 25
"""

import argparse

from gridsched.desk import desk_config
from gridsched.experiment import run_experiment
from gridsched.metascheduler import PERTURB_HOURS


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=500)
    ap.add_argument("--wt", type=float, default=25.0)
    args = ap.parse_args()

    base = None
    for p in PERTURB_HOURS:
        rep = run_experiment(desk_config(args.seed, args.jobs, strategy="MCMF", w_t=args.wt, perturb_hours=p))
        r = rep.avg_response_minutes
        base = r if base is None else base
        print(f"P={p:>2}h  response {r:9.2f} min ({100 * (r - base) / base:+6.1f}%)  "
              f"cost {rep.total_electricity_cost:8.3f}")


if __name__ == "__main__":
    main()
