"""Strategy comparison and w_t sweep on the synthetic three-system desk grid.

    python3 scripts/run_desk_sweep.py --seed 0 --jobs 500
"""

import argparse
import json

from gridsched.desk import desk_config
from gridsched.experiment import run_experiment


def row(label, rep):
    return {"run": label, "avg_response_min": round(rep.avg_response_minutes, 2),
            "cost": round(rep.total_electricity_cost, 3),
            "bsld": round(rep.mean_bounded_slowdown, 2)}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=500)
    ap.add_argument("--json", action="store_true", help="print rows as JSON lines")
    args = ap.parse_args()

    rows = []
    for strat in ("BS", "INST", "STABLE"):
        rows.append(row(strat, run_experiment(desk_config(args.seed, args.jobs, strategy=strat))))
    rows.append(row("TWOPRICE w_t=0", run_experiment(
        desk_config(args.seed, args.jobs, strategy="TWOPRICE", w_t=0))))
    for w in (0, 25, 50, 75, 100):
        rows.append(row(f"MCMF w_t={w}", run_experiment(
            desk_config(args.seed, args.jobs, strategy="MCMF", w_t=w))))

    for r in rows:
        if args.json:
            print(json.dumps(r))
        else:
            print(f"{r['run']:<16} response {r['avg_response_min']:>9.2f} min   "
                  f"cost {r['cost']:>8.3f}   bsld {r['bsld']:>8.2f}")


if __name__ == "__main__":
    main()
