"""Error of the blockwise rank-r inverse on the scaled L-shape for several N.

    python scripts/inverse_decay.py --sizes 512,2048 --out results/
"""

import argparse
from pathlib import Path

from hbem.cli import write_csv
from hbem.config import ExperimentConfig, parse_int_list
from hbem.experiments import run_inverse_experiment

p = argparse.ArgumentParser()
p.add_argument("--sizes", default="512,1024,2048")
p.add_argument("--ranks", default="2..9")
p.add_argument("--out", default="results")
args = p.parse_args()

Path(args.out).mkdir(parents=True, exist_ok=True)
for n in parse_int_list(args.sizes):
    res = run_inverse_experiment(ExperimentConfig(refinement=n // 8, ranks=parse_int_list(args.ranks)))
    write_csv(res, str(Path(args.out) / f"inverse_N{n}.csv"))
    print(f"N={n}: slope log(err) vs r = {res.fits['slope_log_err_vs_r']:.3f}")
