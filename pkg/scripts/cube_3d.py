"""Inverse compression on the cube surface; fits log(err) against sqrt(r)."""

import argparse

from hbem.cli import write_csv
from hbem.config import ExperimentConfig
from hbem.experiments import run_3d_experiment

p = argparse.ArgumentParser()
p.add_argument("--m", type=int, default=8)
p.add_argument("--ranks", default="5,10,20,30")
p.add_argument("--threads", type=int, default=1)
p.add_argument("--out", default=None)
args = p.parse_args()

cfg = ExperimentConfig(geometry="cube", refinement=args.m, scale=1.0,
                       ranks=[int(r) for r in args.ranks.split(",")], threads=args.threads)
res = run_3d_experiment(cfg)
write_csv(res, args.out)
print(f"slope log(err) vs sqrt(r) = {res.fits['slope_log_err_vs_sqrt_r']:.3f}")
