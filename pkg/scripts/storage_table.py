"""Compression percentages at N=16384 from the partition alone (no dense matrices)."""

import argparse

from hbem.cli import write_csv
from hbem.config import ExperimentConfig
from hbem.experiments import run_inverse_experiment

p = argparse.ArgumentParser()
p.add_argument("--refinement", type=int, default=2048)
p.add_argument("--out", default=None)
args = p.parse_args()

cfg = ExperimentConfig(refinement=args.refinement, ranks=[2, 3, 5, 7, 9], storage_only=True, timing=False)
write_csv(run_inverse_experiment(cfg), args.out)
