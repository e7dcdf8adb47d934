"""H versus H^2 compression of the inverse at N and 2N."""

import argparse
from pathlib import Path

from hbem.cli import write_csv
from hbem.config import ExperimentConfig
from hbem.experiments import run_h2_experiment

p = argparse.ArgumentParser()
p.add_argument("--sizes", default="1024,2048")
p.add_argument("--out", default="results")
args = p.parse_args()

Path(args.out).mkdir(parents=True, exist_ok=True)
for n in map(int, args.sizes.split(",")):
    res = run_h2_experiment(ExperimentConfig(refinement=n // 8, ranks=list(range(1, 9))))
    write_csv(res, str(Path(args.out) / f"h2_N{n}.csv"))
