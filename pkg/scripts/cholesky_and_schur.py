"""H-Cholesky error sweep and Schur-complement singular values on the L-shape."""

import argparse
from pathlib import Path

from hbem.cli import write_csv
from hbem.config import ExperimentConfig
from hbem.experiments import run_cholesky_experiment, run_schur_profile

p = argparse.ArgumentParser()
p.add_argument("--n", type=int, default=512)
p.add_argument("--out", default="results")
args = p.parse_args()

Path(args.out).mkdir(parents=True, exist_ok=True)
cfg = ExperimentConfig(refinement=args.n // 8, ranks=list(range(1, 10)))
chol = run_cholesky_experiment(cfg)
write_csv(chol, str(Path(args.out) / f"cholesky_N{args.n}.csv"))
schur = run_schur_profile(cfg)
write_csv(schur, str(Path(args.out) / f"schur_N{args.n}.csv"))
print(chol.fits, schur.fits)
