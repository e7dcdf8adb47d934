"""Experiment configuration."""

from __future__ import annotations

from dataclasses import dataclass, field


class ExperimentError(RuntimeError):
    """A precondition of an experiment does not hold."""


def parse_int_list(text: str) -> list[int]:
    """'2..9' -> [2, ..., 9]; '5,10,20' -> [5, 10, 20]; both forms may be mixed."""
    out: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            a, b = part.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError(f"empty range {part!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValueError(f"no integers in {text!r}")
    return out


@dataclass
class ExperimentConfig:
    geometry: str = "lshape"         # lshape | cube | file
    refinement: int = 64             # L-shape: 8*refinement elements; cube: 12*refinement^2
    scale: float = 0.5
    mesh_file: str | None = None
    eta: float = 2.0
    n_leaf: int = 25
    ranks: list[int] = field(default_factory=lambda: list(range(2, 10)))
    seed: int = 12345
    tol: float = 1e-6                # power-iteration relative tolerance
    threads: int = 1
    max_dense_n: int = 4096
    storage_only: bool = False
    timing: bool = True

    def __post_init__(self):
        if self.geometry not in ("lshape", "cube", "file"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.geometry == "file" and not self.mesh_file:
            raise ValueError("geometry 'file' needs a mesh file")
        if not self.eta > 0:
            raise ValueError("eta must be > 0")
        if self.n_leaf < 1:
            raise ValueError("n_leaf must be >= 1")
        if self.refinement < 1:
            raise ValueError("refinement must be >= 1")
        if not self.scale > 0:
            raise ValueError("scale must be > 0")
        if not self.ranks:
            raise ValueError("rank list is empty")
        if any(b <= a for a, b in zip(self.ranks, self.ranks[1:])):
            raise ValueError("ranks must be strictly ascending")
        if self.ranks[0] < 0:
            raise ValueError("ranks must be >= 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
