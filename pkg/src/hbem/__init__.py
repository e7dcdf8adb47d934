"""Hierarchical-matrix compression of Galerkin single-layer BEM matrices."""

from .clustering import build_block_partition, build_cluster_tree
from .config import ExperimentConfig
from .mesh import BoundaryMesh, generate_cube_surface, generate_lshape_boundary

__version__ = "0.1.0"

__all__ = ["BoundaryMesh", "ExperimentConfig", "build_block_partition", "build_cluster_tree",
           "generate_cube_surface", "generate_lshape_boundary"]
