"""Data-driven Koopman stabilization of boundary-controlled reaction-diffusion systems."""

__version__ = "0.1.0"

from .config import ExperimentConfig, load_config, parse_config, serialize_config
from .dictionary import Dictionary, ObservableSpec, cube_triples
from .lifting import BilinearModel, CylinderConfig
from .plant import PlantSpec, SnapshotDataset, Trajectory, collect_snapshots, simulate
from .spatial import (CosineBasis, Grid, LegendreTensorBasis, StateProfile,
                      inner_product, make_ic_g, random_ic)

__all__ = [
    "ExperimentConfig", "load_config", "parse_config", "serialize_config",
    "Dictionary", "ObservableSpec", "cube_triples",
    "BilinearModel", "CylinderConfig",
    "PlantSpec", "SnapshotDataset", "Trajectory", "collect_snapshots", "simulate",
    "CosineBasis", "Grid", "LegendreTensorBasis", "StateProfile",
    "inner_product", "make_ic_g", "random_ic",
]
