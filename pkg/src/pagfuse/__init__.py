"""Learning partial ancestral graphs from observational and interventional discrete data."""

from .dataset import DatasetBundle, DiscreteTable, VariableSpec, load_manifest
from .fusion import HyperParams, build_pag, learn_pag
from .graphcore import MixedGraph, dag_to_cpdag, latent_project
from .metrics import evaluate

__all__ = [
    "DatasetBundle",
    "DiscreteTable",
    "HyperParams",
    "MixedGraph",
    "VariableSpec",
    "build_pag",
    "dag_to_cpdag",
    "evaluate",
    "latent_project",
    "learn_pag",
    "load_manifest",
]
__version__ = "0.1.0"
