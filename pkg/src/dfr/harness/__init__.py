from .datasets import DomainDataset
from .io import load_features, write_features, write_metrics, read_metrics, load_config
from .synthetic import SyntheticSpec, generate_synthetic

__all__ = [
    "DomainDataset",
    "SyntheticSpec",
    "generate_synthetic",
    "load_config",
    "load_features",
    "read_metrics",
    "write_features",
    "write_metrics",
]
