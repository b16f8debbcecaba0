"""E(3)-equivariant graph self-attention for carbohydrate NMR chemical
shift prediction from conformer ensembles."""

from .irreps import GeometricTensor, Irreps, parse_irreps
from .model import (
    GeqShiftModel,
    ModelConfig,
    Standardization,
    load_checkpoint,
    predict_ensemble,
    predict_multi_model,
    save_checkpoint,
)
from .molgraph import (
    MoleculeRecord,
    build_graph,
    load_dataset,
    save_dataset,
    stratified_kfold,
)
from .training import TrainConfig, train
from .evaluation import metrics, run_cv, export_error_data, evaluate_external

__version__ = "0.1.0"

__all__ = [
    "GeometricTensor",
    "Irreps",
    "parse_irreps",
    "GeqShiftModel",
    "ModelConfig",
    "Standardization",
    "load_checkpoint",
    "save_checkpoint",
    "predict_ensemble",
    "predict_multi_model",
    "MoleculeRecord",
    "build_graph",
    "load_dataset",
    "save_dataset",
    "stratified_kfold",
    "TrainConfig",
    "train",
    "metrics",
    "run_cv",
    "export_error_data",
    "evaluate_external",
    "__version__",
]
