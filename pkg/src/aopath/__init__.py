"""Action and object pathway classifier for multiple-choice video QA."""
from .aoextractor import extract_records, top_k_labels
from .checkpoint import load_checkpoint, save_checkpoint
from .classifier import forward_batch, forward_question, predict
from .data import GenreSplit, QARecord, load_dataset, save_dataset
from .lexicon import Lexicon, build_lexicon
from .pathway_network import PathwayConfig, count_params, init_params
from .synthetic import SyntheticSpec, generate_synthetic
from .training import RunConfig, evaluate, run_ablation, run_split, train

__version__ = "0.1.0"

__all__ = [
    "GenreSplit",
    "Lexicon",
    "PathwayConfig",
    "QARecord",
    "RunConfig",
    "SyntheticSpec",
    "build_lexicon",
    "count_params",
    "evaluate",
    "extract_records",
    "forward_batch",
    "forward_question",
    "generate_synthetic",
    "init_params",
    "load_checkpoint",
    "load_dataset",
    "predict",
    "run_ablation",
    "run_split",
    "save_checkpoint",
    "save_dataset",
    "top_k_labels",
    "train",
]
