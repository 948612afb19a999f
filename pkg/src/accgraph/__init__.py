"""Parallel graph analytics with the Active-Compute-Combine model and JIT task management."""
from .acc import AlgorithmSpec, Combine, CombineClass, Metadata, fold_updates, validate_combine
from .engine import EngineConfig, RunResult, RunStats, run
from .graph import CSRGraph, EdgeList, build_csr, generate_weights, load_edge_list, read_binary, write_binary

__version__ = "0.1.0"

__all__ = [
    "AlgorithmSpec", "Combine", "CombineClass", "Metadata", "fold_updates", "validate_combine",
    "EngineConfig", "RunResult", "RunStats", "run",
    "CSRGraph", "EdgeList", "build_csr", "generate_weights", "load_edge_list", "read_binary",
    "write_binary",
]
