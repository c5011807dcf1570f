"""Exact and approximate partition functions for Fibonacci Holant problems."""
from .core import (
    Edge,
    FibonacciFamilyParams,
    HolantError,
    HolantInstance,
    SymmetricSignature,
    attach_free_end,
    build_fibonacci_signature,
    classify_signature,
    decompose_vertex,
    instance_from_json,
    lab_rescale,
    load_instance,
    pin_edge,
    simple_path_reaches,
)
from .oracle import brute_force_Z, brute_force_marginal, ratio_exact, shallow_exact_ratio

__version__ = "0.1.0"
