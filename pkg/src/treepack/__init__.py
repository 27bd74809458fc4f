"""Near-perfect packings of bounded-degree trees into complete graphs.

The construction follows a randomized nibble: trees are cut into balanced
levels, embedded round by round through a limping homomorphism sampler,
and the few exceptional vertices are then repaired greedily inside a small
reserve of fresh vertices. Every returned packing carries an independent
certificate.
"""

__version__ = "0.1.0"

from .errors import (
    CapabilityError,
    CorrectionFailure,
    DoubleUseError,
    EmbeddingFailure,
    InputError,
    RoundFailure,
    TreepackError,
)
from .graph import Exact, HostGraph, Sampled, bad_profile, extract_superquasirandom, quasirandom_defect
from .trees import (
    RootedTree,
    TreeFamily,
    balanced_level_partition,
    generate_counterexample_family,
    generate_family,
    group_and_pad,
    merge_small_trees,
)
from .limping import LimpingConfig, census_collisions, estimate_lemma_bounds, sample_limping
from .nibble import load_stats, run_round
from .correction import AlmostPacking, build_almost_packing, correct
from .validate import Certificate, exhaustive_pack_oracle, validate_almost_packing, validate_packing
from .pipeline import PackingResult, PipelineConfig, pack_family

__all__ = [
    "AlmostPacking", "CapabilityError", "Certificate", "CorrectionFailure", "DoubleUseError",
    "EmbeddingFailure", "Exact", "HostGraph", "InputError", "LimpingConfig", "PackingResult",
    "PipelineConfig", "RootedTree", "RoundFailure", "Sampled", "TreeFamily", "TreepackError",
    "bad_profile", "balanced_level_partition", "build_almost_packing", "census_collisions",
    "correct", "estimate_lemma_bounds", "exhaustive_pack_oracle", "extract_superquasirandom",
    "generate_counterexample_family", "generate_family", "group_and_pad", "load_stats",
    "merge_small_trees", "pack_family", "quasirandom_defect", "run_round", "sample_limping",
    "validate_almost_packing", "validate_packing",
]
