"""Concept-annotated synthetic image benchmarks.

Procedural dSprites / shapes3d-style dataset generation, concept bottleneck
models, post-hoc concept extraction, and (weakly supervised) VAEs, backed by
the C++ core. The CLI (`conceptbench`) drives the full experiment protocols;
this module exposes the primitive operations.
"""

from ._core import (  # noqa: F401
    CBModel,
    ConceptSchema,
    TaskSpec,
    TreeEnsemble,
    VAEModel,
    adaptive_average,
    apply_subset,
    build_schema,
    concept_accuracy,
    concepts_to_index,
    fit_tree_ensemble,
    generate_dataset,
    index_to_concepts,
    kl_gaussian,
    make_reduced_schema,
    make_task,
    product_of_experts,
    render,
    sample_pair,
    select_shared_set,
    train_cbm,
    train_vae,
    train_wvae,
)

__all__ = [
    "CBModel",
    "ConceptSchema",
    "TaskSpec",
    "TreeEnsemble",
    "VAEModel",
    "adaptive_average",
    "apply_subset",
    "build_schema",
    "concept_accuracy",
    "concepts_to_index",
    "fit_tree_ensemble",
    "generate_dataset",
    "index_to_concepts",
    "kl_gaussian",
    "make_reduced_schema",
    "make_task",
    "product_of_experts",
    "render",
    "sample_pair",
    "select_shared_set",
    "train_cbm",
    "train_vae",
    "train_wvae",
]
