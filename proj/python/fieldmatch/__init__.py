"""Hierarchical multi-field solution-company matching.

Thin wrapper over the C++ core; see the project README for the pipeline
commands and file formats.
"""

from fieldmatch._core import (  # noqa: F401
    CompanyRecord,
    FieldSchema,
    MatchExample,
    SolutionRecord,
    TokenSequence,
    ValidationReport,
    Vocab,
    assemble_attribute,
    assemble_description,
    build_examples,
    build_vocab,
    build_vocab_files,
    config_fingerprint,
    default_config,
    evaluate,
    gen_data,
    generate_corpus,
    gradient_suite,
    pretrain,
    rank,
    ranking_metrics,
    run_experiment,
    sequence_violations_description,
    split_dataset,
    train,
    validate_company,
    validate_solution,
)

__all__ = [
    "CompanyRecord",
    "FieldSchema",
    "MatchExample",
    "SolutionRecord",
    "TokenSequence",
    "ValidationReport",
    "Vocab",
    "assemble_attribute",
    "assemble_description",
    "build_examples",
    "build_vocab",
    "build_vocab_files",
    "config_fingerprint",
    "default_config",
    "evaluate",
    "gen_data",
    "generate_corpus",
    "gradient_suite",
    "pretrain",
    "rank",
    "ranking_metrics",
    "run_experiment",
    "sequence_violations_description",
    "split_dataset",
    "train",
    "validate_company",
    "validate_solution",
]
