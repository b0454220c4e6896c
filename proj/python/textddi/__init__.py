"""Token-budgeted prompt selection for drug-drug interaction prediction."""

from ._textddi import (
    Corpus,
    DataError,
    InvariantError,
    NumericalError,
    Run,
    Split,
    SynthTruth,
    accuracy,
    check_split,
    cohens_kappa,
    compute_gae,
    corpus_stats,
    default_config,
    generate_synth,
    macro_f1,
    make_split,
    pr_auc,
    random_prompt,
    roc_auc,
    run_pipeline,
    split_from_dict,
    split_to_dict,
    synth_budget,
    token_count,
    tokenize,
)

__all__ = [name for name in dir() if not name.startswith("_")]
