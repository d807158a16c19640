"""Knowledge tracing on interaction logs: baselines, logistic regression
feature families, DKT/SAKT and correlation-based LIME."""

from ._core import (
    Dataset,
    DataError,
    Error,
    NumericError,
    UsageError,
    __version__,
    compute_auc,
    explain,
    featurize,
    from_records,
    generate,
    leaderboard,
    load_dataset,
    median_sequence_length,
    preprocess,
    run_cli,
    run_experiment,
    sample,
    save_dataset,
    skill_difficulty,
    split,
)


def feature_matrix(vocabulary, dataset, family="best_lr_tw", windows="", jobs=1):
    """Feature rows as a scipy.sparse CSR matrix plus the label vector."""
    from scipy.sparse import csr_matrix

    m = featurize(vocabulary, dataset, family=family, windows=windows, jobs=jobs)
    x = csr_matrix(
        (m["vals"], m["cols"], m["row_ptr"]),
        shape=(len(m["labels"]), m["n_cols"]),
    )
    return x, m["labels"]


__all__ = [
    "Dataset",
    "DataError",
    "Error",
    "NumericError",
    "UsageError",
    "__version__",
    "compute_auc",
    "explain",
    "feature_matrix",
    "featurize",
    "from_records",
    "generate",
    "leaderboard",
    "load_dataset",
    "median_sequence_length",
    "preprocess",
    "run_cli",
    "run_experiment",
    "sample",
    "save_dataset",
    "skill_difficulty",
    "split",
]
