from thumbqc.metrics.classification import (  # noqa: F401
    DEFAULT_THRESHOLD,
    Confusion,
    MetricsReport,
    ScoredSample,
    accuracy,
    auroc,
    confusion,
    evaluate,
    f1,
    pairwise_auroc,
    write_report_csv,
    write_report_json,
)
