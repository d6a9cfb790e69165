"""phi-sentinel: decide, per column of a delimited tabular file, the
probability that the column holds HIPAA-protected health information, by
ensembling a regex screen with a gradient-boosted-tree classifier over
engineered metadata features.
"""

__version__ = "0.1.0"

from .ingest import (  # noqa: E402,F401
    Column,
    ColumnSample,
    Dataset,
    infer_type,
    load_dataset,
    sample_column,
    save_dataset,
)
from .patterns import PatternEntry, PatternLibrary, builtin_library, load_library  # noqa: F401
from .screening import RegexVerdict, match_value, screen_column, screen_dataset  # noqa: F401
from .metafeatures import (  # noqa: F401
    SLOT_NAMES,
    MetaFeatures,
    MetaFeatureVector,
    compute_metafeatures,
    flatten,
)
from .gbt import (  # noqa: F401
    GbtModel,
    TrainParams,
    fit_platt,
    load_model,
    predict_margin,
    predict_proba_raw,
    save_model,
    train,
    train_calibrated,
)
from .metrics import MetricSet, average_precision, compute_metrics, roc_auc  # noqa: F401
from .explain import Attribution, Explainer, ImportanceReport, importance_report, shap_values  # noqa: F401
from .pipeline import ColumnVerdict, CrossValResult, cross_validate, scan, write_report  # noqa: F401
from .synthgen import CorpusSpec, generate_corpus, load_corpus, save_corpus  # noqa: F401
