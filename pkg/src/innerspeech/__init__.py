"""Subject-specific inner-speech EEG classification toolkit.

Pipeline stages: synthetic/real trial ingestion (EIT1), statistical artifact
screening with VMD drift removal, TD/FD/TFD feature extraction, feature
selection (MRMR and friends), logistic-regression / LDA / stacked-ensemble
models, and pooled-prediction cross-validation with report rendering.
"""

__version__ = "0.1.0"

from .errors import NumericalError, UsageError, ValidationError
from .evaluation import (
    EvalReport,
    FoldPlan,
    PipelineSpec,
    SelectorSpec,
    cross_validate,
    metrics_from_confusion,
    render_report,
    stratified_kfold,
)
from .features import (
    FeatureCatalog,
    FeatureDescriptor,
    FeatureMatrix,
    Scaler,
    apply_scaler,
    build_feature_matrix,
    extract_fd,
    extract_td,
    extract_tfd,
    fit_scaler,
    load_feature_matrix,
    save_feature_matrix,
)
from .models import (
    LdaModel,
    LogRegModel,
    StackEnsemble,
    TrainedPipeline,
    ensemble_predict,
    ensemble_train,
    lda_train,
    load_model,
    logreg_predict,
    logreg_predict_proba,
    logreg_train,
    save_model,
)
from .preprocess import ArtifactMask, VmdParams, VmdResult, detect_artifacts, remove_artifacts, vmd
from .selection import PcaTransform, RankedFeatures, k_sweep, mrmr_select, pca_apply, pca_fit, rank_features
from .signal_math import Spectrum, WaveletDecomposition, dft, dwt, hilbert_envelope, idft, idwt, psd
from .topomap import ScalpField, compute_erp, render_topomap
from .trialset import (
    GroundTruth,
    SynthSpec,
    TrialSet,
    generate_synthetic,
    load_trialset,
    save_trialset,
    slice_interval,
)

__all__ = [name for name in dir() if not name.startswith("_")]
