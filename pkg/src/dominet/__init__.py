"""dominet: sparse network recovery from panels, dominant-unit ranking, and
random-forest profiling of dominant vs. follower units."""

from .config import RunConfig, parse_config
from .forest import (
    ForestConfig,
    ForestModel,
    RunAggregate,
    fit_forest,
    fit_tree,
    mda_importance,
    mdi_importance,
    multi_run,
    tune_mtry,
)
from .lasso import (
    LassoConfig,
    NodewiseFit,
    fit_adaptive_lasso,
    fit_rigorous_lasso,
    nodewise_regressions,
    penalty_loadings,
    rigorous_lambda,
    soft_threshold,
)
from .metrics import ConfusionTable, MetricSet, confusion_metrics, optimal_cutoff, roc_auc
from .network import (
    CoefficientMatrix,
    ConcentrationMatrix,
    DominanceRanking,
    EdgeList,
    column_norms,
    concentration,
    dominant_count,
    edge_list,
    norm_density_diagnostic,
    stack_coefficients,
)
from .panel import (
    MissingPolicy,
    Panel,
    StandardizedPanel,
    first_difference,
    load_panel_csv,
    scale_columns,
    standardize,
)
from .preprocess import (
    FeatureMatrix,
    FilterReport,
    correlation_prune,
    group_mean_differences,
    load_feature_csv,
    near_zero_variance_filter,
)
from .synth import (
    SynthClassSpec,
    SynthPanelSpec,
    generate_classification_data,
    generate_dominant_panel,
)

__version__ = "0.1.0"
