"""Yield-model explanation pipeline.

From a field survey table to farmer-facing recommendations in five stages:
fit a bootstrap forest (grid-searched by leave-one-out R^2), attribute its
predictions exactly with path-dependent tree Shapley values, let a language
model iteratively refine recommendations against executed analyses of the
data, score the per-round texts with blinded evaluators, and classify each
score trajectory as rising, falling, peaked, or flat.
"""

from .dataset import (
    Category,
    Dataset,
    FeatureSchema,
    SchemaEntry,
    catalog_summary,
    dataset_to_csv,
    default_schema,
    load_dataset,
    load_schema,
    schema_to_csv,
    synthetic_dataset,
)
from .forest import (
    CvReport,
    Forest,
    ForestConfig,
    LooResult,
    RegressionTree,
    cv_report_to_csv,
    default_grid,
    fit_forest,
    forest_from_json,
    forest_to_json,
    grid_search,
    loo_cv,
    predict,
    predict_rows,
    r_squared,
)
from .shap import (
    BeeswarmData,
    FeatureRanking,
    ShapMatrix,
    beeswarm_export,
    explain_dataset,
    rank_features,
    shap_matrix_from_csv,
    shap_matrix_to_csv,
    tree_shap,
)
from .agent_loop import (
    ArtifactBundle,
    HttpLlmClient,
    PromptTemplates,
    RoundRecord,
    ScriptedExecutor,
    ScriptedLlmClient,
    SessionState,
    SubprocessExecutor,
    archive_session,
    extract_code_block,
    init_round0,
    load_replay,
    load_session,
    progression_report,
    refine_round,
    run_session,
)
from .evaluation import (
    AVERAGE,
    CellStat,
    EvaluationSheet,
    EvaluatorProfile,
    Group,
    Metric,
    RoundSummary,
    ScoreMatrix,
    TrajectorySummary,
    aggregate,
    make_evaluation_sheet,
    metric_series,
    record_scores,
    scores_from_csv,
    scores_to_csv,
    summarize_trajectory,
    summary_to_csv,
)
from .trajectory_stats import (
    AnovaResult,
    DerivativeProfile,
    GamConfig,
    GamFit,
    LinearFit,
    RoundSeries,
    TrendClassification,
    Verdict,
    aic,
    anova_one_way,
    classify_trend,
    derivative_profile,
    detect_inverted_u,
    fit_gam,
    fit_linear,
)
from .render import PlotStyle, plot_beeswarm, plot_trajectory

__version__ = "0.1.0"
