"""Monte-Carlo Shapley attributions with a multicollinearity correction."""

from .adjust import (
    AdjustmentPlan,
    CoalitionDecorrelator,
    CoalitionSpec,
    af_coalition,
    af_pair,
    af_single,
    apply_plan,
    build_plan,
)
from .dataset import (
    CovarianceCache,
    DataMatrix,
    FeatureKind,
    compute_covariance,
    inject_correlated_clone,
    load_csv,
)
from .models import (
    CARTRegressor,
    ForestRegressor,
    KNNRegressor,
    LinearRegressor,
    LogisticClassifier,
    ModelSpec,
    OutputKind,
    PredictorHandle,
    as_predictor,
    fit_forest,
    fit_knn,
    fit_linear,
    fit_logistic,
    fit_model,
    fit_tree,
)
from .shapley import (
    EstimatorConfig,
    MCCShapleyExplainer,
    Mode,
    ShapleyEstimate,
    estimate_all,
    estimate_coalition,
    estimate_single,
    exact_shapley,
)

__version__ = "0.1.0"
