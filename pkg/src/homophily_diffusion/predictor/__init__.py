from .extend import extend_collection
from .features import INDIFFERENT, VULNERABLE, ActivityIndex, EnvFeatures, extract_env_features, label_states
from .hmm import HMM, baum_welch
from .methods import (
    METHODS,
    DBNPredictor,
    LinRegressPredictor,
    PredictorParams,
    baseline_predict,
    cascade_predict,
    degact_predict,
    predict_probabilities,
    random_predict,
)
from .model import (
    EmissionModel,
    TransitionModel,
    fit_emission_hmms,
    fit_transition_arrays,
    fit_transition_model,
    predict_action,
)

__all__ = [
    "ActivityIndex",
    "DBNPredictor",
    "EmissionModel",
    "EnvFeatures",
    "HMM",
    "INDIFFERENT",
    "LinRegressPredictor",
    "METHODS",
    "PredictorParams",
    "TransitionModel",
    "VULNERABLE",
    "baseline_predict",
    "baum_welch",
    "cascade_predict",
    "degact_predict",
    "extend_collection",
    "extract_env_features",
    "fit_emission_hmms",
    "fit_transition_arrays",
    "fit_transition_model",
    "label_states",
    "predict_action",
    "predict_probabilities",
    "random_predict",
]
