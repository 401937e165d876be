"""Topic-diffusion reconstruction, prediction and homophily distortion scoring."""

from .attributes import (
    activity_distribution,
    cluster_activity,
    derive_attributes,
    derive_content_role,
    derive_info_role,
    derive_location,
    kl_divergence,
    kl_symmetric,
    load_timezone_table,
    tercile_thresholds,
)
from .diffusion import (
    CollectionBuilder,
    DiffusionCollection,
    DiffusionNode,
    DiffusionSeries,
    build_collection,
    collection_report,
    topic_active_users,
)
from .distortion import TrendSeries, ks_statistic, mean_score, saturation, trend_cdf, utility
from .events import read_action_log, slice_events, write_action_log
from .experiment import ExperimentConfig, ExperimentData, run_experiment, summarize, summary_table, synthetic_sweep
from .graph import (
    SocialGraph,
    attribute_subgraph,
    attribute_values,
    connected_component_count,
    load_graph,
    load_graph_files,
    read_edge_list,
    read_user_records,
)
from .metrics import (
    FEATURE_NAMES,
    DiffusionFeatureVector,
    assemble_feature_vector,
    compute_rate,
    compute_topology_metrics,
    compute_user_metrics,
)
from .schema import ATTRIBUTES, ActionEvent, Continent, ContentRole, Role, UserRecord
from .synth import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
