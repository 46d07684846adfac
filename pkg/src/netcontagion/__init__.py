"""Estimation of causal peer-contagion effects on networks under latent
homophily: graph tooling, semi-synthetic simulation, random-walk relational
training of node embeddings, plug-in and baseline estimators, and the
accompanying diagnostic studies."""

from .graph import (
    BlockModelSpec,
    Graph,
    GraphError,
    degree,
    equal_blocks_spec,
    from_edges,
    graph_summary,
    load_edge_list,
    sbm_generate,
    shared_neighbor_probability,
)
from .simulate import (
    AggregatedTreatment,
    Covariates,
    SimulationParams,
    aggregate_treatment,
    bin_covariate,
    block_covariates,
    draw_treatments,
    oracle_contrast,
    oracle_estimand,
    propensity,
    simulate_outcome_continuous,
    vaccination_design,
)
from .sampler import SamplerConfig, SubgraphSample, random_walk, sample_subgraph, visit_frequencies
from .training import (
    LinearHead,
    LossBreakdown,
    ModelParams,
    TrainConfig,
    batch_loss,
    edge_probability,
    gradients,
    load_params,
    predict_outcome,
    save_params,
    train,
)
from .estimators import (
    EstimateReport,
    community_memberships,
    default_community_count,
    intervene_aggregate,
    parametric_baseline,
    plugin_contrast,
    plugin_mean_outcome,
    unadjusted_ols,
)
from .diagnostics import ExperimentCell, LlnStudyResult, bias_table, lln_study, seed_study

__version__ = "0.1.0"
