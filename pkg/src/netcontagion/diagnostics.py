"""Empirical studies: estimand concentration as graphs grow, seed-variation
error bars, and the bias comparison grid across confounding strengths.

All randomness descends from per-study root seeds through named
sub-streams, so every study is reproducible and grid cells are independent.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import estimators as est
from .graph import BlockModelSpec, Graph, equal_blocks_spec, sbm_generate, shared_neighbor_probability
from .rng import derive_seed
from .sampler import SamplerConfig
from .simulate import (
    AGG_AVERAGE,
    Covariates,
    SimulationParams,
    aggregate_treatment,
    block_covariates,
    draw_treatments,
    oracle_contrast,
    oracle_estimand,
    simulate_outcome_continuous,
    vaccination_design,
)
from .training import TrainConfig, train

DESIGN_CONTINUOUS = "continuous"
DESIGN_VACCINATION = "vaccination"


class DiagnosticsError(ValueError):
    pass


@dataclass
class LlnStudyResult:
    """Cross-replicate variance of the oracle estimand and the
    shared-neighbor probability, per graph size."""

    n_values: list[int]
    variances: list[float]
    shared_neighbor_probs: list[float]
    fitted_log_slope: float


def lln_study(n_grid, replicates: int, expected_degree: float,
              params: SimulationParams, seed: int = 0,
              statistic: str = "level", t_star: int = 0,
              pair_sample_size: int = 20_000) -> LlnStudyResult:
    """For each n, generate `replicates` one-block graphs with edge
    probability expected_degree/n, record the variance of the oracle
    estimand across replicates and the mean shared-neighbor probability,
    then fit the least-squares slope of log variance against log n.

    Covariates are drawn uniformly per replicate so the estimand has
    genuine sampling variability. statistic="contrast" studies
    psi(1)-psi(0) instead of the level psi(t_star); for the average
    aggregator that contrast is constant, so its variance is zero and the
    slope is undefined (NaN).
    """
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 2 or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise DiagnosticsError("n_grid must be strictly increasing with >= 2 sizes")
    if replicates < 10:
        raise DiagnosticsError("need >= 10 replicates per size")
    if statistic not in ("level", "contrast"):
        raise DiagnosticsError("statistic must be 'level' or 'contrast'")
    variances, probs = [], []
    for n in n_grid:
        p_edge = min(expected_degree / n, 1.0)
        values = np.empty(replicates)
        p_shared = np.empty(replicates)
        for r in range(replicates):
            graph_seed = derive_seed(seed, "lln-graph", n, r)
            spec = BlockModelSpec(n=n, block_of=np.zeros(n, dtype=np.int64), P=[[p_edge]])
            g = sbm_generate(spec, graph_seed)
            rng_cov = np.random.default_rng(derive_seed(seed, "lln-cov", n, r))
            cov = Covariates(rng_cov.choice(np.array([-1, 0, 1], dtype=np.int8), size=n))
            if statistic == "level":
                values[r] = oracle_estimand(g, cov, params, t_star)
            else:
                values[r] = oracle_contrast(g, cov, params)
            p_shared[r] = shared_neighbor_probability(
                g, pair_sample_size, derive_seed(seed, "lln-pairs", n, r))
        variances.append(float(values.var(ddof=1)))
        probs.append(float(p_shared.mean()))
    if all(v > 0 for v in variances):
        logs_n = np.log(np.asarray(n_grid, dtype=np.float64))
        logs_v = np.log(np.asarray(variances))
        slope = float(np.polyfit(logs_n, logs_v, 1)[0])
    else:
        slope = float("nan")
    return LlnStudyResult(
        n_values=n_grid,
        variances=variances,
        shared_neighbor_probs=probs,
        fitted_log_slope=slope,
    )


@dataclass
class ExperimentCell:
    """Everything one grid cell needs: the graph model, the confounder
    derivation, the data-generating coefficients, and training settings.

    data_seed drives graph/covariate/treatment/noise draws and stays fixed
    across training seeds; train_seed_root spawns the per-repeat sampler
    and initialization streams.
    """

    graph_spec: BlockModelSpec = None
    graph: Graph = None
    confounder_label: str = "block"
    resample_rate: float = 0.0
    sim: SimulationParams = field(default_factory=SimulationParams)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    design: str = DESIGN_CONTINUOUS
    community_count: int = 0  # 0 -> min(d, n//20)
    data_seed: int = 0
    train_seed_root: int = 1
    vaccination_full_aggregate: bool = False  # aggregate pre-deletion treatments instead

    def __post_init__(self):
        if (self.graph is None) == (self.graph_spec is None):
            raise DiagnosticsError("provide exactly one of graph or graph_spec")
        if self.design not in (DESIGN_CONTINUOUS, DESIGN_VACCINATION):
            raise DiagnosticsError(f"unknown design {self.design!r}")


@dataclass
class CellData:
    """Realized draw of one cell: observed quantities plus the evaluation
    node set (None means all nodes)."""

    graph: Graph
    cov: Covariates
    v: "object"
    y: np.ndarray
    eval_nodes: np.ndarray | None
    oracle_contrast: float


def realize_cell(cell: ExperimentCell) -> CellData:
    """Generate the cell's dataset from its data seed."""
    g = cell.graph if cell.graph is not None else sbm_generate(
        cell.graph_spec, derive_seed(cell.data_seed, "graph"))
    block_of = cell.graph_spec.block_of if cell.graph_spec is not None else None
    if block_of is None:
        raise DiagnosticsError("cells over a fixed graph need explicit covariates; use graph_spec")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # two-block warnings are expected in smoke grids
        cov = block_covariates(block_of, cell.resample_rate, derive_seed(cell.data_seed, "covariates"))
    t = draw_treatments(cov, derive_seed(cell.data_seed, "treatment"))
    if cell.design == DESIGN_CONTINUOUS:
        v = aggregate_treatment(g, t, cell.sim.aggregator)
        y = simulate_outcome_continuous(v, cov, cell.sim, derive_seed(cell.data_seed, "noise"))
        truth = oracle_contrast(g, cov, cell.sim)
        return CellData(graph=g, cov=cov, v=v, y=y, eval_nodes=None, oracle_contrast=truth)
    split = vaccination_design(g, t, derive_seed(cell.data_seed, "vaccination"))
    observed_t = t.astype(np.float64) if cell.vaccination_full_aggregate else split.treatments
    v = aggregate_treatment(g, observed_t, cell.sim.aggregator)
    return CellData(graph=g, cov=cov, v=v, y=split.outcomes,
                    eval_nodes=split.eval_nodes, oracle_contrast=0.0)


@dataclass
class EstimatorSummary:
    estimator: str
    mean: float
    stderr: float
    n_seeds: int


def seed_study(cell: ExperimentCell, n_seeds: int) -> dict[str, EstimatorSummary]:
    """Fix the data draw, rerun only embedding training across seeds.

    The embedding row reports mean and standard error over n_seeds
    training/initialization seeds. The deterministic baselines run once;
    their stderr is the classical regression standard error of the
    aggregated-treatment coefficient.
    """
    if n_seeds < 2:
        raise DiagnosticsError("need >= 2 seeds")
    data = realize_cell(cell)
    g, v, y = data.graph, data.v, data.y

    un = est.unadjusted_fit(v, y, data.eval_nodes)
    k = cell.community_count or est.default_community_count(g.n, cell.train.d)
    pm = est.parametric_fit(g, v, y, k, data.eval_nodes)

    contrasts = np.empty(n_seeds)
    for s in range(n_seeds):
        scfg = replace(cell.sampler, seed=derive_seed(cell.train_seed_root, "sampler", s))
        tcfg = replace(cell.train, seed=derive_seed(cell.train_seed_root, "init", s))
        params = train(g, v, y, scfg, tcfg)
        report = est.plugin_contrast(g, params, cell.sim.aggregator, data.eval_nodes, seed=s)
        contrasts[s] = report.t_star_contrast
    emb_mean = float(contrasts.mean())
    emb_stderr = float(contrasts.std(ddof=1) / math.sqrt(n_seeds))
    return {
        est.UNADJUSTED: EstimatorSummary(est.UNADJUSTED, float(un.coefficients[1]), float(un.stderr[1]), 1),
        est.PARAMETRIC: EstimatorSummary(est.PARAMETRIC, float(pm.coefficients[1]), float(pm.stderr[1]), 1),
        est.EMBEDDING: EstimatorSummary(est.EMBEDDING, emb_mean, emb_stderr, n_seeds),
    }


@dataclass
class BiasCell:
    confounder: str
    beta1: float | None
    summaries: dict | None
    oracle: float
    error: str | None = None


@dataclass
class BiasTable:
    cells: list[BiasCell]
    markdown: str
    csv_rows: list[tuple]

    @property
    def failures(self) -> list[BiasCell]:
        return [c for c in self.cells if c.error is not None]


def _markdown_table(cells: list[BiasCell]) -> str:
    columns = [(c.confounder, c.beta1) for c in cells]
    header = ["estimator"] + [
        conf if b1 is None else f"{conf} b1={b1:g}" for conf, b1 in columns
    ]
    lines = ["| " + " | ".join(header) + " |",
             "|" + "|".join(["---"] * len(header)) + "|"]
    for name in (est.UNADJUSTED, est.PARAMETRIC, est.EMBEDDING):
        row = [name]
        for cell in cells:
            if cell.error is not None:
                row.append("(failed)")
            else:
                s = cell.summaries[name]
                row.append(f"{s.mean:.2f} ± {s.stderr:.2f}")
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def bias_table(base_cell: ExperimentCell, confounder_rates: dict[str, float],
               beta1_grid, n_seeds: int) -> BiasTable:
    """Run seed_study on every (confounder variant, beta1) cell.

    For the vaccination design beta1 is not part of the generating process
    and the grid collapses to the confounder variants. Per-cell failures
    are collected into the table rather than aborting the grid.
    """
    cells: list[BiasCell] = []
    beta1_values = list(beta1_grid) if base_cell.design == DESIGN_CONTINUOUS else [None]
    for label, rate in confounder_rates.items():
        for b1 in beta1_values:
            sim = base_cell.sim if b1 is None else replace(base_cell.sim, beta1=float(b1))
            cell = replace(base_cell, confounder_label=label, resample_rate=rate, sim=sim)
            try:
                summaries = seed_study(cell, n_seeds)
                oracle = realize_cell(cell).oracle_contrast
                cells.append(BiasCell(label, b1, summaries, oracle))
            except Exception as exc:  # noqa: BLE001 - cell isolation is the point
                cells.append(BiasCell(label, b1, None, float("nan"), error=str(exc)))
    csv_rows = []
    for cell in cells:
        b1_field = "NA" if cell.beta1 is None else f"{cell.beta1:g}"
        if cell.error is not None:
            csv_rows.append((cell.confounder, b1_field, "error", "", "", ""))
            continue
        for name in (est.UNADJUSTED, est.PARAMETRIC, est.EMBEDDING):
            s = cell.summaries[name]
            csv_rows.append((cell.confounder, b1_field, name,
                             repr(s.mean), repr(s.stderr), s.n_seeds))
    return BiasTable(cells=cells, markdown=_markdown_table(cells), csv_rows=csv_rows)
