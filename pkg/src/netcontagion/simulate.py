"""Semi-synthetic data generation on a fixed graph.

Per-node latent confounders c in {-1, 0, +1} drive both treatment
assignment (via the propensity 0.5 + 0.35*c) and the outcome; the observed
aggregated treatment is the average (or logical OR) of neighbor treatments.
Outcomes follow y = beta0*v + beta1*g(c) + noise. Ground-truth estimands
are computable because the generating coefficients are known.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .rng import as_generator

AGG_AVERAGE = "average"
AGG_OR = "or"
AGGREGATORS = (AGG_AVERAGE, AGG_OR)


class SimulationError(ValueError):
    pass


@dataclass
class Covariates:
    """Per-node confounder values, each in {-1, 0, +1}."""

    values: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int8)
        bad = ~np.isin(self.values, (-1, 0, 1))
        if bad.any():
            raise SimulationError(f"covariate values outside {{-1,0,1}} at {np.flatnonzero(bad)[:5]}")

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class SimulationParams:
    beta0: float = 1.0
    beta1: float = 0.0
    noise_sd: float = 1.0
    aggregator: str = AGG_AVERAGE
    seed: int = 0

    def __post_init__(self):
        if self.noise_sd < 0:
            raise SimulationError("noise_sd must be >= 0")
        if self.aggregator not in AGGREGATORS:
            raise SimulationError(f"aggregator must be one of {AGGREGATORS}")


@dataclass
class AggregatedTreatment:
    """Neighbor-treatment summary v per node.

    eligible is False where no neighbor has an observed treatment (isolated
    nodes, or nodes whose neighbors were all censored); such nodes carry
    v = 0 and are excluded from estimand averages.
    """

    values: np.ndarray
    eligible: np.ndarray


@dataclass
class VaccinationSplit:
    """Half/half censoring design: y = t on the selected nodes, whose own
    treatments are then deleted (NaN). The true effect of v on y is zero
    by construction."""

    treatments: np.ndarray
    outcomes: np.ndarray
    eval_nodes: np.ndarray


def bin_covariate(raw) -> Covariates:
    """Standardize to zero mean / unit variance, then cut at empirical
    tertiles: lower third -> -1, middle -> 0, upper -> +1 (ties fall to
    the lower bin). Zero-variance input collapses to all zeros, flagged."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 1 or len(raw) == 0:
        raise SimulationError("raw covariate must be a nonempty 1-d array")
    sd = raw.std()
    if sd == 0.0:
        warnings.warn("zero-variance covariate; all nodes binned to 0", stacklevel=2)
        return Covariates(np.zeros(len(raw), dtype=np.int8), degenerate=True)
    z = (raw - raw.mean()) / sd
    q1, q2 = np.quantile(z, [1 / 3, 2 / 3])
    c = np.where(z <= q1, -1, np.where(z <= q2, 0, 1))
    return Covariates(c.astype(np.int8))


def propensity(c):
    """Treatment probability 0.5 + 0.35*c, i.e. {0.15, 0.5, 0.85}."""
    arr = np.asarray(c)
    if not np.isin(arr, (-1, 0, 1)).all():
        raise SimulationError("propensity defined only on {-1, 0, 1}")
    g = 0.5 + 0.35 * arr.astype(np.float64)
    return float(g) if np.isscalar(c) or arr.ndim == 0 else g


def draw_treatments(cov: Covariates, seed) -> np.ndarray:
    """Independent Bernoulli(propensity(c_i)) draws, one per node."""
    rng = as_generator(seed)
    return (rng.random(len(cov)) < propensity(cov.values)).astype(np.int8)


def aggregate_treatment(g: Graph, t, aggregator: str = AGG_AVERAGE) -> AggregatedTreatment:
    """Summarize neighbor treatments per node: mean for "average", logical
    OR for "or". NaN treatments count as unobserved and contribute nothing;
    nodes with no observed neighbor treatment are ineligible with v = 0."""
    if aggregator not in AGGREGATORS:
        raise SimulationError(f"aggregator must be one of {AGGREGATORS}")
    t = np.asarray(t, dtype=np.float64)
    if t.shape != (g.n,):
        raise SimulationError(f"treatment vector must have {g.n} entries")
    src = np.repeat(np.arange(g.n), g.degrees())
    nbr_vals = t[g.targets]
    observed = np.isfinite(nbr_vals)
    counts = np.bincount(src, weights=observed.astype(np.float64), minlength=g.n)
    eligible = counts > 0
    if aggregator == AGG_AVERAGE:
        sums = np.bincount(src, weights=np.where(observed, nbr_vals, 0.0), minlength=g.n)
        values = np.divide(sums, counts, out=np.zeros(g.n), where=eligible)
    else:
        hits = np.bincount(src, weights=(observed & (nbr_vals > 0)).astype(np.float64), minlength=g.n)
        values = (hits > 0).astype(np.float64)
        values[~eligible] = 0.0
    return AggregatedTreatment(values=values, eligible=eligible)


def simulate_outcome_continuous(v: AggregatedTreatment, cov: Covariates, params: SimulationParams, seed) -> np.ndarray:
    """y_i = beta0*v_i + beta1*propensity(c_i) + Normal(0, noise_sd^2).

    Ineligible nodes get a value through v = 0; downstream averages drop
    them via the eligibility flags."""
    rng = as_generator(seed)
    noise = rng.normal(0.0, params.noise_sd, size=len(cov)) if params.noise_sd > 0 else 0.0
    return params.beta0 * v.values + params.beta1 * propensity(cov.values) + noise


def vaccination_design(g: Graph, t, seed) -> VaccinationSplit:
    """Select a uniformly random half S of the vertices, set y = t on S,
    then delete those treatments. Outcomes are defined only on S; the
    estimation/evaluation set is S."""
    if g.n < 2:
        raise SimulationError("vaccination design needs at least two nodes")
    t = np.asarray(t, dtype=np.float64)
    rng = as_generator(seed)
    selected = np.sort(rng.choice(g.n, size=g.n // 2, replace=False))
    censored = t.copy()
    censored[selected] = np.nan
    outcomes = np.full(g.n, np.nan)
    outcomes[selected] = t[selected]
    return VaccinationSplit(treatments=censored, outcomes=outcomes, eval_nodes=selected)


def oracle_estimand(g: Graph, cov: Covariates, params: SimulationParams, t_star: int) -> float:
    """Ground-truth mean outcome over eligible nodes under the intervention
    that sets every treatment to t_star: mean of beta0*v* + beta1*g(c)."""
    if t_star not in (0, 1):
        raise SimulationError("t_star must be 0 or 1")
    v_star = aggregate_treatment(g, np.full(g.n, float(t_star)), params.aggregator)
    if not v_star.eligible.any():
        raise SimulationError("no eligible nodes (all degrees zero)")
    el = v_star.eligible
    mean_outcome = params.beta0 * v_star.values[el] + params.beta1 * propensity(cov.values[el])
    return float(mean_outcome.mean())


def oracle_contrast(g: Graph, cov: Covariates, params: SimulationParams) -> float:
    """oracle_estimand(1) - oracle_estimand(0); equals beta0 for both
    aggregators since v* = t_star on every eligible node."""
    return oracle_estimand(g, cov, params, 1) - oracle_estimand(g, cov, params, 0)


_TWO_BLOCK_LEVELS = np.array([-1, 1], dtype=np.int8)
_LEVELS = np.array([-1, 0, 1], dtype=np.int8)


def block_covariates(block_of, resample_rate: float = 0.0, seed=0) -> Covariates:
    """Derive confounders from block identity: blocks map onto the three
    covariate levels (two blocks onto {-1, +1}; more than three wrap).
    With probability resample_rate a node's value is redrawn uniformly,
    which weakens how well the covariate predicts edges."""
    block_of = np.asarray(block_of, dtype=np.int64)
    if not 0.0 <= resample_rate <= 1.0:
        raise SimulationError("resample_rate must lie in [0, 1]")
    n_blocks = int(block_of.max()) + 1 if len(block_of) else 0
    if n_blocks == 1:
        warnings.warn("single block: all covariates 0 (degenerate)", stacklevel=2)
        c = np.zeros(len(block_of), dtype=np.int8)
    elif n_blocks == 2:
        warnings.warn("two blocks: covariate level 0 absent", stacklevel=2)
        c = _TWO_BLOCK_LEVELS[block_of]
    else:
        c = _LEVELS[block_of % 3]
    if resample_rate > 0.0:
        rng = as_generator(seed)
        redraw = rng.random(len(block_of)) < resample_rate
        c = c.copy()
        c[redraw] = rng.choice(_LEVELS, size=int(redraw.sum()))
    return Covariates(c, degenerate=(n_blocks == 1))


def _fmt(x: float) -> str:
    return "" if not np.isfinite(x) else repr(float(x))


def write_covariates(path, cov: Covariates) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "c"])
        for i, c in enumerate(cov.values.tolist()):
            w.writerow([i, c])


def read_covariates(path) -> Covariates:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    values = np.zeros(len(rows), dtype=np.int8)
    for row in rows:
        values[int(row["node_id"])] = int(row["c"])
    return Covariates(values)


def write_dataset(path, cov: Covariates, t, v: AggregatedTreatment, y) -> None:
    """One row per node: node_id, c, t, v, y, eligible. Censored treatments
    and undefined outcomes are written as empty fields."""
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "c", "t", "v", "y", "eligible"])
        for i in range(len(cov)):
            t_field = "" if not np.isfinite(t[i]) else str(int(t[i]))
            w.writerow([i, int(cov.values[i]), t_field, _fmt(v.values[i]), _fmt(y[i]), int(v.eligible[i])])


def read_dataset(path):
    """Inverse of write_dataset: (cov, t, v, y) with NaN for empty fields."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    n = len(rows)
    c = np.zeros(n, dtype=np.int8)
    t = np.full(n, np.nan)
    values = np.zeros(n)
    eligible = np.zeros(n, dtype=bool)
    y = np.full(n, np.nan)
    for row in rows:
        i = int(row["node_id"])
        c[i] = int(row["c"])
        if row["t"]:
            t[i] = float(row["t"])
        values[i] = float(row["v"]) if row["v"] else 0.0
        if row["y"]:
            y[i] = float(row["y"])
        eligible[i] = row["eligible"] == "1"
    return Covariates(c), t, AggregatedTreatment(values=values, eligible=eligible), y
