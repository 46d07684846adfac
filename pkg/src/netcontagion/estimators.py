"""Peer-contagion estimators: the embedding plug-in and two baselines.

The plug-in estimate at t* averages the fitted vertex conditional outcome
m(v*, emb_i) over eligible nodes, where v* is the aggregated treatment that
the intervention T = t* would produce. The baselines regress the observed
outcome on the observed aggregated treatment, either alone (unadjusted) or
together with spectral community memberships (parametric).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .graph import Graph
from .simulate import AGG_AVERAGE, AggregatedTreatment, aggregate_treatment
from .training import ModelParams

EMBEDDING = "embedding"
UNADJUSTED = "unadjusted"
PARAMETRIC = "parametric"


class EstimationError(ValueError):
    pass


@dataclass
class EstimateReport:
    estimator: str
    t_star_contrast: float
    psi_at_1: float
    psi_at_0: float
    n_eligible: int
    seed: int = 0


@dataclass
class OlsFit:
    """Least-squares fit; coefficients follow the design column order and
    stderr is the classical homoskedastic standard error per coefficient."""

    coefficients: np.ndarray
    stderr: np.ndarray


def intervene_aggregate(g: Graph, t_star: int, aggregator: str = AGG_AVERAGE) -> AggregatedTreatment:
    """Aggregated treatment under the constant intervention T = t_star."""
    if t_star not in (0, 1):
        raise EstimationError("t_star must be 0 or 1")
    return aggregate_treatment(g, np.full(g.n, float(t_star)), aggregator)


def _evaluation_nodes(eligible: np.ndarray, node_set) -> np.ndarray:
    nodes = np.flatnonzero(eligible)
    if node_set is not None:
        nodes = np.intersect1d(nodes, np.asarray(node_set, dtype=np.int64))
    return nodes


def plugin_mean_outcome(g: Graph, params: ModelParams, t_star: int,
                        aggregator: str = AGG_AVERAGE, node_set=None) -> float:
    """Mean of m(v_i*, emb_i) over eligible nodes (optionally restricted)."""
    if params.n != g.n:
        raise EstimationError(f"params cover {params.n} nodes, graph has {g.n}")
    v_star = intervene_aggregate(g, t_star, aggregator)
    nodes = _evaluation_nodes(v_star.eligible, node_set)
    if len(nodes) == 0:
        raise EstimationError("no eligible nodes to average over")
    head = params.head
    m = head.w_v * v_star.values[nodes] + params.embeddings[nodes] @ head.w + head.b
    return float(m.mean())


def plugin_contrast(g: Graph, params: ModelParams, aggregator: str = AGG_AVERAGE,
                    node_set=None, seed: int = 0) -> EstimateReport:
    """psi(1) - psi(0); equals the head's w_v exactly for the average
    aggregator because v* is 1 (resp. 0) on every eligible node."""
    psi1 = plugin_mean_outcome(g, params, 1, aggregator, node_set)
    psi0 = plugin_mean_outcome(g, params, 0, aggregator, node_set)
    nodes = _evaluation_nodes(intervene_aggregate(g, 1, aggregator).eligible, node_set)
    return EstimateReport(
        estimator=EMBEDDING,
        t_star_contrast=psi1 - psi0,
        psi_at_1=psi1,
        psi_at_0=psi0,
        n_eligible=len(nodes),
        seed=seed,
    )


def ols_fit(X: np.ndarray, y: np.ndarray) -> OlsFit:
    """Solve min ||y - X beta||^2 for a full-column-rank design."""
    n, k = X.shape
    if n <= k:
        raise EstimationError(f"need more observations ({n}) than columns ({k})")
    gram = X.T @ X
    try:
        gram_inv = np.linalg.inv(gram)
    except np.linalg.LinAlgError:
        raise EstimationError("singular design matrix") from None
    beta = gram_inv @ (X.T @ y)
    resid = y - X @ beta
    sigma2 = float(resid @ resid) / (n - k)
    stderr = np.sqrt(np.maximum(np.diag(gram_inv) * sigma2, 0.0))
    return OlsFit(coefficients=beta, stderr=stderr)


def _regression_nodes(v: AggregatedTreatment, y: np.ndarray, node_set) -> np.ndarray:
    nodes = _evaluation_nodes(v.eligible & np.isfinite(np.asarray(y, dtype=np.float64)), node_set)
    if len(nodes) < 3:
        raise EstimationError("too few usable nodes for regression")
    return nodes


def unadjusted_fit(v: AggregatedTreatment, y, node_set=None) -> OlsFit:
    """Least squares of y on [1, v] over eligible nodes with defined y."""
    y = np.asarray(y, dtype=np.float64)
    nodes = _regression_nodes(v, y, node_set)
    vv = v.values[nodes]
    if np.all(vv == vv[0]):
        raise EstimationError("aggregated treatment is constant; slope undefined")
    X = np.column_stack([np.ones(len(nodes)), vv])
    return ols_fit(X, y[nodes])


def unadjusted_ols(v: AggregatedTreatment, y, node_set=None) -> float:
    """Slope of y on the observed aggregated treatment, no adjustment."""
    return float(unadjusted_fit(v, y, node_set).coefficients[1])


def default_community_count(n: int, d: int) -> int:
    """Community count for the parametric baseline: min(d, n // 20)."""
    return max(1, min(d, n // 20))


def community_memberships(g: Graph, k: int) -> np.ndarray:
    """Top-k eigenvector embedding of the degree-normalized adjacency
    D^-1/2 A D^-1/2, rows scaled to unit length (zero rows left at zero).

    A deterministic, desk-scale stand-in for mixed-membership block model
    inference: nodes in the same community get (near-)identical rows."""
    nonzero = int((g.degrees() > 0).sum())
    if k < 1 or k > max(nonzero - 1, 0):
        raise EstimationError(f"need k in [1, {nonzero - 1}] for {nonzero} non-isolated nodes")
    deg = g.degrees().astype(np.float64)
    inv_sqrt = np.divide(1.0, np.sqrt(deg), out=np.zeros(g.n), where=deg > 0)
    src = np.repeat(np.arange(g.n), g.degrees())
    weights = inv_sqrt[src] * inv_sqrt[g.targets]
    adj = scipy.sparse.csr_matrix((weights, g.targets, g.offsets), shape=(g.n, g.n))
    v0 = np.full(g.n, 1.0 / np.sqrt(g.n))  # fixed start => deterministic
    try:
        _, vecs = scipy.sparse.linalg.eigsh(adj, k=k, which="LA", v0=v0)
    except scipy.sparse.linalg.ArpackError as exc:
        raise EstimationError(f"eigendecomposition failed: {exc}") from exc
    norms = np.linalg.norm(vecs, axis=1)
    keep = norms > 0
    vecs[keep] /= norms[keep, None]
    return vecs


def _drop_collinear(X: np.ndarray, protected: int) -> tuple[np.ndarray, int]:
    """Greedily drop columns past the first `protected` ones until X has
    full column rank. Returns the reduced design and #dropped."""
    if np.linalg.matrix_rank(X) == X.shape[1]:
        return X, 0
    keep = list(range(protected))
    rank = np.linalg.matrix_rank(X[:, keep])
    for col in range(protected, X.shape[1]):
        candidate = np.linalg.matrix_rank(X[:, keep + [col]])
        if candidate > rank:
            keep.append(col)
            rank = candidate
    return X[:, keep], X.shape[1] - len(keep)


def parametric_fit(g: Graph, v: AggregatedTreatment, y, k: int, node_set=None) -> OlsFit:
    """Regression of y on [1, v, memberships]; mimics adjusting for block
    model communities. Collinear membership columns are dropped (warned)."""
    y = np.asarray(y, dtype=np.float64)
    nodes = _regression_nodes(v, y, node_set)
    memberships = community_memberships(g, k)
    X = np.column_stack([np.ones(len(nodes)), v.values[nodes], memberships[nodes]])
    X, dropped = _drop_collinear(X, protected=2)
    if dropped:
        warnings.warn(f"dropped {dropped} collinear membership column(s)", stacklevel=2)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise EstimationError("design still rank-deficient after dropping memberships")
    return ols_fit(X, y[nodes])


def parametric_baseline(g: Graph, v: AggregatedTreatment, y, k: int, node_set=None) -> float:
    """Coefficient of the aggregated treatment after community adjustment."""
    return float(parametric_fit(g, v, y, k, node_set).coefficients[1])


def baseline_report(name: str, coefficient: float, n_eligible: int, seed: int = 0) -> EstimateReport:
    """Baselines estimate the contrast directly as a regression slope."""
    return EstimateReport(
        estimator=name,
        t_star_contrast=coefficient,
        psi_at_1=float("nan"),
        psi_at_0=float("nan"),
        n_eligible=n_eligible,
        seed=seed,
    )
