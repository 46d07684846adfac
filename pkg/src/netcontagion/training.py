"""Joint training of node embeddings and a linear outcome head.

The per-sample loss is

    q * sum_i (y_i - m(v_i, emb_i))^2                     (outcome fit)
  + sum_pos -log sigmoid(emb_i . emb_j)                   (observed edges)
  + sum_neg -log(1 - sigmoid(emb_i . emb_u))              (random non-pairs)

with m(v, e) = w_v*v + w.e + b. Plain SGD, one sampled subgraph per step.
All gradients are analytic and exact; finite differences agree to 1e-5.
Single-threaded training is deterministic given the init and sampler seeds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

from .graph import Graph
from .sampler import SamplerConfig, SubgraphSample, sample_subgraph
from .simulate import AggregatedTreatment
from .rng import as_generator

PARAMS_FORMAT_VERSION = "v1"


class TrainingError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    """Raised when the total loss stops being finite."""


@dataclass
class LinearHead:
    """m(v, e) = w_v*v + w.e + b."""

    w_v: float
    w: np.ndarray
    b: float

    def copy(self) -> "LinearHead":
        return LinearHead(self.w_v, self.w.copy(), self.b)


@dataclass
class ModelParams:
    embeddings: np.ndarray  # (n, d), row i is node i's embedding
    head: LinearHead

    @property
    def n(self) -> int:
        return self.embeddings.shape[0]

    @property
    def d(self) -> int:
        return self.embeddings.shape[1]

    def require_finite(self) -> None:
        if not (np.isfinite(self.embeddings).all() and np.isfinite(self.head.w).all()
                and np.isfinite(self.head.w_v) and np.isfinite(self.head.b)):
            raise TrainingError("non-finite model parameter")

    def copy(self) -> "ModelParams":
        return ModelParams(self.embeddings.copy(), self.head.copy())


@dataclass
class TrainConfig:
    """min_learning_rate=None keeps the rate constant; setting it anneals
    the rate linearly from learning_rate down to min_learning_rate over the
    run, which freezes the embedding geometry instead of leaving it at the
    constant-rate noise floor (the usual skip-gram schedule)."""

    d: int = 128
    q: float = 1.0
    learning_rate: float = 0.025
    min_learning_rate: float | None = None
    steps: int = 1000
    init_scale: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise TrainingError("q must lie in [0, 1]")
        if self.learning_rate <= 0:
            raise TrainingError("learning_rate must be positive")
        if self.min_learning_rate is not None and not 0 < self.min_learning_rate <= self.learning_rate:
            raise TrainingError("min_learning_rate must lie in (0, learning_rate]")
        if self.steps < 0:
            raise TrainingError("steps must be >= 0")
        if self.d < 1:
            raise TrainingError("embedding dimension must be >= 1")

    def rate_at(self, step: int) -> float:
        if self.min_learning_rate is None or self.steps <= 1:
            return self.learning_rate
        frac = step / self.steps
        return self.learning_rate + (self.min_learning_rate - self.learning_rate) * frac


@dataclass
class LossBreakdown:
    outcome_term: float
    reconstruction_term: float
    total: float


@dataclass
class ParamGrads:
    """Sparse gradient: only rows in embedding_nodes were touched; every
    other embedding row has exactly zero gradient."""

    embedding_nodes: np.ndarray
    embedding_rows: np.ndarray
    w_v: float
    w: np.ndarray
    b: float

    def dense_embeddings(self, n: int) -> np.ndarray:
        out = np.zeros((n, self.embedding_rows.shape[1]))
        out[self.embedding_nodes] = self.embedding_rows
        return out


def predict_outcome(v: float, embedding: np.ndarray, head: LinearHead) -> float:
    """Vertex conditional outcome m(v, embedding)."""
    embedding = np.asarray(embedding, dtype=np.float64)
    if embedding.shape != head.w.shape:
        raise TrainingError(f"embedding has length {embedding.shape}, head expects {head.w.shape}")
    return float(head.w_v * v + head.w @ embedding + head.b)


def edge_probability(emb_i: np.ndarray, emb_j: np.ndarray) -> float:
    """sigmoid(emb_i . emb_j), the modeled probability of the edge (i, j)."""
    emb_i = np.asarray(emb_i, dtype=np.float64)
    emb_j = np.asarray(emb_j, dtype=np.float64)
    if emb_i.shape != emb_j.shape:
        raise TrainingError("embedding dimension mismatch")
    return float(expit(emb_i @ emb_j))


def _softplus(x: np.ndarray) -> np.ndarray:
    # -log sigmoid(z) = softplus(-z); numerically stable at both tails
    return np.logaddexp(0.0, x)


def _outcome_vertices(sample: SubgraphSample, v: AggregatedTreatment, y: np.ndarray) -> np.ndarray:
    """Sample vertices entering the squared-error term: those with a defined
    outcome and an observable aggregated treatment."""
    verts = sample.vertices
    return verts[np.isfinite(y[verts]) & v.eligible[verts]]


def _loss_and_grads(sample: SubgraphSample, v: AggregatedTreatment, y: np.ndarray,
                    params: ModelParams, q: float, want_grads: bool):
    emb = params.embeddings
    head = params.head
    y = np.asarray(y, dtype=np.float64)

    ov = _outcome_vertices(sample, v, y)
    v_ov = v.values[ov]
    resid = y[ov] - (head.w_v * v_ov + emb[ov] @ head.w + head.b)
    outcome = float(resid @ resid)

    pi, pj = sample.positives[:, 0], sample.positives[:, 1]
    ni, nj = sample.negatives[:, 0], sample.negatives[:, 1]
    dots_pos = np.einsum("ij,ij->i", emb[pi], emb[pj])
    dots_neg = np.einsum("ij,ij->i", emb[ni], emb[nj])
    reconstruction = float(_softplus(-dots_pos).sum() + _softplus(dots_neg).sum())

    loss = LossBreakdown(
        outcome_term=outcome,
        reconstruction_term=reconstruction,
        total=q * outcome + reconstruction,
    )
    if not want_grads:
        return loss, None

    touched = np.unique(np.concatenate([ov, pi, pj, ni, nj]))
    rows = np.zeros((len(touched), emb.shape[1]))

    coef = -2.0 * q * resid
    g_wv = float(coef @ v_ov)
    g_w = coef @ emb[ov]
    g_b = float(coef.sum())
    rows[np.searchsorted(touched, ov)] += coef[:, None] * head.w

    cp = expit(dots_pos) - 1.0  # d/d(dot) of -log sigmoid(dot)
    np.add.at(rows, np.searchsorted(touched, pi), cp[:, None] * emb[pj])
    np.add.at(rows, np.searchsorted(touched, pj), cp[:, None] * emb[pi])
    cn = expit(dots_neg)  # d/d(dot) of -log(1 - sigmoid(dot))
    np.add.at(rows, np.searchsorted(touched, ni), cn[:, None] * emb[nj])
    np.add.at(rows, np.searchsorted(touched, nj), cn[:, None] * emb[ni])

    grads = ParamGrads(embedding_nodes=touched, embedding_rows=rows, w_v=g_wv, w=g_w, b=g_b)
    return loss, grads


def batch_loss(sample: SubgraphSample, v: AggregatedTreatment, y, params: ModelParams, q: float) -> LossBreakdown:
    """Loss of one sampled subgraph; total = q*outcome + reconstruction."""
    params.require_finite()
    loss, _ = _loss_and_grads(sample, v, y, params, q, want_grads=False)
    return loss


def gradients(sample: SubgraphSample, v: AggregatedTreatment, y, params: ModelParams, q: float) -> ParamGrads:
    """Exact analytic gradient of batch_loss in every touched embedding row
    and the head parameters."""
    params.require_finite()
    _, grads = _loss_and_grads(sample, v, y, params, q, want_grads=True)
    return grads


def initialize_params(n: int, cfg: TrainConfig, seed=None) -> ModelParams:
    """Embeddings i.i.d. Normal(0, init_scale^2); head at zero."""
    rng = as_generator(cfg.seed if seed is None else seed)
    emb = rng.normal(0.0, cfg.init_scale, size=(n, cfg.d))
    return ModelParams(embeddings=emb, head=LinearHead(0.0, np.zeros(cfg.d), 0.0))


def train(g: Graph, v: AggregatedTreatment, y, sampler_cfg: SamplerConfig,
          train_cfg: TrainConfig,
          callback: Optional[Callable[[int, ModelParams, LossBreakdown], None]] = None) -> ModelParams:
    """SGD over one fresh subgraph sample per step.

    Aborts with TrainingDiverged if the step loss goes non-finite. With
    steps=0 the initialization is returned unchanged. The optional callback
    sees (step, live params, step loss) after each update.
    """
    if g.m == 0:
        raise TrainingError("graph has no edges to train on")
    y = np.asarray(y, dtype=np.float64)
    params = initialize_params(g.n, train_cfg)
    sampler_rng = as_generator(sampler_cfg.seed)
    for step in range(train_cfg.steps):
        sample = sample_subgraph(g, sampler_cfg, sampler_rng)
        loss, grads = _loss_and_grads(sample, v, y, params, train_cfg.q, want_grads=True)
        if not np.isfinite(loss.total):
            raise TrainingDiverged(f"loss became non-finite at step {step}")
        lr = train_cfg.rate_at(step)
        params.embeddings[grads.embedding_nodes] -= lr * grads.embedding_rows
        params.head.w_v -= lr * grads.w_v
        params.head.w -= lr * grads.w
        params.head.b -= lr * grads.b
        if callback is not None:
            callback(step, params, loss)
    return params


def evaluate_loss(samples, v: AggregatedTreatment, y, params: ModelParams, q: float) -> float:
    """Mean batch_loss total over a fixed list of held-out samples."""
    y = np.asarray(y, dtype=np.float64)
    totals = [_loss_and_grads(s, v, y, params, q, want_grads=False)[0].total for s in samples]
    return float(np.mean(totals))


def save_params(path, params: ModelParams) -> None:
    """Text format: a header line, n embedding rows, then one head row of
    w_v, w..., b. repr() floats round-trip bit-identically."""
    with open(path, "w") as fh:
        fh.write(f"netcontagion-params {PARAMS_FORMAT_VERSION} n={params.n} d={params.d}\n")
        for row in params.embeddings:
            fh.write(" ".join(repr(x) for x in row.tolist()) + "\n")
        head = [params.head.w_v, *params.head.w.tolist(), params.head.b]
        fh.write(" ".join(repr(float(x)) for x in head) + "\n")


def load_params(path, n: int | None = None, d: int | None = None) -> ModelParams:
    """Inverse of save_params. Optional n/d assert the expected shape."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "netcontagion-params":
            raise TrainingError(f"{path}: not a parameter file")
        if header[1] != PARAMS_FORMAT_VERSION:
            raise TrainingError(f"{path}: format version {header[1]} != {PARAMS_FORMAT_VERSION}")
        file_n = int(header[2].removeprefix("n="))
        file_d = int(header[3].removeprefix("d="))
        if n is not None and file_n != n:
            raise TrainingError(f"{path}: file has n={file_n}, expected n={n}")
        if d is not None and file_d != d:
            raise TrainingError(f"{path}: file has d={file_d}, expected d={d}")
        rows = []
        for _ in range(file_n):
            line = fh.readline()
            if not line:
                raise TrainingError(f"{path}: truncated embedding table")
            rows.append([float(x) for x in line.split()])
        head_vals = [float(x) for x in fh.readline().split()]
    if any(len(r) != file_d for r in rows):
        raise TrainingError(f"{path}: embedding row width != d")
    emb = np.asarray(rows, dtype=np.float64).reshape(file_n, file_d)
    if len(head_vals) != file_d + 2:
        raise TrainingError(f"{path}: head row must hold d+2 values")
    head = LinearHead(head_vals[0], np.asarray(head_vals[1:-1]), head_vals[-1])
    return ModelParams(embeddings=emb, head=head)
