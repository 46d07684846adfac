"""Run configuration: one flat key-value file drives every subcommand.

Format: one `key = value` per line, `#` comments, blank lines ignored.
Keys are dotted paths into the section dataclasses below; unknown keys are
rejected. Values: ints, floats, strings, booleans (true/false), and
comma-separated lists. The fully resolved config can be serialized back
out, which the CLI uses to echo the effective settings of a run.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass
class GraphSection:
    n: int = 2000
    blocks: int = 3
    p_within: float = 0.0205
    p_between: float = 0.00256
    edge_list: str = ""  # nonempty -> load this file instead of generating


@dataclass
class CovariateSection:
    resample_rate: float = 0.0


@dataclass
class SimSection:
    beta0: float = 1.0
    beta1: float = 0.0
    noise_sd: float = 1.0
    aggregator: str = "average"


@dataclass
class SamplerSection:
    walk_length: int = 40
    negatives_per_positive: int = 5


@dataclass
class TrainSection:
    dim: int = 128
    q: float = 1.0
    learning_rate: float = 0.025
    steps: int = 1000
    init_scale: float = 0.1


@dataclass
class EstimateSection:
    community_count: int = 0  # 0 -> min(dim, n // 20)


@dataclass
class ExperimentSection:
    design: str = "continuous"  # or "vaccination"
    beta1_grid: list = field(default_factory=lambda: [0.0, 1.0, 10.0])
    confounder_rates: list = field(default_factory=lambda: [0.0, 0.25, 0.5])
    n_seeds: int = 20
    vaccination_full_aggregate: bool = False


@dataclass
class LlnSection:
    n_grid: list = field(default_factory=lambda: [500, 1000, 2000, 4000])
    replicates: int = 20
    expected_degree: float = 10.0
    pair_sample_size: int = 20000
    beta1: float = 10.0
    t_star: int = 0


@dataclass
class RunConfig:
    seed: int = 0
    output_dir: str = "out"
    graph: GraphSection = field(default_factory=GraphSection)
    covariates: CovariateSection = field(default_factory=CovariateSection)
    sim: SimSection = field(default_factory=SimSection)
    sampler: SamplerSection = field(default_factory=SamplerSection)
    train: TrainSection = field(default_factory=TrainSection)
    estimate: EstimateSection = field(default_factory=EstimateSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    lln: LlnSection = field(default_factory=LlnSection)


def _parse_value(raw: str, current):
    raw = raw.strip()
    if isinstance(current, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected boolean, got {raw!r}")
    if isinstance(current, int):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"expected integer, got {raw!r}") from None
    if isinstance(current, float):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"expected number, got {raw!r}") from None
    if isinstance(current, list):
        if not raw:
            return []
        items = [x.strip() for x in raw.split(",")]
        try:
            return [int(x) for x in items]
        except ValueError:
            try:
                return [float(x) for x in items]
            except ValueError:
                return items
    return raw


def set_key(cfg: RunConfig, key: str, raw: str) -> None:
    """Assign one dotted key, e.g. set_key(cfg, "train.steps", "500")."""
    parts = key.split(".")
    obj = cfg
    for part in parts[:-1]:
        if not dataclasses.is_dataclass(obj) or part not in {f.name for f in fields(obj)}:
            raise ConfigError(f"unknown config key {key!r}")
        obj = getattr(obj, part)
    leaf = parts[-1]
    if not dataclasses.is_dataclass(obj) or leaf not in {f.name for f in fields(obj)}:
        raise ConfigError(f"unknown config key {key!r}")
    current = getattr(obj, leaf)
    if dataclasses.is_dataclass(current):
        raise ConfigError(f"{key!r} is a section, not a value")
    setattr(obj, leaf, _parse_value(raw, current))


def load_config(path, cfg: RunConfig | None = None) -> RunConfig:
    """Parse a key-value file into a RunConfig (over defaults)."""
    cfg = cfg or RunConfig()
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}: line {lineno}: expected 'key = value'")
            key, _, raw = stripped.partition("=")
            try:
                set_key(cfg, key.strip(), raw)
            except ConfigError as exc:
                raise ConfigError(f"{path}: line {lineno}: {exc}") from None
    return cfg


def _flat_items(obj, prefix=""):
    for f in fields(obj):
        value = getattr(obj, f.name)
        key = f"{prefix}{f.name}"
        if dataclasses.is_dataclass(value):
            yield from _flat_items(value, prefix=f"{key}.")
        else:
            yield key, value


def dump_config(cfg: RunConfig) -> str:
    """Serialize to the same key-value format load_config reads."""
    lines = []
    for key, value in _flat_items(cfg):
        if isinstance(value, list):
            rendered = ",".join(str(x) for x in value)
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        else:
            rendered = str(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(dump_config(cfg))


def validate(cfg: RunConfig) -> None:
    """Cross-field checks shared by every subcommand."""
    if cfg.graph.edge_list == "":
        if cfg.graph.n <= 0:
            raise ConfigError("graph.n must be positive")
        if cfg.graph.blocks < 1:
            raise ConfigError("graph.blocks must be >= 1")
        for name, p in (("p_within", cfg.graph.p_within), ("p_between", cfg.graph.p_between)):
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"graph.{name} must lie in [0, 1]")
    if cfg.sim.aggregator not in ("average", "or"):
        raise ConfigError("sim.aggregator must be 'average' or 'or'")
    if cfg.sim.noise_sd < 0:
        raise ConfigError("sim.noise_sd must be >= 0")
    if not 0.0 <= cfg.train.q <= 1.0:
        raise ConfigError("train.q must lie in [0, 1]")
    if cfg.train.steps < 0 or cfg.train.dim < 1 or cfg.train.learning_rate <= 0:
        raise ConfigError("invalid train section")
    if cfg.sampler.walk_length < 1 or cfg.sampler.negatives_per_positive < 1:
        raise ConfigError("invalid sampler section")
    if not 0.0 <= cfg.covariates.resample_rate <= 1.0:
        raise ConfigError("covariates.resample_rate must lie in [0, 1]")
    if cfg.experiment.design not in ("continuous", "vaccination"):
        raise ConfigError("experiment.design must be 'continuous' or 'vaccination'")
    if cfg.experiment.n_seeds < 2:
        raise ConfigError("experiment.n_seeds must be >= 2")
