"""Command-line pipeline: generate, simulate, train, estimate, experiment,
lln-check. One config schema drives all subcommands; flags override file
values; every run echoes its resolved config into the output directory.

Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import estimators as est
from .config import ConfigError, RunConfig, dump_config, load_config, set_key, validate
from .diagnostics import DESIGN_VACCINATION, ExperimentCell, bias_table, lln_study
from .graph import equal_blocks_spec, graph_summary, load_edge_list, save_edge_list, sbm_generate
from .rng import derive_seed
from .sampler import SamplerConfig
from .simulate import (
    SimulationParams,
    aggregate_treatment,
    block_covariates,
    draw_treatments,
    read_covariates,
    read_dataset,
    simulate_outcome_continuous,
    vaccination_design,
    write_covariates,
    write_dataset,
)
from .training import TrainConfig, load_params, save_params, train


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(cfg: RunConfig, out: Path) -> None:
    (out / "config_resolved.cfg").write_text(dump_config(cfg))


def _confounder_label(rate: float) -> str:
    return f"block_r{int(round(rate * 100)):02d}"


def _load_graph(cfg: RunConfig):
    if cfg.graph.edge_list:
        return load_edge_list(cfg.graph.edge_list).graph, None
    spec = equal_blocks_spec(cfg.graph.n, cfg.graph.blocks, cfg.graph.p_within, cfg.graph.p_between)
    return sbm_generate(spec, derive_seed(cfg.seed, "graph")), spec


def _graph_spec(cfg: RunConfig):
    if cfg.graph.edge_list:
        raise ConfigError("this command generates its own graphs; unset graph.edge_list")
    return equal_blocks_spec(cfg.graph.n, cfg.graph.blocks, cfg.graph.p_within, cfg.graph.p_between)


def _sim_params(cfg: RunConfig) -> SimulationParams:
    return SimulationParams(beta0=cfg.sim.beta0, beta1=cfg.sim.beta1,
                            noise_sd=cfg.sim.noise_sd, aggregator=cfg.sim.aggregator)


def _sampler_cfg(cfg: RunConfig, seed: int) -> SamplerConfig:
    return SamplerConfig(walk_length=cfg.sampler.walk_length,
                         negatives_per_positive=cfg.sampler.negatives_per_positive,
                         seed=seed)


def _train_cfg(cfg: RunConfig, seed: int) -> TrainConfig:
    return TrainConfig(d=cfg.train.dim, q=cfg.train.q, learning_rate=cfg.train.learning_rate,
                       steps=cfg.train.steps, init_scale=cfg.train.init_scale, seed=seed)


def cmd_generate(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    g, spec = _load_graph(cfg)
    if spec is None:
        raise ConfigError("generate needs a block model; unset graph.edge_list")
    cov = block_covariates(spec.block_of, cfg.covariates.resample_rate,
                           derive_seed(cfg.seed, "covariates"))
    save_edge_list(g, out / "edges.txt")
    write_covariates(out / "covariates.csv", cov)
    _echo_config(cfg, out)
    print(graph_summary(g))
    print(f"wrote {out / 'edges.txt'} and {out / 'covariates.csv'}")
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    g, spec = _load_graph(cfg)
    if (out / "covariates.csv").exists():
        cov = read_covariates(out / "covariates.csv")
    elif spec is not None:
        cov = block_covariates(spec.block_of, cfg.covariates.resample_rate,
                               derive_seed(cfg.seed, "covariates"))
    else:
        raise ConfigError(f"no covariates: run generate first or provide {out / 'covariates.csv'}")
    t = draw_treatments(cov, derive_seed(cfg.seed, "treatment"))
    if cfg.experiment.design == DESIGN_VACCINATION:
        split = vaccination_design(g, t, derive_seed(cfg.seed, "vaccination"))
        observed_t = t.astype(float) if cfg.experiment.vaccination_full_aggregate else split.treatments
        v = aggregate_treatment(g, observed_t, cfg.sim.aggregator)
        y = split.outcomes
        np.savetxt(out / "eval_nodes.txt", split.eval_nodes, fmt="%d")
        t_out = split.treatments
    else:
        v = aggregate_treatment(g, t, cfg.sim.aggregator)
        y = simulate_outcome_continuous(v, cov, _sim_params(cfg), derive_seed(cfg.seed, "noise"))
        t_out = t
    write_dataset(out / "dataset.csv", cov, t_out, v, y)
    _echo_config(cfg, out)
    print(f"wrote {out / 'dataset.csv'}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    g, _ = _load_graph(cfg)
    _, _, v, y = read_dataset(out / "dataset.csv")
    params = train(g, v, y,
                   _sampler_cfg(cfg, derive_seed(cfg.seed, "sampler")),
                   _train_cfg(cfg, derive_seed(cfg.seed, "init")))
    save_params(out / "params.txt", params)
    _echo_config(cfg, out)
    print(f"wrote {out / 'params.txt'} (n={params.n}, d={params.d})")
    return 0


def cmd_estimate(cfg: RunConfig, nodes_path: str | None, params_path: str | None) -> int:
    out = _out_dir(cfg)
    g, _ = _load_graph(cfg)
    _, _, v, y = read_dataset(out / "dataset.csv")
    params = load_params(params_path or out / "params.txt", n=g.n, d=cfg.train.dim)
    node_set = None
    if nodes_path:
        node_set = np.loadtxt(nodes_path, dtype=np.int64).reshape(-1)
    elif (out / "eval_nodes.txt").exists():
        node_set = np.loadtxt(out / "eval_nodes.txt", dtype=np.int64).reshape(-1)

    emb = est.plugin_contrast(g, params, cfg.sim.aggregator, node_set, seed=cfg.seed)
    un = est.unadjusted_ols(v, y, node_set)
    k = cfg.estimate.community_count or est.default_community_count(g.n, cfg.train.dim)
    pm = est.parametric_baseline(g, v, y, k, node_set)

    label = _confounder_label(cfg.covariates.resample_rate)
    with open(out / "estimates.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["estimator", "confounder", "beta1", "estimate", "seed"])
        w.writerow([est.EMBEDDING, label, repr(cfg.sim.beta1), repr(emb.t_star_contrast), cfg.seed])
        w.writerow([est.UNADJUSTED, label, repr(cfg.sim.beta1), repr(un), cfg.seed])
        w.writerow([est.PARAMETRIC, label, repr(cfg.sim.beta1), repr(pm), cfg.seed])
    _echo_config(cfg, out)
    print(f"embedding contrast {emb.t_star_contrast:+.4f} | unadjusted {un:+.4f} | parametric {pm:+.4f}")
    print(f"wrote {out / 'estimates.csv'}")
    return 0


def cmd_experiment(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    base = ExperimentCell(
        graph_spec=_graph_spec(cfg),
        sim=_sim_params(cfg),
        sampler=_sampler_cfg(cfg, 0),
        train=_train_cfg(cfg, 0),
        design=cfg.experiment.design,
        community_count=cfg.estimate.community_count,
        data_seed=derive_seed(cfg.seed, "data"),
        train_seed_root=derive_seed(cfg.seed, "train"),
        vaccination_full_aggregate=cfg.experiment.vaccination_full_aggregate,
    )
    rates = {_confounder_label(r): float(r) for r in cfg.experiment.confounder_rates}
    table = bias_table(base, rates, cfg.experiment.beta1_grid, cfg.experiment.n_seeds)
    (out / "bias_table.md").write_text(table.markdown)
    with open(out / "bias_table.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["confounder", "beta1", "estimator", "mean", "stderr", "n_seeds"])
        w.writerows(table.csv_rows)
    _echo_config(cfg, out)
    print(table.markdown)
    if table.failures:
        for cell in table.failures:
            print(f"cell failed ({cell.confounder}, beta1={cell.beta1}): {cell.error}", file=sys.stderr)
        return 2
    print(f"wrote {out / 'bias_table.md'} and {out / 'bias_table.csv'}")
    return 0


def cmd_lln_check(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    params = SimulationParams(beta0=cfg.sim.beta0, beta1=cfg.lln.beta1,
                              noise_sd=cfg.sim.noise_sd, aggregator=cfg.sim.aggregator)
    result = lln_study(cfg.lln.n_grid, cfg.lln.replicates, cfg.lln.expected_degree,
                       params, seed=derive_seed(cfg.seed, "lln"),
                       t_star=cfg.lln.t_star, pair_sample_size=cfg.lln.pair_sample_size)
    with open(out / "lln.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "variance", "shared_neighbor_prob"])
        for n, var, pr in zip(result.n_values, result.variances, result.shared_neighbor_probs):
            w.writerow([n, repr(var), repr(pr)])
    _echo_config(cfg, out)
    print(f"variances: {['%.3g' % v for v in result.variances]}")
    print(f"shared-neighbor probs: {['%.4f' % p for p in result.shared_neighbor_probs]}")
    print(f"log-log slope of variance vs n: {result.fitted_log_slope:.3f}")
    print(f"wrote {out / 'lln.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netcontagion",
        description="Peer-contagion estimation on networks under latent homophily.",
    )
    parser.add_argument("--config", help="key-value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable; wins over --config)")
    parser.add_argument("--seed", type=int, help="global seed (wins over config)")
    parser.add_argument("--out", help="output directory (wins over config)")
    parser.add_argument("--dry-run", action="store_true",
                        help="print the resolved config and exit")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", help="write an SBM graph edge list + covariates")
    sub.add_parser("simulate", help="draw treatments and outcomes on the graph")
    sub.add_parser("train", help="fit embeddings + outcome head on the dataset")
    p_est = sub.add_parser("estimate", help="run all three estimators on saved params")
    p_est.add_argument("--nodes", help="file of node ids restricting the evaluation set")
    p_est.add_argument("--params", help="parameter file (default <out>/params.txt)")
    sub.add_parser("experiment", help="full generate->train->estimate bias grid")
    sub.add_parser("lln-check", help="estimand variance vs graph size study")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, raw = item.partition("=")
        set_key(cfg, key.strip(), raw)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    validate(cfg)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        cfg = resolve_config(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.dry_run:
        print(dump_config(cfg), end="")
        return 0
    try:
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "estimate":
            return cmd_estimate(cfg, args.nodes, args.params)
        if args.command == "experiment":
            return cmd_experiment(cfg)
        if args.command == "lln-check":
            return cmd_lln_check(cfg)
        raise AssertionError(f"unhandled command {args.command}")
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
