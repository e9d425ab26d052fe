"""Command-line entry points.

    mfm generate  --config cfg --out dir [--seed S]
    mfm run       --config cfg --out dir [--seed S] [--iters I] [--burnin B]
    mfm sweep     --config cfg --out dir [--threads T] [--iters I] [--burnin B]
    mfm exact     --config cfg --out dir
    mfm summarize --in chain.json --out dir

generate writes the config's dataset series as data.csv (plus labels.csv for
synthetic generators). run executes one chain at the largest configured size
and writes chain.json, posterior_k.csv, and summary.csv. sweep runs the full
(seed, N) grid into posterior_k.csv / summary.csv / errors.csv. exact emits
the enumerated posterior (N <= 10, fixed beta) in the posterior_k.csv schema
with prior_mode=exact; the seed column carries data.seed. summarize rebuilds
summary.csv from a saved chain.json.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .chain import ChainOutput, run_chain
from .configfile import ConfigError
from .datagen import contaminate, sample_mixture, save_matrix
from .diagnostics import exact_posterior_k
from .experiments import (
    ResultRow,
    _cell_seed,
    generate_series,
    resolve_model,
    run_sweep,
    summarize,
    sweep_config_from_text,
    write_errors_csv,
    write_posterior_csv,
    write_summary_csv,
)

__all__ = ["main"]


def _load_sweep_config(path):
    with open(path, encoding="utf-8") as fh:
        return sweep_config_from_text(fh.read())


def _rows_from_chain(cfg, seed, n, out) -> list[ResultRow]:
    post, mean_k, mode_k, stats = summarize(out)
    return [
        ResultRow(
            dataset=cfg.dataset,
            seed=seed,
            N=n,
            prior_mode=cfg.prior_mode,
            k=k + 1,
            probability=float(post[k]),
            mean_k=mean_k,
            mode_k=mode_k,
            sm_acceptance_rate=stats["sm_accept_rate"],
        )
        for k in range(len(post))
    ]


def _cmd_generate(args) -> int:
    cfg = _load_sweep_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, data_seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    if isinstance(cfg.generator, str):
        data = generate_series(cfg)
        labels = None
    else:
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([cfg.data_seed, 0]))
        )
        n_max = max(cfg.sizes)
        if hasattr(cfg.generator, "base"):
            data, labels = contaminate(cfg.generator, n_max, rng)
        else:
            data, labels = sample_mixture(cfg.generator, n_max, rng)
    save_matrix(os.path.join(args.out, "data.csv"), data)
    if labels is not None:
        save_matrix(os.path.join(args.out, "labels.csv"), labels.reshape(-1, 1))
    print(f"wrote {data.shape[0]} x {data.shape[1]} dataset to {args.out}/data.csv")
    return 0


def _apply_chain_overrides(cfg, args):
    chain = cfg.chain
    if getattr(args, "iters", None) is not None:
        chain = dataclasses.replace(chain, iterations=args.iters)
    if getattr(args, "burnin", None) is not None:
        chain = dataclasses.replace(chain, burn_in=args.burnin)
    return dataclasses.replace(cfg, chain=chain)


def _cmd_run(args) -> int:
    cfg = _apply_chain_overrides(_load_sweep_config(args.config), args)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    n = max(cfg.sizes)
    full = generate_series(cfg)
    model = resolve_model(cfg, full[:n], full)
    chain = dataclasses.replace(cfg.chain, seed=_cell_seed(seed, n))
    out = run_chain(full[:n], model, chain)
    os.makedirs(args.out, exist_ok=True)
    doc = {
        "meta": {"dataset": cfg.dataset, "seed": seed, "N": n, "prior_mode": cfg.prior_mode},
        "chain": json.loads(out.to_json()),
    }
    with open(os.path.join(args.out, "chain.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    rows = _rows_from_chain(cfg, seed, n, out)
    write_posterior_csv(rows, os.path.join(args.out, "posterior_k.csv"))
    write_summary_csv(rows, os.path.join(args.out, "summary.csv"))
    print(
        f"chain done: N={n} seed={seed} mode_k={rows[0].mode_k} "
        f"sm_accept_rate={rows[0].sm_acceptance_rate:.4f}"
    )
    return 0


def _cmd_sweep(args) -> int:
    cfg = _apply_chain_overrides(_load_sweep_config(args.config), args)
    rows, errors = run_sweep(cfg, threads=args.threads)
    os.makedirs(args.out, exist_ok=True)
    write_posterior_csv(rows, os.path.join(args.out, "posterior_k.csv"))
    write_summary_csv(rows, os.path.join(args.out, "summary.csv"))
    write_errors_csv(errors, os.path.join(args.out, "errors.csv"))
    print(
        f"sweep done: {len(cfg.seeds) * len(cfg.sizes)} cells, "
        f"{len(errors)} failed; results in {args.out}"
    )
    return 0 if not errors else 1


def _cmd_exact(args) -> int:
    cfg = _load_sweep_config(args.config)
    n = max(cfg.sizes)
    if cfg.beta is None:
        raise ConfigError("exact requires a fixed rate: set model.beta")
    full = generate_series(cfg)
    model = resolve_model(cfg, full[:n], full)
    post = exact_posterior_k(full[:n], model, cfg.beta)
    rows = [
        ResultRow(
            dataset=cfg.dataset,
            seed=cfg.data_seed,
            N=n,
            prior_mode="exact",
            k=k + 1,
            probability=float(p),
            mean_k=float(np.sum((np.arange(len(post.posterior_k)) + 1) * post.posterior_k)),
            mode_k=int(np.argmax(post.posterior_k)) + 1,
            sm_acceptance_rate=0.0,
        )
        for k, p in enumerate(post.posterior_k)
    ]
    os.makedirs(args.out, exist_ok=True)
    write_posterior_csv(rows, os.path.join(args.out, "posterior_k.csv"))
    print(f"exact posterior over k for N={n} written to {args.out}/posterior_k.csv")
    return 0


def _cmd_summarize(args) -> int:
    with open(args.infile, encoding="utf-8") as fh:
        doc = json.load(fh)
    if "chain" in doc:
        meta = doc.get("meta", {})
        out = ChainOutput.from_json(json.dumps(doc["chain"]))
    else:  # bare ChainOutput JSON
        meta = {}
        out = ChainOutput.from_json(json.dumps(doc))
    post, mean_k, mode_k, stats = summarize(out)
    row = ResultRow(
        dataset=str(meta.get("dataset", "chain")),
        seed=int(meta.get("seed", 0)),
        N=int(meta.get("N", 0)),
        prior_mode=str(meta.get("prior_mode", "fixed")),
        k=1,
        probability=float(post[0]),
        mean_k=mean_k,
        mode_k=mode_k,
        sm_acceptance_rate=stats["sm_accept_rate"],
    )
    os.makedirs(args.out, exist_ok=True)
    write_summary_csv([row], os.path.join(args.out, "summary.csv"))
    print(f"mean_k={mean_k:.4f} mode_k={mode_k} sm_accept_rate={stats['sm_accept_rate']:.4f}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mfm",
        description="Mixture-of-finite-mixtures experiments: posterior over the number of components",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write the config's dataset as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override data.seed")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("run", help="run one chain at the largest configured N")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="replicate seed")
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--burnin", type=int, default=None)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run the full (seed, N) grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--burnin", type=int, default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("exact", help="enumerated posterior over k (N <= 10, fixed beta)")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_exact)

    p = sub.add_parser("summarize", help="summary.csv from a saved chain.json")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_summarize)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
