"""Config-driven experiment harness: sweep a generator over nested data sizes
and replicate chains, and export posterior-over-k tables.

A sweep is a grid over (replicate seed, N). Every cell is deterministic:
the dataset series comes from data.seed alone (each N is a prefix of the
largest), and the cell's chain stream derives from (replicate seed, N), so
serial and parallel execution write byte-identical CSV files.

Hyperparameter resolution per cell follows the generative-model recipe:
m = midrange and kappa = 1/range^2 of the full series (prior_mode "fixed"
and "bounded") or of the N-prefix only ("varying"); the component mean's
precision is tied to the component precision (c = 1, the conjugate
normal-gamma base measure), and the beta hyperprior is Gamma(beta_u,
scale = beta_v_scale / kappa), i.e. rate kappa / beta_v_scale, so the prior
mean of beta scales with the squared data range and the implied component
scale is weakly informative at the spread of the data. Explicit model.m /
model.kappa / model.c keys override the empirical values.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .chain import ChainConfig, ChainOutput, run_chain
from .configfile import ConfigError, check_keys, parse_config
from .datagen import (
    Component,
    ContaminationSpec,
    MixtureSpec,
    empirical_hyperparams,
    load_matrix,
)
from .model import BetaHyperprior, ModelConfig
from .priors import CountPrior, Geometric, UniformBounded

__all__ = [
    "SweepConfig",
    "ResultRow",
    "ErrorRow",
    "KNOWN_KEYS",
    "sweep_config_from_text",
    "generate_series",
    "resolve_model",
    "run_sweep",
    "summarize",
    "write_posterior_csv",
    "write_summary_csv",
    "write_errors_csv",
]

PRIOR_MODES = ("fixed", "varying", "bounded")

KNOWN_KEYS = {
    "dataset.name",
    "data.seed",
    "generator.kind",
    "generator.path",
    "mixture.families",
    "mixture.locs",
    "mixture.scales",
    "mixture.weights",
    "contaminant.families",
    "contaminant.locs",
    "contaminant.scales",
    "contaminant.weights",
    "contamination.eps",
    "sweep.sizes",
    "sweep.seeds",
    "sweep.prior_mode",
    "sweep.threads",
    "prior.kind",
    "prior.r",
    "prior.kmax",
    "model.alpha",
    "model.gamma",
    "model.beta",
    "model.beta_u",
    "model.beta_v",
    "model.beta_v_scale",
    "model.m",
    "model.kappa",
    "model.c",
    "chain.iterations",
    "chain.burn_in",
    "chain.splitmerge_per_sweep",
    "chain.restricted_scans",
    "chain.record_every",
}


@dataclass(frozen=True)
class SweepConfig:
    dataset: str
    generator: MixtureSpec | ContaminationSpec | str  # str = CSV path
    sizes: tuple[int, ...]
    seeds: tuple[int, ...]
    prior_mode: str
    count_prior: CountPrior
    alpha: float
    gamma: float
    chain: ChainConfig
    data_seed: int = 0
    threads: int = 1
    beta: float | None = None
    beta_u: float | None = None
    beta_v: float | None = None
    beta_v_scale: float | None = None
    m_explicit: float | None = None
    kappa_explicit: float | None = None
    c_explicit: float | None = None

    def __post_init__(self):
        if not self.sizes or not self.seeds:
            raise ConfigError("sizes and seeds must be nonempty")
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ConfigError(f"sizes must be strictly ascending, got {self.sizes}")
        if any(s < 0 for s in self.seeds):
            raise ConfigError("seeds must be nonnegative")
        if self.prior_mode not in PRIOR_MODES:
            raise ConfigError(f"prior_mode must be one of {PRIOR_MODES}")
        if self.prior_mode == "bounded" and not isinstance(
            self.count_prior, UniformBounded
        ):
            raise ConfigError("bounded prior_mode requires prior.kind = \"uniform\"")
        modes = [
            self.beta is not None,
            self.beta_u is not None and self.beta_v is not None,
            self.beta_u is not None and self.beta_v_scale is not None,
        ]
        if sum(modes) != 1:
            raise ConfigError(
                "set exactly one of model.beta, (model.beta_u, model.beta_v), "
                "or (model.beta_u, model.beta_v_scale)"
            )


@dataclass(frozen=True)
class ResultRow:
    dataset: str
    seed: int
    N: int
    prior_mode: str
    k: int
    probability: float
    mean_k: float
    mode_k: int
    sm_acceptance_rate: float


@dataclass(frozen=True)
class ErrorRow:
    dataset: str
    seed: int
    N: int
    error: str


def _mixture_from_keys(cfg: dict, prefix: str) -> MixtureSpec:
    fams = cfg.get(f"{prefix}.families")
    locs = cfg.get(f"{prefix}.locs")
    scales = cfg.get(f"{prefix}.scales")
    weights = cfg.get(f"{prefix}.weights")
    if fams is None or locs is None or scales is None or weights is None:
        raise ConfigError(
            f"{prefix}.families, .locs, .scales, .weights are all required"
        )
    if not len(fams) == len(locs) == len(scales) == len(weights):
        raise ConfigError(f"{prefix}.* lists must have equal length")
    comps = tuple(
        Component(family=f, loc=float(l), scale=float(s))
        for f, l, s in zip(fams, locs, scales)
    )
    return MixtureSpec(components=comps, weights=tuple(float(w) for w in weights))


def sweep_config_from_text(text: str) -> SweepConfig:
    cfg = parse_config(text)
    check_keys(cfg, KNOWN_KEYS)

    kind = cfg.get("generator.kind", "mixture")
    if kind == "mixture":
        generator: MixtureSpec | ContaminationSpec | str = _mixture_from_keys(
            cfg, "mixture"
        )
    elif kind == "contamination":
        generator = ContaminationSpec(
            base=_mixture_from_keys(cfg, "mixture"),
            contaminant=_mixture_from_keys(cfg, "contaminant"),
            eps=float(cfg.get("contamination.eps", 0.0)),
        )
    elif kind == "file":
        if "generator.path" not in cfg:
            raise ConfigError("generator.kind = \"file\" requires generator.path")
        generator = str(cfg["generator.path"])
    else:
        raise ConfigError(f"unknown generator.kind {kind!r}")

    prior_kind = cfg.get("prior.kind", "geometric")
    if prior_kind == "geometric":
        count_prior: CountPrior = Geometric(float(cfg.get("prior.r", 0.1)))
    elif prior_kind == "uniform":
        if "prior.kmax" not in cfg:
            raise ConfigError("prior.kind = \"uniform\" requires prior.kmax")
        count_prior = UniformBounded(int(cfg["prior.kmax"]))
    else:
        raise ConfigError(f"unknown prior.kind {prior_kind!r}")

    beta = cfg.get("model.beta")
    beta_u = cfg.get("model.beta_u")
    beta_v = cfg.get("model.beta_v")
    beta_v_scale = cfg.get("model.beta_v_scale")
    if beta is None and beta_u is None:
        beta_u, beta_v_scale = 0.2, 10.0  # beta ~ Gamma(0.2, scale 10/kappa)

    chain = ChainConfig(
        iterations=int(cfg.get("chain.iterations", 20_000)),
        burn_in=int(cfg.get("chain.burn_in", 2_000)),
        seed=0,  # replaced per cell
        splitmerge_per_sweep=int(cfg.get("chain.splitmerge_per_sweep", 1)),
        restricted_scans=int(cfg.get("chain.restricted_scans", 5)),
        record_every=int(cfg.get("chain.record_every", 1)),
    )

    return SweepConfig(
        dataset=str(cfg.get("dataset.name", kind)),
        generator=generator,
        sizes=tuple(int(s) for s in cfg.get("sweep.sizes", [1000])),
        seeds=tuple(int(s) for s in cfg.get("sweep.seeds", [1, 2, 3])),
        prior_mode=str(cfg.get("sweep.prior_mode", "fixed")),
        count_prior=count_prior,
        alpha=float(cfg.get("model.alpha", 2.0)),
        gamma=float(cfg.get("model.gamma", 1.0)),
        chain=chain,
        data_seed=int(cfg.get("data.seed", 0)),
        threads=int(cfg.get("sweep.threads", 1)),
        beta=None if beta is None else float(beta),
        beta_u=None if beta_u is None else float(beta_u),
        beta_v=None if beta_v is None else float(beta_v),
        beta_v_scale=None if beta_v_scale is None else float(beta_v_scale),
        m_explicit=None if "model.m" not in cfg else float(cfg["model.m"]),
        kappa_explicit=None if "model.kappa" not in cfg else float(cfg["model.kappa"]),
        c_explicit=None if "model.c" not in cfg else float(cfg["model.c"]),
    )


def generate_series(cfg: SweepConfig) -> np.ndarray:
    """The full dataset (max size rows); every cell slices a prefix of it."""
    n_max = max(cfg.sizes)
    if isinstance(cfg.generator, str):
        data = load_matrix(cfg.generator)
        if data.shape[0] < n_max:
            raise ConfigError(
                f"file has {data.shape[0]} rows, sweep needs {n_max}"
            )
        return data[:n_max]
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.data_seed, 0])))
    return cfg.generator.draw(n_max, rng)


def resolve_model(cfg: SweepConfig, x: np.ndarray, full: np.ndarray) -> ModelConfig:
    """Hyperparameters for one cell; x is the prefix, full the whole series."""
    dim = x.shape[1]
    ref = x if cfg.prior_mode == "varying" else full
    m_emp, kappa_emp = empirical_hyperparams(ref)
    m = np.full(dim, cfg.m_explicit) if cfg.m_explicit is not None else m_emp
    kappa = (
        np.full(dim, cfg.kappa_explicit)
        if cfg.kappa_explicit is not None
        else kappa_emp
    )

    if cfg.beta is not None:
        beta, beta_prior = cfg.beta, None
    else:
        v = cfg.beta_v
        if v is None:
            if dim != 1:
                raise ConfigError("model.beta_v_scale requires univariate data")
            # Gamma(u, scale = beta_v_scale/kappa): rate = kappa/beta_v_scale
            v = float(kappa[0]) / cfg.beta_v_scale
        beta, beta_prior = None, BetaHyperprior(cfg.beta_u, v)

    # conjugate base measure ties the mean precision to tau: c = 1
    c = (
        np.full(dim, cfg.c_explicit)
        if cfg.c_explicit is not None
        else np.ones(dim)
    )
    return ModelConfig(
        m=m,
        c=c,
        alpha=cfg.alpha,
        gamma=cfg.gamma,
        count_prior=cfg.count_prior,
        dim=dim,
        beta=beta,
        beta_prior=beta_prior,
    )


def _cell_seed(seed: int, n: int) -> int:
    # one PCG64 stream per (replicate, N) cell; prefixes never share a stream
    return int(np.random.SeedSequence([seed, 1, n]).generate_state(1, np.uint64)[0])


def summarize(out: ChainOutput):
    """(posterior over k, mean_k, mode_k, diagnostics) from recorded draws."""
    if len(out.trace_k) == 0:
        raise ValueError("empty post-burn-in trace")
    counts = np.bincount(np.asarray(out.trace_k, dtype=np.int64), minlength=2)[1:]
    post = counts / counts.sum()
    last = int(np.nonzero(post)[0][-1]) + 1
    post = post[:last]
    mean_k = float(np.sum((np.arange(last) + 1) * post))
    mode_k = int(np.argmax(post)) + 1  # first maximum: ties go to smaller k
    rate = out.sm_accepted / out.sm_proposed if out.sm_proposed else 0.0
    return post, mean_k, mode_k, {"sm_accept_rate": rate}


def _run_cell(cfg: SweepConfig, seed: int, n: int) -> list[ResultRow]:
    full = generate_series(cfg)
    x = full[:n]
    model = resolve_model(cfg, x, full)
    chain = replace(cfg.chain, seed=_cell_seed(seed, n))
    out = run_chain(x, model, chain)
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


def _cell_worker(args):
    cfg, seed, n = args
    try:
        return (seed, n, _run_cell(cfg, seed, n), None)
    except Exception as exc:  # isolate the cell, record the failure
        return (seed, n, None, f"{type(exc).__name__}: {exc}")


def run_sweep(
    cfg: SweepConfig, threads: int | None = None
) -> tuple[list[ResultRow], list[ErrorRow]]:
    """All (seed, N) cells; failed cells become error rows, not a sweep abort."""
    if threads is None:
        threads = cfg.threads
    cells = [(cfg, seed, n) for seed in cfg.seeds for n in cfg.sizes]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_cell_worker, cells))
    else:
        outcomes = [_cell_worker(c) for c in cells]

    rows: list[ResultRow] = []
    errors: list[ErrorRow] = []
    for seed, n, cell_rows, err in outcomes:
        if err is None:
            rows.extend(cell_rows)
        else:
            errors.append(ErrorRow(dataset=cfg.dataset, seed=seed, N=n, error=err))
    rows.sort(key=lambda r: (r.dataset, r.seed, r.N, r.k))
    errors.sort(key=lambda e: (e.dataset, e.seed, e.N))
    return rows, errors


# -- CSV export (UTF-8, LF, 9 significant digits) -------------------------------


def _g9(x: float) -> str:
    return f"{x:.9g}"


def write_posterior_csv(rows: list[ResultRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset", "seed", "N", "prior_mode", "k", "probability"])
        for r in rows:
            w.writerow([r.dataset, r.seed, r.N, r.prior_mode, r.k, _g9(r.probability)])


def write_summary_csv(rows: list[ResultRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset", "seed", "N", "mean_k", "mode_k", "sm_accept_rate"])
        seen = set()
        for r in rows:
            key = (r.dataset, r.seed, r.N)
            if key in seen:
                continue
            seen.add(key)
            w.writerow(
                [r.dataset, r.seed, r.N, _g9(r.mean_k), r.mode_k, _g9(r.sm_acceptance_rate)]
            )


def write_errors_csv(errors: list[ErrorRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset", "seed", "N", "error"])
        for e in errors:
            w.writerow([e.dataset, e.seed, e.N, e.error])
