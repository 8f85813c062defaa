"""Real-coded genetic algorithm over UABS positions and the shared ICIC
parameters, with the 5pSE as fitness.

A chromosome is the flat vector ``[x1, y1, ..., xN, yN, tau_db, alpha,
rho_db, rho_prime_db]``; ``beta`` is not a gene.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .propagation import PathLossModel, draw_fading
from .radio import (
    DEFAULT_SE_CEILING,
    MODE_EICIC,
    MODE_FEICIC,
    IcicParams,
    LinkBudget,
    SeReport,
    evaluate_links,
    tier_links,
)
from .scenario import NetworkLayout, SimRegion

N_ICIC_GENES = 4
MUTATIONS = ("uniform", "gaussian", "mixed")
MUTATION_SCOPES = ("child", "gene", "capped")


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 60
    generations: int = 100
    crossover_prob: float = 0.7
    mutation_prob: float = 0.1
    elitism_count: int = 1
    rng_seed: int = 0
    mutation_scope: str = "capped"
    crossover: str = "uniform"
    mutation: str = "mixed"
    mutation_sigma: float = 0.1

    def __post_init__(self):
        if self.mutation not in MUTATIONS:
            raise ValueError(f"mutation must be one of {MUTATIONS}")
        if self.mutation_sigma <= 0:
            raise ValueError("mutation_sigma must be positive")
        if self.crossover not in ("uniform", "arithmetic"):
            raise ValueError("crossover must be 'uniform' or 'arithmetic'")
        if self.mutation_scope not in MUTATION_SCOPES:
            raise ValueError(f"mutation_scope must be one of {MUTATION_SCOPES}")
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        for name in ("crossover_prob", "mutation_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if not 0 <= self.elitism_count < self.population_size:
            raise ValueError("elitism_count must be in [0, population_size)")

    @classmethod
    def listing_preset(cls, **kw) -> "GaConfig":
        """Six generations instead of one hundred."""
        return cls(generations=6, **kw)


@dataclass(frozen=True)
class GaBounds:
    """Box bounds for every gene; ``lo == hi`` freezes a gene."""

    region: SimRegion = field(default_factory=SimRegion)
    tau_db: tuple = (0.0, 15.0)
    alpha: tuple = (0.0, 1.0)
    rho_db: tuple = (20.0, 40.0)
    rho_prime_db: tuple = (-20.0, -5.0)

    def __post_init__(self):
        for name in ("tau_db", "alpha", "rho_db", "rho_prime_db"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"{name} bounds are inverted: {lo} > {hi}")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if self.alpha[0] < 0 or self.alpha[1] > 1:
            raise ValueError("alpha bounds must lie in [0, 1]")

    @classmethod
    def for_mode(cls, mode: str, region: SimRegion | None = None, **kw) -> "GaBounds":
        region = region or SimRegion()
        if mode == MODE_EICIC:
            kw["alpha"] = (0.0, 0.0)
        elif mode != MODE_FEICIC:
            raise ValueError(f"GA deployment supports the eicic and feicic modes, got {mode!r}")
        return cls(region=region, **kw)

    def arrays(self, n_uabs: int) -> tuple[np.ndarray, np.ndarray]:
        r = self.region
        lo = [r.x0, r.y0] * n_uabs
        hi = [r.x0 + r.width, r.y0 + r.height] * n_uabs
        for lo_i, hi_i in (self.tau_db, self.alpha, self.rho_db, self.rho_prime_db):
            lo.append(lo_i)
            hi.append(hi_i)
        return np.array(lo, dtype=float), np.array(hi, dtype=float)


@dataclass(frozen=True, eq=False)
class Chromosome:
    uabs_xy: np.ndarray
    tau_db: float
    alpha: float
    rho_db: float
    rho_prime_db: float

    @property
    def n_uabs(self) -> int:
        return len(self.uabs_xy)

    @property
    def genes(self) -> np.ndarray:
        icic = [self.tau_db, self.alpha, self.rho_db, self.rho_prime_db]
        return np.concatenate([np.asarray(self.uabs_xy, dtype=float).ravel(), icic])

    @classmethod
    def from_genes(cls, genes) -> "Chromosome":
        genes = np.asarray(genes, dtype=float)
        n_xy = len(genes) - N_ICIC_GENES
        if n_xy < 0 or n_xy % 2:
            raise ValueError(f"chromosome length {len(genes)} is not 2*N_uabs + {N_ICIC_GENES}")
        tau, alpha, rho, rho_p = (float(g) for g in genes[n_xy:])
        return cls(genes[:n_xy].reshape(-1, 2).copy(), tau, alpha, rho, rho_p)

    def to_dict(self) -> dict:
        return {
            "uabs_xy_km": np.asarray(self.uabs_xy).tolist(),
            "tau_db": self.tau_db,
            "alpha": self.alpha,
            "rho_db": self.rho_db,
            "rho_prime_db": self.rho_prime_db,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Chromosome":
        xy = np.asarray(d["uabs_xy_km"], dtype=float).reshape(-1, 2)
        return cls(xy, float(d["tau_db"]), float(d["alpha"]), float(d["rho_db"]), float(d["rho_prime_db"]))


def encode(layout: NetworkLayout, params: IcicParams) -> Chromosome:
    return Chromosome(
        layout.uabs_positions[:, :2].copy(), params.tau_db, params.alpha, params.rho_db, params.rho_prime_db
    )


def decode(
    chromosome: Chromosome,
    layout_base: NetworkLayout,
    beta: float = 0.5,
    altitude_m: float = 100.0,
    bounds: GaBounds | None = None,
) -> tuple[NetworkLayout, IcicParams]:
    """UABS positions and ICIC parameters carried by ``chromosome``."""
    if bounds is not None:
        lo, hi = bounds.arrays(chromosome.n_uabs)
        g = chromosome.genes
        if np.any(g < lo) or np.any(g > hi):
            raise ValueError("chromosome has genes outside their bounds")
    xy = np.asarray(chromosome.uabs_xy, dtype=float).reshape(-1, 2)
    uabs = np.column_stack([xy, np.full(len(xy), float(altitude_m))])
    params = IcicParams(
        tau_db=chromosome.tau_db,
        alpha=chromosome.alpha,
        rho_db=chromosome.rho_db,
        rho_prime_db=chromosome.rho_prime_db,
        beta=beta,
    )
    return layout_base.with_uabs(uabs), params


class FitnessFunction:
    """5pSE of a chromosome against a frozen MBS/UE drop and fading draw.

    The fading matrix is the one :func:`~uabs_hetnet.radio.evaluate_5pse`
    draws from ``fading_rng`` for the decoded layout, so a decoded chromosome
    re-scored with the same seed reproduces its fitness exactly.
    """

    def __init__(self, layout_base, model, n_uabs, beta=0.5, altitude_m=100.0, fading_rng=None, se_ceiling=DEFAULT_SE_CEILING):
        self.layout = layout_base
        self.model = model
        self.n_uabs = n_uabs
        self.beta = beta
        self.altitude_m = altitude_m
        self.se_ceiling = se_ceiling
        n_mbs = layout_base.n_mbs
        if n_mbs + n_uabs == 0:
            raise ValueError("no stations to evaluate")
        if layout_base.n_ue == 0:
            raise ValueError("layout has no UEs")
        fading = draw_fading(fading_rng, size=(layout_base.n_ue, n_mbs + n_uabs))
        self._uabs_fading = fading[:, n_mbs:]
        self._mbs = tier_links(
            layout_base.ue_positions, layout_base.mbs_positions, layout_base.mbs_eff_power_dbm, model, fading[:, :n_mbs]
        )
        self.n_evaluations = 0

    def report(self, chromosome: Chromosome) -> SeReport:
        layout, params = decode(chromosome, self.layout, self.beta, self.altitude_m)
        uabs = tier_links(
            layout.ue_positions, layout.uabs_positions, layout.uabs_eff_power_dbm, self.model, self._uabs_fading
        )
        link = LinkBudget.from_tiers(self._mbs, uabs, layout.n_mbs, layout.n_uabs)
        self.n_evaluations += 1
        return evaluate_links(link, params, self.se_ceiling)

    def __call__(self, genes) -> float:
        return self.report(Chromosome.from_genes(genes)).fifth_percentile_se


def _mutate(genes, lo, hi, cfg: GaConfig, rng) -> np.ndarray:
    """New values for the genes picked for mutation (clipped by the caller)."""
    n = len(genes)
    uniform = rng.uniform(lo, hi)
    if cfg.mutation == "uniform":
        return uniform
    creep = genes + rng.normal(0.0, cfg.mutation_sigma, n) * (hi - lo)
    if cfg.mutation == "gaussian":
        return creep
    # mixed: uniform re-draw, Gaussian creep or a jump to one of the bounds
    boundary = np.where(rng.random(n) < 0.5, lo, hi)
    kind = rng.integers(3, size=n)
    return np.choose(kind, (uniform, creep, boundary))


def roulette_probabilities(fitness: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Selection probabilities proportional to ``fitness - min + eps``."""
    f = np.asarray(fitness, dtype=float)
    shifted = f - f.min() + eps
    total = shifted.sum()
    if not np.isfinite(total) or total <= 0:
        return np.full(len(f), 1.0 / len(f))
    return shifted / total


@dataclass
class GaResult:
    best: Chromosome
    best_report: SeReport
    history: list  # (generation, best_so_far, population_mean)
    populations: list = field(default_factory=list)
    elapsed_s: float = 0.0
    n_evaluations: int = 0

    @property
    def best_fitness(self) -> float:
        return self.best_report.fifth_percentile_se

    def history_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["generation", "best_fifth_pse", "mean_fifth_pse"])
            for gen, best, mean in self.history:
                writer.writerow([gen, repr(float(best)), repr(float(mean))])

    def best_to_json(self, path, **extra) -> None:
        payload = {
            "chromosome": self.best.to_dict(),
            "fifth_pse": self.best_fitness,
            "params": self.best_report.params_used.as_dict(),
            "elapsed_s": self.elapsed_s,
            "n_evaluations": self.n_evaluations,
        }
        payload.update(extra)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)


def ga_optimize(
    layout_base: NetworkLayout,
    model: PathLossModel,
    cfg: GaConfig,
    bounds: GaBounds,
    beta: float = 0.5,
    n_uabs: int | None = None,
    fading_rng=None,
    altitude_m: float = 100.0,
    initial=None,
    keep_populations: bool = False,
    se_ceiling: float = DEFAULT_SE_CEILING,
) -> GaResult:
    """Maximize the 5pSE over UABS positions and ICIC genes.

    Generation 1 is the (random or supplied) initial population; each later
    generation keeps the ``elitism_count`` best and fills up with children:
    roulette-wheel parents, crossover with probability ``crossover_prob``
    (else a copy of the first parent), mutation, then clipping to the bounds.

    The default crossover is uniform: each UABS inherits its (x, y) pair from
    one parent and each ICIC gene is taken from either parent.  Blending the
    coordinates of unrelated UABSs would pull them toward the middle of the
    region.  ``crossover="arithmetic"`` blends gene-wise instead.

    Which genes mutate is set by ``mutation_scope``.  ``"gene"`` picks each
    gene independently with probability ``mutation_prob``.  ``"capped"`` (the
    default) does the same with the probability capped at one over the
    chromosome length, so long chromosomes see about one mutation per child.
    ``"child"`` mutates one random gene of a child with probability
    ``mutation_prob``.  A picked gene gets a new value from ``mutation``:
    ``"uniform"`` re-draws it within its bounds, ``"gaussian"`` adds noise
    with standard deviation ``mutation_sigma`` times the bound width, and
    ``"mixed"`` (the default) picks evenly among a re-draw, Gaussian noise
    and a jump to one of the bounds.  Bound jumps matter because ICIC optima
    often sit exactly on a bound, such as alpha = 0.
    """
    start = time.perf_counter()
    n_uabs = layout_base.n_uabs if n_uabs is None else n_uabs
    fitness_fn = FitnessFunction(layout_base, model, n_uabs, beta, altitude_m, fading_rng, se_ceiling)
    lo, hi = bounds.arrays(n_uabs)
    n_genes = len(lo)
    size = cfg.population_size
    rng = np.random.default_rng(cfg.rng_seed)

    pop = rng.uniform(lo, hi, size=(size, n_genes))
    if initial is not None:
        seeds = np.atleast_2d(np.asarray([c.genes if isinstance(c, Chromosome) else c for c in initial], dtype=float))
        if seeds.shape[1] != n_genes:
            raise ValueError(f"initial chromosomes need {n_genes} genes")
        if np.any(seeds < lo) or np.any(seeds > hi):
            raise ValueError("initial chromosomes violate the bounds")
        k = min(len(seeds), size)
        pop[:k] = seeds[:k]

    fit = np.array([fitness_fn(g) for g in pop])
    best_idx = int(np.argmax(fit))
    best_genes, best_fit = pop[best_idx].copy(), fit[best_idx]
    history = [(1, float(best_fit), float(fit.mean()))]
    populations = [pop.copy()] if keep_populations else []

    n_elite = cfg.elitism_count
    gene_rate = cfg.mutation_prob
    if cfg.mutation_scope == "capped":
        gene_rate = min(gene_rate, 1.0 / n_genes)
    for gen in range(2, cfg.generations + 1):
        order = np.argsort(-fit, kind="stable")
        probs = roulette_probabilities(fit)
        children = np.empty((size - n_elite, n_genes))
        for i in range(size - n_elite):
            p1, p2 = rng.choice(size, size=2, p=probs)
            if rng.random() < cfg.crossover_prob:
                if cfg.crossover == "uniform":
                    take = rng.random(n_uabs + N_ICIC_GENES) < 0.5
                    take = np.concatenate([np.repeat(take[:n_uabs], 2), take[n_uabs:]])
                    child = np.where(take, pop[p2], pop[p1])
                else:
                    lam = rng.random(n_genes)
                    child = lam * pop[p1] + (1.0 - lam) * pop[p2]
            else:
                child = pop[p1].copy()
            if cfg.mutation_scope == "child":
                mutate = np.zeros(n_genes, dtype=bool)
                if rng.random() < cfg.mutation_prob:
                    mutate[rng.integers(n_genes)] = True
            else:
                mutate = rng.random(n_genes) < gene_rate
            if mutate.any():
                child[mutate] = _mutate(child[mutate], lo[mutate], hi[mutate], cfg, rng)
            children[i] = np.clip(child, lo, hi)

        elite = order[:n_elite]
        pop = np.vstack([pop[elite], children])
        fit = np.concatenate([fit[elite], [fitness_fn(g) for g in children]])
        gen_best = int(np.argmax(fit))
        if fit[gen_best] > best_fit:
            best_genes, best_fit = pop[gen_best].copy(), fit[gen_best]
        history.append((gen, float(best_fit), float(fit.mean())))
        if keep_populations:
            populations.append(pop.copy())

    best = Chromosome.from_genes(best_genes)
    report = fitness_fn.report(best)
    elapsed = time.perf_counter() - start
    report.meta["elapsed_s"] = elapsed
    return GaResult(
        best=best,
        best_report=report,
        history=history,
        populations=populations,
        elapsed_s=elapsed,
        n_evaluations=fitness_fn.n_evaluations,
    )
