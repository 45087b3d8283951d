"""The generation loop: perturbation, candidate pools, and budgeted orchestration.

Each iteration assesses the population (spending budget), selects elites,
perturbs them in latent space into a large candidate pool, and asks the
pre-screener to pick the next population for free. Noise is drawn from
counter-based streams keyed by (seed, iteration, elite, noise index) so runs
are reproducible and independent of evaluation order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import AssessedRecord, Candidate, select_elites
from .genmodel import GenerativeModelSpec, decode, encode, sample_prior
from .metrics import diversity, top_k_means
from .oracle import BudgetExceededError, BudgetLedger, OracleEndpoint, assess
from .prescreener import ScreenStats
from .rng import noise_normals

logger = logging.getLogger(__name__)

TOP_KS = (20, 50, 100)


@dataclass(frozen=True)
class PerturbationPlan:
    """How elites spawn offspring: noises per elite and the step-size schedule.

    The schedule cycles over each elite's noise indices, so every elite is
    perturbed at every scale.
    """

    C: int
    sigmas: tuple[float, ...]
    dedup: bool = False

    def __post_init__(self):
        if self.C < 1:
            raise ValueError("C must be >= 1")
        if len(self.sigmas) == 0 or any(s <= 0 for s in self.sigmas):
            raise ValueError("sigmas must be a non-empty list of positive step sizes")


@dataclass(frozen=True)
class EvolutionConfig:
    n_pop: int
    n_elite: int
    epochs: int
    plan: PerturbationPlan
    seed: int = 0
    budget_cap: int | None = None
    elitism: bool = False
    cache_assessments: bool = False

    def __post_init__(self):
        if self.n_pop < 1 or self.n_elite < 1:
            raise ValueError("population and elite sizes must be positive")
        if self.n_elite > self.n_pop:
            raise ValueError(f"n_elite={self.n_elite} exceeds n_pop={self.n_pop}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.budget_cap is not None and self.budget_cap < 1:
            raise ValueError("budget_cap must be positive when set")


def perturb(z: np.ndarray, sigma: float, eps: np.ndarray) -> np.ndarray:
    """Return z + sigma * eps, leaving z untouched."""
    z = np.asarray(z, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if z.shape != eps.shape:
        raise ValueError(f"latent/noise shape mismatch: {z.shape} vs {eps.shape}")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    return z + sigma * eps


def generate_candidates(
    elites: Sequence[AssessedRecord],
    model: GenerativeModelSpec,
    plan: PerturbationPlan,
    iteration: int,
    seed: int,
) -> list[Candidate]:
    """Decode C perturbations of every elite, in (elite index, noise index) order.

    With dedup on, later candidates whose canonical key already appeared in
    this pool are dropped (first occurrence kept).
    """
    if len(elites) == 0:
        raise ValueError("cannot generate candidates from an empty elite set")
    out: list[Candidate] = []
    seen: set[str] = set()
    n_sigma = len(plan.sigmas)
    for i, rec in enumerate(elites):
        z = encode(model, rec.candidate)
        for j in range(plan.C):
            sigma = plan.sigmas[j % n_sigma]
            eps = noise_normals(seed, iteration, i, j, model.dim)
            cand = decode(model, perturb(z, sigma, eps))
            if plan.dedup:
                if cand.canonical_key in seen:
                    continue
                seen.add(cand.canonical_key)
            out.append(cand)
    return out


@dataclass(frozen=True)
class IterationRow:
    """One trace line: cumulative archive quality and this generation's stats."""

    seed: int
    iteration: int
    budget_spent: int
    top20: float
    top50: float
    top100: float
    diversity: float
    mean_threshold: float
    fallback_count: int


@dataclass
class EvolutionResult:
    archive: list[AssessedRecord]
    trace: list[IterationRow]
    raw_assessments: int
    unique_assessments: int


def run_evolution(
    cfg: EvolutionConfig,
    model: GenerativeModelSpec,
    oracle: OracleEndpoint,
    prescreener,
    ledger: BudgetLedger | None = None,
) -> EvolutionResult:
    """Run the full loop for cfg.epochs iterations under the budget cap.

    The archive holds every assessed record; the trace holds one row per
    completed iteration. A generation is assessed atomically: if the cap
    cannot cover the whole population the run stops before that generation
    (an error only if nothing was ever assessed).
    """
    if ledger is None:
        ledger = BudgetLedger(cap=cfg.budget_cap)
    latents = sample_prior(model, cfg.n_pop, cfg.seed)
    population = [decode(model, latents[i]) for i in range(latents.shape[0])]

    archive: list[AssessedRecord] = []
    trace: list[IterationRow] = []
    cache: dict[str, AssessedRecord] = {}
    raw_assessments = 0

    for iteration in range(1, cfg.epochs + 1):
        if cfg.cache_assessments:
            batch_seen: set[str] = set()
            to_assess = []
            for c in population:
                key = c.canonical_key
                if key in cache or key in batch_seen:
                    continue
                batch_seen.add(key)
                to_assess.append(c)
        else:
            to_assess = population

        if not ledger.has_capacity(len(to_assess)):
            if iteration == 1:
                raise BudgetExceededError(
                    f"budget cap {ledger.cap} cannot cover the initial population of {len(to_assess)}"
                )
            logger.warning(
                "stopping at iteration %d: %d assessments needed but only %s remaining",
                iteration,
                len(to_assess),
                ledger.remaining(),
            )
            break

        raw_assessments += len(population)
        fresh = assess(oracle, to_assess, ledger, iteration)
        archive.extend(fresh)
        if cfg.cache_assessments:
            cache.update({r.candidate.canonical_key: r for r in fresh})
            gen_records = [cache[c.canonical_key] for c in population]
        else:
            gen_records = fresh

        stats = ScreenStats(0.0, 0)
        if iteration < cfg.epochs:
            n_elite = min(cfg.n_elite, len(gen_records))
            if n_elite < cfg.n_elite:
                logger.warning("only %d records for %d elite slots", len(gen_records), cfg.n_elite)
            elites = select_elites(gen_records, n_elite)
            pool = generate_candidates(elites, model, cfg.plan, iteration, cfg.seed)
            population, stats = prescreener.screen(pool, archive, iteration)
            if cfg.elitism:
                keep = [r.candidate for r in elites]
                population = keep + population[: max(0, cfg.n_pop - len(keep))]
            if len(population) < cfg.n_pop:
                logger.warning(
                    "population shrank to %d (< n_pop=%d) at iteration %d",
                    len(population),
                    cfg.n_pop,
                    iteration,
                )

        tops = top_k_means(archive, TOP_KS)
        div = diversity(gen_records) if len(gen_records) >= 2 else 0.0
        trace.append(
            IterationRow(
                seed=cfg.seed,
                iteration=iteration,
                budget_spent=ledger.spent,
                top20=tops[20],
                top50=tops[50],
                top100=tops[100],
                diversity=div,
                mean_threshold=stats.mean_threshold,
                fallback_count=stats.fallback_count,
            )
        )

    return EvolutionResult(archive, trace, raw_assessments, ledger.spent)
