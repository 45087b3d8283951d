"""Experiment runner: configuration, ablations, baselines, and file emission.

A config JSON fully describes an experiment (engine knobs, generative model,
assessor, screening, ablation, seeds). Runs write one directory per seed with
a trace CSV and an archive JSONL, plus a combined summary CSV and report JSON.
All outputs are byte-identical across repeated runs of the same config.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import BITSTRING, REAL_VECTOR, TOKEN, AssessedRecord, Candidate
from .evolution import EvolutionConfig, EvolutionResult, IterationRow, PerturbationPlan, run_evolution
from .genmodel import BITSTRING_THRESHOLD, CONTINUOUS_IDENTITY, EXTERNAL, GenerativeModelSpec, decode, sample_prior
from .metrics import diversity, top_k_mean, top_k_means
from .oracle import (
    BudgetLedger,
    ConfigurationError,
    ObjectiveSpec,
    OracleClient,
    OracleEndpoint,
    assess,
    check_handshake,
)
from .prescreener import ScreeningConfig, SurrogateScreener, TruncationScreener

logger = logging.getLogger(__name__)

ABLATIONS = ("none", "utility", "uncertainty", "full")

TRACE_COLUMNS = (
    "seed",
    "iteration",
    "budget_spent",
    "top20",
    "top50",
    "top100",
    "diversity",
    "mean_threshold",
    "fallback_count",
)


@dataclass(frozen=True)
class OracleConfig:
    """Declarative assessor description; live endpoints are built per run."""

    kind: str
    objectives: tuple
    combiner: str = "mean"
    command: tuple[str, ...] | None = None
    address: str | None = None
    timeout: float | None = None

    def build(self) -> tuple[OracleEndpoint, object | None]:
        """Returns (endpoint, client-to-close-or-None)."""
        if self.kind == "builtin":
            return OracleEndpoint("builtin", self.objectives, self.combiner), None
        if self.command:
            client = OracleClient.spawn(self.command, timeout=self.timeout)
        elif self.address:
            client = OracleClient.connect(self.address, timeout=self.timeout)
        else:
            raise ConfigurationError("external oracle needs a command or an address")
        endpoint = OracleEndpoint("external", self.objectives, self.combiner, client=client)
        check_handshake(endpoint)
        return endpoint, client


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    dim: int
    bit_scale: float = 1.0
    command: tuple[str, ...] | None = None
    address: str | None = None
    timeout: float | None = None

    def build(self) -> tuple[GenerativeModelSpec, object | None]:
        if self.kind != EXTERNAL:
            return GenerativeModelSpec(self.kind, self.dim, self.bit_scale), None
        if self.command:
            client = OracleClient.spawn(self.command, timeout=self.timeout)
        elif self.address:
            client = OracleClient.connect(self.address, timeout=self.timeout)
        else:
            raise ConfigurationError("external generative model needs a command or an address")
        return GenerativeModelSpec(EXTERNAL, self.dim, self.bit_scale, client=client), client


@dataclass(frozen=True)
class ExperimentConfig:
    evolution: EvolutionConfig
    model: ModelConfig
    oracle: OracleConfig
    screening: ScreeningConfig
    knn_k: int = 5
    weighting: str = "inverse_distance"
    ablation: str = "full"
    seeds: tuple[int, ...] = (0,)
    out_dir: str | None = None


def validate_config(cfg: ExperimentConfig) -> None:
    """Cross-component consistency checks, run before any oracle spend."""
    if cfg.ablation not in ABLATIONS:
        raise ConfigurationError(f"unknown ablation {cfg.ablation!r}, expected one of {ABLATIONS}")
    if len(cfg.seeds) == 0:
        raise ConfigurationError("at least one seed is required")
    external_oracle = cfg.oracle.kind == "external"
    external_model = cfg.model.kind == EXTERNAL
    if external_oracle != external_model:
        raise ConfigurationError(
            "external assessors score token candidates, so an external oracle requires "
            "an external generative model (and vice versa)"
        )
    if cfg.oracle.kind == "builtin":
        for spec in cfg.oracle.objectives:
            bit_objective = spec.kind != "gaussian_peak"
            if bit_objective and cfg.model.kind != BITSTRING_THRESHOLD:
                raise ConfigurationError(f"objective {spec.kind} needs a bitstring model")
            if not bit_objective and cfg.model.kind != CONTINUOUS_IDENTITY:
                raise ConfigurationError("gaussian_peak needs a continuous model")
            if spec.kind == "motif_match" and len(spec.target) != cfg.model.dim:
                raise ConfigurationError(
                    f"motif target length {len(spec.target)} != model dim {cfg.model.dim}"
                )
            if spec.kind == "gaussian_peak" and len(spec.center) != cfg.model.dim:
                raise ConfigurationError(
                    f"peak center dimension {len(spec.center)} != model dim {cfg.model.dim}"
                )


# --- config file round-trip -------------------------------------------------


def config_from_dict(data: dict) -> ExperimentConfig:
    ev = data["evolution"]
    plan = PerturbationPlan(
        C=ev["plan"]["C"],
        sigmas=tuple(ev["plan"]["sigmas"]),
        dedup=ev["plan"].get("dedup", True),
    )
    evolution = EvolutionConfig(
        n_pop=ev["n_pop"],
        n_elite=ev["n_elite"],
        epochs=ev["epochs"],
        plan=plan,
        seed=0,
        budget_cap=ev.get("budget_cap"),
        elitism=ev.get("elitism", False),
        cache_assessments=ev.get("cache_assessments", False),
    )
    md = data["model"]
    model = ModelConfig(
        kind=md["kind"],
        dim=md["dim"],
        bit_scale=md.get("bit_scale", 1.0),
        command=tuple(md["command"]) if md.get("command") else None,
        address=md.get("address"),
        timeout=md.get("timeout"),
    )
    oc = data["oracle"]
    if oc["kind"] == "builtin":
        objectives = tuple(
            ObjectiveSpec(
                kind=o["kind"],
                k=o.get("k"),
                target=o.get("target"),
                center=tuple(o["center"]) if o.get("center") else None,
                width=o.get("width"),
            )
            for o in oc["objectives"]
        )
    else:
        objectives = tuple(oc["objectives"])
    oracle = OracleConfig(
        kind=oc["kind"],
        objectives=objectives,
        combiner=oc.get("combiner", "mean"),
        command=tuple(oc["command"]) if oc.get("command") else None,
        address=oc.get("address"),
        timeout=oc.get("timeout"),
    )
    sc = data.get("screening", {})
    screening = ScreeningConfig(
        lam=sc.get("lambda", 0.35),
        n_select=sc.get("n_select", evolution.n_pop),
    )
    return ExperimentConfig(
        evolution=evolution,
        model=model,
        oracle=oracle,
        screening=screening,
        knn_k=sc.get("knn_k", 5),
        weighting=sc.get("weighting", "inverse_distance"),
        ablation=data.get("ablation", "full"),
        seeds=tuple(data.get("seeds", [0])),
        out_dir=data.get("out_dir"),
    )


def config_to_dict(cfg: ExperimentConfig) -> dict:
    ev = cfg.evolution
    oracle: dict = {"kind": cfg.oracle.kind, "combiner": cfg.oracle.combiner}
    if cfg.oracle.kind == "builtin":
        oracle["objectives"] = [
            {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(o).items() if v is not None}
            for o in cfg.oracle.objectives
        ]
    else:
        oracle["objectives"] = list(cfg.oracle.objectives)
        if cfg.oracle.command:
            oracle["command"] = list(cfg.oracle.command)
        if cfg.oracle.address:
            oracle["address"] = cfg.oracle.address
        if cfg.oracle.timeout is not None:
            oracle["timeout"] = cfg.oracle.timeout
    model: dict = {"kind": cfg.model.kind, "dim": cfg.model.dim, "bit_scale": cfg.model.bit_scale}
    if cfg.model.command:
        model["command"] = list(cfg.model.command)
    if cfg.model.address:
        model["address"] = cfg.model.address
    return {
        "evolution": {
            "n_pop": ev.n_pop,
            "n_elite": ev.n_elite,
            "epochs": ev.epochs,
            "budget_cap": ev.budget_cap,
            "elitism": ev.elitism,
            "cache_assessments": ev.cache_assessments,
            "plan": {"C": ev.plan.C, "sigmas": list(ev.plan.sigmas), "dedup": ev.plan.dedup},
        },
        "model": model,
        "oracle": oracle,
        "screening": {
            "lambda": cfg.screening.lam,
            "n_select": cfg.screening.n_select,
            "knn_k": cfg.knn_k,
            "weighting": cfg.weighting,
        },
        "ablation": cfg.ablation,
        "seeds": list(cfg.seeds),
        "out_dir": cfg.out_dir,
    }


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as f:
        return config_from_dict(json.load(f))


# --- canonical benchmark tasks ----------------------------------------------


def two_objective_task(dim: int = 60) -> tuple[ObjectiveSpec, ...]:
    """Bitstring pair: density plus an alternating-block motif."""
    target = ("1100" * (dim // 4 + 1))[:dim]
    return (ObjectiveSpec("onemax"), ObjectiveSpec("motif_match", target=target))


def four_objective_task(dim: int = 60) -> tuple[ObjectiveSpec, ...]:
    """The harder suite: adds a prefix objective and a deceptive trap."""
    target = ("10" * (dim // 2 + 1))[:dim]
    return (
        ObjectiveSpec("onemax"),
        ObjectiveSpec("motif_match", target=target),
        ObjectiveSpec("leading_ones"),
        ObjectiveSpec("trap_k", k=4),
    )


def desk_config(
    objectives: str = "four",
    ablation: str = "full",
    seeds: Sequence[int] = tuple(range(10)),
    out_dir: str | None = None,
    epochs: int = 20,
) -> ExperimentConfig:
    """Desk-scale defaults: a full ten-seed sweep finishes in well under a minute.

    The latent geometry (bit_scale 0.85 with a single step size of 1.0) is
    calibrated so perturbation clusters stay wide relative to the screening
    threshold, the same relationship structural fingerprints give the full
    pipeline; graded multi-scale schedules collapse the toy clusters into
    near-clones and starve the novelty constraint.
    """
    dim = 60
    task = four_objective_task(dim) if objectives == "four" else two_objective_task(dim)
    plan = PerturbationPlan(C=20, sigmas=(1.0,), dedup=False)
    return ExperimentConfig(
        evolution=EvolutionConfig(n_pop=50, n_elite=20, epochs=epochs, plan=plan),
        model=ModelConfig(kind=BITSTRING_THRESHOLD, dim=dim, bit_scale=0.85),
        oracle=OracleConfig(kind="builtin", objectives=task, combiner="mean"),
        screening=ScreeningConfig(lam=0.35, n_select=50),
        ablation=ablation,
        seeds=tuple(seeds),
        out_dir=out_dir,
    )


# --- running ------------------------------------------------------------------


def build_screener(cfg: ExperimentConfig, ablation: str | None = None):
    ablation = cfg.ablation if ablation is None else ablation
    n_select = cfg.screening.n_select
    if ablation == "none":
        return TruncationScreener(n_select)
    if ablation == "utility":
        return SurrogateScreener(
            ScreeningConfig(lam=0.0, n_select=n_select), cfg.knn_k, cfg.weighting, mode="utility"
        )
    if ablation == "uncertainty":
        return SurrogateScreener(cfg.screening, cfg.knn_k, cfg.weighting, mode="uncertainty")
    return SurrogateScreener(cfg.screening, cfg.knn_k, cfg.weighting, mode="full")


@dataclass(frozen=True)
class SeedSummary:
    seed: int
    budget_spent: int
    top20: float
    top50: float
    top100: float
    archive_diversity: float


@dataclass
class RunReport:
    ablation: str
    rows: list[IterationRow]
    per_seed: list[SeedSummary]

    def mean_final(self, field: str) -> float:
        vals = [getattr(s, field) for s in self.per_seed]
        return sum(vals) / len(vals)


def run_single_seed(cfg: ExperimentConfig, seed: int) -> EvolutionResult:
    """One engine run under cfg with the given seed; builds and tears down clients."""
    validate_config(cfg)
    model, model_client = cfg.model.build()
    endpoint, oracle_client = cfg.oracle.build()
    try:
        evo = replace(cfg.evolution, seed=seed)
        return run_evolution(evo, model, endpoint, build_screener(cfg))
    finally:
        for client in (oracle_client, model_client):
            if client is not None:
                client.close()


def summarize(seed: int, result: EvolutionResult) -> SeedSummary:
    tops = top_k_means(result.archive, (20, 50, 100))
    distinct = _distinct_records(result.archive)
    div = diversity(distinct) if len(distinct) >= 2 else 0.0
    return SeedSummary(seed, result.unique_assessments, tops[20], tops[50], tops[100], div)


def _distinct_records(archive: Sequence[AssessedRecord]) -> list[AssessedRecord]:
    seen: dict[str, AssessedRecord] = {}
    for r in archive:
        seen.setdefault(r.candidate.canonical_key, r)
    return list(seen.values())


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Run every seed under the configured ablation, writing files when out_dir is set."""
    validate_config(cfg)
    out = Path(cfg.out_dir) if cfg.out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "config.json", config_to_dict(cfg))
    rows: list[IterationRow] = []
    per_seed: list[SeedSummary] = []
    for seed in cfg.seeds:
        result = run_single_seed(cfg, seed)
        rows.extend(result.trace)
        per_seed.append(summarize(seed, result))
        if out:
            seed_dir = out / f"seed_{seed}"
            seed_dir.mkdir(parents=True, exist_ok=True)
            write_trace_csv(seed_dir / "trace.csv", result.trace)
            write_archive_jsonl(seed_dir / "archive.jsonl", result.archive)
    report = RunReport(cfg.ablation, rows, per_seed)
    if out:
        write_trace_csv(out / "summary.csv", rows)
        write_json(out / "report.json", report_to_dict(report))
    return report


def run_random_baseline(
    oracle: OracleEndpoint,
    budget: int,
    model: GenerativeModelSpec,
    seed: int,
    ledger: BudgetLedger | None = None,
) -> list[AssessedRecord]:
    """Assess ``budget`` prior samples in one generation; comparable at equal spend."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if ledger is None:
        ledger = BudgetLedger(cap=budget)
    latents = sample_prior(model, budget, seed)
    candidates = [decode(model, latents[i]) for i in range(budget)]
    return assess(oracle, candidates, ledger, iteration=1)


def run_ablation_sweep(cfg: ExperimentConfig, ablations: Sequence[str] = ABLATIONS) -> dict[str, RunReport]:
    """Run every ablation over the config's seeds; budget spend is identical across them."""
    reports = {}
    base_out = Path(cfg.out_dir) if cfg.out_dir else None
    for ablation in ablations:
        sub = replace(
            cfg, ablation=ablation, out_dir=str(base_out / ablation) if base_out else None
        )
        reports[ablation] = run_experiment(sub)
    if base_out:
        write_sweep_csv(base_out / "sweep_summary.csv", reports)
    return reports


# --- file formats -------------------------------------------------------------


def write_trace_csv(path: str | Path, rows: Sequence[IterationRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    r.seed,
                    r.iteration,
                    r.budget_spent,
                    repr(r.top20),
                    repr(r.top50),
                    repr(r.top100),
                    repr(r.diversity),
                    repr(r.mean_threshold),
                    r.fallback_count,
                ]
            )


def record_to_dict(r: AssessedRecord) -> dict:
    payload = list(r.candidate.payload) if r.candidate.kind == REAL_VECTOR else r.candidate.payload
    return {
        "kind": r.candidate.kind,
        "payload": payload,
        "canonical_key": r.candidate.canonical_key,
        "fingerprint": [float(x) for x in r.fingerprint],
        "scores": list(r.scores),
        "fitness": r.fitness,
        "iteration": r.iteration,
        "call_id": r.call_id,
    }


def record_from_dict(d: dict) -> AssessedRecord:
    kind = d["kind"]
    if kind == BITSTRING:
        cand = Candidate.from_bits(d["payload"])
    elif kind == REAL_VECTOR:
        cand = Candidate.from_vector(d["payload"])
    elif kind == TOKEN:
        cand = Candidate.from_token(d["payload"])
    else:
        raise ValueError(f"unknown candidate kind in archive: {kind!r}")
    return AssessedRecord(
        candidate=cand,
        fingerprint=np.asarray(d["fingerprint"], dtype=np.float64),
        scores=tuple(d["scores"]),
        fitness=d["fitness"],
        iteration=d["iteration"],
        call_id=d["call_id"],
    )


def write_archive_jsonl(path: str | Path, archive: Sequence[AssessedRecord]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in archive:
            f.write(json.dumps(record_to_dict(r), separators=(",", ":")) + "\n")


def read_archive_jsonl(path: str | Path) -> list[AssessedRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(record_from_dict(json.loads(line)))
    return records


def write_json(path: str | Path, data: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def report_to_dict(report: RunReport) -> dict:
    return {
        "ablation": report.ablation,
        "per_seed": [asdict(s) for s in report.per_seed],
        "mean_top20": report.mean_final("top20"),
        "mean_top50": report.mean_final("top50"),
        "mean_top100": report.mean_final("top100"),
        "mean_archive_diversity": report.mean_final("archive_diversity"),
    }


def write_sweep_csv(path: str | Path, reports: dict[str, RunReport]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["ablation", "seed", "budget_spent", "top20", "top50", "top100", "archive_diversity"])
        for ablation, report in reports.items():
            for s in report.per_seed:
                writer.writerow(
                    [
                        ablation,
                        s.seed,
                        s.budget_spent,
                        repr(s.top20),
                        repr(s.top50),
                        repr(s.top100),
                        repr(s.archive_diversity),
                    ]
                )
