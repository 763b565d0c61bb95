"""Dataset generation, labeling, splitting and JSON-lines persistence.

A sample is a 4xT matrix of per-subcarrier statistics, rows ordered
(mu1, mu2, eta1, eta2). Labels are the grid-search allocations. Files are
JSON lines: one header object holding the system configuration and the
generation metadata, then one object per record. Floats are serialized
with shortest round-trip precision, so save -> load is bit-exact;
``load_dataset`` re-validates every documented invariant and refuses
files that fail any of them.
"""

from __future__ import annotations

import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgumentError, InvariantViolationError, SchemaError
from .gridsearch import (
    OracleResult,
    PowerAllocation,
    SubcarrierPower,
    SystemConfig,
    _block_outage,
    feasibility_check,
    solve,
)
from .outage import SubcarrierStats

DATASET_FORMAT = "relay-dataset-v1"

_OUTAGE_RECHECK_TOL = 1e-12


@dataclass(frozen=True)
class GenerationSpec:
    """How a dataset's samples were produced."""

    sampler: str  # "uniform" or "grid"
    range_lo: float
    range_hi: float
    count: int
    seed: int | None
    delta: float
    rejected: int = 0
    grid_levels: int | None = None
    split_role: str | None = None
    split_seed: int | None = None


@dataclass(frozen=True)
class DatasetRecord:
    sample: np.ndarray  # (4, T), read-only by convention
    label: PowerAllocation
    total_power: float
    achieved_outage: float
    evaluations: int


@dataclass(frozen=True)
class Dataset:
    config: SystemConfig
    gen: GenerationSpec
    records: tuple[DatasetRecord, ...]

    def __len__(self) -> int:
        return len(self.records)


def stats_from_sample(v: np.ndarray) -> list[SubcarrierStats]:
    """Column i of the 4xT matrix -> that subcarrier's statistics."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != 4:
        raise InvalidArgumentError(f"expected a 4xT matrix, got shape {arr.shape}")
    return [
        SubcarrierStats(mu1=arr[0, i], mu2=arr[1, i], eta1=arr[2, i], eta2=arr[3, i])
        for i in range(arr.shape[1])
    ]


def _check_range(range_lo: float, range_hi: float) -> None:
    if not (np.isfinite(range_lo) and np.isfinite(range_hi) and 0 < range_lo < range_hi):
        raise InvalidArgumentError(
            f"need 0 < range_lo < range_hi, got {range_lo!r}, {range_hi!r}"
        )


def generate_samples(count: int, range_lo: float, range_hi: float, t: int, seed: int) -> np.ndarray:
    """(count, 4, t) i.i.d. uniform draws over [range_lo, range_hi]."""
    _check_range(range_lo, range_hi)
    if count < 1:
        raise InvalidArgumentError(f"count must be >= 1, got {count}")
    if t < 1:
        raise InvalidArgumentError(f"t must be >= 1, got {t}")
    rng = np.random.default_rng(seed)
    return rng.uniform(range_lo, range_hi, size=(count, 4, t))


def generate_grid_samples(levels: int, range_lo: float, range_hi: float, t: int) -> np.ndarray:
    """Full lattice with ``levels`` values per entry: (levels^(4t), 4, t)."""
    _check_range(range_lo, range_hi)
    if levels < 2:
        raise InvalidArgumentError(f"levels must be >= 2, got {levels}")
    axis = np.linspace(range_lo, range_hi, levels)
    combos = itertools.product(axis, repeat=4 * t)
    flat = np.array(list(combos))
    return flat.reshape(-1, 4, t)


def draw_feasible_samples(
    count: int,
    range_lo: float,
    range_hi: float,
    config: SystemConfig,
    seed: int,
) -> tuple[np.ndarray, int]:
    """Uniform draws filtered by feasibility at the caps; redraws until
    ``count`` feasible samples exist. Returns (samples, rejected_count)."""
    _check_range(range_lo, range_hi)
    if count < 1:
        raise InvalidArgumentError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    kept: list[np.ndarray] = []
    rejected = 0
    while len(kept) < count:
        v = rng.uniform(range_lo, range_hi, size=(4, config.t))
        if feasibility_check(stats_from_sample(v), config).feasible:
            kept.append(v)
        else:
            rejected += 1
    return np.stack(kept), rejected


def _label_one(args) -> OracleResult:
    sample, config, delta, solver_kwargs = args
    return solve(stats_from_sample(sample), config, delta, **solver_kwargs)


def label_dataset(
    samples: np.ndarray,
    config: SystemConfig,
    delta: float,
    *,
    gen: GenerationSpec | None = None,
    workers: int = 1,
    solver_kwargs: dict | None = None,
    progress=None,
) -> Dataset:
    """Attach grid-search labels to every sample (all must be feasible).

    ``workers > 1`` labels in a process pool; records keep input order
    either way and each record is a pure function of its sample, so the
    parallel result is identical to the sequential one.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 3 or samples.shape[1] != 4 or samples.shape[2] != config.t:
        raise InvalidArgumentError(
            f"expected samples shaped (count, 4, {config.t}), got {samples.shape}"
        )
    solver_kwargs = dict(solver_kwargs or {})
    jobs = [(v, config, delta, solver_kwargs) for v in samples]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_label_one, jobs, chunksize=16))
    else:
        results = []
        for i, job in enumerate(jobs):
            results.append(_label_one(job))
            if progress is not None:
                progress(i + 1, len(jobs))
    records = tuple(
        DatasetRecord(
            sample=v,
            label=res.allocation,
            total_power=res.total_power,
            achieved_outage=res.achieved_outage,
            evaluations=res.evaluations,
        )
        for v, res in zip(samples, results)
    )
    if gen is None:
        gen = GenerationSpec(
            sampler="uniform",
            range_lo=float(samples.min()),
            range_hi=float(samples.max()),
            count=len(records),
            seed=None,
            delta=delta,
        )
    else:
        gen = replace(gen, count=len(records), delta=delta)
    return Dataset(config=config, gen=gen, records=records)


def build_dataset(
    config: SystemConfig,
    count: int,
    range_lo: float,
    range_hi: float,
    seed: int,
    delta: float,
    *,
    sampler: str = "uniform",
    grid_levels: int | None = None,
    workers: int = 1,
    solver_kwargs: dict | None = None,
    progress=None,
) -> Dataset:
    """Draw feasible samples and label them; the gen-data orchestration."""
    if sampler == "uniform":
        samples, rejected = draw_feasible_samples(count, range_lo, range_hi, config, seed)
        gen = GenerationSpec(
            sampler="uniform",
            range_lo=range_lo,
            range_hi=range_hi,
            count=len(samples),
            seed=seed,
            delta=delta,
            rejected=rejected,
        )
    elif sampler == "grid":
        if grid_levels is None:
            raise InvalidArgumentError("grid sampler needs grid_levels")
        lattice = generate_grid_samples(grid_levels, range_lo, range_hi, config.t)
        keep = [
            v for v in lattice if feasibility_check(stats_from_sample(v), config).feasible
        ]
        rejected = len(lattice) - len(keep)
        samples = np.stack(keep)
        gen = GenerationSpec(
            sampler="grid",
            range_lo=range_lo,
            range_hi=range_hi,
            count=len(samples),
            seed=None,
            delta=delta,
            rejected=rejected,
            grid_levels=grid_levels,
        )
    else:
        raise InvalidArgumentError(f"unknown sampler {sampler!r}")
    return label_dataset(
        samples,
        config,
        delta,
        gen=gen,
        workers=workers,
        solver_kwargs=solver_kwargs,
        progress=progress,
    )


def split(dataset: Dataset, validation_count: int, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle into disjoint (train, validation); union is the input."""
    n = len(dataset)
    if not (0 < validation_count < n):
        raise InvalidArgumentError(
            f"validation_count must be in (0, {n}), got {validation_count}"
        )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    val_idx = sorted(perm[:validation_count].tolist())
    train_idx = sorted(perm[validation_count:].tolist())
    train = Dataset(
        config=dataset.config,
        gen=replace(dataset.gen, count=len(train_idx), split_role="train", split_seed=seed),
        records=tuple(dataset.records[i] for i in train_idx),
    )
    val = Dataset(
        config=dataset.config,
        gen=replace(dataset.gen, count=len(val_idx), split_role="validation", split_seed=seed),
        records=tuple(dataset.records[i] for i in val_idx),
    )
    return train, val


def _config_doc(config: SystemConfig) -> dict:
    return {
        "n": config.n,
        "t": config.t,
        "m": config.m,
        "s": config.s,
        "psi_th": config.psi_th,
        "pt_max": config.pt_max,
        "pr_max": config.pr_max,
        "outage_mode": config.outage_mode,
    }


def _gen_doc(gen: GenerationSpec) -> dict:
    doc = {
        "sampler": gen.sampler,
        "range_lo": gen.range_lo,
        "range_hi": gen.range_hi,
        "count": gen.count,
        "seed": gen.seed,
        "delta": gen.delta,
        "rejected": gen.rejected,
    }
    if gen.grid_levels is not None:
        doc["grid_levels"] = gen.grid_levels
    if gen.split_role is not None:
        doc["split_role"] = gen.split_role
        doc["split_seed"] = gen.split_seed
    return doc


def save_dataset(dataset: Dataset, path: str) -> None:
    """Header line then one JSON object per record; atomic replace."""
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        header = {
            "format": DATASET_FORMAT,
            "config": _config_doc(dataset.config),
            "generation": _gen_doc(dataset.gen),
        }
        fh.write(json.dumps(header) + "\n")
        for rec in dataset.records:
            doc = {
                "v": [[float(x) for x in row] for row in rec.sample],
                "pt": [float(x) for x in rec.label.pt],
                "pr": [float(x) for x in rec.label.pr],
                "total_power": rec.total_power,
                "achieved_outage": rec.achieved_outage,
                "evaluations": rec.evaluations,
            }
            fh.write(json.dumps(doc) + "\n")
    os.replace(tmp, path)


def load_dataset(path: str) -> Dataset:
    """Parse and re-validate; raises SchemaError / InvariantViolationError."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SchemaError(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict) or header.get("format") != DATASET_FORMAT:
        raise SchemaError(
            f"{path}: expected format {DATASET_FORMAT!r}, got {header.get('format')!r}"
        )
    try:
        config = SystemConfig(**header["config"])
        gen = GenerationSpec(**header["generation"])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: malformed header: {exc}") from exc

    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != gen.count:
        raise InvariantViolationError(
            f"{path}: header says {gen.count} records, file has {len(body)}"
        )
    records = []
    for lineno, ln in enumerate(body, start=2):
        try:
            doc = json.loads(ln)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
        try:
            sample = np.asarray(doc["v"], dtype=float)
            label = PowerAllocation(pt=tuple(doc["pt"]), pr=tuple(doc["pr"]))
            rec = DatasetRecord(
                sample=sample,
                label=label,
                total_power=float(doc["total_power"]),
                achieved_outage=float(doc["achieved_outage"]),
                evaluations=int(doc["evaluations"]),
            )
        except (KeyError, TypeError, InvalidArgumentError) as exc:
            raise SchemaError(f"{path}:{lineno}: malformed record: {exc}") from exc
        _validate_record(rec, config, gen, path, lineno)
        records.append(rec)
    return Dataset(config=config, gen=gen, records=tuple(records))


def _validate_record(
    rec: DatasetRecord, config: SystemConfig, gen: GenerationSpec, path: str, lineno: int
) -> None:
    expect_cols = config.t if config.outage_mode == "single-sap" else config.n
    if rec.sample.shape != (4, expect_cols):
        raise InvariantViolationError(
            f"{path}:{lineno}: sample shape {rec.sample.shape} != (4, {expect_cols})"
        )
    if (rec.sample < gen.range_lo).any() or (rec.sample > gen.range_hi).any():
        raise InvariantViolationError(
            f"{path}:{lineno}: sample entries escape [{gen.range_lo}, {gen.range_hi}]"
        )
    if len(rec.label.pt) != expect_cols:
        raise InvariantViolationError(
            f"{path}:{lineno}: label length {len(rec.label.pt)} != {expect_cols}"
        )
    if (np.asarray(rec.label.pt) > config.pt_max).any() or (
        np.asarray(rec.label.pr) > config.pr_max
    ).any():
        raise InvariantViolationError(f"{path}:{lineno}: label exceeds the power caps")
    powers = [SubcarrierPower(pt=a, pr=b) for a, b in zip(rec.label.pt, rec.label.pr)]
    outage = _block_outage(stats_from_sample(rec.sample), powers, config)
    if abs(outage - rec.achieved_outage) > _OUTAGE_RECHECK_TOL:
        raise InvariantViolationError(
            f"{path}:{lineno}: stored achieved_outage {rec.achieved_outage} "
            f"disagrees with recomputation {outage}"
        )
    if outage > config.psi_th:
        raise InvariantViolationError(
            f"{path}:{lineno}: label violates the outage cap "
            f"({outage} > {config.psi_th})"
        )
    total = rec.label.total_power
    if abs(total - rec.total_power) > 1e-9 * max(1.0, abs(total)):
        raise InvariantViolationError(
            f"{path}:{lineno}: stored total_power {rec.total_power} "
            f"disagrees with the label sum {total}"
        )
