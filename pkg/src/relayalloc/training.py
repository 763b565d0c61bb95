"""Training loop, accuracy metrics, oracle comparison and parameter sweeps.

The quality metric is the mean per-entry relative error between decoded
predictions and oracle labels, both in original power units:

    E = (1/L) sum_l (1/(2T)) sum_j |label_lj - pred_lj| / label_lj

Records containing an exact-zero label entry are excluded from E with a
counted warning (division); they only arise at psi_th = 1 where the
all-zero allocation is optimal.
"""

from __future__ import annotations

import csv
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, stats_from_sample
from .errors import InvalidArgumentError, NonFiniteLossError
from .gridsearch import (
    PowerAllocation,
    SubcarrierPower,
    SystemConfig,
    _block_outage,
    solve,
)
from .mlp import (
    Batch,
    MlpParams,
    NormalizationSpec,
    adam_step,
    decode_output,
    encode_input,
    encode_target,
    forward,
    gradients,
    init_adam,
    init_mlp,
    mse_loss,
)

HISTORY_CSV_HEADER = ("epoch", "loss", "rel_error")
COMPARISON_CSV_HEADER = ("sample_id", "ann_total", "oracle_total", "gap")


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 10_000
    batch_size: int = 32
    step_size: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    shuffle_seed: int = 99
    snapshot_every: int = 100

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.snapshot_every < 1:
            raise InvalidArgumentError(
                "epochs, batch_size and snapshot_every must all be >= 1"
            )
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidArgumentError("beta1 and beta2 must lie in [0, 1)")
        if self.step_size <= 0 or self.epsilon <= 0:
            raise InvalidArgumentError("step_size and epsilon must be > 0")


@dataclass(frozen=True)
class HistoryPoint:
    epoch: int
    loss: float
    rel_error: float  # NaN when trained without a validation set
    elapsed_sec: float


@dataclass
class TrainingHistory:
    points: list[HistoryPoint] = field(default_factory=list)

    def epochs(self) -> list[int]:
        return [p.epoch for p in self.points]

    def rel_errors(self) -> list[float]:
        return [p.rel_error for p in self.points]

    def losses(self) -> list[float]:
        return [p.loss for p in self.points]


@dataclass(frozen=True)
class ComparisonRow:
    sample_id: int
    ann_total: float
    oracle_total: float
    gap: float
    ann_outage: float
    violated: bool
    repaired: bool = False


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[ComparisonRow, ...]
    mean_gap: float
    violation_rate: float
    repair: str | None = None


def normalization_for(dataset: Dataset) -> NormalizationSpec:
    return NormalizationSpec(
        range_hi=dataset.gen.range_hi,
        pt_max=dataset.config.pt_max,
        pr_max=dataset.config.pr_max,
    )


def dataset_arrays(dataset: Dataset, norm: NormalizationSpec | None = None):
    """Encoded (inputs, targets) matrices for a whole dataset."""
    norm = norm or normalization_for(dataset)
    x = np.stack([encode_input(rec.sample, norm.range_hi) for rec in dataset.records])
    y = np.stack(
        [encode_target(rec.label, norm.pt_max, norm.pr_max) for rec in dataset.records]
    )
    return x, y


def train(
    params: MlpParams,
    dataset: Dataset,
    config: TrainingConfig,
    validation: Dataset | None = None,
) -> tuple[MlpParams, TrainingHistory]:
    """Mini-batch Adam training with periodic snapshots.

    Each epoch reshuffles with a generator seeded once from
    config.shuffle_seed, then walks consecutive batches (final short batch
    kept). Snapshots record full-training-set loss, validation relative
    error (NaN if no validation set) and wall-clock seconds.
    """
    norm = normalization_for(dataset)
    x, y = dataset_arrays(dataset, norm)
    if x.shape[1] != params.n_in or y.shape[1] != params.n_out:
        raise InvalidArgumentError(
            f"network ({params.n_in} -> {params.n_out}) does not fit data "
            f"({x.shape[1]} -> {y.shape[1]})"
        )
    state = init_adam(
        params,
        step_size=config.step_size,
        beta1=config.beta1,
        beta2=config.beta2,
        epsilon=config.epsilon,
    )
    shuffle_rng = np.random.default_rng(config.shuffle_seed)
    history = TrainingHistory()
    n = x.shape[0]
    start = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        perm = shuffle_rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            idx = perm[lo : lo + config.batch_size]
            grads = gradients(params, Batch(inputs=x[idx], targets=y[idx]))
            if not np.isfinite(grads.loss):
                raise NonFiniteLossError(
                    f"non-finite loss {grads.loss!r} at epoch {epoch}, "
                    f"batch {lo // config.batch_size}",
                    epoch=epoch,
                    batch_index=lo // config.batch_size,
                    loss=grads.loss,
                )
            state, params = adam_step(state, params, grads)
        if epoch % config.snapshot_every == 0 or epoch == config.epochs:
            loss = mse_loss(params, Batch(inputs=x, targets=y))
            rel = relative_error(params, validation) if validation is not None else float("nan")
            history.points.append(
                HistoryPoint(
                    epoch=epoch,
                    loss=loss,
                    rel_error=rel,
                    elapsed_sec=time.perf_counter() - start,
                )
            )
    return params, history


def relative_error(params: MlpParams, validation: Dataset) -> float:
    """Mean per-entry relative error in original power units."""
    norm = normalization_for(validation)
    errors = []
    skipped = 0
    for rec in validation.records:
        label_vec = np.array([*rec.label.pt, *rec.label.pr])
        if (label_vec == 0.0).any():
            skipped += 1
            continue
        raw = forward(params, encode_input(rec.sample, norm.range_hi))
        pred = decode_output(raw, norm.pt_max, norm.pr_max)
        pred_vec = np.array([*pred.pt, *pred.pr])
        errors.append(np.mean(np.abs(label_vec - pred_vec) / label_vec))
    if skipped:
        warnings.warn(
            f"relative_error: excluded {skipped} record(s) with zero label entries",
            RuntimeWarning,
            stacklevel=2,
        )
    if not errors:
        raise InvalidArgumentError("no validation records with nonzero labels")
    return float(np.mean(errors))


def _relative_gap(ann_total: float, oracle_total: float) -> float:
    if oracle_total == 0.0:
        return 0.0 if ann_total == 0.0 else float("inf")
    return (ann_total - oracle_total) / oracle_total


def _scale_up_repair(
    alloc: PowerAllocation, stats, config: SystemConfig
) -> PowerAllocation:
    """Smallest common factor >= 1 restoring feasibility, capped at the box."""
    def scaled(c: float) -> PowerAllocation:
        return PowerAllocation(
            pt=tuple(min(p * c, config.pt_max) for p in alloc.pt),
            pr=tuple(min(p * c, config.pr_max) for p in alloc.pr),
        )

    def outage_of(a: PowerAllocation) -> float:
        powers = [SubcarrierPower(pt=p, pr=r) for p, r in zip(a.pt, a.pr)]
        return _block_outage(stats, powers, config)

    positive = [p for p in (*alloc.pt, *alloc.pr) if p > 0]
    if not positive:
        return alloc
    c_hi = max(config.pt_max, config.pr_max) / min(positive)
    if outage_of(scaled(c_hi)) > config.psi_th:
        return alloc  # not repairable inside the box
    lo, hi = 1.0, c_hi
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if outage_of(scaled(mid)) <= config.psi_th:
            hi = mid
        else:
            lo = mid
    return scaled(hi)


def compare_total_power(
    params: MlpParams,
    samples: np.ndarray,
    config: SystemConfig,
    delta: float,
    *,
    norm: NormalizationSpec | None = None,
    repair: str | None = None,
    solver_kwargs: dict | None = None,
) -> ComparisonReport:
    """Network allocation vs fresh grid-search optimum per sample.

    gap = (ann_total - oracle_total) / oracle_total. ``repair='scale-up'``
    (not part of the reference pipeline; flagged in the report) scales
    infeasible network allocations up to the feasibility boundary first.
    """
    if repair not in (None, "scale-up"):
        raise InvalidArgumentError(f"unknown repair mode {repair!r}")
    samples = np.asarray(samples, dtype=float)
    if norm is None:
        norm = NormalizationSpec(
            range_hi=5.0, pt_max=config.pt_max, pr_max=config.pr_max
        )
    rows = []
    for i, v in enumerate(samples):
        stats = stats_from_sample(v)
        raw = forward(params, encode_input(v, norm.range_hi))
        alloc = decode_output(raw, norm.pt_max, norm.pr_max)
        repaired = False
        outage = _block_outage(
            stats,
            [SubcarrierPower(pt=p, pr=r) for p, r in zip(alloc.pt, alloc.pr)],
            config,
        )
        if repair == "scale-up" and outage > config.psi_th:
            fixed = _scale_up_repair(alloc, stats, config)
            if fixed is not alloc:
                repaired = True
                alloc = fixed
                outage = _block_outage(
                    stats,
                    [SubcarrierPower(pt=p, pr=r) for p, r in zip(alloc.pt, alloc.pr)],
                    config,
                )
        oracle = solve(stats, config, delta, **(solver_kwargs or {}))
        ann_total = alloc.total_power
        rows.append(
            ComparisonRow(
                sample_id=i,
                ann_total=ann_total,
                oracle_total=oracle.total_power,
                gap=_relative_gap(ann_total, oracle.total_power),
                ann_outage=outage,
                violated=outage > config.psi_th,
                repaired=repaired,
            )
        )
    return ComparisonReport(
        rows=tuple(rows),
        mean_gap=float(np.mean([r.gap for r in rows])),
        violation_rate=float(np.mean([r.violated for r in rows])),
        repair=repair,
    )


def compare_against_labels(
    params: MlpParams,
    dataset: Dataset,
    *,
    repair: str | None = None,
) -> ComparisonReport:
    """Like compare_total_power, but the dataset's labels are the oracle.

    The labels were produced by the same deterministic search, so this is
    equivalent to re-solving each sample and much cheaper.
    """
    if repair not in (None, "scale-up"):
        raise InvalidArgumentError(f"unknown repair mode {repair!r}")
    norm = normalization_for(dataset)
    config = dataset.config
    rows = []
    for i, rec in enumerate(dataset.records):
        stats = stats_from_sample(rec.sample)
        raw = forward(params, encode_input(rec.sample, norm.range_hi))
        alloc = decode_output(raw, norm.pt_max, norm.pr_max)
        repaired = False
        outage = _block_outage(
            stats,
            [SubcarrierPower(pt=p, pr=r) for p, r in zip(alloc.pt, alloc.pr)],
            config,
        )
        if repair == "scale-up" and outage > config.psi_th:
            fixed = _scale_up_repair(alloc, stats, config)
            if fixed is not alloc:
                repaired = True
                alloc = fixed
                outage = _block_outage(
                    stats,
                    [SubcarrierPower(pt=p, pr=r) for p, r in zip(alloc.pt, alloc.pr)],
                    config,
                )
        oracle_total = rec.total_power
        ann_total = alloc.total_power
        rows.append(
            ComparisonRow(
                sample_id=i,
                ann_total=ann_total,
                oracle_total=oracle_total,
                gap=_relative_gap(ann_total, oracle_total),
                ann_outage=outage,
                violated=outage > config.psi_th,
                repaired=repaired,
            )
        )
    return ComparisonReport(
        rows=tuple(rows),
        mean_gap=float(np.mean([r.gap for r in rows])),
        violation_rate=float(np.mean([r.violated for r in rows])),
        repair=repair,
    )


@dataclass(frozen=True)
class SweepSpec:
    """One experiment axis: which knob varies and the fixed context."""

    experiment: str  # "neurons" | "layers" | "outage-threshold"
    grid: tuple
    repeats: int = 10
    base_seed: int = 0
    hidden_layers: int = 2
    neurons: int = 64
    train_count: int = 1000
    validation_count: int = 200
    range_lo: float = 0.5
    range_hi: float = 5.0
    delta: float = 1e-2

    def __post_init__(self):
        if self.experiment not in ("neurons", "layers", "outage-threshold"):
            raise InvalidArgumentError(f"unknown experiment {self.experiment!r}")
        if not self.grid:
            raise InvalidArgumentError("sweep grid is empty")
        if self.repeats < 1:
            raise InvalidArgumentError("repeats must be >= 1")


@dataclass(frozen=True)
class SweepRun:
    experiment: str
    value: float
    repeat: int
    seeds: dict
    history: TrainingHistory
    final_rel_error: float


def _derived_seed(base_seed: int, *key: int) -> int:
    return int(np.random.SeedSequence([base_seed, *key]).generate_state(1)[0])


def sweep(
    spec: SweepSpec,
    system: SystemConfig,
    training: TrainingConfig,
    *,
    workers: int = 1,
    progress=None,
) -> list[SweepRun]:
    """Train once per (grid value, repeat); every seed derives from base_seed.

    Each repeat draws a fresh dataset (new channel realizations) and a
    fresh initialization; datasets are regenerated per grid value for the
    outage-threshold experiment because labels depend on psi_th.
    """
    from .data import build_dataset, split as split_dataset  # local: avoid cycle at import

    runs = []
    for vi, value in enumerate(spec.grid):
        if spec.experiment == "neurons":
            hidden = [int(value)] * spec.hidden_layers
            config = system
        elif spec.experiment == "layers":
            hidden = [spec.neurons] * int(value)
            config = system
        else:
            hidden = [spec.neurons] * spec.hidden_layers
            config = SystemConfig(
                n=system.n,
                t=system.t,
                m=system.m,
                s=system.s,
                psi_th=float(value),
                pt_max=system.pt_max,
                pr_max=system.pr_max,
                outage_mode=system.outage_mode,
            )
        dims = [4 * config.t, *hidden, 2 * config.t]
        for rep in range(spec.repeats):
            seeds = {
                "data": _derived_seed(spec.base_seed, vi, rep, 0),
                "split": _derived_seed(spec.base_seed, vi, rep, 1),
                "init": _derived_seed(spec.base_seed, vi, rep, 2),
                "shuffle": _derived_seed(spec.base_seed, vi, rep, 3),
            }
            dataset = build_dataset(
                config,
                spec.train_count + spec.validation_count,
                spec.range_lo,
                spec.range_hi,
                seeds["data"],
                spec.delta,
                workers=workers,
            )
            train_set, val_set = split_dataset(dataset, spec.validation_count, seeds["split"])
            params = init_mlp(dims, seeds["init"])
            run_training = TrainingConfig(
                epochs=training.epochs,
                batch_size=training.batch_size,
                step_size=training.step_size,
                beta1=training.beta1,
                beta2=training.beta2,
                epsilon=training.epsilon,
                shuffle_seed=seeds["shuffle"],
                snapshot_every=training.snapshot_every,
            )
            params, history = train(params, train_set, run_training, validation=val_set)
            runs.append(
                SweepRun(
                    experiment=spec.experiment,
                    value=float(value),
                    repeat=rep,
                    seeds=seeds,
                    history=history,
                    final_rel_error=history.points[-1].rel_error,
                )
            )
            if progress is not None:
                progress(len(runs), len(spec.grid) * spec.repeats)
    return runs


def average_histories(histories: list[TrainingHistory]) -> TrainingHistory:
    """Pointwise mean of runs snapshotted on the same epoch grid."""
    if not histories:
        raise InvalidArgumentError("no histories to average")
    epoch_grids = [h.epochs() for h in histories]
    if any(g != epoch_grids[0] for g in epoch_grids[1:]):
        raise InvalidArgumentError("histories disagree on snapshot epochs")
    points = []
    for i, epoch in enumerate(epoch_grids[0]):
        points.append(
            HistoryPoint(
                epoch=epoch,
                loss=float(np.mean([h.points[i].loss for h in histories])),
                rel_error=float(np.mean([h.points[i].rel_error for h in histories])),
                elapsed_sec=float(np.mean([h.points[i].elapsed_sec for h in histories])),
            )
        )
    return TrainingHistory(points=points)


def write_history_csv(history: TrainingHistory, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_CSV_HEADER)
        for p in history.points:
            writer.writerow([p.epoch, repr(p.loss), repr(p.rel_error)])


def write_comparison_csv(report: ComparisonReport, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COMPARISON_CSV_HEADER)
        for r in report.rows:
            writer.writerow(
                [r.sample_id, repr(r.ann_total), repr(r.oracle_total), repr(r.gap)]
            )
