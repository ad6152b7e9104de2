"""Three-stage motion-consistency filter driven by one-dimensional voting.

Stage 1 votes motion directions into a cyclic accumulator and keeps the bins
around the dominant peak.  Stage 2 re-indexes the survivors, votes the
direction-changes between each motion and its k nearest neighbors (by start
point) into a short non-cyclic accumulator, and keeps motions whose median
direction-change lands near that peak.  Stage 3 drops motions whose length is
a z-score outlier.  Stages are strictly sequential: each consumes the
survivors of the previous one.

Degenerate (near-zero-length) motions carry no directional evidence; they
bypass both voting stages as provisional inliers and are only subjected to
the length test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .motion import Motion

_EPS = 1e-9


@dataclass(frozen=True)
class HmccConfig:
    """Tuning knobs for the three filter stages (angles in degrees)."""

    dir_bin_width: float = 10.0
    dir_peak_radius: int = 5
    dir_peak_fraction: float = 0.20
    dc_range: float = 30.0
    dc_bin_width: float = 3.0
    dc_peak_radius: int = 3
    dc_peak_fraction: float = 0.40
    k_neighbors: int = 7
    zscore_threshold: float = 3.0

    def __post_init__(self):
        positive = {
            "dir_bin_width": self.dir_bin_width,
            "dir_peak_radius": self.dir_peak_radius,
            "dir_peak_fraction": self.dir_peak_fraction,
            "dc_range": self.dc_range,
            "dc_bin_width": self.dc_bin_width,
            "dc_peak_radius": self.dc_peak_radius,
            "dc_peak_fraction": self.dc_peak_fraction,
            "k_neighbors": self.k_neighbors,
            "zscore_threshold": self.zscore_threshold,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if abs(360.0 / self.dir_bin_width - round(360.0 / self.dir_bin_width)) > _EPS:
            raise ValueError(f"dir_bin_width {self.dir_bin_width} must divide 360")
        if abs(self.dc_range / self.dc_bin_width - round(self.dc_range / self.dc_bin_width)) > _EPS:
            raise ValueError(f"dc_bin_width {self.dc_bin_width} must divide dc_range {self.dc_range}")


@dataclass(frozen=True)
class AccumulatorArray:
    """1D vote histogram over [lo, hi) with equal-width bins."""

    bin_width: float
    lo: float
    hi: float
    counts: np.ndarray
    cyclic: bool

    def __post_init__(self):
        span = self.hi - self.lo
        n = span / self.bin_width
        if abs(n - round(n)) > _EPS or round(n) < 1:
            raise ValueError(
                f"bin_width {self.bin_width} does not evenly divide range [{self.lo}, {self.hi})"
            )
        counts = np.asarray(self.counts, dtype=int)
        if counts.shape != (round(n),):
            raise ValueError(f"counts must have {round(n)} bins, got shape {counts.shape}")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def n_bins(self) -> int:
        return len(self.counts)

    def bin_edges(self) -> np.ndarray:
        return self.lo + self.bin_width * np.arange(self.n_bins + 1)


@dataclass(frozen=True)
class StageOutcome:
    """Per-stage verdict over the stage's input motion ids.

    ``survivors`` passed the stage's test, ``rejected`` failed it, and
    ``passthrough`` ids skipped the test (degenerate motions, or populations
    too small to test) but continue down the pipeline.  The three lists
    partition the stage input; ``continuing`` is the next stage's input.
    """

    name: str
    survivors: tuple[int, ...]
    rejected: tuple[int, ...]
    passthrough: tuple[int, ...] = ()
    accumulator: AccumulatorArray | None = None
    peak_bin: int | None = None
    selected_bins: tuple[int, ...] | None = None
    flags: tuple[str, ...] = ()

    @property
    def continuing(self) -> tuple[int, ...]:
        return tuple(sorted(self.survivors + self.passthrough))

    def summary(self) -> dict:
        """JSON-ready counts view (no accumulator payload)."""
        return {
            "name": self.name,
            "n_input": len(self.survivors) + len(self.rejected) + len(self.passthrough),
            "n_survivors": len(self.survivors),
            "n_rejected": len(self.rejected),
            "n_passthrough": len(self.passthrough),
            "peak_bin": self.peak_bin,
            "selected_bins": list(self.selected_bins) if self.selected_bins is not None else None,
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class FilterResult:
    """Outcome chain of the full filter plus the surviving motions."""

    stages: tuple[StageOutcome, ...]
    reduced: tuple[Motion, ...]
    reduced_ids: tuple[int, ...] = ()
    source_ids: tuple[int, ...] = ()


def direction_change(theta_i: float, theta_j: float) -> float:
    """Circular absolute difference of two directions, in [0, 180] degrees."""
    d = abs(theta_i - theta_j) % 360.0
    return min(d, 360.0 - d)


def _select_bins(counts: np.ndarray, peak: int, radius: int, fraction: float, cyclic: bool) -> tuple[int, ...]:
    """Peak bin plus qualified neighbors within ``radius`` steps.

    A neighbor qualifies when its count strictly exceeds ``fraction`` of the
    peak count.  Cyclic arrays wrap; others clamp at the array bounds.
    """
    n = len(counts)
    selected = {peak}
    threshold = fraction * counts[peak]
    for step in range(1, radius + 1):
        for b in (peak - step, peak + step):
            if cyclic:
                b %= n
            elif not 0 <= b < n:
                continue
            if counts[b] > threshold:
                selected.add(b)
    return tuple(sorted(selected))


def global_direction_vote(motions: list[Motion], cfg: HmccConfig) -> StageOutcome:
    """Stage 1: keep motions whose direction bin sits near the dominant peak."""
    n_bins = round(360.0 / cfg.dir_bin_width)
    ids = np.arange(len(motions))
    degenerate = np.array([m.degenerate for m in motions], dtype=bool)

    if degenerate.all():
        return StageOutcome(
            name="global_direction",
            survivors=(),
            rejected=(),
            passthrough=tuple(ids.tolist()),
            accumulator=AccumulatorArray(cfg.dir_bin_width, 0.0, 360.0, np.zeros(n_bins, dtype=int), True),
            flags=("all_degenerate",),
        )

    directions = np.array([m.direction for m in motions])
    bins = np.floor(directions / cfg.dir_bin_width).astype(int) % n_bins
    counts = np.bincount(bins[~degenerate], minlength=n_bins)
    peak = int(np.argmax(counts))  # ties resolve to the lowest bin index
    selected = _select_bins(counts, peak, cfg.dir_peak_radius, cfg.dir_peak_fraction, cyclic=True)
    in_selected = np.isin(bins, selected) & ~degenerate

    return StageOutcome(
        name="global_direction",
        survivors=tuple(ids[in_selected].tolist()),
        rejected=tuple(ids[~in_selected & ~degenerate].tolist()),
        passthrough=tuple(ids[degenerate].tolist()),
        accumulator=AccumulatorArray(cfg.dir_bin_width, 0.0, 360.0, counts, True),
        peak_bin=peak,
        selected_bins=selected,
    )


def knn_motions(motions: list[Motion], k: int) -> list[list[int]]:
    """k nearest other motions per motion, by distance between start points.

    Returns one id list per motion, each sorted by (distance, id); ids index
    the given list.  When fewer than k other motions exist, all of them are
    returned.  Distance ties are broken toward the lower motion id.
    """
    n = len(motions)
    if n < 2:
        return [[] for _ in range(n)]
    kk = min(k, n - 1)
    starts = np.array([m.start for m in motions])

    tree = cKDTree(starts)
    m = min(n, kk + 2)  # self + kk + one extra to detect boundary ties
    dist, idx = tree.query(starts, k=m)

    def exact_row(i: int) -> list[int]:
        d2 = np.sum((starts - starts[i]) ** 2, axis=1)
        order = sorted((d2[j], j) for j in range(n) if j != i)
        return [j for _, j in order[:kk]]

    neighbors: list[list[int]] = []
    for i in range(n):
        cand = [(dist[i, c], int(idx[i, c])) for c in range(m)]
        for c, (_, j) in enumerate(cand):
            if j == i:
                del cand[c]
                break
        cand.sort()
        if len(cand) > kk and cand[kk][0] == cand[kk - 1][0]:
            neighbors.append(exact_row(i))  # tie straddles the cutoff
        else:
            neighbors.append([j for _, j in cand[:kk]])
    return neighbors


def _lower_median(values: list[float]) -> float:
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def local_direction_change_vote(
    motions: list[Motion], neighbors: list[list[int]], cfg: HmccConfig
) -> StageOutcome:
    """Stage 2: vote neighbor direction-changes, keep motions with small medians.

    Every direction-change below ``dc_range`` casts one vote; larger values
    cast none.  A motion's own bin comes from the lower median of its
    direction-change list; a median at or beyond ``dc_range`` has no bin and
    the motion is rejected outright.  Motions without neighbors pass through.
    """
    n_bins = round(cfg.dc_range / cfg.dc_bin_width)
    n = len(motions)
    directions = np.array([m.direction for m in motions]) if n else np.empty(0)
    degenerate = np.array([m.degenerate for m in motions], dtype=bool) if n else np.empty(0, dtype=bool)

    counts = np.zeros(n_bins, dtype=int)
    own_bin: list[int | None] = [None] * n
    flags: set[str] = set()
    passthrough = []
    testable = []
    for i in range(n):
        if degenerate[i]:
            passthrough.append(i)
            flags.add("degenerate_passthrough")
            continue
        if not neighbors[i]:
            passthrough.append(i)
            flags.add("no_neighbors")
            continue
        testable.append(i)
        dclist = [direction_change(directions[i], directions[j]) for j in neighbors[i]]
        for dc in dclist:
            if dc < cfg.dc_range:
                counts[int(dc // cfg.dc_bin_width)] += 1
        med = _lower_median(dclist)
        if med < cfg.dc_range:
            own_bin[i] = int(med // cfg.dc_bin_width)

    peak = int(np.argmax(counts))
    selected = _select_bins(counts, peak, cfg.dc_peak_radius, cfg.dc_peak_fraction, cyclic=False)
    survivor_set = {i for i in testable if own_bin[i] is not None and own_bin[i] in selected}
    survivors = [i for i in testable if i in survivor_set]
    rejected = [i for i in testable if i not in survivor_set]

    return StageOutcome(
        name="local_direction_change",
        survivors=tuple(survivors),
        rejected=tuple(rejected),
        passthrough=tuple(passthrough),
        accumulator=AccumulatorArray(cfg.dc_bin_width, 0.0, cfg.dc_range, counts, False),
        peak_bin=peak if testable else None,
        selected_bins=selected if testable else None,
        flags=tuple(sorted(flags)),
    )


def length_zscore_filter(motions: list[Motion], threshold: float = 3.0) -> StageOutcome:
    """Stage 3: reject motions whose length z-score exceeds ``threshold`` in magnitude.

    Uses the population standard deviation of all stage-input lengths.  With
    fewer than two motions the statistic is undefined and everything passes
    through; with (near-)zero spread everything survives.
    """
    n = len(motions)
    ids = tuple(range(n))
    if n < 2:
        return StageOutcome(
            name="length_zscore", survivors=(), rejected=(), passthrough=ids, flags=("too_few",)
        )
    lengths = np.array([m.length for m in motions])
    sigma = float(np.std(lengths))
    if sigma < 1e-12:
        return StageOutcome(
            name="length_zscore", survivors=ids, rejected=(), flags=("zero_variance",)
        )
    z = (lengths - lengths.mean()) / sigma
    keep = np.abs(z) <= threshold
    return StageOutcome(
        name="length_zscore",
        survivors=tuple(np.flatnonzero(keep).tolist()),
        rejected=tuple(np.flatnonzero(~keep).tolist()),
    )


def _remap(outcome: StageOutcome, ids: list[int]) -> StageOutcome:
    """Translate a subset-relative outcome back to original motion ids."""

    def lift(seq):
        return tuple(ids[i] for i in seq)

    return StageOutcome(
        name=outcome.name,
        survivors=lift(outcome.survivors),
        rejected=lift(outcome.rejected),
        passthrough=lift(outcome.passthrough),
        accumulator=outcome.accumulator,
        peak_bin=outcome.peak_bin,
        selected_bins=outcome.selected_bins,
        flags=outcome.flags,
    )


def hmcc_filter(motions: list[Motion], cfg: HmccConfig | None = None) -> FilterResult:
    """Run the full three-stage filter and map survivors back to their sources.

    Neighbor search for stage 2 runs over the stage-1 survivors only, which
    sharpens the local direction-change statistic.  Degenerate motions skip
    both voting stages and rejoin for the length test.
    """
    cfg = cfg or HmccConfig()
    if not motions:
        return FilterResult(stages=(), reduced=(), reduced_ids=(), source_ids=())

    stage1 = global_direction_vote(motions, cfg)
    alive = list(stage1.continuing)

    nd = [i for i in alive if not motions[i].degenerate]
    deg = [i for i in alive if motions[i].degenerate]
    sub = [motions[i] for i in nd]
    stage2_local = local_direction_change_vote(sub, knn_motions(sub, cfg.k_neighbors), cfg)
    stage2 = _remap(stage2_local, nd)
    if deg:
        stage2 = StageOutcome(
            name=stage2.name,
            survivors=stage2.survivors,
            rejected=stage2.rejected,
            passthrough=tuple(sorted(stage2.passthrough + tuple(deg))),
            accumulator=stage2.accumulator,
            peak_bin=stage2.peak_bin,
            selected_bins=stage2.selected_bins,
            flags=tuple(sorted(set(stage2.flags) | {"degenerate_passthrough"})),
        )
    alive = list(stage2.continuing)

    stage3 = _remap(length_zscore_filter([motions[i] for i in alive], cfg.zscore_threshold), alive)

    reduced_ids = stage3.continuing
    reduced = tuple(motions[i] for i in reduced_ids)
    return FilterResult(
        stages=(stage1, stage2, stage3),
        reduced=reduced,
        reduced_ids=reduced_ids,
        source_ids=tuple(m.source_id for m in reduced),
    )
