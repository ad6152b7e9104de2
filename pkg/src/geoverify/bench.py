"""Timing harness comparing verification strategies on labeled match sets.

Includes a deliberately quadratic pairwise rotation/scale voting filter as
the comparison baseline: every correspondence pair implies a rotation and a
scale between the two images, votes land in a 2D accumulator, and matches
whose relations cluster at the peak survive.  Its cost grows with n^2 while
the motion filter stays near-linear, which is the contrast the benchmark
exists to measure.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import GeoverifyError
from .geometry import ProjectionPlane
from .hmcc import HmccConfig
from .ransac import RansacConfig, hmcc_ransac, ransac_fundamental
from .synth import LabeledMatchSet

METHODS = ("ransac", "pairwise_ransac", "hmcc_ransac")

_ROT_BIN_DEG = 10.0
_LOG2_SCALE_BIN = 0.25
_LOG2_SCALE_LIMIT = 8.0  # scale votes clamp to [2^-8, 2^8)


@dataclass(frozen=True)
class BenchRow:
    pair: int
    method: str
    filter_time: float
    verify_time: float
    n_inliers: int
    failed: bool = False

    @property
    def sum_time(self) -> float:
        return self.filter_time + self.verify_time


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    _COLUMNS = ("filter_time", "verify_time", "sum_time", "n_inliers")

    def methods(self) -> list[str]:
        seen = []
        for row in self.rows:
            if row.method not in seen:
                seen.append(row.method)
        return seen

    def aggregates(self) -> dict[str, dict[str, dict[str, float]]]:
        """Max/Mean/Stddev/Sum of every column, per method, across pairs."""
        out: dict[str, dict[str, dict[str, float]]] = {}
        for method in self.methods():
            values = {
                col: np.array([getattr(r, col) for r in self.rows if r.method == method], dtype=float)
                for col in self._COLUMNS
            }
            out[method] = {
                col: {
                    "max": float(v.max()),
                    "mean": float(v.mean()),
                    "stddev": float(v.std()),
                    "sum": float(v.sum()),
                }
                for col, v in values.items()
            }
        return out

    def table(self, include_times: bool = True) -> str:
        """Tab-separated dump: filter / verify / sum columns then inlier count."""
        time_cols = ["filter_time", "verify_time", "sum_time"] if include_times else []
        header = ["pair", "method", *time_cols, "n_inliers", "failed"]
        lines = ["\t".join(header)]
        for r in self.rows:
            cells = [str(r.pair), r.method]
            cells += [f"{getattr(r, c):.6f}" for c in time_cols]
            cells += [str(r.n_inliers), "1" if r.failed else "0"]
            lines.append("\t".join(cells))
        agg = self.aggregates()
        for method in self.methods():
            for stat in ("max", "mean", "stddev", "sum"):
                cells = [stat, method]
                cells += [f"{agg[method][c][stat]:.6f}" for c in time_cols]
                cells += [f"{agg[method]['n_inliers'][stat]:.6f}", ""]
                lines.append("\t".join(cells))
        return "\n".join(lines) + "\n"

    def to_dict(self, include_times: bool = True) -> dict:
        rows = []
        for r in self.rows:
            d = {"pair": r.pair, "method": r.method, "n_inliers": r.n_inliers, "failed": r.failed}
            if include_times:
                d.update(filter_time=r.filter_time, verify_time=r.verify_time, sum_time=r.sum_time)
            rows.append(d)
        out = {"rows": rows}
        if include_times:
            out["aggregates"] = self.aggregates()
        else:
            agg = self.aggregates()
            out["aggregates"] = {m: {"n_inliers": agg[m]["n_inliers"]} for m in agg}
        return out


def pairwise_vote_filter(correspondences) -> list[int]:
    """Baseline filter from pairwise rotation/scale voting; O(n^2) by design.

    For every correspondence pair, the rotation between the image-1 and
    image-2 difference vectors votes a 10-degree bin and their length ratio a
    quarter-log2 bin.  A correspondence survives when more than half of its
    n-1 relations land in the 3x3 neighborhood of the peak cell.  Pairs with
    a zero-length difference vector in either image are skipped.
    """
    n = len(correspondences)
    if n < 2:
        raise GeoverifyError("pairwise filter needs at least 2 correspondences")
    p1 = np.array([c.p1 for c in correspondences])
    p2 = np.array([c.p2 for c in correspondences])

    n_rot = round(360.0 / _ROT_BIN_DEG)
    n_scale = round(2.0 * _LOG2_SCALE_LIMIT / _LOG2_SCALE_BIN)

    def row_cells(i: int) -> tuple[np.ndarray, np.ndarray]:
        d1 = p1 - p1[i]
        d2 = p2 - p2[i]
        len1 = np.hypot(d1[:, 0], d1[:, 1])
        len2 = np.hypot(d2[:, 0], d2[:, 1])
        valid = (len1 > 0.0) & (len2 > 0.0)
        valid[i] = False
        d1, d2, len1, len2 = d1[valid], d2[valid], len1[valid], len2[valid]
        cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        dot = d1[:, 0] * d2[:, 0] + d1[:, 1] * d2[:, 1]
        rot = np.degrees(np.arctan2(cross, dot)) % 360.0
        rot_bin = np.floor(rot / _ROT_BIN_DEG).astype(int) % n_rot
        scale_bin = np.clip(
            np.floor(np.log2(len2 / len1) / _LOG2_SCALE_BIN) + n_scale // 2, 0, n_scale - 1
        ).astype(int)
        return rot_bin, scale_bin

    # pass 1: global accumulator (each ordered pair once; relations are
    # symmetric, so this only doubles every count and keeps the same peak)
    counts = np.zeros((n_rot, n_scale), dtype=np.int64)
    for i in range(n):
        rb, sb = row_cells(i)
        np.add.at(counts, (rb, sb), 1)
    peak_rot, peak_scale = np.unravel_index(int(np.argmax(counts)), counts.shape)

    rot_window = {(peak_rot + d) % n_rot for d in (-1, 0, 1)}
    scale_window = {s for s in (peak_scale - 1, peak_scale, peak_scale + 1) if 0 <= s < n_scale}

    # pass 2: per-correspondence share of relations inside the peak window
    survivors = []
    rot_ok = np.zeros(n_rot, dtype=bool)
    rot_ok[list(rot_window)] = True
    scale_ok = np.zeros(n_scale, dtype=bool)
    scale_ok[list(scale_window)] = True
    for i in range(n):
        rb, sb = row_cells(i)
        hits = int(np.sum(rot_ok[rb] & scale_ok[sb]))
        if hits > 0.5 * (n - 1):
            survivors.append(i)
    return survivors


def _bench_one(pair_idx, dataset, methods, plane, hmcc_cfg, ransac_cfg) -> list[BenchRow]:
    corrs = dataset.correspondences
    intr1, intr2 = dataset.intrinsics
    pose1, pose2 = dataset.noisy_poses
    rows = []
    for method in methods:
        try:
            if method == "ransac":
                report = ransac_fundamental(corrs, ransac_cfg)
                rows.append(
                    BenchRow(
                        pair=pair_idx,
                        method=method,
                        filter_time=0.0,
                        verify_time=report.stage_stats["timings"]["verify_s"],
                        n_inliers=report.n_inliers,
                        failed=not report.success,
                    )
                )
            elif method == "pairwise_ransac":
                t0 = time.perf_counter()
                keep = pairwise_vote_filter(corrs)
                t_filter = time.perf_counter() - t0
                if len(keep) < 7:
                    rows.append(BenchRow(pair_idx, method, t_filter, 0.0, 0, failed=True))
                    continue
                report = ransac_fundamental([corrs[i] for i in keep], ransac_cfg)
                rows.append(
                    BenchRow(
                        pair=pair_idx,
                        method=method,
                        filter_time=t_filter,
                        verify_time=report.stage_stats["timings"]["verify_s"],
                        n_inliers=report.n_inliers,
                        failed=not report.success,
                    )
                )
            elif method == "hmcc_ransac":
                report = hmcc_ransac(corrs, intr1, intr2, pose1, pose2, plane, hmcc_cfg, ransac_cfg)
                rows.append(
                    BenchRow(
                        pair=pair_idx,
                        method=method,
                        filter_time=report.stage_stats["timings"]["filter_s"],
                        verify_time=report.stage_stats["timings"]["verify_s"],
                        n_inliers=report.n_inliers,
                        failed=not report.success,
                    )
                )
            else:
                raise ValueError(f"unknown method {method!r}")
        except GeoverifyError:
            rows.append(BenchRow(pair_idx, method, 0.0, 0.0, 0, failed=True))
    return rows


def run_benchmark(
    datasets: list[LabeledMatchSet],
    methods: tuple[str, ...] = METHODS,
    plane: ProjectionPlane | None = None,
    hmcc_cfg: HmccConfig | None = None,
    ransac_cfg: RansacConfig | None = None,
    parallel: bool = False,
) -> BenchReport:
    """Run the selected methods over every dataset with identical seeds.

    Rows come back in dataset order; a method failure on one pair is recorded
    as a flagged row, never an abort.  ``parallel`` runs pairs concurrently
    and is only meaningful for inlier-count comparisons, since contention
    distorts wall-clock timings.
    """
    if not datasets:
        raise ValueError("run_benchmark needs at least one dataset")
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown methods: {unknown}; choose from {METHODS}")
    plane = plane or ProjectionPlane()
    hmcc_cfg = hmcc_cfg or HmccConfig()
    ransac_cfg = ransac_cfg or RansacConfig()

    report = BenchReport()
    if parallel:
        with ThreadPoolExecutor() as pool:
            futures = [
                pool.submit(_bench_one, i, ds, methods, plane, hmcc_cfg, ransac_cfg)
                for i, ds in enumerate(datasets)
            ]
            for future in futures:
                report.rows.extend(future.result())
    else:
        for i, ds in enumerate(datasets):
            report.rows.extend(_bench_one(i, ds, methods, plane, hmcc_cfg, ransac_cfg))
    return report
