"""Fundamental-matrix estimation: seven-point minimal solver, Sampson scoring,
a classic seeded RANSAC loop, and the combined filter-then-verify pipeline.

Fundamental matrices are plain 3x3 ``numpy`` arrays normalized to unit
Frobenius norm with a positive largest-magnitude entry (scale and sign are
otherwise arbitrary); the epipolar constraint is ``p2_h^T F p1_h = 0`` with
homogeneous pixel coordinates.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSampleError, InsufficientDataError
from .geometry import CameraIntrinsics, CameraPose, ProjectionPlane
from .hmcc import HmccConfig, StageOutcome, hmcc_filter
from .motion import Correspondence, generate_motions

#: hypotheses solved per batched linear-algebra call inside the RANSAC loop
_CHUNK = 256


@dataclass(frozen=True)
class RansacConfig:
    max_residual: float = 1.0
    confidence: float = 0.99
    max_iterations: int = 10_000
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_residual <= 0:
            raise ValueError(f"max_residual must be > 0, got {self.max_residual}")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError(f"confidence must be in (0, 1), got {self.confidence}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")


@dataclass
class VerificationReport:
    """Per-correspondence inlier mask plus stage statistics and the model."""

    inlier_mask: np.ndarray
    fundamental: np.ndarray | None
    stage_stats: dict
    iterations_used: int = 0
    #: full filter stage outcomes (accumulators included) when the filter ran
    filter_stages: tuple[StageOutcome, ...] | None = None

    @property
    def success(self) -> bool:
        return self.fundamental is not None

    @property
    def n_inliers(self) -> int:
        return int(np.sum(self.inlier_mask))


def normalize_fundamental(f: np.ndarray) -> np.ndarray:
    """Scale to unit Frobenius norm and make the largest-magnitude entry positive."""
    f = np.asarray(f, dtype=float)
    norm = np.linalg.norm(f)
    if norm == 0:
        raise ValueError("cannot normalize a zero matrix")
    f = f / norm
    flat = np.abs(f).argmax()
    if f.flat[flat] < 0:
        f = -f
    return f


def _hartley_batch(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Isotropic normalization of stacked point sets (B, N, 2).

    Centroid moves to the origin and the mean distance becomes sqrt(2).
    Returns (normalized points, 3x3 transforms, valid flags); a set whose
    points all coincide is flagged invalid.
    """
    centroid = points.mean(axis=1, keepdims=True)
    diff = points - centroid
    mean_dist = np.linalg.norm(diff, axis=2).mean(axis=1)
    ok = mean_dist > 1e-12
    scale = np.sqrt(2.0) / np.where(ok, mean_dist, 1.0)
    b = len(points)
    t = np.zeros((b, 3, 3))
    t[:, 0, 0] = scale
    t[:, 1, 1] = scale
    t[:, 2, 2] = 1.0
    t[:, 0, 2] = -scale * centroid[:, 0, 0]
    t[:, 1, 2] = -scale * centroid[:, 0, 1]
    return diff * scale[:, None, None], t, ok


def _real_cubic_roots(c3: float, c2: float, c1: float, c0: float) -> list[float]:
    """Real roots of c3 x^3 + c2 x^2 + c1 x + c0.

    Closed-form (Cardano / trigonometric) with a Newton polish; degrades to
    the quadratic/linear cases when leading coefficients vanish.  An
    identically-zero polynomial yields the single root 0.
    """
    tiny = 1e-13 * max(abs(c3), abs(c2), abs(c1), abs(c0), 1e-300)
    if abs(c3) <= tiny:
        if abs(c2) <= tiny:
            if abs(c1) <= tiny:
                return [0.0]  # identically singular pencil
            return [-c0 / c1]
        disc = c1 * c1 - 4.0 * c2 * c0
        if disc < 0.0:
            return []
        q = -0.5 * (c1 + math.copysign(math.sqrt(disc), c1))
        roots = [q / c2] if q == 0.0 else [q / c2, c0 / q]
    else:
        a = c2 / c3
        b = c1 / c3
        c = c0 / c3
        p = b - a * a / 3.0
        q = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
        disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
        shift = -a / 3.0
        if disc > 0.0:  # one real root, two complex conjugates
            root = math.sqrt(disc)
            roots = [_cbrt(-q / 2.0 + root) + _cbrt(-q / 2.0 - root) + shift]
        elif p == 0.0:  # disc == 0 with p == 0: triple root
            roots = [shift]
        elif disc == 0.0:  # one simple plus one double root
            roots = [3.0 * q / p + shift, -1.5 * q / p + shift]
        else:  # three distinct real roots
            r = 2.0 * math.sqrt(-p / 3.0)
            theta = math.acos(min(1.0, max(-1.0, 3.0 * q / (p * r)))) / 3.0
            roots = [r * math.cos(theta - 2.0 * math.pi * k / 3.0) + shift for k in range(3)]
    polished = []
    for x in roots:
        for _ in range(2):  # Newton polish on the original cubic
            fp = (3.0 * c3 * x + 2.0 * c2) * x + c1
            if fp == 0.0:
                break
            x -= (((c3 * x + c2) * x + c1) * x + c0) / fp
        polished.append(x)
    return polished


def _cbrt(x: float) -> float:
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def _seven_point_batch(
    p1: np.ndarray, p2: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Solve stacked seven-point problems, (B, 7, 2) per image.

    Returns ``(candidates, owner, ok)``: all candidate matrices stacked as
    (M, 3, 3) in sample order, the sample index owning each candidate, and a
    per-sample flag that is False for degenerate configurations.
    """
    x1n, t1, ok1 = _hartley_batch(p1)
    x2n, t2, ok2 = _hartley_batch(p2)

    a1, b1 = x1n[..., 0], x1n[..., 1]
    a2, b2 = x2n[..., 0], x2n[..., 1]
    one = np.ones_like(a1)
    # rows of p2_h^T F p1_h = 0, F flattened row-major
    design = np.stack([a2 * a1, a2 * b1, a2, b2 * a1, b2 * b1, b2, a1, b1, one], axis=2)

    _, s, vt = np.linalg.svd(design)
    ok = ok1 & ok2 & (s[:, 6] >= 1e-10 * s[:, 0])
    f1 = vt[:, 7, :].reshape(-1, 3, 3)
    f2 = vt[:, 8, :].reshape(-1, 3, 3)

    # det(f1 + lam f2) is cubic in lam; recover coefficients from 4 evaluations
    d0 = np.linalg.det(f1)
    d1 = np.linalg.det(f1 + f2)
    dm1 = np.linalg.det(f1 - f2)
    d2 = np.linalg.det(f1 + 2.0 * f2)
    c2 = (d1 + dm1) / 2.0 - d0
    u = (d1 - dm1) / 2.0
    c3 = ((d2 - d0 - 4.0 * c2) / 2.0 - u) / 3.0
    c1 = u - c3

    stacked = []
    owner = []
    for i in range(len(p1)):
        if not ok[i]:
            continue
        for lam in _real_cubic_roots(float(c3[i]), float(c2[i]), float(c1[i]), float(d0[i])):
            stacked.append(f1[i] + lam * f2[i])
            owner.append(i)
    if not stacked:
        return np.empty((0, 3, 3)), np.empty(0, dtype=int), ok

    fn = np.array(stacked)
    owner = np.array(owner, dtype=int)
    u_, sv, vvt = np.linalg.svd(fn)
    sv[:, 2] = 0.0  # exact rank 2
    fn = u_ @ (sv[:, :, None] * vvt)
    fpx = np.transpose(t2[owner], (0, 2, 1)) @ fn @ t1[owner]

    norms = np.linalg.norm(fpx, axis=(1, 2))
    keep = norms > 0.0
    fpx, owner, norms = fpx[keep], owner[keep], norms[keep]
    fpx /= norms[:, None, None]
    flat = np.abs(fpx.reshape(-1, 9)).argmax(axis=1)
    signs = np.sign(fpx.reshape(-1, 9)[np.arange(len(fpx)), flat])
    fpx *= signs[:, None, None]
    return fpx, owner, ok


def _seven_point_arrays(p1: np.ndarray, p2: np.ndarray) -> list[np.ndarray]:
    candidates, _, ok = _seven_point_batch(p1[None, :, :], p2[None, :, :])
    if not ok[0]:
        raise DegenerateSampleError("design matrix rank < 7 (degenerate configuration)")
    return [candidates[i] for i in range(len(candidates))]


def seven_point(correspondences: list[Correspondence]) -> list[np.ndarray]:
    """Minimal fundamental-matrix solver from exactly 7 correspondences.

    Solves the 2D null space of the epipolar design matrix (after isotropic
    point normalization in each image) and the cubic singularity constraint
    on the null-space pencil, returning one rank-2 matrix per real root
    (1 to 3 candidates).

    Raises:
        DegenerateSampleError: rank-deficient configuration, e.g. collinear
            or duplicated points.
    """
    if len(correspondences) != 7:
        raise InsufficientDataError(f"seven_point needs exactly 7 correspondences, got {len(correspondences)}")
    p1 = np.array([c.p1 for c in correspondences])
    p2 = np.array([c.p2 for c in correspondences])
    return _seven_point_arrays(p1, p2)


def _homogeneous(points: np.ndarray) -> np.ndarray:
    return np.column_stack([points, np.ones(len(points))])


def sampson_distances(p1: np.ndarray, p2: np.ndarray, fundamental: np.ndarray) -> np.ndarray:
    """Sampson distance of each correspondence under F, in pixels.

    Points exactly at an epipole of a degenerate F (all four epipolar-line
    gradients zero) get +inf so they can never count as inliers.
    """
    x1 = _homogeneous(np.asarray(p1, dtype=float).reshape(-1, 2))
    x2 = _homogeneous(np.asarray(p2, dtype=float).reshape(-1, 2))
    fx1 = x1 @ fundamental.T
    ftx2 = x2 @ fundamental
    err = np.sum(x2 * fx1, axis=1)
    grad2 = fx1[:, 0] ** 2 + fx1[:, 1] ** 2 + ftx2[:, 0] ** 2 + ftx2[:, 1] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.abs(err) / np.sqrt(grad2)
    d[grad2 == 0.0] = np.inf
    return d


def epipolar_residual(c: Correspondence, fundamental: np.ndarray) -> float:
    """Sampson distance of a single correspondence, in pixels."""
    return float(sampson_distances(c.p1.reshape(1, 2), c.p2.reshape(1, 2), fundamental)[0])


def _score_batch(
    candidates: np.ndarray, x1h: np.ndarray, x2h: np.ndarray, max_residual: float
) -> tuple[np.ndarray, np.ndarray]:
    """Inlier masks and counts of stacked hypotheses against all points.

    Same Sampson metric as :func:`sampson_distances`, evaluated for (C, 3, 3)
    candidates at once; candidates are sub-batched to bound memory.
    """
    n_cand = len(candidates)
    n_pts = len(x1h)
    masks = np.empty((n_cand, n_pts), dtype=bool)
    x1t = np.ascontiguousarray(x1h.T)
    x2t = np.ascontiguousarray(x2h.T)
    step = max(16, int(5e4 / max(n_pts, 1)))  # keep the (C, 3, n) temporaries cache-sized
    for s in range(0, n_cand, step):
        f = candidates[s : s + step]
        c = len(f)
        fx1 = (f.reshape(c * 3, 3) @ x1t).reshape(c, 3, n_pts)
        ftx2 = (f.transpose(0, 2, 1).reshape(c * 3, 3) @ x2t).reshape(c, 3, n_pts)
        err = fx1[:, 0] * x2t[0] + fx1[:, 1] * x2t[1] + fx1[:, 2] * x2t[2]
        grad2 = fx1[:, 0] ** 2 + fx1[:, 1] ** 2 + ftx2[:, 0] ** 2 + ftx2[:, 1] ** 2
        # same arithmetic as sampson_distances so re-checks agree bit-for-bit
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.abs(err) / np.sqrt(grad2)
        masks[s : s + step] = (d <= max_residual) & (grad2 > 0.0)
    return masks, masks.sum(axis=1)


def _adaptive_bound(inlier_ratio: float, confidence: float, sample_size: int = 7) -> float:
    """Iterations needed to draw one all-inlier sample at the given confidence."""
    w_n = inlier_ratio**sample_size
    if w_n >= 1.0:
        return 0.0
    if w_n <= 0.0:
        return np.inf
    return np.ceil(np.log(1.0 - confidence) / np.log1p(-w_n))


def ransac_fundamental(
    correspondences: list[Correspondence], cfg: RansacConfig | None = None
) -> VerificationReport:
    """Classic RANSAC over seeded uniform 7-samples; no refit of the winner.

    The consensus set is the correspondences with Sampson distance at or
    below ``max_residual`` under the best hypothesis; iteration count adapts
    to the best inlier ratio under the standard confidence bound, capped at
    ``max_iterations``.  A best consensus below 8 is a failure to verify
    (all-false mask, no matrix).

    Raises:
        InsufficientDataError: fewer than 7 correspondences.
    """
    cfg = cfg or RansacConfig()
    n = len(correspondences)
    if n < 7:
        raise InsufficientDataError(f"RANSAC needs at least 7 correspondences, got {n}")
    p1 = np.array([c.p1 for c in correspondences])
    p2 = np.array([c.p2 for c in correspondences])
    rng = np.random.default_rng(cfg.rng_seed)

    best_count = 0
    best_mask = np.zeros(n, dtype=bool)
    best_f = None
    needed = float(cfg.max_iterations)
    n_degenerate = 0
    it = 0
    x1h = _homogeneous(p1)
    x2h = _homogeneous(p2)
    chunk_size = 8
    t0 = time.perf_counter()
    # Hypotheses are solved and scored in chunks for throughput, but consumed
    # strictly in iteration order against the adaptive bound, so the result
    # is identical to a one-at-a-time loop with the same seed.
    while it < min(needed, cfg.max_iterations):
        chunk = max(1, min(chunk_size, int(min(needed, cfg.max_iterations)) - it))
        chunk_size = min(chunk_size * 4, _CHUNK)
        # 7 smallest of n uniform keys per row == uniform 7-subset
        keys = rng.random((chunk, n))
        samples = np.argpartition(keys, 6, axis=1)[:, :7]
        candidates, owner, ok = _seven_point_batch(p1[samples], p2[samples])
        if len(candidates):
            masks, counts = _score_batch(candidates, x1h, x2h, cfg.max_residual)
        cursor = 0
        for j in range(chunk):
            if it >= min(needed, cfg.max_iterations):
                break
            it += 1
            if not ok[j]:
                n_degenerate += 1
                continue
            while cursor < len(owner) and owner[cursor] == j:
                count = int(counts[cursor])
                if count > best_count:  # ties keep the earlier hypothesis
                    best_count = count
                    best_mask = masks[cursor]
                    best_f = candidates[cursor]
                    needed = _adaptive_bound(count / n, cfg.confidence)
                cursor += 1
    elapsed = time.perf_counter() - t0

    if best_count < 8:
        best_f = None
        best_mask = np.zeros(n, dtype=bool)
    stats = {
        "n_input": n,
        "n_inliers": int(best_mask.sum()),
        "n_degenerate_samples": n_degenerate,
        "success": best_f is not None,
        "timings": {"verify_s": elapsed},
    }
    return VerificationReport(
        inlier_mask=best_mask, fundamental=best_f, stage_stats=stats, iterations_used=it
    )


def hmcc_ransac(
    matches: list[Correspondence],
    intr1: CameraIntrinsics,
    intr2: CameraIntrinsics,
    pose1: CameraPose,
    pose2: CameraPose,
    plane: ProjectionPlane,
    hmcc_cfg: HmccConfig | None = None,
    ransac_cfg: RansacConfig | None = None,
) -> VerificationReport:
    """Filter-then-verify pipeline: motion voting first, RANSAC on the survivors.

    The returned mask is expressed over the original input indexing; it is a
    subset of the filter's surviving correspondences.  Fewer than 7 survivors
    is a failure to verify (all-false mask, stage statistics intact); callers
    wanting a plain-RANSAC fallback must invoke it themselves.
    """
    hmcc_cfg = hmcc_cfg or HmccConfig()
    ransac_cfg = ransac_cfg or RansacConfig()
    n = len(matches)

    t0 = time.perf_counter()
    motions, dropped = generate_motions(matches, intr1, intr2, pose1, pose2, plane)
    filtered = hmcc_filter(motions, hmcc_cfg)
    t_filter = time.perf_counter() - t0

    survivor_ids = set(filtered.source_ids)
    survivor_pos = [i for i, m in enumerate(matches) if m.id in survivor_ids]
    stats = {
        "n_input": n,
        "n_motions": len(motions),
        "n_dropped_projection": len(dropped),
        "dropped_ids": list(dropped),
        "stages": [s.summary() for s in filtered.stages],
        "n_filter_survivors": len(survivor_pos),
        "timings": {"filter_s": t_filter, "verify_s": 0.0},
    }

    if len(survivor_pos) < 7:
        stats["success"] = False
        stats["n_inliers"] = 0
        stats["survival_precision"] = None
        return VerificationReport(
            inlier_mask=np.zeros(n, dtype=bool),
            fundamental=None,
            stage_stats=stats,
            iterations_used=0,
            filter_stages=filtered.stages,
        )

    subset = [matches[i] for i in survivor_pos]
    inner = ransac_fundamental(subset, ransac_cfg)
    mask = np.zeros(n, dtype=bool)
    mask[np.array(survivor_pos)] = inner.inlier_mask

    stats["timings"]["verify_s"] = inner.stage_stats["timings"]["verify_s"]
    stats["n_degenerate_samples"] = inner.stage_stats["n_degenerate_samples"]
    stats["n_inliers"] = int(mask.sum())
    stats["success"] = inner.success
    # ratio of RANSAC-confirmed to filter-surviving matches
    stats["survival_precision"] = int(mask.sum()) / len(survivor_pos)
    return VerificationReport(
        inlier_mask=mask,
        fundamental=inner.fundamental,
        stage_stats=stats,
        iterations_used=inner.iterations_used,
        filter_stages=filtered.stages,
    )
