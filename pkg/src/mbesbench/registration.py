"""Classical registration baselines: feature-based RANSAC and GICP.

Both return a RegistrationResult whose `converged` flag is the benchmark's
notion of success; a method that cannot produce a usable transform reports
converged=False (possibly with transform=None) rather than raising, except
where a precondition is violated outright.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .core import PointCloud, RigidTransform
from .spatial import build_index


class RegistrationError(RuntimeError):
    """Raised when a method cannot even start (counts as a failure upstream)."""


@dataclass(frozen=True)
class CorrespondenceSet:
    """Putative matches: src_indices[k] in the source cloud corresponds to
    ref_indices[k] in the reference cloud, at descriptor distance distances[k].
    One-way NN matching guarantees src_indices are unique."""

    src_indices: np.ndarray
    ref_indices: np.ndarray
    distances: np.ndarray

    def __post_init__(self):
        si = np.ascontiguousarray(self.src_indices, dtype=np.int64).reshape(-1)
        ri = np.ascontiguousarray(self.ref_indices, dtype=np.int64).reshape(-1)
        d = np.ascontiguousarray(self.distances, dtype=np.float64).reshape(-1)
        if not (si.shape == ri.shape == d.shape):
            raise ValueError("correspondence array length mismatch")
        if len(np.unique(si)) != len(si):
            raise ValueError("duplicate source indices")
        for a in (si, ri, d):
            a.setflags(write=False)
        object.__setattr__(self, "src_indices", si)
        object.__setattr__(self, "ref_indices", ri)
        object.__setattr__(self, "distances", d)

    def __len__(self) -> int:
        return self.src_indices.shape[0]


@dataclass(frozen=True)
class RegistrationResult:
    transform: RigidTransform | None
    converged: bool
    iterations: int
    inlier_count: int | None = None
    residual: float | None = None


def match_features(src, ref, mutual: bool = False) -> CorrespondenceSet:
    """Nearest reference descriptor (exact L2) for every source descriptor.

    mutual=True keeps only matches that are nearest neighbors both ways.
    Distances are computed with plain differencing, chunked to bound memory,
    so results agree exactly with a brute-force table.
    """
    a, b = src.descriptors, ref.descriptors
    if len(src) == 0 or len(ref) == 0:
        raise ValueError("empty feature set")
    if a.shape[1] != b.shape[1]:
        raise ValueError("descriptor dimension mismatch")

    def nn(x, y):
        idx = np.empty(len(x), dtype=np.int64)
        d = np.empty(len(x))
        # ~32 MB of difference temporaries per chunk keeps this cache-friendly
        chunk = max(1, (1 << 22) // (y.shape[0] * y.shape[1] + 1))
        for s in range(0, len(x), chunk):
            d2 = ((x[s:s + chunk, None, :] - y[None, :, :]) ** 2).sum(axis=2)
            best = np.argmin(d2, axis=1)
            idx[s:s + chunk] = best
            d[s:s + chunk] = np.sqrt(d2[np.arange(len(best)), best])
        return idx, d

    fwd, dist = nn(a, b)
    rows = np.arange(len(a))
    if mutual:
        bwd, _ = nn(b, a)
        keep = bwd[fwd] == rows
        rows, fwd, dist = rows[keep], fwd[keep], dist[keep]
    return CorrespondenceSet(src.point_indices[rows], ref.point_indices[fwd], dist)


def kabsch_fit(src_pts, ref_pts) -> RigidTransform:
    """Least-squares rigid transform mapping src points onto ref points.

    det(R) = +1 is enforced by flipping the smallest singular direction, so
    mirrored inputs yield the best proper rotation, never a reflection.
    """
    a = np.asarray(src_pts, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(ref_pts, dtype=np.float64).reshape(-1, 3)
    if a.shape != b.shape:
        raise ValueError("point lists must have equal length")
    if a.shape[0] < 3:
        raise ValueError("need at least 3 points")
    ca, cb = a.mean(axis=0), b.mean(axis=0)
    h = (a - ca).T @ (b - cb)
    u, s, vt = np.linalg.svd(h)
    if s[1] <= 1e-12 * max(s[0], 1.0):
        raise ValueError("rank deficient")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = (vt.T * np.array([1.0, 1.0, d])) @ u.T
    return RigidTransform(r, cb - r @ ca)


def _distinct_samples(rng: np.random.Generator, n: int, size: int, rows: int) -> np.ndarray:
    """(rows, size) index samples without replacement per row, vectorized."""
    out = np.empty((rows, size), dtype=np.int64)
    for k in range(size):
        draw = rng.integers(0, n - k, size=rows)
        if k:
            prev = np.sort(out[:, :k], axis=1)
            for kk in range(k):
                draw += draw >= prev[:, kk]
        out[:, k] = draw
    return out


def _kabsch_batch(a: np.ndarray, b: np.ndarray):
    """Rigid fits for (rows, m, 3) sample blocks; flags rank-deficient rows."""
    ca = a.mean(axis=1, keepdims=True)
    cb = b.mean(axis=1, keepdims=True)
    h = np.matmul((a - ca).transpose(0, 2, 1), b - cb)
    u, s, vt = np.linalg.svd(h)
    ok = s[:, 1] > 1e-12 * np.maximum(s[:, 0], 1.0)
    d = np.sign(np.linalg.det(np.matmul(vt.transpose(0, 2, 1), u.transpose(0, 2, 1))))
    scale = np.ones((len(a), 3))
    scale[:, 2] = d
    r = np.matmul(vt.transpose(0, 2, 1) * scale[:, None, :], u.transpose(0, 2, 1))
    t = cb[:, 0, :] - np.matmul(r, ca.transpose(0, 2, 1))[:, :, 0]
    return r, t, ok


@numba.njit(cache=True)
def _score_hypotheses(rs, ts, src, ref, thresh2):  # pragma: no cover - jit
    n_h = rs.shape[0]
    n = src.shape[0]
    counts = np.zeros(n_h, dtype=np.int64)
    sse = np.zeros(n_h)
    for h in range(n_h):
        r = rs[h]
        t = ts[h]
        c = 0
        acc = 0.0
        for i in range(n):
            x = r[0, 0] * src[i, 0] + r[0, 1] * src[i, 1] + r[0, 2] * src[i, 2] + t[0] - ref[i, 0]
            y = r[1, 0] * src[i, 0] + r[1, 1] * src[i, 1] + r[1, 2] * src[i, 2] + t[1] - ref[i, 1]
            z = r[2, 0] * src[i, 0] + r[2, 1] * src[i, 1] + r[2, 2] * src[i, 2] + t[2] - ref[i, 2]
            d2 = x * x + y * y + z * z
            if d2 <= thresh2:
                c += 1
                acc += d2
        counts[h] = c
        sse[h] = acc
    return counts, sse


def ransac_registration(src_cloud: PointCloud, ref_cloud: PointCloud,
                        corr: CorrespondenceSet, iters: int = 50000,
                        sample_size: int = 3, inlier_thresh: float = 2.0,
                        seed: int = 0) -> RegistrationResult:
    """Correspondence RANSAC with Kabsch fitting.

    Every iteration draws sample_size correspondences, fits, and counts
    correspondences within inlier_thresh of their partner; the winner has
    the most inliers (ties to lower inlier RMS, then lower iteration index)
    and is refit on its full inlier set. converged requires the inlier count
    to reach max(sample_size + 1, 5% of the correspondences).
    """
    m = len(corr)
    if m < sample_size:
        raise RegistrationError("too few correspondences")
    s_pts = np.ascontiguousarray(src_cloud.points[corr.src_indices])
    r_pts = np.ascontiguousarray(ref_cloud.points[corr.ref_indices])

    rng = np.random.default_rng(seed)
    samples = _distinct_samples(rng, m, sample_size, iters)
    rs, ts, ok = _kabsch_batch(s_pts[samples], r_pts[samples])
    counts, sse = _score_hypotheses(np.ascontiguousarray(rs), np.ascontiguousarray(ts),
                                    s_pts, r_pts, inlier_thresh * inlier_thresh)
    counts[~ok] = -1

    best_count = int(counts.max())
    if best_count < 0:
        return RegistrationResult(None, False, iters, inlier_count=0)
    if best_count == 0:
        winner = int(np.flatnonzero(ok)[0])
    else:
        cands = np.flatnonzero(counts == best_count)
        winner = int(cands[np.argmin(sse[cands])])

    transform = RigidTransform(rs[winner], ts[winner])
    if best_count >= 3:
        deltas = s_pts @ transform.rotation.T + transform.translation - r_pts
        inl = np.einsum("ij,ij->i", deltas, deltas) <= inlier_thresh * inlier_thresh
        try:
            transform = kabsch_fit(s_pts[inl], r_pts[inl])
        except ValueError:
            pass
    converged = best_count >= max(sample_size + 1, 0.05 * m)
    return RegistrationResult(transform, converged, iters, inlier_count=max(best_count, 0))


def _axis_angle_rotation(w: np.ndarray) -> np.ndarray:
    theta = np.linalg.norm(w)
    if theta < 1e-12:
        return np.eye(3)
    k = w / theta
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(theta) * kx + (1.0 - np.cos(theta)) * (kx @ kx)


def regularized_covariances(points: np.ndarray, k: int = 20, eps: float = 1e-3) -> np.ndarray:
    """Plane-to-plane surface models: per-point k-NN covariance with its
    eigenvalues replaced by (eps, 1, 1), normal direction flattened."""
    index = build_index(PointCloud(points))
    _, nbr = index.knn_batch(points, min(k, len(points)))
    q = points[nbr]
    centered = q - q.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / q.shape[1]
    _, vecs = np.linalg.eigh(cov)
    scale = np.array([eps, 1.0, 1.0])
    return np.einsum("nij,j,nkj->nik", vecs, scale, vecs)


def _minimize_round(si, ri, m, r, t, trans_eps, objective_log, n_corr):
    """Gauss-Newton to convergence on one fixed (correspondence, weight) set.

    Each accepted step never increases the weighted SSE (step halving);
    returns the pose minimizing sum d' M d for this assignment.
    """
    f_old = None
    for _ in range(20):
        qi = si @ r.T + t
        d = ri - qi
        if f_old is None:
            f_old = float(np.einsum("ni,nij,nj->", d, m, d))
        # x = (dt, w): residual e(x) = d - (w x q + dt), so J = [-I | [q]x].
        jac = np.zeros((len(qi), 3, 6))
        jac[:, 0, 0] = jac[:, 1, 1] = jac[:, 2, 2] = -1.0
        jac[:, 0, 4] = -qi[:, 2]
        jac[:, 0, 5] = qi[:, 1]
        jac[:, 1, 3] = qi[:, 2]
        jac[:, 1, 5] = -qi[:, 0]
        jac[:, 2, 3] = -qi[:, 1]
        jac[:, 2, 4] = qi[:, 0]
        mj = np.matmul(m, jac)
        h = np.einsum("nij,nik->jk", jac, mj)
        g = np.einsum("nij,ni->j", mj, d)
        try:
            x = -np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            x = -np.linalg.lstsq(h, g, rcond=None)[0]

        accepted = None
        lam = 1.0
        for _ in range(12):
            dr = _axis_angle_rotation(lam * x[3:])
            r_new = dr @ r
            t_new = dr @ t + lam * x[:3]
            d_new = ri - (si @ r_new.T + t_new)
            f_new = float(np.einsum("ni,nij,nj->", d_new, m, d_new))
            if f_new <= f_old:
                accepted = (r_new, t_new, lam, f_new)
                break
            lam *= 0.5
        if accepted is None:
            break
        r, t, lam, f_new = accepted
        if objective_log is not None:
            objective_log.append((f_old, f_new, n_corr))
        f_old = f_new
        if np.linalg.norm(lam * x) < trans_eps:
            break
    return r, t, f_old


def _pose_delta_norm(r0, t0, r1, t1) -> float:
    """Norm of the 6-vector (translation delta, rotation-angle vector)
    taking the round's start pose to its end pose."""
    dr = r1 @ r0.T
    c = min(1.0, max(-1.0, (np.trace(dr) - 1.0) / 2.0))
    return float(np.hypot(np.linalg.norm(t1 - t0), np.arccos(c)))


def gicp(src_cloud: PointCloud, ref_cloud: PointCloud,
         init: RigidTransform | None = None, max_corr_dist: float = 50.0,
         max_iters: int = 64, trans_eps: float = 1e-4,
         cov_k: int = 20, cov_eps: float = 1e-3,
         objective_log: list | None = None) -> RegistrationResult:
    """Generalized ICP (plane-to-plane).

    Each round matches every transformed source point to its nearest
    reference neighbor within max_corr_dist, then minimizes the
    Mahalanobis-weighted residual sum (combined covariances, fixed for the
    round) by Gauss-Newton with step halving. Stops when a round moves the
    pose by less than trans_eps; convergence additionally requires >= 10
    final correspondences.

    objective_log, if given, receives (objective_before, objective_after,
    n_correspondences) per accepted Gauss-Newton step.
    """
    if len(src_cloud) < 10 or len(ref_cloud) < 10:
        raise ValueError("clouds must have at least 10 points")
    if init is None:
        init = RigidTransform.identity()
    src = src_cloud.points
    ref = ref_cloud.points
    cov_src = regularized_covariances(src, cov_k, cov_eps)
    cov_ref = regularized_covariances(ref, cov_k, cov_eps)
    ref_index = build_index(ref_cloud)

    r = init.rotation.copy()
    t = init.translation.copy()
    stopped_by_tol = False
    n_corr = 0
    objective = None
    it = 0

    for it in range(1, max_iters + 1):
        q = src @ r.T + t
        _, j = ref_index.nearest_within(q, max_corr_dist)
        mask = j >= 0
        n_corr = int(mask.sum())
        if n_corr == 0:
            if it == 1:
                return RegistrationResult(None, False, 0, residual=None)
            break

        si, ji = src[mask], j[mask]
        ri = ref[ji]
        m = np.linalg.inv(cov_ref[ji] + np.matmul(np.matmul(r, cov_src[mask]), r.T))
        r_new, t_new, objective = _minimize_round(si, ri, m, r, t, trans_eps,
                                                  objective_log, n_corr)
        moved = _pose_delta_norm(r, t, r_new, t_new)
        r, t = r_new, t_new
        if moved < trans_eps:
            stopped_by_tol = True
            break

    converged = stopped_by_tol and n_corr >= 10
    return RegistrationResult(RigidTransform(r, t), converged, it,
                              inlier_count=n_corr, residual=objective)


def write_results(rows: list[tuple[str, RegistrationResult | None]], path) -> None:
    """External-method interchange format: JSON lines {pair_id, success, R, t}."""
    with open(path, "w") as f:
        for pair_id, res in rows:
            doc: dict = {"pair_id": pair_id,
                         "success": bool(res is not None and res.converged)}
            if res is not None and res.transform is not None:
                doc["R"] = res.transform.rotation.reshape(9).tolist()
                doc["t"] = res.transform.translation.tolist()
            f.write(json.dumps(doc, sort_keys=True) + "\n")


def read_results(path) -> dict[str, tuple[bool, RigidTransform | None]]:
    """Transforms are re-orthonormalized: text round-trips may carry jitter."""
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        tf = None
        if doc.get("R") is not None and doc.get("t") is not None:
            tf = RigidTransform.from_arrays(np.asarray(doc["R"], dtype=np.float64).reshape(3, 3),
                                            doc["t"])
        success = bool(doc["success"]) and tf is not None
        out[doc["pair_id"]] = (success, tf)
    return out
