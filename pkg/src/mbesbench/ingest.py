"""Ping-tensor I/O, submap assembly, and dataset-split manifests.

The on-disk "MBPT" format is bit-exact: a 16-byte header (magic "MBPT",
version u32 LE, n_pings u32 LE, n_beams u32 LE) followed by
n_pings * n_beams * 3 IEEE-754 float64 LE, ping-major, (x, y, z) order.
Invalid beams are NaN in all three components. A CSV fallback
(ping_idx, beam_idx, x, y, z with a header row) exists for hand-editable
desk tests. Point-cloud files reuse MBPT with n_beams = 1.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import PointCloud

MBPT_MAGIC = b"MBPT"
MBPT_VERSION = 1
_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class PingTensor:
    """Raw survey data: hits (n_pings, n_beams, 3) in meters, NaN = dropout."""

    hits: np.ndarray

    def __post_init__(self):
        hits = np.ascontiguousarray(self.hits, dtype=np.float64)
        if hits.ndim != 3 or hits.shape[2] != 3 or hits.shape[0] < 1 or hits.shape[1] < 1:
            raise ValueError("hits must have shape (n_pings >= 1, n_beams >= 1, 3)")
        nan = np.isnan(hits)
        partial = nan.any(axis=2) & ~nan.all(axis=2)
        if partial.any() or np.isinf(hits).any():
            raise ValueError("invalid sample")
        hits.setflags(write=False)
        object.__setattr__(self, "hits", hits)

    @property
    def n_pings(self) -> int:
        return self.hits.shape[0]

    @property
    def n_beams(self) -> int:
        return self.hits.shape[1]

    @property
    def valid_mask(self) -> np.ndarray:
        """(n_pings, n_beams) bool, True where the beam hit is usable."""
        return ~np.isnan(self.hits[:, :, 0])


def write_ping_tensor(tensor: PingTensor, path) -> None:
    data = _HEADER.pack(MBPT_MAGIC, MBPT_VERSION, tensor.n_pings, tensor.n_beams)
    data += tensor.hits.astype("<f8").tobytes()
    Path(path).write_bytes(data)


def read_ping_tensor(path) -> PingTensor:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("unrecognized format")
    magic, version, n_pings, n_beams = _HEADER.unpack_from(raw)
    if magic != MBPT_MAGIC or version != MBPT_VERSION:
        raise ValueError("unrecognized format")
    expected = _HEADER.size + n_pings * n_beams * 3 * 8
    if len(raw) != expected:
        raise ValueError("size mismatch")
    hits = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    return PingTensor(hits.reshape(n_pings, n_beams, 3).astype(np.float64))


def write_ping_tensor_csv(tensor: PingTensor, path) -> None:
    """One row per beam (including NaN rows, written as 'nan')."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["ping_idx", "beam_idx", "x", "y", "z"])
        for p in range(tensor.n_pings):
            for b in range(tensor.n_beams):
                x, y, z = tensor.hits[p, b]
                w.writerow([p, b, repr(float(x)), repr(float(y)), repr(float(z))])


def read_ping_tensor_csv(path) -> PingTensor:
    """Shape is inferred from the largest indices; absent rows become NaN."""
    rows = []
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r, None)
        if header is None or [h.strip() for h in header[:2]] != ["ping_idx", "beam_idx"]:
            raise ValueError("unrecognized format")
        for line in r:
            if not line:
                continue
            rows.append((int(line[0]), int(line[1]),
                         float(line[2]), float(line[3]), float(line[4])))
    if not rows:
        raise ValueError("empty csv")
    n_pings = max(p for p, *_ in rows) + 1
    n_beams = max(b for _, b, *_ in rows) + 1
    hits = np.full((n_pings, n_beams, 3), np.nan)
    for p, b, x, y, z in rows:
        hits[p, b] = (x, y, z)
    return PingTensor(hits)


def write_cloud(cloud: PointCloud, path) -> None:
    """Point-cloud file: MBPT with one beam per ping."""
    data = _HEADER.pack(MBPT_MAGIC, MBPT_VERSION, len(cloud), 1)
    data += cloud.points.astype("<f8").tobytes()
    Path(path).write_bytes(data)


def read_cloud(path) -> PointCloud:
    tensor = read_ping_tensor(path)
    if tensor.n_beams != 1:
        raise ValueError("not a cloud file (n_beams != 1)")
    return PointCloud(tensor.hits.reshape(-1, 3))


@dataclass(frozen=True)
class Submap:
    """Fixed window of consecutive pings, recentered at its centroid.

    centroid_offset is the subtracted centroid, so absolute positions are
    cloud.points + centroid_offset.
    """

    id: int
    start: int
    end: int
    cloud: PointCloud
    centroid_offset: np.ndarray

    def __post_init__(self):
        off = np.asarray(self.centroid_offset, dtype=np.float64).reshape(3)
        off.setflags(write=False)
        object.__setattr__(self, "centroid_offset", off)


def build_submaps(tensor: PingTensor, window: int = 100, step: int = 20) -> list[Submap]:
    """Submaps at ping offsets 0, step, 2*step, ... while offset + window <= n_pings.

    Only valid (non-NaN) beam hits become points; each submap is recentered
    by subtracting its centroid. Consecutive submaps share window - step pings.
    """
    if step < 1:
        raise ValueError("step must be >= 1")
    if window > tensor.n_pings:
        raise ValueError("survey too short")
    valid = tensor.valid_mask
    out = []
    sid = 0
    for start in range(0, tensor.n_pings - window + 1, step):
        end = start + window
        block = tensor.hits[start:end]
        pts = block[valid[start:end]]
        if pts.shape[0] > 0:
            centroid = pts.mean(axis=0)
            pts = pts - centroid
        else:
            centroid = np.zeros(3)
        out.append(Submap(sid, start, end, PointCloud(pts), centroid))
        sid += 1
    return out


@dataclass(frozen=True)
class DatasetManifest:
    """One split's submaps plus the provenance needed to regenerate them."""

    split: str
    window: int
    step: int
    submaps: tuple[Submap, ...]
    source: str | None = None
    seed: int | None = None

    @property
    def ids(self) -> list[int]:
        return [s.id for s in self.submaps]


def split_dataset(submaps: list[Submap], boundaries: dict[str, tuple[int, int]],
                  window: int = 100, step: int = 20,
                  source: str | None = None, seed: int | None = None) -> list[DatasetManifest]:
    """Assign each submap to the split whose ping interval [lo, hi) contains it.

    Submaps straddling a boundary land in no split (prevents leakage).
    """
    items = sorted(boundaries.items())
    for (na, (a0, a1)), (nb, (b0, b1)) in zip(items, items[1:]):
        if max(a0, b0) < min(a1, b1):
            raise ValueError(f"overlapping split boundaries: {na}, {nb}")
    out = []
    for name, (lo, hi) in boundaries.items():
        if lo >= hi:
            raise ValueError(f"empty split interval: {name}")
        chosen = tuple(s for s in submaps if lo <= s.start and s.end <= hi)
        out.append(DatasetManifest(name, window, step, chosen, source, seed))
    return out


def write_manifest(manifest: DatasetManifest, path) -> None:
    doc = {
        "split": manifest.split,
        "window": manifest.window,
        "step": manifest.step,
        "submap": [
            {"id": s.id, "start": s.start, "end": s.end,
             "centroid_offset": [float(v) for v in s.centroid_offset]}
            for s in manifest.submaps
        ],
        "source": manifest.source,
        "seed": manifest.seed,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_manifest(path, tensor: PingTensor | None = None) -> DatasetManifest:
    """Load a manifest; with a tensor, rebuild each submap's cloud from it."""
    doc = json.loads(Path(path).read_text())
    submaps = []
    valid = tensor.valid_mask if tensor is not None else None
    for s in doc["submap"]:
        centroid = np.asarray(s["centroid_offset"], dtype=np.float64)
        if tensor is None:
            cloud = PointCloud(np.zeros((0, 3)))
        else:
            block = tensor.hits[s["start"]:s["end"]]
            pts = block[valid[s["start"]:s["end"]]] - centroid
            cloud = PointCloud(pts)
        submaps.append(Submap(s["id"], s["start"], s["end"], cloud, centroid))
    return DatasetManifest(doc["split"], doc["window"], doc["step"], tuple(submaps),
                           doc.get("source"), doc.get("seed"))
