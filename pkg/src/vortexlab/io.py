"""Persistence: CSV series, field checkpoints and run manifests."""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .fields import WaveField

CHECKPOINT_FORMAT = "vortexlab-field-v1"


def fmt(v) -> str:
    """Floats with 17 significant digits; everything else via str."""
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def csv_text(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def read_csv(path) -> tuple[list, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(rows[0]))


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def dump_json(obj) -> str:
    return json.dumps(_to_jsonable(obj), indent=2, sort_keys=True) + "\n"


# ------------------------------------------------------------- checkpoints


def save_field(f: WaveField, stem, provenance: dict | None = None) -> tuple[Path, Path]:
    """Write ``stem.bin`` (interleaved little-endian re/im doubles, row-major,
    first index along x) and ``stem.json`` (grid spec, eps, degree, hash)."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(f.values).astype("<c16").tobytes()
    binp = stem.with_suffix(".bin")
    binp.write_bytes(data)
    side = {
        "format": CHECKPOINT_FORMAT,
        "n": f.n, "half_width": f.half_width, "center": list(f.center),
        "h": f.h, "eps": f.eps, "degree": f.degree,
        "layout": "row-major, values[i, j] at (x_i, y_j), x_i = cx - L + (i + 1/2) h",
        "sha256": sha256_bytes(data),
        "provenance": provenance or {},
    }
    jp = stem.with_suffix(".json")
    jp.write_text(dump_json(side))
    return binp, jp


def load_field(stem, verify: bool = True) -> tuple[WaveField, dict]:
    stem = Path(stem)
    side = json.loads(stem.with_suffix(".json").read_text())
    if side.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unknown checkpoint format {side.get('format')!r}")
    data = stem.with_suffix(".bin").read_bytes()
    if verify and sha256_bytes(data) != side["sha256"]:
        raise ValueError("checkpoint payload hash mismatch")
    n = int(side["n"])
    vals = np.frombuffer(data, dtype="<c16").reshape(n, n).astype(complex)
    f = WaveField(vals, side["half_width"], side["eps"], degree=side["degree"],
                  center=tuple(side["center"]), allow_underresolved=True)
    return f, side


def save_vorticity(state, stem, provenance: dict | None = None) -> tuple[Path, Path]:
    """Euler snapshot: little-endian float64 block plus a JSON sidecar."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(state.omega).astype("<f8").tobytes()
    binp = stem.with_suffix(".bin")
    binp.write_bytes(data)
    side = {"format": "vortexlab-vorticity-v1", "n": state.n, "length": state.length,
            "origin": list(state.origin), "time": state.time,
            "layout": "row-major, omega[i, j] at origin + (i h, j h), periodic",
            "sha256": sha256_bytes(data), "provenance": provenance or {}}
    jp = stem.with_suffix(".json")
    jp.write_text(dump_json(side))
    return binp, jp


def load_vorticity(stem, verify: bool = True):
    from .euler import EulerState

    stem = Path(stem)
    side = json.loads(stem.with_suffix(".json").read_text())
    if side.get("format") != "vortexlab-vorticity-v1":
        raise ValueError(f"unknown snapshot format {side.get('format')!r}")
    data = stem.with_suffix(".bin").read_bytes()
    if verify and sha256_bytes(data) != side["sha256"]:
        raise ValueError("snapshot payload hash mismatch")
    n = int(side["n"])
    w = np.frombuffer(data, dtype="<f8").reshape(n, n).copy()
    return EulerState(w, side["length"], side["time"], tuple(side["origin"])), side


# ---------------------------------------------------------------- manifest


def code_version() -> str:
    try:
        from importlib.metadata import version
        return version("vortexlab")
    except Exception:  # not installed, running from a checkout
        from . import __version__
        return __version__


@dataclass
class RunManifest:
    scenario: str
    config: dict
    code_version: str = field(default_factory=code_version)
    gamma: float | None = None
    gamma_error: float | None = None
    scales: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    status: str = "ok"
    flags: list = field(default_factory=list)
    wall_clock: float = 0.0
    files: dict = field(default_factory=dict)
    environment: dict = field(default_factory=lambda: {
        "python": platform.python_version(), "numpy": np.__version__})

    def add_file(self, path, root=None):
        path = Path(path)
        key = str(path.relative_to(root)) if root else path.name
        self.files[key] = sha256_file(path)

    def to_dict(self) -> dict:
        return _to_jsonable(asdict(self))

    def write(self, out_dir) -> Path:
        p = Path(out_dir) / "manifest.json"
        p.write_text(dump_json(self.to_dict()))
        return p

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


def write_text(out_dir, name: str, text: str, manifest: RunManifest | None = None) -> Path:
    p = Path(out_dir) / name
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)
    if manifest is not None:
        manifest.add_file(p, root=out_dir)
    return p
