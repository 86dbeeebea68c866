"""Artifact files: atomic writes, CSV/JSON schemas and parameter checkpoints.

Numbers are written locale-independently with 17 significant digits so a
float survives a text round trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .nn import MlpSpec, Params
from . import autodiff as ad

SCHEMA_VERSION = 1
CHECKPOINT_FORMAT = "gdflab-checkpoint"
CHECKPOINT_VERSION = 1
SAMPLES_HEADER = ("iter", "x", "y")
SWEEP_HEADER = ("param", "estimate", "std_error", "exact")


class SchemaError(ValueError):
    pass


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        # mkstemp creates 0600; give the artifact ordinary umask permissions
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if not np.isfinite(f):
            raise SchemaError(f"non-finite value {f} cannot be written to JSON")
        return f
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path: Path, obj) -> None:
    atomic_write_text(path, dumps_json(obj))


def read_json(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_samples_csv(path: Path, dumps: Sequence[tuple[int, np.ndarray]]) -> None:
    """Rows ``iter,x,y`` for every generated sample of every snapshot."""
    def rows():
        for it, samples in dumps:
            for x, y in samples:
                yield it, x, y
    atomic_write_text(path, _csv_text(SAMPLES_HEADER, rows()))


def read_samples_csv(path: Path) -> dict[int, np.ndarray]:
    """Samples grouped by iteration; raises :class:`SchemaError` on bad input."""
    groups: dict[int, list[tuple[float, float]]] = {}
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != SAMPLES_HEADER:
                raise SchemaError(f"{path}: expected header {','.join(SAMPLES_HEADER)}, got {header}")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 3:
                    raise SchemaError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
                try:
                    it, x, y = int(row[0]), float(row[1]), float(row[2])
                except ValueError as exc:
                    raise SchemaError(f"{path}:{lineno}: {exc}") from None
                if not (np.isfinite(x) and np.isfinite(y)):
                    raise SchemaError(f"{path}:{lineno}: non-finite sample")
                groups.setdefault(it, []).append((x, y))
    except (OSError, UnicodeDecodeError) as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from None
    if not groups:
        raise SchemaError(f"{path}: no samples")
    return {k: np.array(v) for k, v in sorted(groups.items())}


def write_sweep_csv(path: Path, rows: Sequence[tuple[float, object]]) -> None:
    """Rows ``param,estimate,std_error,exact`` from (param, ProbabilityEstimate) pairs."""
    atomic_write_text(path, _csv_text(
        SWEEP_HEADER, ((p, e.estimate, e.std_error, e.exact) for p, e in rows)))


def save_checkpoint(path: Path, spec: MlpSpec, params: Params, seed: int, step: int) -> None:
    """Write a versioned ``.npz``: a JSON header plus one float64 array per parameter."""
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "spec": spec.to_dict(),
        "seed": int(seed),
        "step": int(step),
        "names": [name for name, _ in params.named()],
    }
    buf = io.BytesIO()
    arrays = {name: p.value for name, p in params.named()}
    np.savez(buf, header=np.array(json.dumps(header, sort_keys=True)), **arrays)
    atomic_write_bytes(path, buf.getvalue())


def load_checkpoint(path: Path) -> tuple[MlpSpec, Params, dict]:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise SchemaError(f"{path}: not a checkpoint file")
        if header.get("version") != CHECKPOINT_VERSION:
            raise SchemaError(f"{path}: unsupported checkpoint version {header.get('version')}")
        spec = MlpSpec.from_dict(header["spec"])
        values = [data[name] for name in header["names"]]
    params = Params([ad.leaf(v) for v in values[0::2]], [ad.leaf(v) for v in values[1::2]])
    expected = list(zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]))
    if [w.shape for w in params.weights] != expected:
        raise SchemaError(f"{path}: weight shapes do not match the stored spec")
    return spec, params, header
