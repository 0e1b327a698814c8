"""Binary corpus and checkpoint formats, CSV/JSON artifacts, atomic writes.

All binary data is little-endian. Layouts are documented in docs/formats.md
and docs/checkpoint.md.
"""
from __future__ import annotations

import csv
import io as _io
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .neural import PARAM_NAMES, WeightSet, param_shapes
from .task import Trajectory
from .transforms import TransformSpec, compose

CORPUS_MAGIC = b"RLCORPUS"
CKPT_MAGIC = b"RLCKPT\x00\x00"
CORPUS_VERSION = 2
CKPT_VERSION = 1
TABLE_VERSION = 1
CONDITION_CODES = {"rot": 0, "rotplus": 1}

_CORPUS_HEADER = struct.Struct("<8sIIQIId64s")
_CKPT_HEADER = struct.Struct("<8sIIIIdddQ64sI")


class FormatError(ValueError):
    pass


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _hash_field(config_hash: str) -> bytes:
    raw = (config_hash or "").encode("ascii")
    if len(raw) > 64:
        raise FormatError("config hash longer than 64 characters")
    return raw.ljust(64, b"\x00")


def _f8(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


# -- corpus -------------------------------------------------------------------
def encode_corpus(corpus, config_hash: str = "") -> bytes:
    trajectories = list(corpus.trajectories)
    steps = trajectories[0].steps if trajectories else 0
    if any(tr.steps != steps for tr in trajectories):
        raise FormatError("all trajectories in a corpus file must share a length")
    buf = _io.BytesIO()
    buf.write(_CORPUS_HEADER.pack(CORPUS_MAGIC, CORPUS_VERSION, CONDITION_CODES[corpus.condition],
                                  int(corpus.seed), len(trajectories), steps, float(corpus.dt),
                                  _hash_field(config_hash)))
    for tr in trajectories:
        spec = tr.transform.spec if tr.transform is not None else TransformSpec()
        buf.write(_f8(spec.as_array()))
        buf.write(_f8(tr.goal))
        buf.write(_f8(tr.actions))
        buf.write(_f8(tr.cursors))
        buf.write(_f8(tr.restarts))
    return buf.getvalue()


def decode_corpus(data: bytes):
    from .experiment import Corpus

    if len(data) < _CORPUS_HEADER.size:
        raise FormatError("truncated corpus header")
    magic, version, code, seed, count, steps, dt, chash = _CORPUS_HEADER.unpack_from(data)
    if magic != CORPUS_MAGIC:
        raise FormatError("not a corpus file")
    if version != CORPUS_VERSION:
        raise FormatError(f"unsupported corpus version {version}")
    per = 4 + 2 + 2 * steps + 2 * (steps + 1) + steps
    body = np.frombuffer(data, dtype="<f8", offset=_CORPUS_HEADER.size)
    if body.size != count * per:
        raise FormatError(f"corpus body has {body.size} values, expected {count * per}")
    body = body.reshape(count, per) if count else body.reshape(0, per)
    condition = {v: k for k, v in CONDITION_CODES.items()}[code]
    trajectories = []
    for row in body:
        spec = TransformSpec(*(float(v) for v in row[:4]))
        actions = row[6:6 + 2 * steps].reshape(steps, 2)
        cursors = row[6 + 2 * steps:8 + 4 * steps].reshape(steps + 1, 2)
        flags = row[8 + 4 * steps:]
        if not np.all((flags == 0.0) | (flags == 1.0)) or (steps and flags[0] != 0.0):
            raise FormatError("restart flags must be 0 or 1 and step 0 cannot restart")
        trajectories.append(Trajectory(cursors.copy(), actions.copy(), row[4:6].copy(), compose(spec),
                                       flags == 1.0))
    corpus = Corpus(condition, int(seed), trajectories, float(dt))
    corpus.config_hash = chash.rstrip(b"\x00").decode("ascii")
    return corpus


def save_corpus(path, corpus, config_hash: str = "") -> None:
    atomic_write_bytes(path, encode_corpus(corpus, config_hash))


def load_corpus(path):
    return decode_corpus(Path(path).read_bytes())


def corpus_to_csv(corpus) -> str:
    out = _io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["trajectory", "step", "rotation", "shear", "scale_x", "scale_y",
                "goal_x", "goal_y", "cursor_x", "cursor_y", "action_0", "action_1", "restart"])
    for i, tr in enumerate(corpus.trajectories):
        spec = tr.transform.spec if tr.transform is not None else TransformSpec()
        for t in range(tr.steps + 1):
            a = tr.actions[t] if t < tr.steps else (float("nan"), float("nan"))
            restart = int(tr.restarts[t]) if t < tr.steps else 0
            w.writerow([i, t, spec.rotation, spec.shear, spec.scale_x, spec.scale_y,
                        *map(repr, map(float, tr.goal)), *map(repr, map(float, tr.cursors[t])),
                        *map(repr, map(float, a)), restart])
    return out.getvalue()


# -- checkpoints --------------------------------------------------------------
def encode_checkpoint(model, config_hash: str = "") -> bytes:
    w = model.weights_
    meta = json.dumps(getattr(model, "metadata_", {}) | {"params": _jsonable_params(model)},
                      sort_keys=True).encode("utf-8")
    header = _CKPT_HEADER.pack(CKPT_MAGIC, CKPT_VERSION, w.n_in, w.hidden, w.n_out,
                               float(model.cursor_scale), float(model.action_scale),
                               float(model.target_scale), int(model.random_state),
                               _hash_field(config_hash), len(meta))
    return header + meta + b"".join(_f8(v) for _, v in w.items())


def _jsonable_params(model) -> dict:
    return {k: v for k, v in model.get_params().items() if isinstance(v, (int, float, str, bool))}


def decode_checkpoint(data: bytes):
    from .model import RecurrentForwardModel, TrainReport

    if len(data) < _CKPT_HEADER.size:
        raise FormatError("truncated checkpoint header")
    (magic, version, n_in, hidden, n_out, cscale, ascale, tscale, seed, chash,
     meta_len) = _CKPT_HEADER.unpack_from(data)
    if magic != CKPT_MAGIC:
        raise FormatError("not a checkpoint file")
    if version != CKPT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    off = _CKPT_HEADER.size
    meta = json.loads(data[off:off + meta_len].decode("utf-8"))
    off += meta_len
    params = {}
    for name in PARAM_NAMES:
        shape = param_shapes(n_in, hidden, n_out)[name]
        size = int(np.prod(shape))
        if off + 8 * size > len(data):
            raise FormatError("truncated checkpoint body")
        params[name] = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(shape).copy()
        off += 8 * size
    if off != len(data):
        raise FormatError("trailing bytes after checkpoint body")
    ctor = meta.pop("params", {})
    ctor.update(hidden_size=hidden, cursor_scale=cscale, action_scale=ascale,
                target_scale=tscale, random_state=int(seed))
    model = RecurrentForwardModel(**ctor)
    model.weights_ = WeightSet(params)
    model.n_features_in_ = n_in
    model.metadata_ = meta
    model.train_report_ = TrainReport(final_error_cm=float(meta.get("train_error_cm", float("nan"))),
                                      epochs_run=int(meta.get("epochs_run", 0)))
    model.config_hash_ = chash.rstrip(b"\x00").decode("ascii")
    return model


def save_checkpoint(path, model, config_hash: str = "") -> None:
    atomic_write_bytes(path, encode_checkpoint(model, config_hash))


def load_checkpoint(path):
    return decode_checkpoint(Path(path).read_bytes())


# -- tables -------------------------------------------------------------------
def provenance_line(config_hash: str, root_seed: int, **extra) -> str:
    fields = {"format_version": TABLE_VERSION, "config_hash": config_hash, "root_seed": root_seed}
    fields.update(extra)
    return "# " + " ".join(f"{k}={v}" for k, v in fields.items())


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def rows_to_csv(rows, columns=None, provenance: str | None = None) -> str:
    rows = list(rows)
    columns = list(columns or (rows[0].keys() if rows else []))
    out = _io.StringIO()
    if provenance:
        out.write(provenance + "\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return out.getvalue()


def write_csv(path, rows, columns=None, provenance: str | None = None) -> None:
    atomic_write_text(path, rows_to_csv(rows, columns, provenance))


def read_csv(path) -> tuple[list[dict], dict]:
    """Rows (numeric fields converted) and the provenance fields, if any."""
    text = Path(path).read_text()
    lines = text.splitlines()
    prov = {}
    if lines and lines[0].startswith("#"):
        for item in lines[0][1:].split():
            k, _, v = item.partition("=")
            prov[k] = v
        lines = lines[1:]
    rows = []
    for r in csv.DictReader(lines):
        rows.append({k: _parse(v) for k, v in r.items()})
    return rows, prov


def _parse(v: str):
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")
