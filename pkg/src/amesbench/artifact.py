"""Binary model artifacts (format version 1).

Layout, all integers little-endian::

    b"AMESBNCH"  u32 version
    section*     u16 name_len, name (ascii), u64 payload_len, payload
    checksum     a final section named "checksum" holding sha256 of every byte before it

Sections, in order: ``header``, ``preprocessing``, ``model``, ``checksum``.
Each payload is ``u64 json_len, json (utf-8, sorted keys), u32 n_arrays``
followed by ``u16 ndim, u64 dims[ndim], float64 data`` per array; the JSON
refers to array ``i`` as ``{"$array": i}``. Python floats in JSON keep their
shortest round-trip repr and tree thresholds/leaves are 17-digit text, so a
reloaded model predicts bit-identically.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import boost, cart, data, forest, linreg, mlp, models, svr

MAGIC = b"AMESBNCH"
VERSION = 1
SECTIONS = ("header", "preprocessing", "model")


class ArtifactError(ValueError):
    pass


class VersionError(ArtifactError):
    pass


class ChecksumError(ArtifactError):
    pass


@dataclass(eq=False)
class ModelArtifact:
    kind: str
    estimator: models.Estimator
    preprocessing: dict          # encoder record, schema digest, target transform
    metadata: dict = field(default_factory=dict)   # seed, timestamp, metrics, setup
    version: int = VERSION

    @property
    def encoder(self):
        return data.Encoder.from_record(self.preprocessing["encoder"])

    def predict(self, X):
        return self.estimator.predict(X)


# ---- generic payload packing ----------------------------------------------

def _externalize(obj, arrays):
    if isinstance(obj, np.ndarray):
        arrays.append(np.ascontiguousarray(obj, dtype="<f8"))
        return {"$array": len(arrays) - 1}
    if isinstance(obj, dict):
        return {str(k): _externalize(v, arrays) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_externalize(v, arrays) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _internalize(obj, arrays):
    if isinstance(obj, dict):
        if set(obj) == {"$array"}:
            return arrays[obj["$array"]]
        return {k: _internalize(v, arrays) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_internalize(v, arrays) for v in obj]
    return obj


def pack_payload(obj):
    arrays = []
    text = json.dumps(_externalize(obj, arrays), sort_keys=True, allow_nan=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(struct.pack("<Q", len(text)))
    buf.write(text)
    buf.write(struct.pack("<I", len(arrays)))
    for a in arrays:
        buf.write(struct.pack("<H", a.ndim))
        buf.write(struct.pack(f"<{a.ndim}Q", *a.shape))
        buf.write(a.tobytes(order="C"))
    return buf.getvalue()


def _take(blob, pos, n, what):
    if pos + n > len(blob):
        raise ArtifactError(f"truncated {what}")
    return blob[pos:pos + n], pos + n


def unpack_payload(blob):
    raw, pos = _take(blob, 0, 8, "payload header")
    (jlen,) = struct.unpack("<Q", raw)
    text, pos = _take(blob, pos, jlen, "payload json")
    raw, pos = _take(blob, pos, 4, "array count")
    (count,) = struct.unpack("<I", raw)
    arrays = []
    for _ in range(count):
        raw, pos = _take(blob, pos, 2, "array rank")
        (ndim,) = struct.unpack("<H", raw)
        raw, pos = _take(blob, pos, 8 * ndim, "array shape")
        shape = struct.unpack(f"<{ndim}Q", raw)
        size = int(np.prod(shape)) if ndim else 1
        raw, pos = _take(blob, pos, 8 * size, "array data")
        arrays.append(np.frombuffer(raw, dtype="<f8").astype(float).reshape(shape))
    if pos != len(blob):
        raise ArtifactError("trailing bytes in payload")
    return _internalize(json.loads(text.decode("utf-8")), arrays)


# ---- model <-> record ------------------------------------------------------

def model_to_record(est):
    m = est.model
    if est.kind == "linreg":
        body = {"intercept": m.intercept, "coefficients": m.coefficients}
    elif est.kind == "forest":
        body = {"trees": [cart.tree_to_record(t) for t in m.trees]}
    elif est.kind == "boost":
        body = {"base_score": m.base_score, "trees": [cart.tree_to_record(t) for t in m.trees],
                "importance_raw": m.importance_raw, "feature_names": list(m.feature_names),
                "loss_trace": list(m.loss_trace)}
    elif est.kind == "svr":
        body = {"support_rows": m.support_rows, "dual_coefs": m.dual_coefs, "bias": m.bias,
                "kernel": m.kernel, "gamma": m.gamma, "C": m.C, "converged": m.converged,
                "n_iter": m.n_iter, "max_violation": m.max_violation}
    elif est.kind == "mlp":
        body = {"weights": list(m.weights), "biases": list(m.biases),
                "loss_trace": list(m.loss_trace), "converged": m.converged, "n_iter": m.n_iter}
    else:
        raise ArtifactError(f"unknown model kind {est.kind!r}")
    scaler = None
    if est.x_scaler is not None:
        scaler = {"means": est.x_scaler.means, "stds": est.x_scaler.stds}
    return {"kind": est.kind, "config": {k: _plain(v) for k, v in est.config.items()},
            "x_scaler": scaler, "y_center": est.y_center, "y_scale": est.y_scale, "body": body}


def _plain(v):
    return list(v) if isinstance(v, tuple) else v


def model_from_record(rec):
    kind, body = rec["kind"], rec["body"]
    cfg = models.family(kind).config(
        {k: (tuple(v) if isinstance(v, list) else v) for k, v in rec["config"].items()})
    if kind == "linreg":
        model = linreg.LinearModel(float(body["intercept"]), body["coefficients"])
    elif kind == "forest":
        model = forest.ForestModel(tuple(cart.tree_from_record(t) for t in body["trees"]),
                                   models._forest_params(cfg))
    elif kind == "boost":
        model = boost.BoostModel(float(body["base_score"]),
                                 tuple(cart.tree_from_record(t) for t in body["trees"]),
                                 models._boost_params(cfg), body["importance_raw"],
                                 tuple(body["feature_names"]), loss_trace=tuple(body["loss_trace"]))
    elif kind == "svr":
        model = svr.SvrModel(body["support_rows"], body["dual_coefs"], float(body["bias"]),
                             body["kernel"], float(body["gamma"]), float(body["C"]),
                             bool(body["converged"]), int(body["n_iter"]),
                             float(body["max_violation"]))
    elif kind == "mlp":
        model = mlp.MlpModel(tuple(body["weights"]), tuple(body["biases"]), mlp.MlpParams(**cfg),
                             tuple(body["loss_trace"]), bool(body["converged"]), int(body["n_iter"]))
    else:
        raise ArtifactError(f"unknown model kind {kind!r}")
    scaler = None
    if rec["x_scaler"] is not None:
        scaler = data.Scaler(rec["x_scaler"]["means"], rec["x_scaler"]["stds"])
    return models.Estimator(kind, cfg, model, scaler, float(rec["y_center"]), float(rec["y_scale"]))


# ---- files -----------------------------------------------------------------

def _section(name, payload):
    nb = name.encode("ascii")
    return struct.pack("<H", len(nb)) + nb + struct.pack("<Q", len(payload)) + payload


def to_bytes(art):
    header = {"format_version": VERSION, "kind": art.kind, "metadata": art.metadata}
    body = MAGIC + struct.pack("<I", VERSION)
    body += _section("header", pack_payload(header))
    body += _section("preprocessing", pack_payload(art.preprocessing))
    body += _section("model", pack_payload(model_to_record(art.estimator)))
    return body + _section("checksum", hashlib.sha256(body).digest())


def from_bytes(blob):
    if len(blob) < 12 or blob[:8] != MAGIC:
        raise ArtifactError("not a model artifact (bad magic)")
    (version,) = struct.unpack("<I", blob[8:12])
    if version != VERSION:
        raise VersionError(f"artifact format version {version} is not supported (expected {VERSION})")
    pos, sections = 12, {}
    while True:
        start = pos
        try:
            raw, pos = _take(blob, pos, 2, "section name length")
            (nlen,) = struct.unpack("<H", raw)
            name, pos = _take(blob, pos, nlen, "section name")
            raw, pos = _take(blob, pos, 8, "section length")
            (plen,) = struct.unpack("<Q", raw)
            payload, pos = _take(blob, pos, plen, "section payload")
        except ArtifactError as exc:
            raise ChecksumError(f"artifact is truncated or corrupted: {exc}") from None
        name = name.decode("ascii", errors="replace")
        if name == "checksum":
            if payload != hashlib.sha256(blob[:start]).digest():
                raise ChecksumError("checksum mismatch: artifact is corrupted")
            if pos != len(blob):
                raise ChecksumError("bytes after checksum section")
            break
        sections[name] = payload
    missing = [s for s in SECTIONS if s not in sections]
    if missing:
        raise ArtifactError(f"missing sections: {missing}")
    header = unpack_payload(sections["header"])
    pre = unpack_payload(sections["preprocessing"])
    est = model_from_record(unpack_payload(sections["model"]))
    return ModelArtifact(header["kind"], est, pre, header["metadata"], version)


def save_model(art, path):
    blob = to_bytes(art)
    with open(path, "wb") as fh:
        fh.write(blob)
    return path


def load_model(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
