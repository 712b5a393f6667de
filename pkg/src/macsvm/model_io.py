"""Model persistence: self-describing UTF-8 text, hex-encoded doubles.

Every real number is written with ``float.hex()`` so save -> load reproduces
each field bit for bit.  The file carries no timestamps or machine info:
retraining with identical flags and seed must produce a byte-identical file.

Layout is line-oriented, one ``name value...`` record per line, fixed order.
Solver diagnostics (per-machine epochs, gap traces) are not persisted; the
run-level metadata dict is echoed as tagged JSON.
"""

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import ParseError
from .features import RbfCenters, RbfMapParams
from .svm import BinarySvm, OvaSvm
from .training import TrainedModel

FORMAT_VERSION = 1


@dataclass
class ModelFile:
    model: TrainedModel
    labels: list                              # original label strings, code order
    config: dict                              # training config echo
    standardize_mean: Optional[np.ndarray] = None
    standardize_scale: Optional[np.ndarray] = None


def _fhex(x) -> str:
    return float(x).hex()


def _vec(xs) -> str:
    return " ".join(_fhex(v) for v in np.asarray(xs, dtype=np.float64).ravel())


def _tag_floats(obj):
    # floats become "f:<hex>" strings so the JSON echo is lossless and stable
    if isinstance(obj, float):
        return "f:" + obj.hex()
    if isinstance(obj, dict):
        return {k: _tag_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_tag_floats(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return "f:" + float(obj).hex()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _untag_floats(obj):
    if isinstance(obj, str) and obj.startswith("f:"):
        return float.fromhex(obj[2:])
    if isinstance(obj, dict):
        return {k: _untag_floats(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_untag_floats(v) for v in obj]
    return obj


def _dumps(obj) -> str:
    return json.dumps(_tag_floats(obj), sort_keys=True, separators=(",", ":"))


def save_model(mf: ModelFile, path: str) -> None:
    m = mf.model
    W = m.map.W
    L, M = W.shape
    K = m.svms.class_count
    linear = m.map.centers is None
    V, bc = m.collapsed

    lines = []
    put = lines.append
    put(f"format_version {FORMAT_VERSION}")
    put(f"class_count {K}")
    put(f"latent_dim {L}")
    input_dim = M if linear else m.map.centers.C.shape[1]
    put(f"input_dim {input_dim}")
    put(f"linear_f {1 if linear else 0}")
    put(f"basis_count {M}")
    put(f"lam {_fhex(m.map.lam)}")
    if not linear:
        put(f"sigma {_fhex(m.map.centers.sigma)}")
    put(f"labels {json.dumps([str(s) for s in mf.labels])}")
    has_std = mf.standardize_mean is not None
    put(f"standardize {1 if has_std else 0}")
    if has_std:
        put(f"standardize_mean {_vec(mf.standardize_mean)}")
        put(f"standardize_scale {_vec(mf.standardize_scale)}")
    if not linear:
        for row in m.map.centers.C:
            put(f"center {_vec(row)}")
    for row in W:
        put(f"map_row {_vec(row)}")
    for k, mach in enumerate(m.svms.machines):
        put(f"svm {k} C {_fhex(mach.C)} b {_fhex(mach.b)}")
        put(f"svm_w {_vec(mach.w)}")
    for row in V:
        put(f"collapsed_row {_vec(row)}")
    put(f"collapsed_b {_vec(bc)}")
    put(f"config {_dumps(mf.config)}")
    put(f"metadata {_dumps(m.metadata)}")
    put("end")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


class _Reader:
    def __init__(self, path):
        with open(path, "r", encoding="utf-8") as fh:
            self.lines = fh.read().splitlines()
        self.i = 0

    def take(self, name: str) -> str:
        if self.i >= len(self.lines):
            raise ParseError(f"model file truncated: expected '{name}' record")
        line = self.lines[self.i]
        self.i += 1
        if not line.startswith(name + " ") and line != name:
            raise ParseError(f"model file line {self.i}: expected '{name}', got {line.split(' ', 1)[0]!r}")
        return line[len(name):].strip()

    def take_int(self, name: str) -> int:
        val = self.take(name)
        try:
            return int(val)
        except ValueError:
            raise ParseError(f"model file line {self.i}: bad integer for '{name}'") from None

    def take_vec(self, name: str, n: int) -> np.ndarray:
        parts = self.take(name).split()
        if len(parts) != n:
            raise ParseError(f"model file line {self.i}: '{name}' needs {n} values, got {len(parts)}")
        try:
            return np.array([float.fromhex(p) for p in parts])
        except ValueError:
            raise ParseError(f"model file line {self.i}: bad hex float in '{name}'") from None

    def take_float(self, name: str) -> float:
        return float(self.take_vec(name, 1)[0])


def load_model(path: str) -> ModelFile:
    r = _Reader(path)
    version = r.take_int("format_version")
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported model format version {version} (expected {FORMAT_VERSION})")
    K = r.take_int("class_count")
    L = r.take_int("latent_dim")
    D = r.take_int("input_dim")
    linear = r.take_int("linear_f") == 1
    M = r.take_int("basis_count")
    lam = r.take_float("lam")
    sigma = None if linear else r.take_float("sigma")
    try:
        labels = json.loads(r.take("labels"))
    except json.JSONDecodeError:
        raise ParseError(f"model file line {r.i}: bad labels record") from None
    if not isinstance(labels, list) or len(labels) != K:
        raise ParseError("labels record does not list one name per class")
    mean = scale = None
    if r.take_int("standardize") == 1:
        mean = r.take_vec("standardize_mean", D)
        scale = r.take_vec("standardize_scale", D)
    centers = None
    if not linear:
        C = np.vstack([r.take_vec("center", D) for _ in range(M)])
        centers = RbfCenters(C=C, sigma=sigma)
    W = np.vstack([r.take_vec("map_row", M) for _ in range(L)])
    machines = []
    for k in range(K):
        head = r.take("svm").split()
        if len(head) != 5 or head[0] != str(k) or head[1] != "C" or head[3] != "b":
            raise ParseError(f"model file line {r.i}: malformed svm record")
        try:
            Ck = float.fromhex(head[2])
            bk = float.fromhex(head[4])
        except ValueError:
            raise ParseError(f"model file line {r.i}: bad hex float in svm record") from None
        w = r.take_vec("svm_w", L)
        machines.append(BinarySvm(w=w, b=bk, C=Ck))
    V = np.vstack([r.take_vec("collapsed_row", M) for _ in range(K)])
    bc = r.take_vec("collapsed_b", K)
    try:
        config = _untag_floats(json.loads(r.take("config")))
        metadata = _untag_floats(json.loads(r.take("metadata")))
    except json.JSONDecodeError:
        raise ParseError(f"model file line {r.i}: bad JSON echo") from None
    r.take("end")
    model = TrainedModel(
        map=RbfMapParams(centers=centers, W=W, lam=lam),
        svms=OvaSvm(machines=machines, class_count=K),
        collapsed=(V, bc),
        metadata=metadata,
    )
    return ModelFile(model=model, labels=labels, config=config,
                     standardize_mean=mean, standardize_scale=scale)
