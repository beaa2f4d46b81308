"""JSON envelope for fitted models.

Every document carries ``format_version`` and a ``kind`` discriminator
(``"crp"``, ``"lda"`` or ``"twodlda"``). Matrices are stored as
``{"rows": r, "cols": c, "data": [...]}`` with ``data`` in row-major order.
Floats are written with Python's shortest round-trip repr, so a write/read
cycle reproduces every value bit for bit.
"""
import json

import numpy as np

from .baselines import LdaModel, TwoDldaModel
from .core import CrpConfig, CrpModel, ProjectionPair

__all__ = ["FORMAT_VERSION", "model_to_dict", "model_from_dict", "dumps", "loads",
           "save_model", "load_model"]

FORMAT_VERSION = 1


def _mat(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    return {"rows": int(a.shape[0]), "cols": int(a.shape[1]),
            "data": [float(x) for x in a.ravel()]}


def _unmat(d):
    rows, cols = int(d["rows"]), int(d["cols"])
    data = np.array(d["data"], dtype=np.float64)
    if data.size != rows * cols:
        raise ValueError(f"matrix payload has {data.size} values, expected {rows}x{cols}")
    return data.reshape(rows, cols)


def model_to_dict(model):
    if isinstance(model, CrpModel):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "crp",
            "config": model.config.to_dict(),
            "data_dims": list(model.data_dims),
            "pairs": [{"u": _mat(p.u), "v": _mat(p.v)} for p in model.pairs],
            "objective_traces": [list(t) for t in model.objective_traces],
            "degenerate": list(model.degenerate),
        }
    if isinstance(model, LdaModel):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "lda",
            "data_dims": list(model.data_dims),
            "w": _mat(model.w),
            "ridge": model.ridge,
            "mean": _mat(model.mean),
            "eigenvalues": [float(x) for x in model.eigenvalues],
        }
    if isinstance(model, TwoDldaModel):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "twodlda",
            "u": _mat(model.u),
            "v": _mat(model.v),
            "iterations": model.iterations,
            "objectives": list(model.objectives),
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(d):
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format_version {version!r}")
    kind = d.get("kind")
    if kind == "crp":
        return CrpModel(
            pairs=tuple(ProjectionPair(_unmat(p["u"]), _unmat(p["v"])) for p in d["pairs"]),
            config=CrpConfig.from_dict(d["config"]),
            objective_traces=tuple(tuple(float(x) for x in t) for t in d["objective_traces"]),
            data_dims=tuple(d["data_dims"]),
            degenerate=tuple(bool(x) for x in d.get("degenerate", ())),
        )
    if kind == "lda":
        return LdaModel(_unmat(d["w"]), float(d["ridge"]), _unmat(d["mean"]).ravel(),
                        np.array(d["eigenvalues"], dtype=np.float64), tuple(d["data_dims"]))
    if kind == "twodlda":
        return TwoDldaModel(_unmat(d["u"]), _unmat(d["v"]), int(d["iterations"]),
                            tuple(float(x) for x in d.get("objectives", ())))
    raise ValueError(f"unknown model kind {kind!r}")


def dumps(model):
    return json.dumps(model_to_dict(model), indent=1, allow_nan=False)


def loads(text):
    return model_from_dict(json.loads(text))


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(model))
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
