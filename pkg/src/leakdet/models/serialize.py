"""Versioned JSON model files.

A model is one JSON document {format_version, kind, preprocessing, seed,
rate, standardizer?, params} with every array stored as base64-encoded
little-endian 64-bit values plus an explicit shape, so save/load round
trips are bit-exact. Keys are sorted and floats are stored only inside
arrays, which makes repeated saves of identical models byte-identical.
"""

from __future__ import annotations

import base64
import binascii
import json
import math
from pathlib import Path

import numpy as np

from ..dsp import Standardizer
from . import bgmm, dcae, gmm, iforest, realnvp
from .base import KINDS, ScoreModel

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Model file is missing, corrupted, or from an unsupported version."""


def _encode(array: np.ndarray) -> dict:
    array = np.asarray(array)
    if np.issubdtype(array.dtype, np.floating):
        dtype = "<f8"
    elif np.issubdtype(array.dtype, np.integer):
        dtype = "<i8"
    else:
        raise TypeError(f"cannot serialize dtype {array.dtype}")
    payload = np.ascontiguousarray(array, dtype=dtype).tobytes()
    return {
        "dtype": dtype,
        "shape": [int(v) for v in array.shape],
        "data": base64.b64encode(payload).decode("ascii"),
    }


def _decode(obj) -> np.ndarray:
    try:
        dtype = obj["dtype"]
        shape = tuple(int(v) for v in obj["shape"])
        payload = base64.b64decode(obj["data"], validate=True)
    except (TypeError, KeyError, ValueError, binascii.Error) as exc:
        raise ModelFormatError(f"corrupted array record: {exc}") from exc
    if dtype not in ("<f8", "<i8"):
        raise ModelFormatError(f"unsupported array dtype {dtype!r}")
    array = np.frombuffer(payload, dtype=dtype)
    if array.size != math.prod(shape):
        raise ModelFormatError(f"array payload size {array.size} does not match shape {shape}")
    out = array.reshape(shape).copy()
    return out if dtype == "<f8" else out.astype(np.int64)


def _gmm_to_dict(params: gmm.GmmParams) -> dict:
    return {"weights": _encode(params.weights), "means": _encode(params.means),
            "variances": _encode(params.variances)}


def _gmm_from_dict(doc: dict) -> gmm.GmmParams:
    return gmm.GmmParams(_decode(doc["weights"]), _decode(doc["means"]),
                         _decode(doc["variances"]))


def _bgmm_to_dict(params: bgmm.BgmmParams) -> dict:
    return {
        "alpha": _encode(params.alpha), "m": _encode(params.m), "beta": _encode(params.beta),
        "a": _encode(params.a), "b": _encode(params.b),
        "alpha0": _encode(np.array(params.alpha0)), "m0": _encode(params.m0),
        "beta0": _encode(np.array(params.beta0)), "a0": _encode(np.array(params.a0)),
        "b0": _encode(params.b0),
    }


def _bgmm_from_dict(doc: dict) -> bgmm.BgmmParams:
    return bgmm.BgmmParams(
        _decode(doc["alpha"]), _decode(doc["m"]), _decode(doc["beta"]),
        _decode(doc["a"]), _decode(doc["b"]),
        float(_decode(doc["alpha0"])), _decode(doc["m0"]),
        float(_decode(doc["beta0"])), float(_decode(doc["a0"])), _decode(doc["b0"]),
    )


def _iforest_to_dict(params: iforest.IforestParams) -> dict:
    return {
        "subsample": int(params.subsample),
        "trees": [
            {"feature": _encode(t.feature), "threshold": _encode(t.threshold),
             "left": _encode(t.left), "right": _encode(t.right), "size": _encode(t.size)}
            for t in params.trees
        ],
    }


def _iforest_from_dict(doc: dict) -> iforest.IforestParams:
    trees = tuple(
        iforest.IsoTree(_decode(t["feature"]), _decode(t["threshold"]),
                        _decode(t["left"]), _decode(t["right"]), _decode(t["size"]))
        for t in doc["trees"]
    )
    return iforest.IforestParams(trees, int(doc["subsample"]))


def _layer_params_to_dict(layers) -> dict:
    return {name: _encode(arr) for name, arr in layers.params().items()}


def _load_layer_params(layers, doc: dict, context: str) -> None:
    params = layers.params()
    if set(doc) != set(params):
        raise ModelFormatError(f"{context}: parameter names do not match the architecture")
    for name, arr in params.items():
        loaded = _decode(doc[name])
        if loaded.shape != arr.shape:
            raise ModelFormatError(f"{context}: shape mismatch for {name}")
        arr[...] = loaded


def _realnvp_to_dict(params: realnvp.RealNvpParams) -> dict:
    return {
        "dim": params.dim,
        "hidden": params.hidden,
        "couplings": [
            {"mask": _encode(c.mask.astype(np.int64)),
             "scale": _layer_params_to_dict(c.scale_net),
             "shift": _layer_params_to_dict(c.shift_net),
             "factor": _encode(c.factor)}
            for c in params.couplings
        ],
    }


def _realnvp_from_dict(doc: dict) -> realnvp.RealNvpParams:
    dim = int(doc["dim"])
    hidden = int(doc["hidden"])
    couplings = []
    for i, entry in enumerate(doc["couplings"]):
        mask = _decode(entry["mask"]).astype(bool)
        if mask.size != dim:
            raise ModelFormatError(f"coupling {i}: mask size {mask.size} != dim {dim}")
        coupling = realnvp.Coupling(mask, hidden, rng=None)
        _load_layer_params(coupling.scale_net, entry["scale"], f"coupling {i} scale")
        _load_layer_params(coupling.shift_net, entry["shift"], f"coupling {i} shift")
        coupling.factor[...] = _decode(entry["factor"])
        couplings.append(coupling)
    return realnvp.RealNvpParams(dim, hidden, couplings)


def _dcae_to_dict(params: dcae.DcaeParams) -> dict:
    return {
        "input_shape": [int(v) for v in params.input_shape],
        "channels": [int(v) for v in params.channels],
        "bottleneck": int(params.bottleneck),
        "kernel": int(params.kernel),
        "encoder": _layer_params_to_dict(params.encoder),
        "decoder": _layer_params_to_dict(params.decoder),
    }


def _dcae_from_dict(doc: dict) -> dcae.DcaeParams:
    config = dcae.DcaeConfig(channels=tuple(int(v) for v in doc["channels"]),
                             bottleneck=int(doc["bottleneck"]), kernel=int(doc["kernel"]))
    params = dcae.build(tuple(doc["input_shape"]), config, rng=None)
    _load_layer_params(params.encoder, doc["encoder"], "encoder")
    _load_layer_params(params.decoder, doc["decoder"], "decoder")
    return params


_TO_DICT = {"gmm": _gmm_to_dict, "bgmm": _bgmm_to_dict, "iforest": _iforest_to_dict,
            "realnvp": _realnvp_to_dict, "dcae": _dcae_to_dict}
_FROM_DICT = {"gmm": _gmm_from_dict, "bgmm": _bgmm_from_dict, "iforest": _iforest_from_dict,
              "realnvp": _realnvp_from_dict, "dcae": _dcae_from_dict}


def save_model(model: ScoreModel, path) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "preprocessing": model.preprocessing,
        "seed": int(model.seed),
        "rate": int(model.rate),
        "params": _TO_DICT[model.kind](model.params),
    }
    if model.standardizer is not None:
        doc["standardizer"] = {"mean": _encode(model.standardizer.mean),
                               "std": _encode(model.standardizer.std)}
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def load_model(path) -> ScoreModel:
    """Parse and validate a model file. Raises ModelFormatError on version
    mismatch or corruption; never returns a partially-built model."""
    try:
        doc = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: not a valid model file: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: not a model document")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported format_version {version!r}, "
                               f"expected {FORMAT_VERSION}")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ModelFormatError(f"{path}: unknown model kind {kind!r}")
    try:
        params = _FROM_DICT[kind](doc["params"])
        standardizer = None
        if "standardizer" in doc:
            standardizer = Standardizer(_decode(doc["standardizer"]["mean"]),
                                        _decode(doc["standardizer"]["std"]))
        return ScoreModel(kind, str(doc["preprocessing"]), int(doc["seed"]),
                          int(doc["rate"]), standardizer, params)
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model document: {exc}") from exc
