"""Versioned checkpoint files.

A checkpoint is a zip archive of ``.npy`` members (readable with
``numpy.load``) with fixed member timestamps, so identical states give
identical bytes. Members:

``format``                      uint8 bytes of ``b"mlgcn-checkpoint"``
``version``                     int64 scalar, currently 1
``meta``                        uint8 bytes of a JSON object: architecture,
                                class names, seed, step, run config
``multilap/activation``         uint8 bytes of the activation name
``multilap/leak``               float64 scalar
``multilap/layer{l}/unit{p}``   float64 vector, unconstrained weights feeding unit p
``cheb/{i}/theta``              float64 (p_in, F, K)
``fc/W``, ``fc/b``              classifier weights and bias
``step``                        int64 scalar, optimizer step counter
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

import numpy as np

from .errors import DataError
from .model import Architecture, ModelState

FORMAT = b"mlgcn-checkpoint"
VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


def _blob(s: str | bytes) -> np.ndarray:
    return np.frombuffer(s.encode("utf-8") if isinstance(s, str) else s, dtype=np.uint8)


def state_to_blocks(state: ModelState, class_names=None, config: dict | None = None) -> dict[str, np.ndarray]:
    arch = state.arch
    meta = {"arch": arch.to_dict(), "seed": state.seed, "step": state.step,
            "class_names": list(class_names) if class_names is not None else None,
            "config": config}
    blocks = {
        "format": _blob(FORMAT),
        "version": np.array(VERSION, dtype=np.int64),
        "meta": _blob(json.dumps(meta, sort_keys=True)),
        "multilap/activation": _blob(arch.activation),
        "multilap/leak": np.array(arch.leak, dtype=np.float64),
        "step": np.array(state.step, dtype=np.int64),
    }
    for key, value in state.params.items():
        if key.startswith("multilap/layer"):
            for p in range(value.shape[1]):
                blocks[f"{key}/unit{p}"] = np.ascontiguousarray(value[:, p])
        else:
            blocks[key] = value
    return blocks


def save_checkpoint(path: str | Path, state: ModelState, class_names=None, config: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blocks = state_to_blocks(state, class_names, config)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for key in sorted(blocks):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asarray(blocks[key]), allow_pickle=False)
            info = zipfile.ZipInfo(key + ".npy", date_time=_EPOCH)
            info.external_attr = 0o644 << 16
            zf.writestr(info, buf.getvalue())


def load_checkpoint(path: str | Path) -> tuple[ModelState, dict]:
    """Returns the model state and the decoded ``meta`` object."""
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as z:
            blocks = {k: z[k] for k in z.files}
    except (OSError, ValueError, zipfile.BadZipFile) as exc:
        raise DataError(f"{path}: not a readable checkpoint ({exc})") from exc
    fmt = blocks.get("format")
    if not isinstance(fmt, np.ndarray) or fmt.tobytes() != FORMAT:
        raise DataError(f"{path}: not an mlgcn checkpoint")
    try:
        return _decode(path, blocks)
    except KeyError as exc:
        raise DataError(f"{path}: checkpoint is missing tensor {exc.args[0]}") from None


def _decode(path: Path, blocks: dict[str, np.ndarray]) -> tuple[ModelState, dict]:
    version = int(blocks["version"])
    if version != VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    meta = json.loads(blocks["meta"].tobytes().decode("utf-8"))
    arch = Architecture.from_dict(meta["arch"])
    params: dict[str, np.ndarray] = {}
    sizes = arch.multilap_sizes
    for l in range(len(sizes) - 1):
        cols = [blocks[f"multilap/layer{l}/unit{p}"] for p in range(sizes[l + 1])]
        params[f"multilap/layer{l}"] = np.stack(cols, axis=1).astype(np.float64)
    for i in range(len(arch.conv_filters)):
        params[f"cheb/{i}/theta"] = np.array(blocks[f"cheb/{i}/theta"], dtype=np.float64)
    params["fc/W"] = np.array(blocks["fc/W"], dtype=np.float64)
    params["fc/b"] = np.array(blocks["fc/b"], dtype=np.float64)
    expected = {"fc/W": (arch.feature_dim, arch.num_classes), "fc/b": (arch.num_classes,)}
    for key, shape in expected.items():
        if params[key].shape != shape:
            raise DataError(f"{path}: tensor {key} has shape {params[key].shape}, expected {shape}")
    state = ModelState(arch, params, seed=int(meta.get("seed", 0)), step=int(blocks["step"]))
    return state, meta
