import zipfile

import numpy as np
import pytest

from mlgcn.checkpoint import load_checkpoint, save_checkpoint
from mlgcn.config import DEFAULT_MENU, TrainConfig
from mlgcn.errors import DataError
from mlgcn.model import ModelState
from mlgcn.train import build_architecture


def _state(seed=0):
    arch = build_architecture(TrainConfig(multilap_depth=3, conv_filters=(4, 2)), DEFAULT_MENU, 3, 4, 2)
    state = ModelState.init(arch, seed)
    state.step = 17
    return state


def test_bit_exact_round_trip(tmp_path):
    state = _state()
    save_checkpoint(tmp_path / "a.npz", state, ["w", "x", "y", "z"], {"k": 1})
    loaded, meta = load_checkpoint(tmp_path / "a.npz")
    assert loaded.arch == state.arch and loaded.step == 17
    assert meta["class_names"] == ["w", "x", "y", "z"]
    assert set(loaded.params) == set(state.params)
    for k, v in state.params.items():
        assert loaded.params[k].tobytes() == v.tobytes()
    save_checkpoint(tmp_path / "b.npz", loaded, ["w", "x", "y", "z"], {"k": 1})
    assert (tmp_path / "a.npz").read_bytes() == (tmp_path / "b.npz").read_bytes()


def test_per_unit_blocks(tmp_path):
    save_checkpoint(tmp_path / "c.npz", _state())
    with np.load(tmp_path / "c.npz") as z:
        names = set(z.files)
        assert bytes(z["multilap/activation"]) == b"leaky_softplus"
    assert {"multilap/layer0/unit0", "multilap/layer0/unit3", "multilap/layer1/unit0"} <= names


def test_shape_mismatch_names_tensor(tmp_path):
    state = _state()
    state.params["fc/W"] = state.params["fc/W"][:, :2]
    save_checkpoint(tmp_path / "d.npz", state)
    with pytest.raises(DataError, match="fc/W"):
        load_checkpoint(tmp_path / "d.npz")


def test_not_a_checkpoint(tmp_path):
    (tmp_path / "e.npz").write_bytes(b"nope")
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "e.npz")
    with zipfile.ZipFile(tmp_path / "f.npz", "w") as zf:
        zf.writestr("format.npy", b"")
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "f.npz")
