import struct

import numpy as np
import pytest

from aopath.checkpoint import MAGIC, load_checkpoint, read_header, save_checkpoint
from aopath.errors import DataError
from aopath.pathway_network import PathwayConfig, init_params, param_layout


@pytest.mark.parametrize("variant", ["aopath-s", "atclassifier", "nopaths"])
def test_round_trip_is_bit_exact(tmp_path, variant):
    cfg = PathwayConfig.preset(variant, K=7)
    params = init_params(cfg, 5)
    save_checkpoint(params, tmp_path / "m.ckpt")
    again = load_checkpoint(tmp_path / "m.ckpt")
    assert again.cfg == cfg
    assert list(again) == list(params)
    for name in params:
        np.testing.assert_array_equal(again[name].data, params[name].data)
        assert again[name].requires_grad


def test_header_lists_names_in_storage_order(tmp_path):
    cfg = PathwayConfig.preset("aopath-s")
    save_checkpoint(init_params(cfg, 0), tmp_path / "m.ckpt")
    header = read_header(tmp_path / "m.ckpt")
    assert [t["name"] for t in header["tensors"]] == [n for n, _, _ in param_layout(cfg)]
    assert header["config_hash"] == cfg.digest()
    assert sum(int(np.prod(t["shape"])) for t in header["tensors"]) == 26_282


def test_payload_is_little_endian_float64(tmp_path):
    params = init_params(PathwayConfig.preset("atclassifier"), 0)
    path = tmp_path / "m.ckpt"
    save_checkpoint(params, path)
    blob = path.read_bytes()
    (n,) = struct.unpack_from("<I", blob, len(MAGIC))
    payload = blob[len(MAGIC) + 4 + n :]
    assert len(payload) == 8 * 769
    first = struct.unpack_from("<d", payload, 0)[0]
    assert first == params["fc_t.weight"].data[0, 0]


def test_corrupt_checkpoints(tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(init_params(PathwayConfig.preset("atclassifier"), 0), path)
    blob = path.read_bytes()
    at = blob.index(b'"config_hash": "') + len(b'"config_hash": "')
    flipped = b"1" if blob[at : at + 1] == b"0" else b"0"
    cases = {
        "magic": b"NOTACKPT" + blob[8:],
        "short": blob[:-8],
        "long": blob + b"\0" * 8,
        "hash": blob[:at] + flipped + blob[at + 1 :],
        "header": blob[:12] + b"[" + blob[13:],
    }
    for name, data in cases.items():
        (tmp_path / name).write_bytes(data)
        with pytest.raises(DataError):
            load_checkpoint(tmp_path / name)
