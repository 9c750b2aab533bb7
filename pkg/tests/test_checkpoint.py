import numpy as np
import pytest

from har_teleop.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from har_teleop.gcn import init_params, model_forward
from har_teleop.graphs import build_window_graph
from tests.conftest import frame_sequence


def make_trained_like(seed=0):
    params = init_params(hidden_dim=8, seed=seed)
    graph = build_window_graph(frame_sequence(3, jitter_seed=seed, scale=0.04))
    model_forward(graph, params, mode="training", rng_seed=seed)  # move running stats
    return params


class TestRoundTrip:
    def test_all_tensors_bitwise_equal(self, tmp_path):
        params = make_trained_like()
        path = tmp_path / "model.npz"
        save_checkpoint(path, params, {"epochs": 3, "window_size": 4})
        loaded, config = load_checkpoint(path)
        assert config == {"epochs": 3, "window_size": 4}
        for (name, a), (_, b) in zip(params.named_parameters(), loaded.named_parameters()):
            assert np.array_equal(a, b), name
            assert a.dtype == b.dtype
        for bn_a, bn_b in zip(params.batch_norms, loaded.batch_norms):
            assert np.array_equal(bn_a.running_mean, bn_b.running_mean)
            assert np.array_equal(bn_a.running_var, bn_b.running_var)

    def test_hyperparameters_survive(self, tmp_path):
        params = init_params(hidden_dim=16, dropout_rate=0.4, leaky_slope=0.05, seed=1)
        path = tmp_path / "model.npz"
        save_checkpoint(path, params)
        loaded, config = load_checkpoint(path)
        assert loaded.hidden_dim == 16
        assert loaded.dropout_rate == 0.4
        assert loaded.leaky_slope == 0.05
        assert config == {}

    def test_inference_identical_after_reload(self, tmp_path):
        params = make_trained_like(seed=2)
        graph = build_window_graph(frame_sequence(3, jitter_seed=9, scale=0.04))
        before, _ = model_forward(graph, params)
        save_checkpoint(tmp_path / "m.npz", params)
        loaded, _ = load_checkpoint(tmp_path / "m.npz")
        after, _ = model_forward(graph, loaded)
        assert np.array_equal(before, after)


class TestCorruption:
    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / "junk.npz"
        path.write_bytes(b"definitely not a zip")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_missing_tensor(self, tmp_path):
        params = make_trained_like()
        path = tmp_path / "m.npz"
        save_checkpoint(path, params)
        with np.load(path) as data:
            arrays = {k: data[k] for k in data.files}
        del arrays["gcn2__weight"]
        np.savez(tmp_path / "cut.npz", **arrays)
        with pytest.raises(CheckpointError, match="gcn2.weight"):
            load_checkpoint(tmp_path / "cut.npz")

    def test_missing_header(self, tmp_path):
        params = make_trained_like()
        path = tmp_path / "m.npz"
        save_checkpoint(path, params)
        with np.load(path) as data:
            arrays = {k: data[k] for k in data.files}
        del arrays["__meta__"]
        np.savez(tmp_path / "cut.npz", **arrays)
        with pytest.raises(CheckpointError, match="metadata"):
            load_checkpoint(tmp_path / "cut.npz")

    def test_wrong_version(self, tmp_path):
        params = make_trained_like()
        path = tmp_path / "m.npz"
        save_checkpoint(path, params)
        with np.load(path) as data:
            arrays = {k: data[k] for k in data.files}
        meta = arrays["__meta__"].tobytes().decode().replace(
            '"format_version": 1', '"format_version": 99')
        arrays["__meta__"] = np.frombuffer(meta.encode(), dtype=np.uint8)
        np.savez(tmp_path / "v99.npz", **arrays)
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(tmp_path / "v99.npz")

    def test_shape_mismatch(self, tmp_path):
        params = make_trained_like()
        path = tmp_path / "m.npz"
        save_checkpoint(path, params)
        with np.load(path) as data:
            arrays = {k: data[k] for k in data.files}
        arrays["classifier__weight"] = arrays["classifier__weight"][:, :2]
        np.savez(tmp_path / "bad.npz", **arrays)
        with pytest.raises(CheckpointError, match="inconsistent"):
            load_checkpoint(tmp_path / "bad.npz")
