import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floorpac.datasets import Dataset, synth_blobs
from floorpac.models import (ModelArch, ModelKind, ModelObjective, QuadraticObjective, ZeroObjective, init_params,
                             load_params, logits, loss_grad, per_example_grad_norm_max, per_example_grad_norms,
                             per_example_grads, save_params, unpack, zero_one_risk)

# init_params(linear(2, 2), seed=0): numpy PCG64 uniform(-1/sqrt 2, 1/sqrt 2), weights then biases
INIT_LINEAR_2_2_SEED0 = [0.19369307573550387, -0.32557075163361393, -0.6491614679377623,
                         -0.6837331748681422, 0.4430310209648889, 0.5837245353312901]

ARCHES = [ModelArch.linear(3, 4), ModelArch.mlp(3, 4, [5]), ModelArch.mlp(3, 3, [4, 6])]


def _fd_grad(arch, w, data, h=1e-6):
    g = np.zeros_like(w)
    for j in range(w.size):
        e = np.zeros_like(w)
        e[j] = h
        g[j] = (loss_grad(arch, w + e, data).loss - loss_grad(arch, w - e, data).loss) / (2 * h)
    return g


class TestArch:
    def test_param_count(self):
        assert ModelArch.linear(784, 10).num_params == 7850
        assert ModelArch.mlp(4, 3, [8]).num_params == 8 * 4 + 8 + 3 * 8 + 3
        assert ModelArch.mlp(4, 3, [8]).layer_dims == [(4, 8), (8, 3)]

    @pytest.mark.parametrize("kw", [dict(kind="linear_softmax", input_dim=0, num_classes=2),
                                    dict(kind="linear_softmax", input_dim=2, num_classes=1),
                                    dict(kind="linear_softmax", input_dim=2, num_classes=2, hidden=(3,)),
                                    dict(kind="mlp", input_dim=2, num_classes=2),
                                    dict(kind="mlp", input_dim=2, num_classes=2, hidden=(0,)),
                                    dict(kind="mlp", input_dim=2, num_classes=2, hidden=(3,), activation="tanh")])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ModelArch(**kw)

    def test_dict_round_trip(self):
        a = ModelArch.mlp(5, 3, [7, 2])
        assert ModelArch.from_dict(a.as_dict()) == a
        assert a.kind is ModelKind.MLP


class TestHandFixtures:
    def test_two_class_linear(self):
        arch = ModelArch.linear(2, 2)
        data = Dataset(np.array([[1.0, 2.0]]), np.array([0]), 2)
        ev = loss_grad(arch, np.zeros(6), data)
        assert ev.loss == pytest.approx(math.log(2), rel=1e-15)
        (gW, gb), = unpack(arch, ev.grad)
        assert np.allclose(gW, [[-0.5, -1.0], [0.5, 1.0]], atol=1e-15)
        assert np.allclose(gb, [-0.5, 0.5], atol=1e-15)

    def test_gradient_norm_max(self):
        arch = ModelArch.linear(2, 2)
        data = Dataset(np.array([[1.0, 0.0], [0.0, 2.0]]), np.array([0, 1]), 2)
        # |delta|^2 = 0.5 for both rows; (|x|^2 + 1) = 2 and 5
        norms = per_example_grad_norms(arch, np.zeros(6), data)
        assert np.allclose(norms, [1.0, math.sqrt(2.5)], rtol=1e-15)
        assert per_example_grad_norm_max(arch, np.zeros(6), data) == pytest.approx(math.sqrt(2.5), rel=1e-15)

    def test_frozen_init(self):
        w = init_params(ModelArch.linear(2, 2), 0)
        assert w.tolist() == INIT_LINEAR_2_2_SEED0

    def test_init_ranges(self):
        arch = ModelArch.mlp(100, 3, [16])
        w = init_params(arch, 1)
        (W1, b1), (W2, b2) = unpack(arch, w)
        assert np.abs(W1).max() <= 0.1 and np.abs(b1).max() <= 0.1
        assert np.abs(W2).max() <= 0.25 and np.abs(W2).max() > 0.2


@pytest.mark.parametrize("arch", ARCHES, ids=lambda a: f"{a.kind.value}{list(a.hidden)}")
class TestGradients:
    def test_finite_difference(self, arch):
        data = synth_blobs(30, arch.input_dim, arch.num_classes, 2.0, 4)
        w = init_params(arch, 2)
        fd = _fd_grad(arch, w, data)
        g = loss_grad(arch, w, data).grad
        assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-6

    def test_per_example_consistent(self, arch):
        data = synth_blobs(25, arch.input_dim, arch.num_classes, 2.0, 5)
        w = init_params(arch, 3)
        G = per_example_grads(arch, w, data)
        assert G.shape == (25, arch.num_params)
        assert np.allclose(G.mean(axis=0), loss_grad(arch, w, data).grad, atol=1e-14)
        assert np.allclose(np.linalg.norm(G, axis=1), per_example_grad_norms(arch, w, data), rtol=1e-12)

    def test_mean_of_parts(self, arch):
        data = synth_blobs(40, arch.input_dim, arch.num_classes, 2.0, 6)
        obj = ModelObjective(arch, data)
        w = init_params(arch, 4)
        a, b = np.arange(0, 15), np.arange(15, 40)
        whole = obj.grad(w)
        parts = (15 * obj.grad(w, a) + 25 * obj.grad(w, b)) / 40
        assert np.allclose(whole, parts, atol=1e-14)


class TestLoss:
    def test_stable_for_huge_logits(self):
        arch = ModelArch.linear(1, 2)
        data = Dataset(np.array([[1e4]]), np.array([1]), 2)
        w = np.array([1.0, -1.0, 0.0, 0.0])
        ev = loss_grad(arch, w, data)
        assert ev.loss == pytest.approx(2e4, rel=1e-12)
        assert np.all(np.isfinite(ev.grad))

    @settings(max_examples=40, deadline=None)
    @given(shift=st.floats(-50, 50))
    def test_bias_shift_invariance(self, shift):
        # adding the same constant to every output bias leaves the softmax unchanged
        arch = ModelArch.linear(3, 4)
        data = synth_blobs(12, 3, 4, 2.0, 0)
        w = init_params(arch, 0)
        w2 = w.copy()
        w2[-4:] += shift
        assert loss_grad(arch, w2, data).loss == pytest.approx(loss_grad(arch, w, data).loss, rel=1e-9, abs=1e-12)
        assert zero_one_risk(arch, w2, data) == zero_one_risk(arch, w, data)

    def test_empty_view(self):
        arch = ModelArch.linear(2, 2)
        obj = ModelObjective(arch, synth_blobs(10, 2, 2, 1.0, 0))
        with pytest.raises(ValueError):
            obj.grad(np.zeros(6), np.array([], dtype=int))

    def test_wrong_shape(self):
        arch = ModelArch.linear(2, 2)
        with pytest.raises(ValueError):
            logits(arch, np.zeros(5), synth_blobs(4, 2, 2, 1.0, 0))

    def test_risk(self):
        arch = ModelArch.linear(1, 2)
        data = Dataset(np.array([[1.0], [-1.0], [2.0]]), np.array([1, 0, 0]), 2)
        w = np.array([-1.0, 1.0, 0.0, 0.0])
        assert zero_one_risk(arch, w, data) == pytest.approx(1 / 3)


class TestObjectives:
    def test_subset_cache_consistent(self):
        data = synth_blobs(2000, 2, 3, 3.0, 0)
        obj = ModelObjective(ModelArch.linear(2, 3), data)
        w = init_params(obj.arch, 0)
        idx = np.arange(0, 2000, 3)
        first = obj.grad(w, idx)
        again = obj.grad(w, idx.copy())
        direct = loss_grad(obj.arch, w, data.take(idx)).grad
        assert np.array_equal(first, again)
        assert np.allclose(first, direct, atol=1e-15)

    def test_quadratic(self):
        obj = QuadraticObjective([[-0.30], [-1.24]])
        assert obj.grad([0.0]) == pytest.approx([0.77])
        assert obj.grad([0.0], [0]) == pytest.approx([0.30])
        assert obj.loss([0.0]) == pytest.approx(0.5 * (0.09 + 1.24**2) / 2)
        assert math.isnan(obj.risk([0.0]))
        assert obj.per_example_grad_norms([0.0]).tolist() == pytest.approx([0.30, 1.24])

    def test_zero(self):
        obj = ZeroObjective(3, n=5)
        assert obj.grad(np.ones(3)).tolist() == [0, 0, 0]
        assert obj.per_example_grads(np.ones(3), [1, 2]).shape == (2, 3)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        arch = ModelArch.mlp(3, 2, [4])
        w = init_params(arch, 9)
        save_params(tmp_path / "w.bin", arch, w, seed=9)
        arch2, w2, header = load_params(tmp_path / "w.bin")
        assert arch2 == arch and np.array_equal(w, w2) and header["seed"] == 9

    def test_truncated(self, tmp_path):
        arch = ModelArch.linear(2, 2)
        save_params(tmp_path / "w.bin", arch, np.zeros(6))
        raw = (tmp_path / "w.bin").read_bytes()
        (tmp_path / "w.bin").write_bytes(raw[:-3])
        with pytest.raises(ValueError):
            load_params(tmp_path / "w.bin")

    def test_not_a_checkpoint(self, tmp_path):
        (tmp_path / "x").write_bytes(b'{"format": "other"}\n')
        with pytest.raises(ValueError):
            load_params(tmp_path / "x")
