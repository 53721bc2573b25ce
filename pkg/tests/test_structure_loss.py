import json

import numpy as np
import pytest

from structaware.autodiff import Tensor, no_grad, parameter
from structaware.errors import EmptyHeads, ShapeMismatch
from structaware.sinkhorn import SinkhornConfig, sinkhorn_divergence
from structaware.structure_loss import (LossBreakdown, StructureEncoder, StructureLossConfig,
                                        combine_losses, encode_distance,
                                        per_head_structure_loss, slice_code_positions,
                                        structure_loss)

from oracles import central_difference

D4 = np.array([[0, 2, 3, 5], [2, 0, 3, 5], [3, 3, 0, 4], [5, 5, 4, 0]])
FIXED = SinkhornConfig(tol=0.0, max_iters=25)


def _attention(rng, h=2, n=4):
    logits = rng.normal(size=(h, n, n))
    e = np.exp(logits)
    return e / e.sum(-1, keepdims=True)


class TestEncoder:
    def test_identity_at_init(self):
        enc = StructureEncoder()
        np.testing.assert_array_equal(encode_distance(D4, enc).data, D4)

    def test_constant(self):
        out = encode_distance(D4, StructureEncoder(0.0, 1.7)).data
        assert np.all(out == 1.7)

    def test_render_body_entries(self):
        out = encode_distance(np.array([[0, 3], [3, 0]]), StructureEncoder(0.5, 1.0)).data
        assert out[0, 1] == 2.5
        out = encode_distance(np.array([[0, 5], [5, 0]]), StructureEncoder(0.5, 1.0)).data
        assert out[0, 1] == 3.5

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            encode_distance(np.array([[0.0, np.inf], [np.inf, 0.0]]), StructureEncoder())


class TestPerHead:
    def test_identical_head_vanishes(self):
        losses = per_head_structure_loss(D4[None].astype(float), D4, StructureEncoder())
        assert len(losses) == 1 and float(losses[0].data) <= 1e-6

    def test_single_2d_head(self):
        a = _attention(np.random.default_rng(0), h=1)[0]
        (loss,) = per_head_structure_loss(a, D4, StructureEncoder())
        assert float(loss.data) == sinkhorn_divergence(a, D4.astype(float)).value

    def test_composition_with_solver(self):
        a = _attention(np.random.default_rng(1), h=3)
        losses = per_head_structure_loss(a, D4, StructureEncoder())
        expected = [sinkhorn_divergence(a[i], D4.astype(float)).value for i in range(3)]
        assert [float(v.data) for v in losses] == expected

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            per_head_structure_loss(np.ones((2, 3, 3)) / 3, D4, StructureEncoder())

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(2)
        a = _attention(rng)
        perm = rng.permutation(4)
        base = [float(v.data) for v in per_head_structure_loss(a, D4, StructureEncoder())]
        ap = a[:, perm][:, :, perm]
        dp = D4[perm][:, perm]
        moved = [float(v.data) for v in per_head_structure_loss(ap, dp, StructureEncoder())]
        np.testing.assert_allclose(moved, base, atol=1e-6)


class TestAggregation:
    def test_mean(self):
        assert float(structure_loss([Tensor(1.0), Tensor(3.0)]).data) == 2.0
        assert float(structure_loss([Tensor(4.2)]).data) == 4.2
        assert float(structure_loss([0.7] * 5).data) == pytest.approx(0.7, abs=1e-15)

    def test_empty(self):
        with pytest.raises(EmptyHeads):
            structure_loss([])

    def test_combine(self):
        assert combine_losses(2.0, 0.5, 1.0).total == 2.5
        assert combine_losses(1.234, 99.0, 0.0).total == 1.234

    def test_affine_in_alpha(self):
        rng = np.random.default_rng(3)
        task, struct = rng.random(), rng.random()
        base = combine_losses(task, struct, 0.0).total
        for alpha in rng.random(20) * 3:
            assert combine_losses(task, struct, alpha).total - base == pytest.approx(
                alpha * struct, abs=1e-15)

    def test_negative_alpha(self):
        with pytest.raises(ValueError):
            combine_losses(1.0, 1.0, -0.1)
        with pytest.raises(ValueError):
            StructureLossConfig(alpha=-1.0)

    def test_breakdown_json(self):
        b = combine_losses(1.0, 2.0, 0.5, per_head=[1.5, 2.5])
        obj = json.loads(b.to_json())
        assert obj == {"task": 1.0, "per_head": [1.5, 2.5], "structure": 2.0, "alpha": 0.5,
                       "total": 2.0}
        assert isinstance(b, LossBreakdown)


def test_slice_without_renormalising():
    a = parameter(_attention(np.random.default_rng(4), n=5))
    s = slice_code_positions(a, [1, 2, 3])
    np.testing.assert_array_equal(s.data, a.data[:, 1:4, 1:4])
    assert not np.allclose(s.data.sum(-1), 1.0)


def test_gradients_wrt_encoder_and_attention():
    rng = np.random.default_rng(5)
    a0 = _attention(rng)
    enc = StructureEncoder(0.3, -0.2)
    att = parameter(a0.copy())
    task = parameter(0.7)
    alpha = 0.4
    total = task + alpha * structure_loss(per_head_structure_loss(att, D4, enc, FIXED))
    total.backward()

    def value():
        with no_grad():
            e = StructureEncoder(float(wb[0]), float(wb[1]))
            return 0.7 + alpha * float(structure_loss(
                per_head_structure_loss(a0, D4, e, FIXED)).data)

    wb = np.array([0.3, -0.2])
    num_wb = central_difference(value, wb, 1e-6)
    got = np.array([float(enc.w.grad), float(enc.b.grad)])
    assert np.abs(got - num_wb).max() / np.abs(num_wb).max() < 1e-3
    num_a = central_difference(value, a0, 1e-6)
    assert np.abs(att.grad - num_a).max() / np.abs(num_a).max() < 1e-3
