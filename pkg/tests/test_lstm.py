import math

import numpy as np
import pytest

from reqsentry.nn import (
    LstmCellParams,
    ParamStore,
    lstm_cell_backward,
    lstm_cell_forward,
    max_relative_error,
    numeric_gradients,
    run_stack_backward,
    run_stack_forward,
)


def scalar_cell_oracle(x, h_prev, c_prev, p):
    """Independent scalar-loop reference for one LSTM step (no numpy math)."""
    H, D = p.hidden_size, p.input_size
    h_out = [0.0] * H
    c_out = [0.0] * H

    def logistic(v):
        return 1.0 / (1.0 + math.exp(-v))

    for r in range(H):
        pre = {}
        for gate in ("i", "f", "o", "g"):
            acc = getattr(p, f"b_{gate}")[r, 0]
            w = getattr(p, f"w_{gate}")
            u = getattr(p, f"u_{gate}")
            for d in range(D):
                acc += w[r, d] * x[d]
            for j in range(H):
                acc += u[r, j] * h_prev[j]
            pre[gate] = acc
        i = logistic(pre["i"])
        f = logistic(pre["f"])
        o = logistic(pre["o"])
        g = math.tanh(pre["g"])
        c_out[r] = f * c_prev[r] + i * g
        h_out[r] = o * math.tanh(c_out[r])
    return np.array(h_out), np.array(c_out)


class TestCellForward:
    def test_zero_params_zero_hidden(self):
        # o = 0.5 but the candidate is tanh(0) = 0 and the cell starts empty,
        # so c_t = 0 and h_t = 0 regardless of the step input
        p = LstmCellParams.zeros(4, 3)
        rng = np.random.default_rng(0)
        h, c, _ = lstm_cell_forward(rng.normal(size=4), rng.normal(size=3),
                                    np.zeros(3), p)
        assert np.array_equal(h, np.zeros(3))
        assert np.array_equal(c, np.zeros(3))

    def test_zero_everything_zero_cell(self):
        p = LstmCellParams.zeros(2, 3)
        h, c, _ = lstm_cell_forward(np.zeros(2), np.zeros(3), np.zeros(3), p)
        assert np.array_equal(c, np.zeros(3))
        assert np.array_equal(h, np.zeros(3))

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(11)
        p = LstmCellParams.init(rng, 5, 3)
        x = rng.normal(size=5)
        h_prev = rng.normal(size=3)
        c_prev = rng.normal(size=3)
        h, c, _ = lstm_cell_forward(x, h_prev, c_prev, p)
        h_ref, c_ref = scalar_cell_oracle(x, h_prev, c_prev, p)
        assert np.max(np.abs(h - h_ref)) < 1e-12
        assert np.max(np.abs(c - c_ref)) < 1e-12

    def test_batch_rows_match_individual_calls(self):
        rng = np.random.default_rng(3)
        p = LstmCellParams.init(rng, 4, 6)
        xb = rng.normal(size=(5, 4))
        hb = rng.normal(size=(5, 6))
        cb = rng.normal(size=(5, 6))
        h_batch, c_batch, _ = lstm_cell_forward(xb, hb, cb, p)
        for k in range(5):
            h1, c1, _ = lstm_cell_forward(xb[k], hb[k], cb[k], p)
            # batched and single-row BLAS paths agree to float64 precision
            assert np.allclose(h_batch[k], h1, atol=1e-14, rtol=0)
            assert np.allclose(c_batch[k], c1, atol=1e-14, rtol=0)

    def test_determinism_bit_identical(self):
        rng = np.random.default_rng(9)
        p = LstmCellParams.init(rng, 3, 3)
        x, h0, c0 = rng.normal(size=3), rng.normal(size=3), rng.normal(size=3)
        a = lstm_cell_forward(x, h0, c0, p)[0]
        b = lstm_cell_forward(x, h0, c0, p)[0]
        assert np.array_equal(a, b)

    def test_shape_mismatch_raises(self):
        p = LstmCellParams.zeros(4, 3)
        with pytest.raises(ValueError):
            lstm_cell_forward(np.zeros(5), np.zeros(3), np.zeros(3), p)


class TestCellBackward:
    def _store_with_cell(self, seed, input_size=3, hidden=3):
        rng = np.random.default_rng(seed)
        store = ParamStore()
        cell = LstmCellParams.init(rng, input_size, hidden)
        cell.register(store, "cell")
        grads = LstmCellParams.view(store.grads, "cell", input_size, hidden)
        return store, cell, grads, rng

    def test_single_step_matches_finite_differences(self):
        store, cell, grads, rng = self._store_with_cell(21)
        x = rng.normal(size=3)
        h0 = rng.normal(size=3)
        c0 = rng.normal(size=3)
        readout = rng.normal(size=3)

        def loss():
            h, _, _ = lstm_cell_forward(x, h0, c0, cell)
            return float(h @ readout)

        h, _, cache = lstm_cell_forward(x, h0, c0, cell)
        lstm_cell_backward(cell, grads, cache, readout, np.zeros(3))
        numeric = numeric_gradients(loss, store, eps=1e-5)
        assert max_relative_error(dict(store.grads), numeric) < 1e-6

    def test_constant_direction_has_zero_gradient(self):
        # loss reads only h[0]; u_* rows feeding other outputs via c are
        # still live, but the forget bias of a unit with zero cell input
        # cannot change the loss when its candidate path is zeroed.
        store, cell, grads, rng = self._store_with_cell(5)
        x = rng.normal(size=3)
        h0 = np.zeros(3)
        c0 = np.zeros(3)
        h, _, cache = lstm_cell_forward(x, h0, c0, cell)
        lstm_cell_backward(cell, grads, cache, np.array([1.0, 0.0, 0.0]), np.zeros(3))
        # rows of w_i that feed outputs 1..2 get no signal from this readout
        assert np.array_equal(grads.w_i[1:], np.zeros((2, 3)))

    def test_backward_without_cache_is_state_error(self):
        store, cell, grads, _ = self._store_with_cell(1)
        with pytest.raises(RuntimeError):
            lstm_cell_backward(cell, grads, None, np.zeros(3), np.zeros(3))


class TestStackRunner:
    def _build(self, seed, layers=2, input_size=4, hidden=3):
        rng = np.random.default_rng(seed)
        store = ParamStore()
        cells = []
        for l in range(layers):
            d = input_size if l == 0 else hidden
            cell = LstmCellParams.init(rng, d, hidden)
            cell.register(store, f"layer{l}")
            cells.append(cell)
        grads = [LstmCellParams.view(store.grads, f"layer{l}",
                                     cells[l].input_size, hidden)
                 for l in range(layers)]
        return store, cells, grads, rng

    def test_mask_carries_state_through_padding(self):
        store, cells, _, rng = self._build(2)
        xs = rng.normal(size=(6, 2, 4))
        short_mask = np.ones((6, 2))
        short_mask[3:, 0] = 0.0  # first sequence ends after 3 steps
        _, final_h, _, _ = run_stack_forward(cells, xs, short_mask)

        xs_short = xs[:3, :1]
        _, final_h_short, _, _ = run_stack_forward(cells, xs_short, np.ones((3, 1)))
        for l in range(2):
            assert np.allclose(final_h[l][0], final_h_short[l][0], atol=1e-14, rtol=0)

    def test_five_step_two_layer_gradients(self):
        store, cells, grads, rng = self._build(17)
        xs = rng.normal(size=(5, 2, 4))
        mask = np.ones((5, 2))
        mask[4, 1] = 0.0
        readout = rng.normal(size=(5, 2, 3))

        def loss():
            top, _, _, _ = run_stack_forward(cells, xs, mask)
            return float(np.sum(top * readout * mask[:, :, None]))

        top, _, _, cache = run_stack_forward(cells, xs, mask)
        run_stack_backward(cells, grads, cache, readout * mask[:, :, None])
        numeric = numeric_gradients(loss, store, eps=1e-5)
        assert max_relative_error(dict(store.grads), numeric) < 1e-4

    def test_final_state_gradients_flow(self):
        store, cells, grads, rng = self._build(8)
        xs = rng.normal(size=(4, 1, 4))
        mask = np.ones((4, 1))
        v = rng.normal(size=(1, 3))

        def loss():
            _, fh, _, _ = run_stack_forward(cells, xs, mask)
            return float(np.sum(fh[1] * v))

        top, fh, fc, cache = run_stack_forward(cells, xs, mask)
        run_stack_backward(cells, grads, cache, np.zeros((4, 1, 3)),
                           d_final_h=[np.zeros((1, 3)), v],
                           d_final_c=None)
        numeric = numeric_gradients(loss, store, eps=1e-5)
        assert max_relative_error(dict(store.grads), numeric) < 1e-4

    def test_dropout_gradcheck_with_fixed_masks(self):
        store, cells, grads, rng = self._build(30)
        xs = np.random.default_rng(1).normal(size=(3, 2, 4))
        mask = np.ones((3, 2))
        readout = np.random.default_rng(2).normal(size=(3, 2, 3))

        def loss():
            top, _, _, _ = run_stack_forward(
                cells, xs, mask, dropout_rate=0.4, training=True,
                rng=np.random.default_rng(99))
            return float(np.sum(top * readout))

        top, _, _, cache = run_stack_forward(
            cells, xs, mask, dropout_rate=0.4, training=True,
            rng=np.random.default_rng(99))
        run_stack_backward(cells, grads, cache, readout)
        numeric = numeric_gradients(loss, store, eps=1e-5)
        assert max_relative_error(dict(store.grads), numeric) < 1e-4

    def test_backward_before_forward_raises(self):
        store, cells, grads, _ = self._build(4)
        with pytest.raises(RuntimeError):
            run_stack_backward(cells, grads, {}, np.zeros((1, 1, 3)))
