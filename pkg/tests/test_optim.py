import numpy as np
import pytest

from reqsentry.nn import AdamState, ParamStore, adam_step


def _scalar_store(value=1.0):
    store = ParamStore()
    store.add("w", np.array([[value]]))
    return store


class TestParamStore:
    def test_every_param_has_matching_grad_slot(self):
        store = ParamStore()
        store.add("a", np.zeros((2, 3)))
        store.add("b", np.zeros((4, 1)))
        for name in store.names():
            assert store.grads[name].shape == store.params[name].shape

    def test_duplicate_name_rejected(self):
        store = _scalar_store()
        with pytest.raises(ValueError):
            store.add("w", np.zeros((1, 1)))

    def test_clip_global_norm(self):
        store = ParamStore()
        store.add("a", np.zeros(3))
        store.grads["a"][...] = [3.0, 4.0, 0.0]
        norm = store.clip_global_norm(1.0)
        assert norm == pytest.approx(5.0)
        assert np.linalg.norm(store.grads["a"]) == pytest.approx(1.0)

    def test_clip_noop_when_under_limit(self):
        store = ParamStore()
        store.add("a", np.zeros(2))
        store.grads["a"][...] = [0.3, 0.4]
        store.clip_global_norm(5.0)
        assert np.array_equal(store.grads["a"], [0.3, 0.4])


class TestAdam:
    def test_zero_gradients_leave_params_unchanged(self):
        store = _scalar_store(2.5)
        state = AdamState.for_store(store)
        adam_step(store, state)
        assert store.params["w"][0, 0] == 2.5
        assert state.t == 1

    def test_first_step_moves_by_learning_rate(self):
        store = _scalar_store(0.0)
        state = AdamState.for_store(store, learning_rate=0.1)
        store.grads["w"][...] = 1.0
        adam_step(store, state)
        # bias-corrected first step is -lr * g/|g| up to epsilon
        assert store.params["w"][0, 0] == pytest.approx(-0.1, rel=1e-6)

    def test_t_strictly_increments(self):
        store = _scalar_store()
        state = AdamState.for_store(store)
        for expected in (1, 2, 3):
            adam_step(store, state)
            assert state.t == expected

    def test_descends_quadratic(self):
        store = _scalar_store(1.0)
        state = AdamState.for_store(store, learning_rate=0.05)
        for _ in range(200):
            w = store.params["w"][0, 0]
            store.grads["w"][...] = 2.0 * w
            adam_step(store, state)
        assert abs(store.params["w"][0, 0]) < 0.01

    def test_updates_in_place_preserving_views(self):
        store = ParamStore()
        arr = store.add("w", np.ones((2, 2)))
        state = AdamState.for_store(store)
        store.grads["w"][...] = 1.0
        adam_step(store, state)
        assert arr is store.params["w"]
        assert np.all(arr != 1.0)
