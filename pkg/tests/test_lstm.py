"""LSTM recurrence behavior; gradients are covered by the gradient suite."""

import numpy as np
import numpy.testing as npt
import pytest

from ecgnet.lstm import lstm_backward, lstm_forward


def test_zero_weights_give_zero_hidden_states():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((3, 4, 6))
    hidden = 5
    h_seq, h_last, _ = lstm_forward(
        x, np.zeros((4 * hidden, 4)), np.zeros((4 * hidden, hidden)), np.zeros(4 * hidden)
    )
    assert not h_seq.any()
    assert not h_last.any()


def test_single_step_hand_recurrence():
    # scalar gates, all weights 1, biases 0, x=1:
    # i = f = o = sigmoid(1), g = tanh(1), c1 = i*g, h1 = o*tanh(c1)
    x = np.array([[[1.0]]])
    h_seq, h_last, _ = lstm_forward(x, np.ones((4, 1)), np.ones((4, 1)), np.zeros(4))
    npt.assert_allclose(h_last, [[0.36960635293570576]], rtol=1e-12)
    npt.assert_allclose(h_seq, [[[0.36960635293570576]]], rtol=1e-12)


def test_two_steps_use_recurrent_path():
    # second step with same input differs from the first because h and c carry over
    x = np.array([[[1.0, 1.0]]])
    h_seq, h_last, _ = lstm_forward(x, np.ones((4, 1)), np.ones((4, 1)), np.zeros(4))
    assert h_seq[0, 0, 1] != h_seq[0, 0, 0]
    npt.assert_allclose(h_last[0, 0], h_seq[0, 0, 1])


def test_output_shapes():
    x = np.zeros((2, 3, 7))
    hidden = 4
    h_seq, h_last, _ = lstm_forward(
        x, np.zeros((4 * hidden, 3)), np.zeros((4 * hidden, hidden)), np.zeros(4 * hidden)
    )
    assert h_seq.shape == (2, 4, 7)
    assert h_last.shape == (2, 4)


def test_weight_shape_mismatch():
    with pytest.raises(ValueError, match="wx shape"):
        lstm_forward(np.zeros((1, 3, 2)), np.zeros((8, 4)), np.zeros((8, 2)), np.zeros(8))


def test_backward_requires_some_gradient():
    x = np.zeros((1, 2, 3))
    hidden = 2
    _, _, cache = lstm_forward(
        x, np.zeros((4 * hidden, 2)), np.zeros((4 * hidden, hidden)), np.zeros(4 * hidden)
    )
    with pytest.raises(ValueError, match="upstream"):
        lstm_backward(None, None, cache)
