import math

import numpy as np
import pytest

from nevo.errors import ConfigError, ContractError
from nevo.rng import derive_stream
from nevo.static import StaticConvNet, StaticNet

from conftest import ScriptedRng


def test_layer_shapes_and_param_count():
    net = StaticNet((4, 32, 32, 2), derive_stream(0, 3))
    assert [w.shape for w in net.weights] == [(32, 4), (32, 32), (2, 32)]
    assert net.n_params() == 4 * 32 + 32 + 32 * 32 + 32 + 32 * 2 + 2


def test_forward_hand_evaluation():
    net = StaticNet((2, 1, 1), ScriptedRng(normal_value=0.5))
    h = math.tanh(0.5 * 1.0 + 0.5 * 2.0 + 0.5)
    assert net.forward([1.0, 2.0]) == [pytest.approx(math.tanh(0.5 * h + 0.5))]


def test_feedforward_has_no_memory():
    net = StaticNet((3, 5, 2), derive_stream(1, 3))
    a = net.forward([0.1, 0.2, 0.3])
    net.forward([5.0, 5.0, 5.0])
    assert net.forward([0.1, 0.2, 0.3]) == a


def test_recurrent_head_remembers_until_reset():
    net = StaticNet((3, 5, 5, 1), derive_stream(1, 3), recurrent=True)
    a = net.forward([0.1, 0.2, 0.3])
    net.forward([5.0, -5.0, 5.0])
    assert net.forward([0.1, 0.2, 0.3]) != a
    net.reset()
    assert net.forward([0.1, 0.2, 0.3]) == a


def test_perturb_keeps_topology():
    net = StaticNet((4, 8, 8, 2), derive_stream(2, 3), recurrent=True)
    shapes = [p.shape for p in net.params()]
    before = np.concatenate([p.ravel() for p in net.params()])
    net.perturb(derive_stream(3, 2))
    after = np.concatenate([p.ravel() for p in net.params()])
    assert [p.shape for p in net.params()] == shapes
    assert (after != before).all()


def test_bad_widths():
    with pytest.raises(ConfigError):
        StaticNet((4,), ScriptedRng())
    with pytest.raises(ConfigError):
        StaticNet((4, 2), ScriptedRng(), recurrent=True)
    with pytest.raises(ContractError):
        StaticNet((4, 2), ScriptedRng()).forward([1.0])


def test_conv_net_shapes_and_extra_inputs():
    net = StaticConvNet((1, 8, 8), 16, 5, derive_stream(0, 3), n_extra=5, recurrent=True)
    assert net.widths == [4 * 4 * 4 + 5, 16, 5]
    out = net.forward(np.zeros((1, 8, 8)), [0, 0, 1, 0, 0])
    assert len(out) == 5
    with pytest.raises(ContractError):
        net.forward(np.zeros((1, 8, 8)))
    with pytest.raises(ContractError):
        net.forward(np.zeros((1, 7, 8)), [0] * 5)
