import numpy as np
import pytest


class ScriptedRng:
    """Stands in for RngStream with forced index draws.

    ``picks`` are consumed by ``integers``/``choice`` in order; normal draws
    return ``normal_value`` (arrays of it when sized).
    """

    def __init__(self, picks=(), normal_value=0.5):
        self.picks = list(picks)
        self.normal_value = normal_value

    def integers(self, n):
        i = self.picks.pop(0)
        assert 0 <= i < n, f"scripted pick {i} outside range {n}"
        return i

    def choice(self, items):
        return items[self.integers(len(items))]

    def normal(self, size=None):
        if size is None:
            return self.normal_value
        return np.full(size, self.normal_value, dtype=float)

    def uniform(self, low, high, size=None):
        raise AssertionError("uniform not scripted")


@pytest.fixture
def scripted():
    return ScriptedRng
