"""Fixed-topology baselines: only weights evolve."""

from __future__ import annotations

import numpy as np

from .dcn import conv3x3
from .errors import ConfigError, ContractError

PERTURB_STD = 0.1


class StaticNet:
    """Feedforward tanh stack, e.g. widths ``(4, 32, 32, 2)``.

    With ``recurrent=True`` the last hidden layer also reads its own previous
    activation through a square weight matrix, which is how discriminators
    accumulate evidence across a trajectory.
    """

    def __init__(self, widths, rng, recurrent: bool = False):
        widths = [int(w) for w in widths]
        if len(widths) < 2 or min(widths) < 1:
            raise ConfigError(f"bad layer widths {widths}")
        if recurrent and len(widths) < 3:
            raise ConfigError("a recurrent static net needs a hidden layer")
        self.widths = widths
        self.recurrent = recurrent
        self.weights = [rng.normal((o, i)) for i, o in zip(widths[:-1], widths[1:])]
        self.biases = [rng.normal(o) for o in widths[1:]]
        self.loop = rng.normal((widths[-2], widths[-2])) if recurrent else None
        self._h = None

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        if self.loop is not None:
            out.append(self.loop)
        return out

    def set_params(self, arrays):
        arrays = list(arrays)
        n = len(self.weights)
        self.weights = arrays[0:2 * n:2]
        self.biases = arrays[1:2 * n:2]
        self.loop = arrays[2 * n] if self.recurrent else None

    def n_params(self) -> int:
        return sum(a.size for a in self.params())

    def perturb(self, rng, std: float = PERTURB_STD):
        ps = self.params()
        deltas = rng.normal(sum(p.size for p in ps)) * std
        out, i = [], 0
        for p in ps:
            out.append(p + deltas[i:i + p.size].reshape(p.shape))
            i += p.size
        self.set_params(out)

    def reset(self):
        self._h = None

    def _dense(self, x):
        h = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = w @ h + b
            if self.loop is not None and k == last - 1:
                if self._h is not None:
                    z = z + self.loop @ self._h
                h = np.tanh(z)
                self._h = h
            else:
                h = np.tanh(z)
        return h

    def forward(self, inputs) -> list[float]:
        x = np.asarray(inputs, dtype=float)
        if x.shape != (self.widths[0],):
            raise ContractError(f"expected {self.widths[0]} inputs, got shape {x.shape}")
        return self._dense(x).tolist()

    def __getstate__(self):
        state = dict(self.__dict__)
        state["_h"] = None
        return state


class StaticConvNet(StaticNet):
    """Two fixed 3x3 conv layers, flattened into a dense recurrent-capable head.

    Stands in for the convolutional-recurrent baseline on pixel tasks; the
    dense head may take ``n_extra`` side inputs next to the flattened maps.
    """

    def __init__(self, shape, hidden: int, n_out: int, rng, channels: int = 4,
                 recurrent: bool = False, n_extra: int = 0):
        c, h, w = (int(s) for s in shape)
        self.shape = (c, h, w)
        self.channels = channels
        self.n_extra = n_extra
        self.kernels = [rng.normal((channels, c, 3, 3)), rng.normal((channels, channels, 3, 3))]
        self.kbias = [rng.normal(channels), rng.normal(channels)]
        fh, fw = h, w
        for _ in range(2):
            fh, fw = max(fh - 2, 1), max(fw - 2, 1)
        super().__init__([channels * fh * fw + n_extra, hidden, n_out], rng, recurrent=recurrent)

    def params(self):
        return self.kernels + self.kbias + super().params()

    def set_params(self, arrays):
        arrays = list(arrays)
        self.kernels = arrays[0:2]
        self.kbias = arrays[2:4]
        super().set_params(arrays[4:])

    def forward(self, image, extra=()) -> list[float]:
        x = np.asarray(image, dtype=float)
        if x.shape != self.shape:
            raise ContractError(f"image shape {x.shape} != {self.shape}")
        if len(extra) != self.n_extra:
            raise ContractError(f"expected {self.n_extra} extra inputs")
        for k, b in zip(self.kernels, self.kbias):
            x = conv3x3(x, k, b)
        flat = np.concatenate([x.ravel(), np.asarray(extra, dtype=float)])
        return self._dense(flat).tolist()
