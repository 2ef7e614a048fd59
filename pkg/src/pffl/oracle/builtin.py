"""In-process classifiers with analytic or seeded weights.

All builtin oracles first cast their input to float32, the precision of the
wire format, so a served oracle and its in-process twin see identical inputs.
"""
import numpy as np

from .base import HardLabelOracle


class LinearOracle(HardLabelOracle):
    """Two-class halfspace: label 1 iff w . x + b > 0."""

    num_classes = 2

    def __init__(self, w, b=0.0, budget=None):
        super().__init__(budget)
        w = np.array(w, dtype=np.float64)
        if not np.any(w):
            raise ValueError("weight vector must not be all zero")
        w.setflags(write=False)
        self.w = w
        self.b = float(b)
        self.input_shape = w.shape

    @classmethod
    def random(cls, shape, seed, b=0.0, budget=None):
        rng = np.random.default_rng(seed)
        w = rng.standard_normal(shape) / np.sqrt(np.prod(shape))
        return cls(w, b, budget)

    def score(self, img):
        x = np.asarray(img, dtype=np.float32).astype(np.float64)
        return float(np.dot(self.w.ravel(), x.ravel()) + self.b)

    def _predict(self, img):
        return 1 if self.score(img) > 0 else 0

    def fork(self, budget=None):
        return LinearOracle(self.w, self.b, budget)


class ConvOracle(HardLabelOracle):
    """Seeded two-layer conv net: conv3x3(4)-ReLU-pool2, conv3x3(8)-ReLU-pool2, linear.

    Weights are N(0, 1/fan_in) drawn from ``seed``.  Convolutions use zero
    padding.  Every reduction is accumulated in float32, one term after
    another in a fixed order (convolutions by input channel, kernel row,
    kernel column; readout by flattened feature index), so labels do not
    depend on BLAS or SIMD code paths.
    """

    def __init__(self, input_shape, seed=0, num_classes=10, budget=None):
        super().__init__(budget)
        c, h, w = (int(v) for v in input_shape)
        if h % 4 or w % 4:
            raise ValueError("conv oracle needs height and width divisible by 4")
        self.input_shape = (c, h, w)
        self.num_classes = int(num_classes)
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed)
        self.w1 = (rng.standard_normal((4, c, 3, 3)) / np.sqrt(c * 9)).astype(np.float32)
        self.w2 = (rng.standard_normal((8, 4, 3, 3)) / np.sqrt(4 * 9)).astype(np.float32)
        n_feat = 8 * (h // 4) * (w // 4)
        self.w3 = (rng.standard_normal((self.num_classes, 8, h // 4, w // 4))
                   / np.sqrt(n_feat)).astype(np.float32)
        self._freeze()

    def _freeze(self):
        self._readout = np.ascontiguousarray(self.w3.reshape(self.num_classes, -1).T)
        self._taps1 = np.ascontiguousarray(self.w1.reshape(self.w1.shape[0], -1).T)
        self._taps2 = np.ascontiguousarray(self.w2.reshape(self.w2.shape[0], -1).T)
        for arr in (self.w1, self.w2, self.w3, self._readout, self._taps1, self._taps2):
            arr.setflags(write=False)

    @staticmethod
    def _conv_relu(x, wt):
        cin, h, wd = x.shape
        pad = np.zeros((cin, h + 2, wd + 2), dtype=np.float32)
        pad[:, 1:-1, 1:-1] = x
        # taps ordered (input channel, kernel row, kernel column)
        taps = np.stack([pad[ci, dy:dy + h, dx:dx + wd]
                         for ci in range(cin) for dy in range(3) for dx in range(3)])
        # reducing the outermost axis of a C-contiguous array adds the slices
        # one after another, in tap order
        prod = wt[:, :, None, None] * taps[:, None]
        return np.maximum(prod.sum(axis=0), np.float32(0))

    @staticmethod
    def _pool(x):
        s = x[:, 0::2, 0::2] + x[:, 0::2, 1::2]
        s = s + x[:, 1::2, 0::2]
        s = s + x[:, 1::2, 1::2]
        return s * np.float32(0.25)

    def logits(self, img):
        x = np.asarray(img, dtype=np.float32)
        f = self._pool(self._conv_relu(x, self._taps1))
        f = self._pool(self._conv_relu(f, self._taps2))
        prod = self._readout * f.reshape(-1, 1)
        return prod.sum(axis=0)

    def _predict(self, img):
        return int(np.argmax(self.logits(img)))

    def fork(self, budget=None):
        clone = object.__new__(ConvOracle)
        HardLabelOracle.__init__(clone, budget)
        clone.input_shape = self.input_shape
        clone.num_classes = self.num_classes
        clone.seed = self.seed
        clone.w1, clone.w2, clone.w3 = self.w1, self.w2, self.w3
        clone._readout, clone._taps1, clone._taps2 = self._readout, self._taps1, self._taps2
        return clone


def make_builtin(kind, input_shape, seed=0, num_classes=10, budget=None, bias=0.0):
    if kind == "linear":
        return LinearOracle.random(tuple(input_shape), seed, b=bias, budget=budget)
    if kind == "conv":
        return ConvOracle(input_shape, seed, num_classes, budget)
    raise ValueError(f"unknown builtin oracle kind {kind!r}")
