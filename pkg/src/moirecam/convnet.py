"""Desk-scale convolutional victim classifier with exact input gradients.

Everything is float64 numpy with hand-written backprop, so the gradient of
the adversarial loss with respect to every input intensity can be validated
against central finite differences to tight tolerances. Inputs are RGB
arrays in [0, 255]; the only normalization is a division by 255.
"""

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .validation import check_label

MODEL_FORMAT = "moirecam-convnet"
MODEL_VERSION = 1


@dataclass(frozen=True)
class LossSpec:
    """Adversarial loss selector.

    untargeted: loss = log p_label, label = the true class (minimizing
    drives probability away from the truth). targeted: loss =
    -log p_label, label = the attacker's target class.
    """

    mode: str
    label: int

    def __post_init__(self):
        if self.mode not in ("untargeted", "targeted"):
            raise ValueError(f"mode must be 'untargeted' or 'targeted', got {self.mode!r}")


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z):
    m = z.max(axis=-1, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=-1, keepdims=True))


class Conv2D:
    """Same-padded cross-correlation layer, NHWC, float64."""

    def __init__(self, in_ch, out_ch, ksize, stride=1, rng=None):
        self.in_ch, self.out_ch, self.ksize, self.stride = in_ch, out_ch, ksize, stride
        scale = np.sqrt(2.0 / (ksize * ksize * in_ch))
        rng = rng or np.random.default_rng(0)
        self.w = rng.normal(0.0, scale, size=(ksize, ksize, in_ch, out_ch))
        self.b = np.zeros(out_ch)
        self._cache = None

    def _cols(self, xp, out_h, out_w):
        n = xp.shape[0]
        k, s, c = self.ksize, self.stride, self.in_ch
        cols = np.empty((n, out_h, out_w, k * k * c))
        for u in range(k):
            for v in range(k):
                patch = xp[:, u : u + s * out_h : s, v : v + s * out_w : s, :]
                cols[:, :, :, (u * k + v) * c : (u * k + v + 1) * c] = patch
        return cols

    def forward(self, x):
        n, h, w, _ = x.shape
        k, s, p = self.ksize, self.stride, self.ksize // 2
        out_h = (h + 2 * p - k) // s + 1
        out_w = (w + 2 * p - k) // s + 1
        xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
        cols = self._cols(xp, out_h, out_w)
        wmat = self.w.reshape(-1, self.out_ch)
        out = cols @ wmat + self.b
        self._cache = (cols, xp.shape, (h, w), out_h, out_w)
        return out

    def backward(self, g):
        cols, xp_shape, (h, w), out_h, out_w = self._cache
        wmat = self.w.reshape(-1, self.out_ch)
        self.grad_w = np.tensordot(cols, g, axes=([0, 1, 2], [0, 1, 2])).reshape(self.w.shape)
        self.grad_b = g.sum(axis=(0, 1, 2))
        gcols = g @ wmat.T
        gxp = np.zeros(xp_shape)
        k, s, c, p = self.ksize, self.stride, self.in_ch, self.ksize // 2
        for u in range(k):
            for v in range(k):
                gxp[:, u : u + s * out_h : s, v : v + s * out_w : s, :] += gcols[
                    :, :, :, (u * k + v) * c : (u * k + v + 1) * c
                ]
        return gxp[:, p : p + h, p : p + w, :]

    @property
    def params(self):
        return [("w", self.w), ("b", self.b)]

    def step(self, lr):
        self.w -= lr * self.grad_w
        self.b -= lr * self.grad_b


class ReLU:
    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, g):
        return np.where(self._mask, g, 0.0)

    params = []

    def step(self, lr):
        pass


class AvgPool2:
    """2x2 average pooling, stride 2; requires even spatial dims."""

    def forward(self, x):
        n, h, w, c = x.shape
        self._shape = x.shape
        return x.reshape(n, h // 2, 2, w // 2, 2, c).mean(axis=(2, 4))

    def backward(self, g):
        n, h, w, c = self._shape
        g4 = g[:, :, None, :, None, :] / 4.0
        return np.broadcast_to(g4, (n, h // 2, 2, w // 2, 2, c)).reshape(n, h, w, c)

    params = []

    def step(self, lr):
        pass


class Flatten:
    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, g):
        return g.reshape(self._shape)

    params = []

    def step(self, lr):
        pass


class Dense:
    def __init__(self, in_dim, out_dim, rng=None):
        self.in_dim, self.out_dim = in_dim, out_dim
        rng = rng or np.random.default_rng(0)
        self.w = rng.normal(0.0, np.sqrt(2.0 / in_dim), size=(in_dim, out_dim))
        self.b = np.zeros(out_dim)

    def forward(self, x):
        self._x = x
        return x @ self.w + self.b

    def backward(self, g):
        self.grad_w = self._x.T @ g
        self.grad_b = g.sum(axis=0)
        return g @ self.w.T

    @property
    def params(self):
        return [("w", self.w), ("b", self.b)]

    def step(self, lr):
        self.w -= lr * self.grad_w
        self.b -= lr * self.grad_b


class ConvNetClassifier(BaseEstimator, ClassifierMixin):
    """Small conv net victim: [conv-relu-avgpool]* then a dense readout.

    Parameters mirror sklearn conventions; `fit` runs deterministic
    mini-batch SGD on mean cross-entropy given the seed. Pass
    conv_channels=() for a purely linear model.
    """

    def __init__(
        self,
        input_size=32,
        n_classes=3,
        conv_channels=(8, 16),
        kernel_size=3,
        epochs=30,
        lr=0.05,
        batch_size=32,
        seed=0,
    ):
        self.input_size = input_size
        self.n_classes = n_classes
        self.conv_channels = conv_channels
        self.kernel_size = kernel_size
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed

    # -- construction -----------------------------------------------------

    def _build(self, rng):
        chans = tuple(self.conv_channels)
        if chans and self.input_size % (2 ** len(chans)) != 0:
            raise ValueError(
                f"input_size {self.input_size} not divisible by 2^{len(chans)} pooling stages"
            )
        layers = []
        prev = 3
        side = self.input_size
        for ch in chans:
            layers.append(Conv2D(prev, ch, self.kernel_size, rng=rng))
            layers.append(ReLU())
            layers.append(AvgPool2())
            prev = ch
            side //= 2
        layers.append(Flatten())
        layers.append(Dense(side * side * prev, self.n_classes, rng=rng))
        self.layers_ = layers
        self.classes_ = np.arange(self.n_classes)
        return self

    def ensure_built(self):
        if not hasattr(self, "layers_"):
            self._build(np.random.default_rng(self.seed))
        return self

    # -- forward / gradients ----------------------------------------------

    def _check_input(self, x):
        arr = np.asarray(x, dtype=np.float64)
        single = arr.ndim == 3
        if single:
            arr = arr[None]
        s = self.input_size
        if arr.ndim != 4 or arr.shape[1:] != (s, s, 3):
            raise ValueError(f"expected images of shape ({s}, {s}, 3), got {arr.shape[1:]}")
        return arr, single

    def decision_function(self, x):
        """Logits for a batch (n, s, s, 3) or a single (s, s, 3) image."""
        self.ensure_built()
        arr, single = self._check_input(x)
        out = arr / 255.0
        for layer in self.layers_:
            out = layer.forward(out)
        return out[0] if single else out

    def predict_proba(self, x):
        return softmax(self.decision_function(x))

    def predict(self, x):
        return np.argmax(self.decision_function(x), axis=-1)

    def loss_and_input_gradient(self, img, loss_spec):
        """Adversarial loss and its exact gradient w.r.t. every intensity.

        Returns (scalar, (s, s, 3) gradient). Both loss branches are
        minimized by the attacks.
        """
        self.ensure_built()
        arr, single = self._check_input(img)
        if not single:
            raise ValueError("loss_and_input_gradient expects a single image")
        label = check_label(loss_spec.label, self.n_classes)
        out = arr / 255.0
        for layer in self.layers_:
            out = layer.forward(out)
        logp = log_softmax(out)
        p = np.exp(logp)
        onehot = np.zeros_like(p)
        onehot[0, label] = 1.0
        if loss_spec.mode == "untargeted":
            loss = float(logp[0, label])
            gz = onehot - p
        else:
            loss = float(-logp[0, label])
            gz = p - onehot
        g = gz
        for layer in reversed(self.layers_):
            g = layer.backward(g)
        return loss, g[0] / 255.0

    # -- training -----------------------------------------------------------

    def fit(self, x, y):
        """Deterministic mini-batch SGD on mean cross-entropy."""
        arr = np.asarray(x, dtype=np.float64)
        labels = np.asarray(y, dtype=np.int64)
        if arr.size == 0 or labels.size == 0:
            raise ValueError("training dataset is empty")
        arr, _ = self._check_input(arr)
        rng = np.random.default_rng(self.seed)
        self._build(rng)
        n = arr.shape[0]
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                idx = order[start : start + self.batch_size]
                xb = arr[idx] / 255.0
                out = xb
                for layer in self.layers_:
                    out = layer.forward(out)
                p = softmax(out)
                gz = p.copy()
                gz[np.arange(len(idx)), labels[idx]] -= 1.0
                gz /= len(idx)
                g = gz
                for layer in reversed(self.layers_):
                    g = layer.backward(g)
                for layer in self.layers_:
                    layer.step(self.lr)
        self.train_accuracy_ = float(np.mean(self.predict(arr) == labels))
        return self

    # -- serialization ------------------------------------------------------

    def save(self, path):
        """Versioned text model file; weights are hex floats (bit-faithful)."""
        self.ensure_built()
        weights = []
        for layer in self.layers_:
            for name, arr in layer.params:
                weights.append(
                    {
                        "name": name,
                        "shape": list(arr.shape),
                        "values_hex": [v.hex() for v in arr.ravel().tolist()],
                    }
                )
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "params": {
                "input_size": self.input_size,
                "n_classes": self.n_classes,
                "conv_channels": list(self.conv_channels),
                "kernel_size": self.kernel_size,
                "epochs": self.epochs,
                "lr": self.lr,
                "batch_size": self.batch_size,
                "seed": self.seed,
            },
            "weights": weights,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"could not parse model file {path}: {exc}") from exc
        for field in ("format", "version", "params", "weights"):
            if field not in doc:
                raise ValueError(f"model file missing field '{field}'")
        if doc["format"] != MODEL_FORMAT:
            raise ValueError(f"not a {MODEL_FORMAT} file: format={doc['format']!r}")
        if doc["version"] != MODEL_VERSION:
            raise ValueError(
                f"unsupported model file version {doc['version']} (expected {MODEL_VERSION})"
            )
        params = dict(doc["params"])
        params["conv_channels"] = tuple(params.get("conv_channels", ()))
        model = cls(**params)
        model.ensure_built()
        stored = list(doc["weights"])
        slots = [(layer, name, arr) for layer in model.layers_ for name, arr in layer.params]
        if len(stored) != len(slots):
            raise ValueError(
                f"model file has {len(stored)} weight arrays, expected {len(slots)}"
            )
        for rec, (layer, name, arr) in zip(stored, slots):
            if rec.get("name") != name or tuple(rec.get("shape", ())) != arr.shape:
                raise ValueError(
                    f"weight mismatch: file has {rec.get('name')}{rec.get('shape')}, "
                    f"expected {name}{list(arr.shape)}"
                )
            vals = np.array([float.fromhex(s) for s in rec["values_hex"]])
            arr[...] = vals.reshape(arr.shape)
        return model
