"""Small differentiable multiclass classifiers and synthetic datasets.

Three architectures (linear, MLP, tiny conv net) stand in for large CNN
victims at desk scale.  All of them consume raw pixel vectors in [0, 255] and
expose logits, argmax predictions, and per-class input gradients computed by
reverse-mode differentiation, which is what the boundary-linearization
attacks need.

Weights are stored in raw-input units, so for the linear model the gradient
of logit k with respect to the input is literally row k of W.  Training would
be badly conditioned in those units (the first-layer bias would need steps
~100x larger than the weights), so the trainer converts the first layer to an
exactly equivalent parametrization over (x - 127.5) / 127.5, runs SGD there,
and converts back when done.  The conversion is affine and exact.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    Divergence,
    FormatError,
    UnsupportedArchitecture,
    UnsupportedKind,
)
from .numerics import Vec, as_vec

PIXEL_MIN = 0.0
PIXEL_MAX = 255.0
PIXEL_CENTER = 127.5
MODEL_FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------

@dataclass
class Sample:
    """One labeled feature vector with pixel-range features."""

    features: Vec
    label: int


class Dataset:
    """Ordered labeled samples sharing one dimension and class count.

    Stored as an (n, d) float64 feature matrix plus an (n,) int label array
    so that fooling-rate evaluation can run batched.
    """

    def __init__(self, features, labels, class_count: int, seed: int = 0):
        self.features = np.asarray(features, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise ValueError("features must be a non-empty (n, d) matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must align with features")
        self.class_count = int(class_count)
        self.seed = int(seed)

    def __len__(self) -> int:
        return self.features.shape[0]

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.features[i], int(self.labels[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def shuffled(self, seed: int) -> "Dataset":
        """Deterministic permutation: same seed, same order."""
        perm = np.random.default_rng(seed).permutation(len(self))
        return Dataset(self.features[perm], self.labels[perm], self.class_count, self.seed)

    def split(self, n_head: int) -> tuple["Dataset", "Dataset"]:
        """Split into (first n_head samples, rest); both keep the class count."""
        if not 0 < n_head < len(self):
            raise ValueError(f"split point {n_head} out of range for {len(self)} samples")
        head = Dataset(self.features[:n_head], self.labels[:n_head], self.class_count, self.seed)
        tail = Dataset(self.features[n_head:], self.labels[n_head:], self.class_count, self.seed)
        return head, tail


@dataclass
class TrainConfig:
    epochs: int = 40
    batch_size: int = 32
    learning_rate: float = 0.1
    seed: int = 0
    weight_decay: float = 1e-4

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")


# ---------------------------------------------------------------------------
# Classifiers
# ---------------------------------------------------------------------------

class Classifier:
    """Base class: deterministic forward, argmax predict (ties -> lowest index),
    and per-class input gradients.  Immutable after training by convention;
    all inference methods are pure."""

    arch_type = "base"

    def __init__(self, input_dim: int, class_count: int, model_id: str, seed: int):
        if input_dim <= 0 or class_count <= 0:
            raise ValueError("input_dim and class_count must be positive")
        self.input_dim = int(input_dim)
        self.class_count = int(class_count)
        self.model_id = str(model_id)
        self.seed = int(seed)
        self.train_accuracy = None

    # -- interface implemented by subclasses --------------------------------

    def param_items(self) -> list[tuple[str, np.ndarray]]:
        """Named weight arrays in declaration (serialization) order."""
        raise NotImplementedError

    def arch_dict(self) -> dict:
        raise NotImplementedError

    def forward_batch(self, X: np.ndarray) -> np.ndarray:
        """Logits for an (n, d) batch, shape (n, K)."""
        raise NotImplementedError

    def input_jacobian(self, x: Vec) -> np.ndarray:
        """d(logits)/d(input) at x, shape (K, d)."""
        raise NotImplementedError

    # -- shared inference ----------------------------------------------------

    def _check_input(self, x) -> Vec:
        x = as_vec(x)
        if x.shape[0] != self.input_dim:
            raise DimensionMismatch(
                f"model {self.model_id} expects dim {self.input_dim}, got {x.shape[0]}")
        return x

    def forward(self, x: Vec) -> Vec:
        """Logits for a single input, shape (K,)."""
        x = self._check_input(x)
        return self.forward_batch(x[None, :])[0]

    def predict(self, x: Vec) -> int:
        return int(np.argmax(self.forward(x)))

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise DimensionMismatch(
                f"model {self.model_id} expects (n, {self.input_dim}) batch, got {X.shape}")
        return np.argmax(self.forward_batch(X), axis=1)

    def class_gradients(self, x: Vec, classes) -> list[Vec]:
        """Gradient of each requested class logit with respect to the input."""
        x = self._check_input(x)
        jac = self.input_jacobian(x)
        out = []
        for k in classes:
            k = int(k)
            if not 0 <= k < self.class_count:
                raise ValueError(f"class index {k} out of range [0, {self.class_count})")
            out.append(jac[k].copy())
        return out

    def copy(self) -> "Classifier":
        clone = build(self.arch_dict(), self.input_dim, self.class_count,
                      self.seed, model_id=self.model_id)
        for (_, dst), (_, src) in zip(clone.param_items(), self.param_items()):
            dst[...] = src
        clone.train_accuracy = self.train_accuracy
        return clone

    # -- training hooks (first-layer reparametrization) ----------------------

    def _to_normalized_input(self):
        raise NotImplementedError

    def _to_raw_input(self):
        raise NotImplementedError

    def _batch_forward_cache(self, X):
        raise NotImplementedError

    def _batch_backward(self, cache, dlogits):
        raise NotImplementedError


class LinearModel(Classifier):
    """Affine classifier: logits = W x + b in raw pixel units."""

    arch_type = "linear"

    def __init__(self, input_dim, class_count, model_id, seed):
        super().__init__(input_dim, class_count, model_id, seed)
        rng = np.random.default_rng(seed)
        self.w = rng.standard_normal((class_count, input_dim)) / math.sqrt(input_dim)
        self.b = np.zeros(class_count)
        self._to_raw_input()

    def param_items(self):
        return [("w", self.w), ("b", self.b)]

    def arch_dict(self):
        return {"type": "linear"}

    def forward_batch(self, X):
        return X @ self.w.T + self.b

    def input_jacobian(self, x):
        return self.w.copy()

    def _to_normalized_input(self):
        self.b = self.b + PIXEL_CENTER * self.w.sum(axis=1)
        self.w = self.w * PIXEL_CENTER

    def _to_raw_input(self):
        self.w = self.w / PIXEL_CENTER
        self.b = self.b - PIXEL_CENTER * self.w.sum(axis=1)

    def _batch_forward_cache(self, X):
        return X @ self.w.T + self.b, {"X": X}

    def _batch_backward(self, cache, dlogits):
        return {"w": dlogits.T @ cache["X"], "b": dlogits.sum(axis=0)}


class MLPModel(Classifier):
    """ReLU MLP: affine -> relu layers, affine head, raw-unit first layer."""

    arch_type = "mlp"

    def __init__(self, input_dim, class_count, hidden, model_id, seed):
        super().__init__(input_dim, class_count, model_id, seed)
        self.hidden = [int(h) for h in hidden]
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise UnsupportedArchitecture(f"bad MLP hidden sizes: {hidden}")
        rng = np.random.default_rng(seed)
        dims = [input_dim] + self.hidden + [class_count]
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            self.weights.append(rng.standard_normal((fan_out, fan_in)) * math.sqrt(2.0 / fan_in))
            self.biases.append(np.zeros(fan_out))
        self._to_raw_input()

    def param_items(self):
        items = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            items.append((f"w{i}", w))
            items.append((f"b{i}", b))
        return items

    def arch_dict(self):
        return {"type": "mlp", "hidden": list(self.hidden)}

    def forward_batch(self, X):
        z = X
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = np.maximum(z @ w.T + b, 0.0)
        return z @ self.weights[-1].T + self.biases[-1]

    def input_jacobian(self, x):
        # Chain the per-layer Jacobians from the head back to the input;
        # relu'(0) is taken as 0.
        pre = []
        z = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = w @ z + b
            pre.append(a)
            z = np.maximum(a, 0.0)
        jac = self.weights[-1]
        for w, a in zip(reversed(self.weights[:-1]), reversed(pre)):
            jac = (jac * (a > 0.0)) @ w
        return jac.copy()

    def _to_normalized_input(self):
        self.biases[0] = self.biases[0] + PIXEL_CENTER * self.weights[0].sum(axis=1)
        self.weights[0] = self.weights[0] * PIXEL_CENTER

    def _to_raw_input(self):
        self.weights[0] = self.weights[0] / PIXEL_CENTER
        self.biases[0] = self.biases[0] - PIXEL_CENTER * self.weights[0].sum(axis=1)

    def _batch_forward_cache(self, X):
        acts = [X]
        pre = []
        z = X
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = z @ w.T + b
            pre.append(a)
            z = np.maximum(a, 0.0)
            acts.append(z)
        logits = z @ self.weights[-1].T + self.biases[-1]
        return logits, {"acts": acts, "pre": pre}

    def _batch_backward(self, cache, dlogits):
        acts, pre = cache["acts"], cache["pre"]
        grads = {}
        last = len(self.weights) - 1
        grads[f"w{last}"] = dlogits.T @ acts[-1]
        grads[f"b{last}"] = dlogits.sum(axis=0)
        dz = dlogits @ self.weights[-1]
        for i in range(last - 1, -1, -1):
            da = dz * (pre[i] > 0.0)
            grads[f"w{i}"] = da.T @ acts[i]
            grads[f"b{i}"] = da.sum(axis=0)
            if i > 0:
                dz = da @ self.weights[i]
        return grads


class ConvModel(Classifier):
    """Tiny conv net: one strided 2-D conv + relu, then an affine head.

    Inputs are flat vectors reshaped to a square single-channel image, so the
    input dimension must be a perfect square of side >= kernel.
    """

    arch_type = "conv"

    def __init__(self, input_dim, class_count, channels, model_id, seed,
                 kernel: int = 3, stride: int = 1):
        super().__init__(input_dim, class_count, model_id, seed)
        side = math.isqrt(input_dim)
        if side * side != input_dim:
            raise UnsupportedArchitecture(
                f"conv input dim must be a perfect square, got {input_dim}")
        if side < kernel:
            raise UnsupportedArchitecture(f"image side {side} smaller than kernel {kernel}")
        self.side = side
        self.channels = int(channels)
        self.kernel = int(kernel)
        self.stride = int(stride)
        if self.channels < 1:
            raise UnsupportedArchitecture(f"bad channel count: {channels}")
        self.out_side = (side - kernel) // stride + 1
        flat = self.channels * self.out_side * self.out_side
        rng = np.random.default_rng(seed)
        self.kernels = rng.standard_normal((self.channels, kernel, kernel)) * math.sqrt(
            2.0 / (kernel * kernel))
        self.conv_bias = np.zeros(self.channels)
        self.fc_w = rng.standard_normal((class_count, flat)) * math.sqrt(2.0 / flat)
        self.fc_b = np.zeros(class_count)
        self._to_raw_input()

    def param_items(self):
        return [("kernels", self.kernels), ("conv_bias", self.conv_bias),
                ("fc_w", self.fc_w), ("fc_b", self.fc_b)]

    def arch_dict(self):
        return {"type": "conv", "channels": self.channels,
                "kernel": self.kernel, "stride": self.stride}

    def _conv_batch(self, imgs):
        # imgs: (n, S, S) -> (n, C, O, O); nine strided slices beat im2col
        # at this size.
        n = imgs.shape[0]
        o, s, k = self.out_side, self.stride, self.kernel
        acc = np.zeros((n, self.channels, o, o))
        for ki in range(k):
            for kj in range(k):
                patch = imgs[:, ki:ki + s * o:s, kj:kj + s * o:s]
                acc += self.kernels[None, :, ki, kj, None, None] * patch[:, None, :, :]
        return acc + self.conv_bias[None, :, None, None]

    def forward_batch(self, X):
        imgs = X.reshape(-1, self.side, self.side)
        z = np.maximum(self._conv_batch(imgs), 0.0)
        return z.reshape(X.shape[0], -1) @ self.fc_w.T + self.fc_b

    def input_jacobian(self, x):
        img = x.reshape(self.side, self.side)
        a = self._conv_batch(img[None])[0]
        mask = a > 0.0
        k_count = self.class_count
        o, s, k = self.out_side, self.stride, self.kernel
        # Head gradient per class, masked through the relu, then scattered
        # back through the conv taps.
        g = self.fc_w.reshape(k_count, self.channels, o, o) * mask[None]
        jac = np.zeros((k_count, self.side, self.side))
        for ki in range(k):
            for kj in range(k):
                contrib = np.tensordot(g, self.kernels[:, ki, kj], axes=([1], [0]))
                jac[:, ki:ki + s * o:s, kj:kj + s * o:s] += contrib
        return jac.reshape(k_count, self.input_dim)

    def _to_normalized_input(self):
        self.conv_bias = self.conv_bias + PIXEL_CENTER * self.kernels.sum(axis=(1, 2))
        self.kernels = self.kernels * PIXEL_CENTER

    def _to_raw_input(self):
        self.kernels = self.kernels / PIXEL_CENTER
        self.conv_bias = self.conv_bias - PIXEL_CENTER * self.kernels.sum(axis=(1, 2))

    def _batch_forward_cache(self, X):
        imgs = X.reshape(-1, self.side, self.side)
        a = self._conv_batch(imgs)
        z = np.maximum(a, 0.0)
        flat = z.reshape(X.shape[0], -1)
        logits = flat @ self.fc_w.T + self.fc_b
        return logits, {"imgs": imgs, "a": a, "flat": flat}

    def _batch_backward(self, cache, dlogits):
        imgs, a, flat = cache["imgs"], cache["a"], cache["flat"]
        grads = {"fc_w": dlogits.T @ flat, "fc_b": dlogits.sum(axis=0)}
        da = (dlogits @ self.fc_w).reshape(a.shape) * (a > 0.0)
        o, s, k = self.out_side, self.stride, self.kernel
        dk = np.zeros_like(self.kernels)
        for ki in range(k):
            for kj in range(k):
                patch = imgs[:, ki:ki + s * o:s, kj:kj + s * o:s]
                dk[:, ki, kj] = np.einsum("ncij,nij->c", da, patch)
        grads["kernels"] = dk
        grads["conv_bias"] = da.sum(axis=(0, 2, 3))
        return grads


def perturbed(x, delta, clamp_input: bool = False):
    """x + delta, optionally clamped back into the pixel range.

    Works for a single vector or an (n, d) batch against a shared delta.
    Clamping is off by default: only the perturbation itself is budgeted,
    the perturbed input is fed to the model as-is.
    """
    out = x + delta
    if clamp_input:
        out = np.clip(out, PIXEL_MIN, PIXEL_MAX)
    return out


# ---------------------------------------------------------------------------
# Construction, training, serialization
# ---------------------------------------------------------------------------

def parse_architecture(spec) -> dict:
    """Normalize an architecture spec (dict or compact string) to a dict.

    Strings: "linear", "mlp:32", "mlp:64x32", "conv:4".
    """
    if isinstance(spec, dict):
        if spec.get("type") not in ("linear", "mlp", "conv"):
            raise UnsupportedArchitecture(f"unknown architecture: {spec!r}")
        return spec
    if not isinstance(spec, str):
        raise UnsupportedArchitecture(f"unknown architecture: {spec!r}")
    name, _, rest = spec.strip().lower().partition(":")
    if name == "linear":
        return {"type": "linear"}
    if name == "mlp":
        try:
            hidden = [int(h) for h in (rest or "32").split("x")]
        except ValueError:
            raise UnsupportedArchitecture(f"bad MLP spec: {spec!r}") from None
        return {"type": "mlp", "hidden": hidden}
    if name == "conv":
        try:
            channels = int(rest or "6")
        except ValueError:
            raise UnsupportedArchitecture(f"bad conv spec: {spec!r}") from None
        return {"type": "conv", "channels": channels, "kernel": 3, "stride": 1}
    raise UnsupportedArchitecture(f"unknown architecture: {spec!r}")


def arch_tag(arch: dict) -> str:
    """Compact string form of an architecture dict, inverse of parsing."""
    if arch["type"] == "linear":
        return "linear"
    if arch["type"] == "mlp":
        return "mlp:" + "x".join(str(h) for h in arch["hidden"])
    return f"conv:{arch['channels']}"


def build(architecture, input_dim: int, class_count: int, seed: int,
          model_id: str | None = None) -> Classifier:
    """Deterministically initialized untrained classifier."""
    arch = parse_architecture(architecture)
    if model_id is None:
        model_id = f"{arch_tag(arch)}-d{input_dim}-k{class_count}-s{seed}"
    if arch["type"] == "linear":
        return LinearModel(input_dim, class_count, model_id, seed)
    if arch["type"] == "mlp":
        return MLPModel(input_dim, class_count, arch["hidden"], model_id, seed)
    return ConvModel(input_dim, class_count, arch["channels"], model_id, seed,
                     kernel=arch.get("kernel", 3), stride=arch.get("stride", 1))


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def train(classifier: Classifier, data: Dataset, cfg: TrainConfig) -> Classifier:
    """Mini-batch SGD on softmax cross-entropy; deterministic given seeds.

    Returns a trained copy; the input classifier is untouched.  Weight decay
    applies to weight matrices only.  Raises Divergence if the loss leaves
    the finite range.
    """
    if data.dim != classifier.input_dim or data.class_count != classifier.class_count:
        raise DimensionMismatch(
            f"dataset ({data.dim} dims, {data.class_count} classes) does not match "
            f"model ({classifier.input_dim}, {classifier.class_count})")
    model = classifier.copy()
    model._to_normalized_input()
    rng = np.random.default_rng(cfg.seed)
    X_norm = (data.features - PIXEL_CENTER) / PIXEL_CENTER
    y = data.labels
    n = len(data)
    onehot = np.eye(model.class_count)[y]
    decay_names = {name for name, arr in model.param_items() if arr.ndim > 1}
    params = dict(model.param_items())

    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            Xb, yb = X_norm[idx], onehot[idx]
            logits, cache = model._batch_forward_cache(Xb)
            p = _softmax(logits)
            picked = p[np.arange(len(idx)), y[idx]]
            loss = -np.mean(np.log(np.clip(picked, 1e-300, None)))
            if not np.isfinite(loss):
                raise Divergence(f"training loss became non-finite ({loss})")
            dlogits = (p - yb) / len(idx)
            grads = model._batch_backward(cache, dlogits)
            for name, arr in params.items():
                g = grads[name]
                if name in decay_names and cfg.weight_decay > 0:
                    g = g + cfg.weight_decay * arr
                arr -= cfg.learning_rate * g

    model._to_raw_input()
    preds = model.predict_batch(data.features)
    model.train_accuracy = float(np.mean(preds == y))
    return model


def save(classifier: Classifier, path) -> None:
    """Write the model as JSON: header fields plus inline float64 weights in
    declaration order (format_version 1 keeps the weights as JSON numbers)."""
    flat = np.concatenate([arr.ravel() for _, arr in classifier.param_items()])
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "architecture": classifier.arch_dict(),
        "dims": classifier.input_dim,
        "K": classifier.class_count,
        "model_id": classifier.model_id,
        "seed": classifier.seed,
        "train_accuracy": classifier.train_accuracy,
        "weights": flat.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load(path) -> Classifier:
    """Load a model saved by save(); round-trips forward outputs bitwise."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"unreadable model file {path}: {exc}") from exc
    for key in ("format_version", "architecture", "dims", "K",
                "model_id", "seed", "weights"):
        if key not in doc:
            raise FormatError(f"model file {path} missing field {key!r}")
    if doc["format_version"] != MODEL_FORMAT_VERSION:
        raise FormatError(f"unsupported model format version {doc['format_version']}")
    try:
        model = build(doc["architecture"], doc["dims"], doc["K"],
                      doc["seed"], model_id=doc["model_id"])
    except UnsupportedArchitecture as exc:
        raise FormatError(str(exc)) from exc
    flat = np.asarray(doc["weights"], dtype=np.float64)
    sizes = [arr.size for _, arr in model.param_items()]
    if flat.size != sum(sizes):
        raise FormatError(
            f"model file {path} has {flat.size} weights, expected {sum(sizes)}")
    offset = 0
    for _, arr in model.param_items():
        arr[...] = flat[offset:offset + arr.size].reshape(arr.shape)
        offset += arr.size
    model.train_accuracy = doc.get("train_accuracy")
    return model


# ---------------------------------------------------------------------------
# Synthetic datasets
# ---------------------------------------------------------------------------

def make_synthetic_dataset(kind: str, d: int, K: int, n: int, seed: int,
                           spread: float | None = None,
                           noise: float | None = None) -> Dataset:
    """Deterministic labeled dataset with features in [0, 255].

    kinds:
      blobs      gaussian clusters at K random directions from mid-gray;
                 spread is the center radius (default 40), noise the cluster
                 sigma (default 6).  Linearly separable by a wide margin.
      rings      paired radial shells: classes sit two-per-axis on a few
                 orthogonal latent directions, at radius spread (default 40)
                 and spread + 0.225*spread.  The shell gap makes per-image
                 boundary distances small while fooling most of the set
                 requires a large accumulated perturbation, so generation
                 dynamics are interesting rather than instant.
      mnist-like per-class coarse random templates upsampled to a square
                 image plus pixel noise (requires square d).
    """
    if n < K:
        raise ValueError(f"need at least one sample per class: n={n}, K={K}")
    if d < 2 or K < 2:
        raise ValueError("need d >= 2 and K >= 2")
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % K

    if kind == "blobs":
        spread = 40.0 if spread is None else spread
        noise = 6.0 if noise is None else noise
        dirs = rng.standard_normal((K, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        centers = PIXEL_CENTER + spread * dirs
        feats = centers[labels] + noise * rng.standard_normal((n, d))
    elif kind == "rings":
        spread = 40.0 if spread is None else spread
        noise = 1.2 if noise is None else noise
        q = (K + 1) // 2                      # axes; two shells per axis
        p = max(q + 1, 6)                     # latent dims incl. slack
        if p > d:
            raise ValueError(f"rings needs d >= {p} for K={K}")
        basis, _ = np.linalg.qr(rng.standard_normal((d, p)))
        axes = basis[:, :q].T
        axis_id = labels // 2
        radius = np.where(labels % 2 == 0, spread, spread * 1.225)
        feats = PIXEL_CENTER + radius[:, None] * axes[axis_id]
        feats += noise * rng.standard_normal((n, p)) @ basis.T
        feats += 0.5 * noise * rng.standard_normal((n, d))
    elif kind == "mnist-like":
        spread = 12.0 if spread is None else spread
        noise = 4.0 if noise is None else noise
        side = math.isqrt(d)
        if side * side != d:
            raise UnsupportedKind(f"mnist-like needs a square dimension, got {d}")
        coarse_side = max(2, side // 4)
        up = math.ceil(side / coarse_side)
        templates = np.empty((K, d))
        for k in range(K):
            coarse = rng.uniform(PIXEL_CENTER - spread, PIXEL_CENTER + spread,
                                 size=(coarse_side, coarse_side))
            full = np.kron(coarse, np.ones((up, up)))[:side, :side]
            templates[k] = full.ravel()
        feats = templates[labels] + noise * rng.standard_normal((n, d))
    else:
        raise UnsupportedKind(f"unknown dataset kind {kind!r}")

    feats = np.clip(feats, PIXEL_MIN, PIXEL_MAX)
    return Dataset(feats, labels, K, seed)
