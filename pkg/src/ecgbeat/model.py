"""Residual 1-D CNN beat classifiers: the 11-conv original and the 6-conv modified."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import ndkernel as nk
from .errors import DataError, ShapeError
from .ndkernel import ParamTensor

LAYER_KINDS = ("conv", "relu", "maxpool", "residual_block", "flatten", "dense")

MITBIH_LABELS = ("Normal", "Supraventricular", "Ventricular", "Fusion Beat", "Unknown")
PTB_LABELS = ("Normal", "Abnormal")

ORIGINAL_BLOCKS = (16, 32, 64, 128, 256)
MODIFIED_BLOCKS = (16, 32, 64)
STEM_FILTERS = 16
KERNEL = 3
HIDDEN_UNITS = 32
DEFAULT_INPUT_LENGTH = 187

# minimum input lengths (documented preconditions of the two builders)
MIN_LENGTH = {"original": 64, "modified": 8}


def default_label_names(n_classes: int) -> tuple[str, ...]:
    if n_classes == 5:
        return MITBIH_LABELS
    if n_classes == 2:
        return PTB_LABELS
    return tuple(f"class_{i}" for i in range(n_classes))


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    name: str = ""
    filters: int | None = None
    kernel: int = KERNEL
    units: int | None = None

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")


@dataclass(frozen=True)
class ModelSpec:
    name: str
    input_length: int
    n_classes: int
    layers: tuple[LayerSpec, ...]
    label_names: tuple[str, ...]

    def __post_init__(self):
        if self.n_classes != len(self.label_names):
            raise ValueError("n_classes must equal the number of label names")

    @property
    def conv_count(self) -> int:
        """Counted conv layers; 1x1 shortcut projections are not counted."""
        n = 0
        for layer in self.layers:
            if layer.kind == "conv":
                n += 1
            elif layer.kind == "residual_block":
                n += 2
        return n

    @property
    def block_filters(self) -> tuple[int, ...]:
        return tuple(l.filters for l in self.layers if l.kind == "residual_block")

    def shapes(self) -> list[tuple[int, ...]]:
        """Output shape (excluding batch) after every layer; validates the graph."""
        shape: tuple[int, ...] = (1, self.input_length)
        out = []
        for layer in self.layers:
            if layer.kind in ("conv", "residual_block"):
                if len(shape) != 2:
                    raise ShapeError(f"{layer.name}: conv input must be channelized")
                shape = (layer.filters, shape[1])
                if layer.kind == "residual_block":
                    if shape[1] < 2:
                        raise ShapeError(f"{layer.name}: length {shape[1]} too short to pool")
                    shape = (layer.filters, shape[1] // 2)
            elif layer.kind == "maxpool":
                if shape[1] < 2:
                    raise ShapeError(f"{layer.name}: length {shape[1]} too short to pool")
                shape = (shape[0], shape[1] // 2)
            elif layer.kind == "flatten":
                shape = (int(np.prod(shape)),)
            elif layer.kind == "dense":
                if len(shape) != 1:
                    raise ShapeError(f"{layer.name}: dense needs a flat input")
                shape = (layer.units,)
            out.append(shape)
        if shape != (self.n_classes,):
            raise ShapeError(f"final shape {shape} does not match {self.n_classes} classes")
        return out

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes = {}
        prev: tuple[int, ...] = (1, self.input_length)
        for layer, out in zip(self.layers, self.shapes()):
            if layer.kind == "conv":
                shapes[f"{layer.name}.w"] = (layer.filters, prev[0], layer.kernel)
                shapes[f"{layer.name}.b"] = (layer.filters,)
            elif layer.kind == "residual_block":
                f, c = layer.filters, prev[0]
                shapes[f"{layer.name}.conv_a.w"] = (f, c, layer.kernel)
                shapes[f"{layer.name}.conv_a.b"] = (f,)
                shapes[f"{layer.name}.conv_b.w"] = (f, f, layer.kernel)
                shapes[f"{layer.name}.conv_b.b"] = (f,)
                if c != f:
                    shapes[f"{layer.name}.proj.w"] = (f, c, 1)
                    shapes[f"{layer.name}.proj.b"] = (f,)
            elif layer.kind == "dense":
                shapes[f"{layer.name}.w"] = (layer.units, prev[0])
                shapes[f"{layer.name}.b"] = (layer.units,)
            prev = out
        return shapes


def _architecture(name: str, input_length: int, n_classes: int, label_names=None) -> ModelSpec:
    if name not in MIN_LENGTH:
        raise ValueError(f"unknown architecture {name!r}")
    if input_length < MIN_LENGTH[name]:
        raise ShapeError(
            f"{name} architecture needs input_length >= {MIN_LENGTH[name]}, got {input_length}"
        )
    layers: list[LayerSpec] = []
    blocks = ORIGINAL_BLOCKS if name == "original" else MODIFIED_BLOCKS
    if name == "original":
        layers += [LayerSpec("conv", "stem", filters=STEM_FILTERS), LayerSpec("relu", "stem_relu")]
    layers += [LayerSpec("residual_block", f"block{i}", filters=f) for i, f in enumerate(blocks)]
    layers += [
        LayerSpec("flatten", "flatten"),
        LayerSpec("dense", "fc1", units=HIDDEN_UNITS),
        LayerSpec("relu", "fc1_relu"),
        LayerSpec("dense", "head", units=n_classes),
    ]
    labels = tuple(label_names) if label_names is not None else default_label_names(n_classes)
    spec = ModelSpec(name, input_length, n_classes, tuple(layers), labels)
    spec.shapes()
    return spec


# the output layer's He limit is shrunk by this factor; see init_params
OUTPUT_INIT_SCALE = 0.01


def _he_uniform(rng: np.random.Generator, shape: tuple[int, ...], scale: float = 1.0) -> np.ndarray:
    fan_in = int(np.prod(shape[1:]))
    limit = scale * np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(nk.DTYPE)


def init_params(spec: ModelSpec, seed: int = 0, names=None) -> dict[str, ParamTensor]:
    """He-uniform weights, zero biases, in manifest order.

    The output layer's limit is scaled down by ``OUTPUT_INIT_SCALE`` so an
    untrained model predicts close to the uniform distribution; full He
    scaling there puts logits several units apart because every feature
    feeding it is non-negative.

    Each tensor draws from its own stream keyed by (seed, position), so
    re-initializing one tensor never perturbs the others.
    """
    params = {}
    output = f"{spec.layers[-1].name}.w"
    for i, (name, shape) in enumerate(spec.param_shapes().items()):
        if names is not None and name not in names:
            continue
        if name.endswith(".b"):
            values = np.zeros(shape, dtype=nk.DTYPE)
        else:
            scale = OUTPUT_INIT_SCALE if name == output else 1.0
            values = _he_uniform(np.random.default_rng([seed, i]), shape, scale)
        params[name] = ParamTensor(values)
    return params


class Model:
    """A ModelSpec plus its parameters.

    ``forward`` is read-only and safe to call from several threads on
    disjoint batches. ``loss_and_grad`` writes into the gradient buffers.
    """

    def __init__(self, spec: ModelSpec, params: dict[str, ParamTensor]):
        expected = spec.param_shapes()
        if list(params) != list(expected):
            raise ShapeError("parameter names do not match the architecture")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {params[name].shape}")
        self.spec = spec
        self.params = params

    # -- convenience ------------------------------------------------------

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def input_length(self) -> int:
        return self.spec.input_length

    @property
    def n_classes(self) -> int:
        return self.spec.n_classes

    @property
    def label_names(self) -> tuple[str, ...]:
        return self.spec.label_names

    @property
    def dtype(self):
        return next(iter(self.params.values())).values.dtype

    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    @property
    def classifier_param_names(self) -> list[str]:
        """Tensors after the flatten layer; the rest is the feature extractor."""
        dense = {l.name for l in self.spec.layers if l.kind == "dense"}
        return [n for n in self.params if n.split(".")[0] in dense]

    @property
    def feature_param_names(self) -> list[str]:
        head = set(self.classifier_param_names)
        return [n for n in self.params if n not in head]

    def copy(self) -> "Model":
        return Model(self.spec, {k: p.copy() for k, p in self.params.items()})

    def astype(self, dtype) -> "Model":
        return Model(self.spec, {k: p.astype(dtype) for k, p in self.params.items()})

    def state(self) -> dict[str, np.ndarray]:
        return {k: p.values.copy() for k, p in self.params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for k, values in state.items():
            self.params[k].values[...] = values

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    # -- forward / backward ------------------------------------------------

    def _check_input(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim == 2:
            x = x[:, None, :]
        if x.ndim != 3 or x.shape[1] != 1 or x.shape[2] != self.input_length:
            raise ShapeError(
                f"expected beats of shape (N, {self.input_length}) or "
                f"(N, 1, {self.input_length}), got {x.shape}"
            )
        return x.astype(self.dtype, copy=False)

    def _run(self, x: np.ndarray, layers, keep: bool):
        p = self.params
        caches = []
        for layer in layers:
            cache = None
            if layer.kind == "conv":
                x, cache = nk.conv1d_forward(x, p[f"{layer.name}.w"].values, p[f"{layer.name}.b"].values)
            elif layer.kind == "relu":
                cache = x
                x = nk.relu(x)
            elif layer.kind == "maxpool":
                x, cache = nk.maxpool1d_forward(x)
            elif layer.kind == "residual_block":
                x, cache = self._block_forward(layer, x)
            elif layer.kind == "flatten":
                cache = x.shape
                x = x.reshape(x.shape[0], -1)
            elif layer.kind == "dense":
                cache = x
                x = nk.dense_forward(x, p[f"{layer.name}.w"].values, p[f"{layer.name}.b"].values)
            if keep:
                caches.append(cache)
        return x, caches

    def _block_forward(self, layer: LayerSpec, x: np.ndarray):
        p, n = self.params, layer.name
        a, ca = nk.conv1d_forward(x, p[f"{n}.conv_a.w"].values, p[f"{n}.conv_a.b"].values)
        ra = nk.relu(a)
        b, cb = nk.conv1d_forward(ra, p[f"{n}.conv_b.w"].values, p[f"{n}.conv_b.b"].values)
        if f"{n}.proj.w" in p:
            s, cs = nk.conv1d_forward(x, p[f"{n}.proj.w"].values, p[f"{n}.proj.b"].values)
        else:
            s, cs = x, None
        pre = b + s
        out, cp = nk.maxpool1d_forward(nk.relu(pre))
        return out, (ca, a, cb, cs, pre, cp)

    def _block_backward(self, layer: LayerSpec, dout: np.ndarray, cache):
        p, n = self.params, layer.name
        ca, a, cb, cs, pre, cp = cache
        dpre = nk.relu_backward(nk.maxpool1d_backward(dout, cp), pre)
        dra, dw, db = nk.conv1d_backward(dpre, cb)
        p[f"{n}.conv_b.w"].grad += dw
        p[f"{n}.conv_b.b"].grad += db
        dx, dw, db = nk.conv1d_backward(nk.relu_backward(dra, a), ca)
        p[f"{n}.conv_a.w"].grad += dw
        p[f"{n}.conv_a.b"].grad += db
        if cs is None:
            dx += dpre
        else:
            dxs, dw, db = nk.conv1d_backward(dpre, cs)
            p[f"{n}.proj.w"].grad += dw
            p[f"{n}.proj.b"].grad += db
            dx += dxs
        return dx

    def _backward(self, dout: np.ndarray, layers, caches) -> np.ndarray:
        p = self.params
        for layer, cache in zip(reversed(layers), reversed(caches)):
            if layer.kind == "conv":
                dout, dw, db = nk.conv1d_backward(dout, cache)
                p[f"{layer.name}.w"].grad += dw
                p[f"{layer.name}.b"].grad += db
            elif layer.kind == "relu":
                dout = nk.relu_backward(dout, cache)
            elif layer.kind == "maxpool":
                dout = nk.maxpool1d_backward(dout, cache)
            elif layer.kind == "residual_block":
                dout = self._block_backward(layer, dout, cache)
            elif layer.kind == "flatten":
                dout = dout.reshape(cache)
            elif layer.kind == "dense":
                w = p[f"{layer.name}.w"]
                dout, dw, db = nk.dense_backward(dout, cache, w.values)
                w.grad += dw
                p[f"{layer.name}.b"].grad += db
        return dout

    def _split(self):
        i = next(i for i, l in enumerate(self.spec.layers) if l.kind == "flatten")
        return self.spec.layers[: i + 1], self.spec.layers[i + 1:]

    def forward(self, x) -> np.ndarray:
        """Logits ``(N, n_classes)`` for beats shaped ``(N, L)`` or ``(N, 1, L)``."""
        logits, _ = self._run(self._check_input(x), self.spec.layers, keep=False)
        return logits

    def features(self, x) -> np.ndarray:
        """Flattened feature-extractor output, ``(N, channels * length)``."""
        feats, _ = self._run(self._check_input(x), self._split()[0], keep=False)
        return feats

    def classify_features(self, feats: np.ndarray) -> np.ndarray:
        logits, _ = self._run(np.asarray(feats, dtype=self.dtype), self._split()[1], keep=False)
        return logits

    def _labels(self, labels, n: int) -> np.ndarray:
        labels = np.asarray(labels)
        if labels.shape != (n,):
            raise ShapeError(f"expected {n} labels, got shape {labels.shape}")
        if n and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise DataError(f"label out of range for {self.n_classes} classes")
        return labels.astype(np.int64)

    def loss_and_grad(self, x, labels, layers=None, return_logits: bool = False):
        """Mean cross-entropy over the batch; accumulates into every gradient.

        ``layers`` restricts the pass to a tail of the graph, in which case
        ``x`` is that tail's input (used for head-only training on cached
        features).
        """
        if layers is None:
            x = self._check_input(x)
            layers = self.spec.layers
        labels = self._labels(labels, len(x))
        logits, caches = self._run(x, layers, keep=True)
        _, loss, grad = nk.softmax_cross_entropy(logits, labels)
        n = len(labels)
        self._backward((grad / n).astype(logits.dtype), layers, caches)
        mean = float(loss.astype(np.float64).mean())
        return (mean, logits) if return_logits else mean

    def loss(self, x, labels) -> float:
        x = self._check_input(x)
        labels = self._labels(labels, len(x))
        _, loss, _ = nk.softmax_cross_entropy(self.forward(x), labels)
        return float(loss.astype(np.float64).mean())

    @property
    def classifier_layers(self):
        return self._split()[1]


def build(arch: str, input_length: int = DEFAULT_INPUT_LENGTH, n_classes: int = 5,
          seed: int = 0, label_names=None) -> Model:
    spec = _architecture(arch, input_length, n_classes, label_names)
    return Model(spec, init_params(spec, seed))


def build_original(input_length: int = DEFAULT_INPUT_LENGTH, n_classes: int = 5, seed: int = 0,
                   label_names=None) -> Model:
    """Stem conv(16) then residual blocks of 16, 32, 64, 128, 256 filters: 11 counted convs."""
    return build("original", input_length, n_classes, seed, label_names)


def build_modified(input_length: int = DEFAULT_INPUT_LENGTH, n_classes: int = 5, seed: int = 0,
                   label_names=None) -> Model:
    """Residual blocks of 16, 32, 64 filters: 6 counted convs."""
    return build("modified", input_length, n_classes, seed, label_names)


def forward(model: Model, batch) -> np.ndarray:
    return model.forward(batch)


def backward(model: Model, batch, labels) -> float:
    return model.loss_and_grad(batch, labels)


def replace_head(model: Model, new_n_classes: int, seed: int = 0, label_names=None) -> Model:
    """Copy of ``model`` whose final dense layer is freshly initialized for ``new_n_classes``.

    Every other tensor is carried over bit for bit.
    """
    layers = list(model.spec.layers)
    if not layers or layers[-1].kind != "dense":
        raise ShapeError("model has no final dense layer")
    head = layers[-1]
    layers[-1] = replace(head, units=new_n_classes)
    labels = tuple(label_names) if label_names is not None else default_label_names(new_n_classes)
    spec = replace(model.spec, n_classes=new_n_classes, layers=tuple(layers), label_names=labels)
    head_names = {f"{head.name}.w", f"{head.name}.b"}
    fresh = init_params(spec, seed, names=head_names)
    params = {}
    for name in spec.param_shapes():
        params[name] = fresh[name] if name in head_names else model.params[name].copy()
    return Model(spec, params)
