"""Dense, strided conv, transposed conv and activation layers with
hand-written reverse-mode gradients, backed by numpy arrays."""

from __future__ import annotations

import numpy as np


class NNError(ValueError):
    pass


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...],
                   fan_in: int, fan_out: int, scale: float = 1.0,
                   dtype=np.float32) -> np.ndarray:
    limit = scale * np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.isfinite(arr).all():
        raise NNError(f"non-finite values in {what}")


class Layer:
    kind = "layer"

    def __init__(self) -> None:
        self.frozen = False

    def params(self) -> list[np.ndarray]:
        return []

    def set_params(self, arrays: list[np.ndarray]) -> None:
        own = self.params()
        if len(arrays) != len(own):
            raise NNError(f"{self.kind}: expected {len(own)} parameter arrays")
        for target, source in zip(own, arrays):
            if target.shape != source.shape:
                raise NNError(f"{self.kind}: parameter shape mismatch "
                              f"{source.shape} vs {target.shape}")
            target[...] = source

    def forward(self, x: np.ndarray):
        raise NotImplementedError

    def backward(self, cache, dy: np.ndarray):
        raise NotImplementedError

    def spec(self) -> dict:
        raise NotImplementedError

    def astype(self, dtype) -> "Layer":
        clone = layer_from_spec(self.spec(), dtype=dtype)
        clone.set_params([p.astype(dtype) for p in self.params()])
        clone.frozen = self.frozen
        return clone


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_dim: int, out_dim: int, dtype=np.float32):
        super().__init__()
        self.in_dim, self.out_dim = in_dim, out_dim
        self.w = np.zeros((in_dim, out_dim), dtype=dtype)
        self.b = np.zeros(out_dim, dtype=dtype)

    @classmethod
    def init(cls, rng: np.random.Generator, in_dim: int, out_dim: int,
             scale: float = 1.0) -> "Dense":
        layer = cls(in_dim, out_dim)
        layer.w = glorot_uniform(rng, (in_dim, out_dim), in_dim, out_dim, scale)
        return layer

    def params(self):
        return [self.w, self.b]

    def forward(self, x):
        if x.shape[-1] != self.in_dim:
            raise NNError(f"dense: input dim {x.shape[-1]} != {self.in_dim}")
        return x @ self.w + self.b, x

    def backward(self, cache, dy):
        x = cache
        dw = x.T @ dy
        db = dy.sum(axis=0)
        dx = dy @ self.w.T
        return dx, [dw, db]

    def spec(self):
        return {"kind": self.kind, "in_dim": self.in_dim, "out_dim": self.out_dim}


class Conv2D(Layer):
    """3x3 convolution, NCHW layout, configurable stride, zero padding."""
    kind = "conv2d"

    def __init__(self, in_ch: int, out_ch: int, kernel: int = 3, stride: int = 2,
                 pad: int = 1, dtype=np.float32):
        super().__init__()
        self.in_ch, self.out_ch = in_ch, out_ch
        self.kernel, self.stride, self.pad = kernel, stride, pad
        self.w = np.zeros((out_ch, in_ch, kernel, kernel), dtype=dtype)
        self.b = np.zeros(out_ch, dtype=dtype)

    @classmethod
    def init(cls, rng, in_ch, out_ch, kernel=3, stride=2, pad=1) -> "Conv2D":
        layer = cls(in_ch, out_ch, kernel, stride, pad)
        fan = in_ch * kernel * kernel
        layer.w = glorot_uniform(rng, layer.w.shape, fan, out_ch * kernel * kernel)
        return layer

    def params(self):
        return [self.w, self.b]

    def out_size(self, h: int, w: int) -> tuple[int, int]:
        k, s, p = self.kernel, self.stride, self.pad
        return ((h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1)

    def _patches(self, xp, oh, ow):
        """Stacked kernel-position views: contiguous (B, C, k*k, oh, ow)."""
        k, s = self.kernel, self.stride
        return np.stack([xp[:, :, ki:ki + s * oh:s, kj:kj + s * ow:s]
                         for ki in range(k) for kj in range(k)], axis=2)

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != self.in_ch:
            raise NNError(f"conv2d: expected (B,{self.in_ch},H,W), got {x.shape}")
        p = self.pad
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        oh, ow = self.out_size(x.shape[2], x.shape[3])
        patches = self._patches(xp, oh, ow)
        w_flat = self.w.reshape(self.out_ch, self.in_ch, -1)
        y = np.tensordot(patches, w_flat, axes=([1, 2], [1, 2]))
        y = np.ascontiguousarray(y.transpose(0, 3, 1, 2)) + self.b[None, :, None, None]
        return y, (x.shape, patches)

    def backward(self, cache, dy):
        x_shape, patches = cache
        k, s, p = self.kernel, self.stride, self.pad
        oh, ow = dy.shape[2], dy.shape[3]
        w_flat = self.w.reshape(self.out_ch, self.in_ch, -1)
        dw = np.tensordot(dy, patches, axes=([0, 2, 3], [0, 3, 4]))
        db = dy.sum(axis=(0, 2, 3))
        # (B, oh, ow, C, k*k) contributions scattered back onto the input.
        dpatches = np.tensordot(dy, w_flat, axes=([1], [0]))
        h, w = x_shape[2], x_shape[3]
        dxp = np.zeros((x_shape[0], self.in_ch, h + 2 * p, w + 2 * p),
                       dtype=dy.dtype)
        for idx in range(k * k):
            ki, kj = divmod(idx, k)
            dxp[:, :, ki:ki + s * oh:s, kj:kj + s * ow:s] += (
                dpatches[..., idx].transpose(0, 3, 1, 2))
        dx = dxp[:, :, p:p + h, p:p + w]
        return dx, [dw.reshape(self.w.shape), db]

    def spec(self):
        return {"kind": self.kind, "in_ch": self.in_ch, "out_ch": self.out_ch,
                "kernel": self.kernel, "stride": self.stride, "pad": self.pad}


class ConvTranspose2D(Layer):
    """Stride-2 transposed convolution; inverse shape mapping of Conv2D."""
    kind = "conv_transpose2d"

    def __init__(self, in_ch: int, out_ch: int, kernel: int = 3, stride: int = 2,
                 pad: int = 1, output_padding: tuple[int, int] = (1, 1),
                 dtype=np.float32):
        super().__init__()
        if max(output_padding) > pad:
            raise NNError("output_padding must not exceed pad")
        self.in_ch, self.out_ch = in_ch, out_ch
        self.kernel, self.stride, self.pad = kernel, stride, pad
        self.output_padding = tuple(output_padding)
        self.w = np.zeros((in_ch, out_ch, kernel, kernel), dtype=dtype)
        self.b = np.zeros(out_ch, dtype=dtype)

    @classmethod
    def init(cls, rng, in_ch, out_ch, kernel=3, stride=2, pad=1,
             output_padding=(1, 1)) -> "ConvTranspose2D":
        layer = cls(in_ch, out_ch, kernel, stride, pad, output_padding)
        fan = in_ch * kernel * kernel
        layer.w = glorot_uniform(rng, layer.w.shape, fan, out_ch * kernel * kernel)
        return layer

    def params(self):
        return [self.w, self.b]

    def out_size(self, h: int, w: int) -> tuple[int, int]:
        k, s, p = self.kernel, self.stride, self.pad
        oph, opw = self.output_padding
        return ((h - 1) * s - 2 * p + k + oph, (w - 1) * s - 2 * p + k + opw)

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != self.in_ch:
            raise NNError(f"conv_transpose2d: expected (B,{self.in_ch},H,W), got {x.shape}")
        b, _, h, w = x.shape
        k, s, p = self.kernel, self.stride, self.pad
        oh, ow = self.out_size(h, w)
        w_flat = self.w.reshape(self.in_ch, self.out_ch, -1)
        # (B, F, k*k, H, W) contributions scattered onto the padded output.
        contrib = np.tensordot(x, w_flat, axes=([1], [0])).transpose(0, 3, 4, 1, 2)
        yf = np.zeros((b, self.out_ch, (h - 1) * s + k, (w - 1) * s + k),
                      dtype=x.dtype)
        for idx in range(k * k):
            ki, kj = divmod(idx, k)
            yf[:, :, ki:ki + s * h:s, kj:kj + s * w:s] += contrib[:, :, idx]
        y = yf[:, :, p:p + oh, p:p + ow] + self.b[None, :, None, None]
        return y, (x, yf.shape)

    def backward(self, cache, dy):
        x, yf_shape = cache
        b, _, h, w = x.shape
        k, s, p = self.kernel, self.stride, self.pad
        oh, ow = dy.shape[2], dy.shape[3]
        dyf = np.zeros(yf_shape, dtype=dy.dtype)
        dyf[:, :, p:p + oh, p:p + ow] = dy
        patches = np.stack([dyf[:, :, ki:ki + s * h:s, kj:kj + s * w:s]
                            for ki in range(k) for kj in range(k)], axis=2)
        w_flat = self.w.reshape(self.in_ch, self.out_ch, -1)
        dx = np.tensordot(patches, w_flat, axes=([1, 2], [1, 2]))
        dx = np.ascontiguousarray(dx.transpose(0, 3, 1, 2))
        dw = np.tensordot(x, patches, axes=([0, 2, 3], [0, 3, 4]))
        db = dy.sum(axis=(0, 2, 3))
        return dx, [dw.reshape(self.w.shape), db]

    def spec(self):
        return {"kind": self.kind, "in_ch": self.in_ch, "out_ch": self.out_ch,
                "kernel": self.kernel, "stride": self.stride, "pad": self.pad,
                "output_padding": list(self.output_padding)}


class Tanh(Layer):
    kind = "tanh"

    def forward(self, x):
        y = np.tanh(x)
        return y, y

    def backward(self, cache, dy):
        y = cache
        return dy * (1.0 - y * y), []

    def spec(self):
        return {"kind": self.kind}


class Softplus(Layer):
    kind = "softplus"

    def forward(self, x):
        return np.logaddexp(0.0, x), x

    def backward(self, cache, dy):
        x = cache
        sig = 1.0 / (1.0 + np.exp(-x))
        return dy * sig, []

    def spec(self):
        return {"kind": self.kind}


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, cache, dy):
        return dy.reshape(cache), []

    def spec(self):
        return {"kind": self.kind}


class Reshape(Layer):
    kind = "reshape"

    def __init__(self, shape: tuple[int, ...]):
        super().__init__()
        self.shape = tuple(shape)

    def forward(self, x):
        return x.reshape((x.shape[0],) + self.shape), x.shape

    def backward(self, cache, dy):
        return dy.reshape(cache), []

    def spec(self):
        return {"kind": self.kind, "shape": list(self.shape)}


_LAYER_KINDS = {
    "dense": Dense,
    "conv2d": Conv2D,
    "conv_transpose2d": ConvTranspose2D,
    "tanh": Tanh,
    "softplus": Softplus,
    "flatten": Flatten,
    "reshape": Reshape,
}


def layer_from_spec(spec: dict, dtype=np.float32) -> Layer:
    kind = spec.get("kind")
    if kind not in _LAYER_KINDS:
        raise NNError(f"unknown layer kind: {kind!r}")
    cls = _LAYER_KINDS[kind]
    if kind == "dense":
        return cls(spec["in_dim"], spec["out_dim"], dtype=dtype)
    if kind == "conv2d":
        return cls(spec["in_ch"], spec["out_ch"], spec["kernel"], spec["stride"],
                   spec["pad"], dtype=dtype)
    if kind == "conv_transpose2d":
        return cls(spec["in_ch"], spec["out_ch"], spec["kernel"], spec["stride"],
                   spec["pad"], tuple(spec["output_padding"]), dtype=dtype)
    if kind == "reshape":
        return cls(tuple(spec["shape"]))
    return cls()
