"""Layer stacks with versioned parameters and cached-activation backprop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import Layer, NNError, layer_from_spec, _check_finite


@dataclass
class ForwardCache:
    version: int
    layer_caches: list
    output: np.ndarray


class Network:
    """An ordered layer stack; parameters mutate in place and bump a version
    counter so stale backward caches are rejected."""

    def __init__(self, layers: list[Layer]):
        self.layers = layers
        self.version = 0

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def trainable_mask(self) -> list[bool]:
        mask = []
        for layer in self.layers:
            mask.extend([not layer.frozen] * len(layer.params()))
        return mask

    def num_params(self) -> int:
        return sum(p.size for p in self.params())

    def mark_updated(self) -> None:
        self.version += 1

    def forward(self, x: np.ndarray, want_cache: bool = False):
        caches = []
        out = x
        for layer in self.layers:
            out, cache = layer.forward(out)
            if want_cache:
                caches.append(cache)
        _check_finite(out, "forward output")
        if want_cache:
            return out, ForwardCache(self.version, caches, out)
        return out

    def backward(self, cache: ForwardCache, dy: np.ndarray):
        """Gradients of all parameters plus the input gradient.

        Frozen layers report zero parameter gradients but still pass the
        input gradient through.
        """
        if cache.version != self.version:
            raise NNError("stale forward cache: parameters changed since forward")
        grads: list[np.ndarray] = []
        dx = dy
        for layer, layer_cache in zip(reversed(self.layers),
                                      reversed(cache.layer_caches)):
            dx, layer_grads = layer.backward(layer_cache, dx)
            if layer.frozen:
                layer_grads = [np.zeros_like(g) for g in layer_grads]
            grads = layer_grads + grads
        _check_finite(dx, "input gradient")
        return dx, grads

    def freeze(self, frozen: bool = True) -> None:
        for layer in self.layers:
            layer.frozen = frozen

    def astype(self, dtype) -> "Network":
        net = Network([layer.astype(dtype) for layer in self.layers])
        net.version = self.version
        return net

    def specs(self) -> list[dict]:
        out = []
        for layer in self.layers:
            spec = layer.spec()
            spec["frozen"] = layer.frozen
            spec["param_shapes"] = [list(p.shape) for p in layer.params()]
            out.append(spec)
        return out

    @classmethod
    def from_specs(cls, specs: list[dict], dtype=np.float32) -> "Network":
        layers = []
        for spec in specs:
            layer = layer_from_spec(spec, dtype=dtype)
            layer.frozen = spec.get("frozen", False)
            layers.append(layer)
        return cls(layers)


def clip_global_norm(grads: list[np.ndarray], max_norm: float) -> float:
    """Scale gradients in place so their joint L2 norm is at most max_norm."""
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
    if total > max_norm and total > 0:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total
