"""Checkpoint I/O: a length-prefixed JSON manifest describing named
networks (plus optional optimizer state), followed by one little-endian
float32 blob holding every parameter in manifest order. Round-trips are
bit-exact."""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

from .adam import AdamState
from .network import Network

CHECKPOINT_FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _blob_arrays(networks: dict[str, Network],
                 adam: AdamState | None) -> list[np.ndarray]:
    arrays = []
    for name in networks:
        arrays.extend(networks[name].params())
    if adam is not None:
        arrays.extend(adam.m)
        arrays.extend(adam.v)
    return arrays


def save_checkpoint(path: str, networks: dict[str, Network],
                    adam: AdamState | None = None,
                    extras: dict | None = None) -> None:
    manifest = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "networks": {
            name: {"version": net.version, "layers": net.specs()}
            for name, net in networks.items()
        },
        "adam": None if adam is None else {
            "step": adam.step, "lr": adam.lr, "beta1": adam.beta1,
            "beta2": adam.beta2, "eps": adam.eps,
            "slot_shapes": [list(m.shape) for m in adam.m],
        },
        "extras": extras or {},
    }
    blob = b"".join(np.ascontiguousarray(a, dtype="<f4").tobytes()
                    for a in _blob_arrays(networks, adam))
    payload = json.dumps(manifest).encode("utf-8")

    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(struct.pack("<I", len(payload)))
            fh.write(payload)
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str) -> tuple[dict[str, Network], AdamState | None, dict]:
    """Rebuild networks (and optimizer state if present) from a checkpoint.

    Fails without partial state on truncation, version mismatch or any
    manifest/blob disagreement.
    """
    with open(path, "rb") as fh:
        header = fh.read(4)
        if len(header) != 4:
            raise CheckpointError("truncated checkpoint header")
        (manifest_len,) = struct.unpack("<I", header)
        payload = fh.read(manifest_len)
        if len(payload) != manifest_len:
            raise CheckpointError("truncated checkpoint manifest")
        try:
            manifest = json.loads(payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"corrupt manifest: {exc}") from exc
        blob = fh.read()

    version = manifest.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version: {version!r}")

    networks: dict[str, Network] = {}
    shapes: list[tuple[int, ...]] = []
    for name, net_spec in manifest["networks"].items():
        net = Network.from_specs(net_spec["layers"])
        net.version = net_spec["version"]
        networks[name] = net
        for layer_spec in net_spec["layers"]:
            shapes.extend(tuple(s) for s in layer_spec["param_shapes"])

    adam_spec = manifest.get("adam")
    if adam_spec is not None:
        slot_shapes = [tuple(s) for s in adam_spec["slot_shapes"]]
        shapes.extend(slot_shapes)
        shapes.extend(slot_shapes)

    expected = sum(int(np.prod(s)) if s else 1 for s in shapes) * 4
    if len(blob) != expected:
        raise CheckpointError(
            f"blob size {len(blob)} does not match manifest ({expected} bytes)")

    arrays = []
    offset = 0
    for shape in shapes:
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f4", count=count,
                            offset=offset).reshape(shape).copy()
        arrays.append(arr)
        offset += count * 4

    cursor = 0
    for name, net in networks.items():
        own = net.params()
        for layer in net.layers:
            layer.set_params(arrays[cursor:cursor + len(layer.params())])
            cursor += len(layer.params())
        del own

    adam = None
    if adam_spec is not None:
        n_slots = len(adam_spec["slot_shapes"])
        adam = AdamState(
            m=arrays[cursor:cursor + n_slots],
            v=arrays[cursor + n_slots:cursor + 2 * n_slots],
            step=adam_spec["step"], lr=adam_spec["lr"],
            beta1=adam_spec["beta1"], beta2=adam_spec["beta2"],
            eps=adam_spec["eps"])

    return networks, adam, manifest.get("extras", {})
