"""Two-head convolutional policy/value network, numpy inference side.

Architecture: ``layers`` convolutions of ``channels`` 3x3 kernels (stride 1,
padding 1, ReLU), then two heads. Each head is a 1x1 convolution to 2 channels
(ReLU), flattened channel-major, optionally concatenated with an auxiliary
vector, then an affine map: 6 logits (softmax) for the policy, 1 unsquashed
scalar for the value.

Flat parameter layout, each tensor C-order, in this sequence::

    conv[i].weight (out, in, 3, 3), conv[i].bias (out,)   for i in 0..layers-1
    policy_conv.weight (2, channels, 1, 1), policy_conv.bias (2,)
    policy_fc.weight (6, 2*B*B + aux), policy_fc.bias (6,)
    value_conv.weight (2, channels, 1, 1), value_conv.bias (2,)
    value_fc.weight (1, 2*B*B + aux), value_fc.bias (1,)

Checkpoint file: one JSON header line, then the parameters as little-endian
float32. The header carries the architecture, its hash and the iteration.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from pommer.errors import NumericError, UsageError

N_ACTIONS = 6
CHECKPOINT_FORMAT = "pommer-net"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetSpec:
    board_size: int = 11
    channels: int = 64
    in_planes: int = 14
    layers: int = 4
    aux_dim: int = 0

    def shapes(self) -> list[tuple[str, tuple]]:
        return _shapes(self)

    def param_count(self) -> int:
        return _param_count(self)

    def arch_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_dict(self) -> dict:
        return asdict(self)


@lru_cache(maxsize=None)
def _shapes(spec: NetSpec) -> list[tuple[str, tuple]]:
    c, b = spec.channels, spec.board_size
    flat = 2 * b * b + spec.aux_dim
    out = []
    cin = spec.in_planes
    for i in range(spec.layers):
        out.append((f"conv{i}.weight", (c, cin, 3, 3)))
        out.append((f"conv{i}.bias", (c,)))
        cin = c
    out += [
        ("policy_conv.weight", (2, c, 1, 1)), ("policy_conv.bias", (2,)),
        ("policy_fc.weight", (N_ACTIONS, flat)), ("policy_fc.bias", (N_ACTIONS,)),
        ("value_conv.weight", (2, c, 1, 1)), ("value_conv.bias", (2,)),
        ("value_fc.weight", (1, flat)), ("value_fc.bias", (1,)),
    ]
    return out


@lru_cache(maxsize=None)
def _param_count(spec: NetSpec) -> int:
    return sum(int(np.prod(s)) for _, s in spec.shapes())


def unpack(spec: NetSpec, flat: np.ndarray) -> dict:
    """Views of ``flat`` keyed by tensor name."""
    flat = np.asarray(flat)
    if flat.ndim != 1 or flat.size != spec.param_count():
        raise UsageError(f"expected {spec.param_count()} parameters for {spec}, got {flat.size}")
    out = {}
    k = 0
    for name, shape in spec.shapes():
        n = int(np.prod(shape))
        out[name] = flat[k:k + n].reshape(shape)
        k += n
    return out


def init_params(spec: NetSpec, seed: int = 0, dtype=np.float32) -> np.ndarray:
    """He-uniform weights, zero biases; the head output layers start small so the
    initial policy is close to uniform."""
    rng = np.random.default_rng(seed)
    parts = []
    for name, shape in spec.shapes():
        if name.endswith("bias"):
            parts.append(np.zeros(shape))
            continue
        fan_in = int(np.prod(shape[1:]))
        bound = np.sqrt(6.0 / fan_in)
        if name in ("policy_fc.weight", "value_fc.weight"):
            bound *= 0.01
        parts.append(rng.uniform(-bound, bound, size=shape))
    return np.concatenate([p.reshape(-1) for p in parts]).astype(dtype)


def _conv3x3(x, w, b):
    # x (N, Cin, B, B), w (Cout, Cin, 3, 3)
    n, cin, size, _ = x.shape
    padded = np.zeros((n, cin, size + 2, size + 2), dtype=x.dtype)
    padded[:, :, 1:-1, 1:-1] = x
    cols = np.empty((n, cin, 3, 3, size, size), dtype=x.dtype)
    for dr in range(3):
        for dc in range(3):
            cols[:, :, dr, dc] = padded[:, :, dr:dr + size, dc:dc + size]
    cols = cols.reshape(n, cin * 9, size * size)
    out = np.matmul(w.reshape(w.shape[0], -1), cols) + b[None, :, None]
    return out.reshape(n, w.shape[0], size, size)


def _conv1x1(x, w, b):
    n, cin, size, _ = x.shape
    out = np.matmul(w.reshape(w.shape[0], cin), x.reshape(n, cin, size * size)) + b[None, :, None]
    return out.reshape(n, w.shape[0], size, size)


def forward(spec: NetSpec, flat_params, features, aux=None):
    """Action probabilities ``(N, 6)`` and values ``(N,)`` for a batch of stacks.

    A single stack ``(14, B, B)`` is accepted and returns unbatched outputs.
    ``flat_params`` may also be the dict returned by :func:`unpack`.
    """
    p = flat_params if isinstance(flat_params, dict) else unpack(spec, flat_params)
    x = np.asarray(features, dtype=p["conv0.weight"].dtype)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.shape[1:] != (spec.in_planes, spec.board_size, spec.board_size):
        raise UsageError(f"feature shape {x.shape[1:]} does not match {spec}")
    for i in range(spec.layers):
        x = np.maximum(_conv3x3(x, p[f"conv{i}.weight"], p[f"conv{i}.bias"]), 0)
    n = x.shape[0]
    heads = []
    for head in ("policy", "value"):
        h = np.maximum(_conv1x1(x, p[f"{head}_conv.weight"], p[f"{head}_conv.bias"]), 0).reshape(n, -1)
        if spec.aux_dim:
            if aux is None:
                raise UsageError("network expects an auxiliary input vector")
            a = np.asarray(aux, dtype=h.dtype).reshape(n, spec.aux_dim)
            h = np.concatenate([h, a], axis=1)
        heads.append(h @ p[f"{head}_fc.weight"].T + p[f"{head}_fc.bias"])
    logits, value = heads
    if not (np.all(np.isfinite(logits)) and np.all(np.isfinite(value))):
        raise NumericError("non-finite network output")
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    probs = e / e.sum(axis=1, keepdims=True)
    value = value[:, 0]
    if single:
        return probs[0], float(value[0])
    return probs, value


def save_checkpoint(path, spec: NetSpec, flat_params, iteration: int = 0, meta=None) -> None:
    flat = np.asarray(flat_params, dtype="<f4").reshape(-1)
    if flat.size != spec.param_count():
        raise UsageError("parameter count does not match the architecture")
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "arch": spec.to_dict(),
        "arch_hash": spec.arch_hash(),
        "iteration": int(iteration),
        "dtype": "<f4",
        "count": int(flat.size),
    }
    if meta:
        header["meta"] = meta
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(flat.tobytes())


def load_checkpoint(path):
    """Returns ``(spec, params float32, header)``."""
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise UsageError(f"{path}: not a network checkpoint") from exc
        if header.get("format") != CHECKPOINT_FORMAT:
            raise UsageError(f"{path}: not a network checkpoint")
        spec = NetSpec(**header["arch"])
        if spec.arch_hash() != header["arch_hash"]:
            raise UsageError(f"{path}: architecture hash mismatch")
        raw = fh.read()
    flat = np.frombuffer(raw, dtype="<f4").astype(np.float32)
    if flat.size != header["count"] or flat.size != spec.param_count():
        raise UsageError(f"{path}: truncated parameter block")
    return spec, flat, header
