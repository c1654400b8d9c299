"""Forward inference for the 38-layer VGG-face architecture and tiny test networks.

Weights travel in the portable little-endian "VGGW1" binary format (magic,
RGB channel means, then per-layer records; convolution kernels are stored
[out][in][ky][kx] as float32).  Convolution is cross-correlation: no kernel
flip.  Fully connected layers are convolutions of support 7/1/1, exactly as
the canonical architecture table encodes them.

Activations are plain float32 numpy arrays of shape (H, W, C), row-major by
channel; that array is the module's activation-tensor representation.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .features import FeatureVector
from .media_io import FaceVideo, Frame

_MAGIC = b"VGGW1"
_TYPE_TAGS = {"input": 0, "conv": 1, "relu": 2, "mpool": 3, "softmx": 4}
_TAG_TYPES = {v: k for k, v in _TYPE_TAGS.items()}

# im2col buffer budget per matmul chunk
_COL_BYTES = 96 * 1024 * 1024


class WeightFormatError(ValueError):
    """Weight file violates the VGGW1 format or the declared architecture."""


@dataclass(frozen=True)
class LayerSpec:
    index: int
    type: str
    name: str
    support: int = 0
    filt_dim: int = 0
    num_filts: int = 0
    stride: int = 1
    pad: int = 0

    def __post_init__(self):
        if self.type not in _TYPE_TAGS:
            raise ValueError(f"unknown layer type {self.type!r}")


def _spec(idx, ltype, name, support=0, filt_dim=0, num_filts=0, stride=1, pad=0):
    return LayerSpec(idx, ltype, name, support, filt_dim, num_filts, stride, pad)


def canonical_layers() -> list[LayerSpec]:
    """The 38-row VGG-face table: 13 spatial convolutions plus fc6/fc7/fc8."""
    layers = [_spec(0, "input", "input")]
    blocks = [
        (1, 2, 3, 64),     # conv1_x
        (2, 2, 64, 128),
        (3, 3, 128, 256),
        (4, 3, 256, 512),
        (5, 3, 512, 512),
    ]
    idx = 1
    for block, n_convs, in_ch, out_ch in blocks:
        for i in range(1, n_convs + 1):
            filt_dim = in_ch if i == 1 else out_ch
            layers.append(_spec(idx, "conv", f"conv{block}_{i}", 3, filt_dim, out_ch, 1, 1))
            idx += 1
            layers.append(_spec(idx, "relu", f"relu{block}_{i}", 1, 0, 0, 1, 0))
            idx += 1
        layers.append(_spec(idx, "mpool", f"pool{block}", 2, 0, 0, 2, 0))
        idx += 1
    for name, support, filt_dim, num_filts in (
        ("fc6", 7, 512, 4096),
        ("fc7", 1, 4096, 4096),
        ("fc8", 1, 4096, 2622),
    ):
        layers.append(_spec(idx, "conv", name, support, filt_dim, num_filts, 1, 0))
        idx += 1
        if name != "fc8":
            layers.append(_spec(idx, "relu", f"relu{name[2]}", 1, 0, 0, 1, 0))
            idx += 1
    layers.append(_spec(idx, "softmx", "prob", 1, 0, 0, 1, 0))
    return layers


@dataclass
class NetworkWeights:
    layers: list[LayerSpec]
    conv_weights: dict[str, tuple[np.ndarray, np.ndarray]]
    mean: np.ndarray  # per-channel input mean, R,G,B order

    def layer(self, name: str) -> LayerSpec:
        for spec in self.layers:
            if spec.name == name:
                return spec
        raise KeyError(f"no layer named {name!r}")


def _validate_chain(layers: list[LayerSpec],
                    conv_weights: dict[str, tuple[np.ndarray, np.ndarray]]) -> None:
    prev_out = None
    for spec in layers:
        if spec.type != "conv":
            continue
        if prev_out is not None and spec.filt_dim != prev_out:
            raise WeightFormatError(
                f"{spec.name}: filt_dim {spec.filt_dim} incompatible with previous "
                f"conv output channels {prev_out}"
            )
        prev_out = spec.num_filts
        w, b = conv_weights[spec.name]
        expected = (spec.num_filts, spec.filt_dim, spec.support, spec.support)
        if w.shape != expected:
            raise WeightFormatError(
                f"{spec.name}: weight shape {w.shape}, expected {expected}"
            )
        if b.shape != (spec.num_filts,):
            raise WeightFormatError(
                f"{spec.name}: bias shape {b.shape}, expected ({spec.num_filts},)"
            )


def _validate_canonical(layers: list[LayerSpec]) -> None:
    canonical = canonical_layers()
    if [(s.type, s.name) for s in layers] != [(s.type, s.name) for s in canonical]:
        return  # not the canonical architecture; chain validation suffices
    for got, want in zip(layers, canonical):
        for field in ("support", "filt_dim", "num_filts", "stride", "pad"):
            if getattr(got, field) != getattr(want, field):
                raise WeightFormatError(
                    f"{want.name}: expected {field} {getattr(want, field)}, "
                    f"found {getattr(got, field)}"
                )


def save_weights(weights: NetworkWeights, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(np.asarray(weights.mean, dtype="<f4").tobytes())
        fh.write(struct.pack("<I", len(weights.layers)))
        for spec in weights.layers:
            name = spec.name.encode("utf-8")
            fh.write(struct.pack("<H", len(name)))
            fh.write(name)
            fh.write(struct.pack("<BIIIII", _TYPE_TAGS[spec.type], spec.support,
                                 spec.filt_dim, spec.num_filts, spec.stride, spec.pad))
            if spec.type == "conv":
                w, b = weights.conv_weights[spec.name]
                fh.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
                fh.write(np.asarray(b, dtype="<f4").tobytes())


def load_weights(path: str | Path) -> NetworkWeights:
    """Read a VGGW1 file, validating shape chain compatibility; canonical files
    are additionally checked row-for-row against the architecture table."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != _MAGIC:
            raise WeightFormatError(f"{path.name}: bad magic {magic!r}, expected 'VGGW1'")

        def read_exact(n: int, what: str) -> bytes:
            buf = fh.read(n)
            if len(buf) != n:
                raise WeightFormatError(f"{path.name}: truncated while reading {what}")
            return buf

        mean = np.frombuffer(read_exact(12, "mean"), dtype="<f4").astype(np.float32)
        (count,) = struct.unpack("<I", read_exact(4, "layer count"))
        layers: list[LayerSpec] = []
        conv_weights: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        for idx in range(count):
            (name_len,) = struct.unpack("<H", read_exact(2, "name length"))
            name = read_exact(name_len, "name").decode("utf-8")
            tag, support, filt_dim, num_filts, stride, pad = struct.unpack(
                "<BIIIII", read_exact(21, f"{name} header")
            )
            if tag not in _TAG_TYPES:
                raise WeightFormatError(f"{path.name}: {name}: unknown layer type tag {tag}")
            spec = LayerSpec(idx, _TAG_TYPES[tag], name, support, filt_dim,
                             num_filts, stride, pad)
            if spec.type == "conv":
                n_w = num_filts * filt_dim * support * support
                w = np.frombuffer(read_exact(4 * n_w, f"{name} weights"), dtype="<f4")
                w = w.reshape(num_filts, filt_dim, support, support).astype(np.float32)
                b = np.frombuffer(read_exact(4 * num_filts, f"{name} biases"),
                                  dtype="<f4").astype(np.float32)
                conv_weights[name] = (w, b)
            layers.append(spec)
        if fh.read(1):
            raise WeightFormatError(f"{path.name}: trailing bytes after last layer")
    weights = NetworkWeights(layers=layers, conv_weights=conv_weights, mean=mean)
    _validate_chain(layers, conv_weights)
    _validate_canonical(layers)
    return weights


def spatial_sizes(layers: list[LayerSpec], input_size: int) -> list[tuple[str, int]]:
    """Spatial side length after each layer, from the specs alone (no weights)."""
    size = input_size
    out = []
    for spec in layers:
        if spec.type == "conv":
            size = (size + 2 * spec.pad - spec.support) // spec.stride + 1
        elif spec.type == "mpool":
            size = (size - spec.support) // spec.stride + 1
        out.append((spec.name, size))
    return out


def _conv_layer(x: np.ndarray, w: np.ndarray, b: np.ndarray,
                stride: int, pad: int) -> np.ndarray:
    out_ch, in_ch, k, _ = w.shape
    if x.shape[2] != in_ch:
        raise ValueError(f"input has {x.shape[2]} channels, kernel expects {in_ch}")
    if pad:
        x = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    h, width, _ = x.shape
    if h < k or width < k:
        raise ValueError(f"input {h}x{width} smaller than kernel {k}")
    out_h = (h - k) // stride + 1
    out_w = (width - k) // stride + 1
    wmat = w.reshape(out_ch, -1).T  # (in*k*k, out), taps ordered (C, ky, kx)
    windows = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(0, 1))
    windows = windows[::stride, ::stride]  # (out_h, out_w, C, k, k)
    out = np.empty((out_h, out_w, out_ch), dtype=np.float32)
    rows_per_chunk = max(1, _COL_BYTES // max(1, out_w * in_ch * k * k * 4))
    for r0 in range(0, out_h, rows_per_chunk):
        r1 = min(out_h, r0 + rows_per_chunk)
        cols = windows[r0:r1].reshape((r1 - r0) * out_w, in_ch * k * k)
        out[r0:r1] = (cols @ wmat).reshape(r1 - r0, out_w, out_ch)
    out += b
    return out


def _mpool_layer(x: np.ndarray, k: int, stride: int) -> np.ndarray:
    h, w, c = x.shape
    if (h - k) % stride or (w - k) % stride:
        raise ValueError(
            f"pooling {k}x{k} stride {stride} does not tile input {h}x{w} "
            "(incomplete windows are not supported)"
        )
    out_h = (h - k) // stride + 1
    out_w = (w - k) // stride + 1
    windows = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(0, 1))
    return windows[::stride, ::stride].max(axis=(3, 4)).reshape(out_h, out_w, c)


def _softmax_layer(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=2, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=2, keepdims=True)


def forward_layers(x: np.ndarray, weights: NetworkWeights) -> Iterator[tuple[str, np.ndarray]]:
    """Run the network, yielding (layer name, activation) after every layer."""
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 3:
        raise ValueError(f"input must be (H, W, C), got shape {x.shape}")
    for spec in weights.layers:
        if spec.type == "input":
            pass
        elif spec.type == "conv":
            w, b = weights.conv_weights[spec.name]
            x = _conv_layer(x, w, b, spec.stride, spec.pad)
        elif spec.type == "relu":
            x = np.maximum(x, 0.0)
        elif spec.type == "mpool":
            x = _mpool_layer(x, spec.support, spec.stride)
        elif spec.type == "softmx":
            x = _softmax_layer(x)
        yield spec.name, x


def forward(x: np.ndarray, weights: NetworkWeights, stop_at: str | None = None) -> np.ndarray:
    """Apply layers in order; returns the activation of ``stop_at`` (or the
    final layer when omitted)."""
    names = {spec.name for spec in weights.layers}
    if stop_at is not None and stop_at not in names:
        raise ValueError(f"unknown layer {stop_at!r}")
    out = None
    for name, act in forward_layers(x, weights):
        out = act
        if name == stop_at:
            return act
    return out


def preprocess(frame, mean: np.ndarray | NetworkWeights) -> np.ndarray:
    """RGB frame minus the per-channel mean carried in the weight file."""
    if isinstance(mean, NetworkWeights):
        mean = mean.mean
    data = np.asarray(frame.data if isinstance(frame, Frame) else frame)
    if data.ndim != 3 or data.shape[2] != 3:
        raise ValueError(f"preprocess expects an RGB frame, got shape {data.shape}")
    return data.astype(np.float32) - np.asarray(mean, dtype=np.float32)


def extract_fc7_video(
    video: FaceVideo,
    weights: NetworkWeights,
    layer_name: str = "fc7",
    frame_stride: int = 1,
) -> FeatureVector:
    """Frame-averaged deep descriptor: mean over frames of the named layer's
    activation, summed in fixed frame order."""
    if video.rgb is None:
        raise ValueError("deep features require an RGB video")
    if frame_stride < 1:
        raise ValueError("frame_stride must be >= 1")
    indices = range(0, video.frames, frame_stride)
    total = None
    count = 0
    for t in indices:
        act = forward(preprocess(video.rgb[t], weights), weights, stop_at=layer_name)
        flat = act.astype(np.float64).ravel()
        total = flat if total is None else total + flat
        count += 1
    return FeatureVector("deep_" + layer_name, (layer_name,), total / count)
