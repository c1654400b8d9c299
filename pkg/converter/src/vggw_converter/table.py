"""The 38-layer VGG-face architecture table.

Row-for-row geometry of the canonical network: 13 spatial convolutions in
five blocks, each followed by rectification, five 2x2 max-pool stages, then
fc6/fc7/fc8 realized as convolutions of support 7/1/1 and a softmax.
"""

TYPE_TAGS = {"input": 0, "conv": 1, "relu": 2, "mpool": 3, "softmx": 4}

# (type, name, support, filt_dim, num_filts, stride, pad)
_ROWS = [("input", "input", 0, 0, 0, 1, 0)]

_BLOCKS = [
    (1, 2, 3, 64),
    (2, 2, 64, 128),
    (3, 3, 128, 256),
    (4, 3, 256, 512),
    (5, 3, 512, 512),
]
for _block, _n, _in_ch, _out_ch in _BLOCKS:
    for _i in range(1, _n + 1):
        _fd = _in_ch if _i == 1 else _out_ch
        _ROWS.append(("conv", f"conv{_block}_{_i}", 3, _fd, _out_ch, 1, 1))
        _ROWS.append(("relu", f"relu{_block}_{_i}", 1, 0, 0, 1, 0))
    _ROWS.append(("mpool", f"pool{_block}", 2, 0, 0, 2, 0))

_ROWS += [
    ("conv", "fc6", 7, 512, 4096, 1, 0),
    ("relu", "relu6", 1, 0, 0, 1, 0),
    ("conv", "fc7", 1, 4096, 4096, 1, 0),
    ("relu", "relu7", 1, 0, 0, 1, 0),
    ("conv", "fc8", 1, 4096, 2622, 1, 0),
    ("softmx", "prob", 1, 0, 0, 1, 0),
]

ARCHITECTURE = tuple(_ROWS)

CONV_LAYER_NAMES = tuple(name for (t, name, *_rest) in ARCHITECTURE if t == "conv")

CONV_SHAPES = {
    name: (num_filts, filt_dim, support, support)
    for (t, name, support, filt_dim, num_filts, _s, _p) in ARCHITECTURE
    if t == "conv"
}
