"""Independent brute-force oracles for the binary-pattern coders.

Pure-Python per-pixel recomputation straight from the descriptor
definitions, sharing nothing with the library implementation except the
documented conventions (neighbor angles, bit order, tie tolerances).
"""

import math

LBP_EPS = 1e-8
LPQ_EPS_FACTOR = 1e-11
BSIF_EPS_FACTOR = 1e-9


def _tolist(image):
    return [[float(v) for v in row] for row in image]


def lbp_oracle(image, P, R):
    """Full-mapping LBP codes for every interior pixel (dict keyed by (y, x))."""
    img = _tolist(image)
    h, w = len(img), len(img[0])
    m = math.ceil(R)
    out = {}
    for y in range(m, h - m):
        for x in range(m, w - m):
            center = img[y][x]
            code = 0
            for p in range(P):
                theta = 2.0 * math.pi * p / P
                dx = R * math.cos(theta)
                dy = R * math.sin(theta)
                if abs(dx - round(dx)) < 1e-9:
                    dx = float(round(dx))
                if abs(dy - round(dy)) < 1e-9:
                    dy = float(round(dy))
                sx, sy = x + dx, y + dy
                x0, y0 = math.floor(sx), math.floor(sy)
                fx, fy = sx - x0, sy - y0
                value = (1.0 - fx) * (1.0 - fy) * img[y0][x0]
                if fx != 0.0:
                    value += fx * (1.0 - fy) * img[y0][x0 + 1]
                if fy != 0.0:
                    value += (1.0 - fx) * fy * img[y0 + 1][x0]
                if fx != 0.0 and fy != 0.0:
                    value += fx * fy * img[y0 + 1][x0 + 1]
                if value - center >= -LBP_EPS:
                    code |= 1 << p
            out[(y, x)] = code
    return out


def circular_transitions(code, P):
    """Number of circular 0<->1 transitions in the P-bit pattern."""
    bits = [(code >> i) & 1 for i in range(P)]
    return sum(bits[i] != bits[(i + 1) % P] for i in range(P))


def lpq_oracle(image, W):
    """LPQ codes from explicit complex-exponential double sums."""
    img = _tolist(image)
    h, w = len(img), len(img[0])
    r = (W - 1) // 2
    a = 1.0 / W
    freqs = [(a, 0.0), (0.0, a), (a, a), (a, -a)]
    max_abs = max(abs(v) for row in img for v in row)
    eps = LPQ_EPS_FACTOR * W * W * max(1.0, max_abs)
    out = {}
    for y in range(r, h - r):
        for x in range(r, w - r):
            parts_re, parts_im = [], []
            for ux, uy in freqs:
                re = im = 0.0
                for dy in range(-r, r + 1):
                    for dx in range(-r, r + 1):
                        ang = -2.0 * math.pi * (ux * dx + uy * dy)
                        v = img[y + dy][x + dx]
                        re += v * math.cos(ang)
                        im += v * math.sin(ang)
                parts_re.append(re)
                parts_im.append(im)
            code = 0
            for bit, value in enumerate(parts_re + parts_im):
                if abs(value) < eps:
                    value = 0.0
                if value >= 0.0:
                    code |= 1 << bit
            out[(y, x)] = code
    return out


def bsif_oracle(image, filters):
    """BSIF codes from explicit double-sum correlations of zero-mean filters."""
    img = _tolist(image)
    h, w = len(img), len(img[0])
    banks = [_tolist(f) for f in filters]
    W = len(banks[0])
    r = (W - 1) // 2
    max_abs = max(abs(v) for row in img for v in row)
    centered = []
    eps_list = []
    for filt in banks:
        mean = sum(sum(row) for row in filt) / (W * W)
        cf = [[v - mean for v in row] for row in filt]
        centered.append(cf)
        l1 = sum(abs(v) for row in cf for v in row)
        eps_list.append(BSIF_EPS_FACTOR * l1 * max(1.0, max_abs))
    out = {}
    for y in range(r, h - r):
        for x in range(r, w - r):
            code = 0
            for i, filt in enumerate(centered):
                resp = 0.0
                for dy in range(-r, r + 1):
                    for dx in range(-r, r + 1):
                        resp += filt[dy + r][dx + r] * img[y + dy][x + dx]
                if resp > eps_list[i]:
                    code |= 1 << i
            out[(y, x)] = code
    return out


def bsif_responses(image, filters):
    """Raw zero-mean-filter correlations per interior pixel (for tie checks)."""
    img = _tolist(image)
    h, w = len(img), len(img[0])
    banks = [_tolist(f) for f in filters]
    W = len(banks[0])
    r = (W - 1) // 2
    centered = []
    for filt in banks:
        mean = sum(sum(row) for row in filt) / (W * W)
        centered.append([[v - mean for v in row] for row in filt])
    out = {}
    for y in range(r, h - r):
        for x in range(r, w - r):
            vals = []
            for filt in centered:
                resp = 0.0
                for dy in range(-r, r + 1):
                    for dx in range(-r, r + 1):
                        resp += filt[dy + r][dx + r] * img[y + dy][x + dx]
                vals.append(resp)
            out[(y, x)] = vals
    return out


def conv_oracle(x, w, b, stride, pad):
    """Cross-correlation + bias via explicit nested sums (H, W, C lists)."""
    h, width, in_ch = len(x), len(x[0]), len(x[0][0])
    out_ch = len(w)
    k = len(w[0][0])
    ph, pw = h + 2 * pad, width + 2 * pad

    def sample(y, xx, c):
        y -= pad
        xx -= pad
        if 0 <= y < h and 0 <= xx < width:
            return x[y][xx][c]
        return 0.0

    out_h = (ph - k) // stride + 1
    out_w = (pw - k) // stride + 1
    out = [[[0.0] * out_ch for _ in range(out_w)] for _ in range(out_h)]
    for oy in range(out_h):
        for ox in range(out_w):
            for oc in range(out_ch):
                acc = float(b[oc])
                for ic in range(in_ch):
                    for ky in range(k):
                        for kx in range(k):
                            acc += float(w[oc][ic][ky][kx]) * sample(
                                oy * stride + ky, ox * stride + kx, ic)
                out[oy][ox][oc] = acc
    return out


def forward_oracle(x, layers, conv_weights, stop_at=None):
    """Layer-by-layer reference forward pass in pure Python floats."""
    act = [[[float(v) for v in px] for px in row] for row in x]
    for spec in layers:
        if spec.type == "input":
            pass
        elif spec.type == "conv":
            w, b = conv_weights[spec.name]
            act = conv_oracle(act, w.tolist(), b.tolist(), spec.stride, spec.pad)
        elif spec.type == "relu":
            act = [[[max(0.0, v) for v in px] for px in row] for row in act]
        elif spec.type == "mpool":
            k, s = spec.support, spec.stride
            h, width = len(act), len(act[0])
            channels = len(act[0][0])
            out_h = (h - k) // s + 1
            out_w = (width - k) // s + 1
            pooled = []
            for oy in range(out_h):
                row = []
                for ox in range(out_w):
                    px = []
                    for c in range(channels):
                        px.append(max(
                            act[oy * s + ky][ox * s + kx][c]
                            for ky in range(k) for kx in range(k)))
                    row.append(px)
                pooled.append(row)
            act = pooled
        elif spec.type == "softmx":
            new = []
            for row in act:
                new_row = []
                for px in row:
                    exps = [math.exp(v) for v in px]
                    total = sum(exps)
                    new_row.append([e / total for e in exps])
                new.append(new_row)
            act = new
        if spec.name == stop_at:
            break
    return act


def check_codes(code_image, oracle_codes):
    """True iff the implementation's interior codes equal the oracle's."""
    m = code_image.margin
    for (y, x), expected in oracle_codes.items():
        assert y >= m and x >= m
        if int(code_image.codes[y, x]) != expected:
            return False, (y, x, int(code_image.codes[y, x]), expected)
    return True, None
