"""Per-pixel binary-pattern coders: LBP, LPQ, and BSIF on 2D grayscale images.

All three coders emit a CodeImage: an integer code per pixel, computed only
where the full neighborhood fits (the excluded border width is the code
image's ``margin``).  Histograms are taken over the interior region only.

Tie handling.  Each coder thresholds a real-valued response, and the spec of
each descriptor fixes what happens at exactly zero (LBP/LPQ: zero counts as
positive; BSIF: strictly positive required).  Responses that are zero in
exact arithmetic come out as ~1e-13 floating-point residue, so every coder
treats responses within a small neighborhood of zero as exactly zero before
thresholding.  The tolerance scales with the maximum possible response
magnitude and is shared by the brute-force test oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

LBP_TIE_EPS = 1e-8           # pixel-difference scale (images are 8-bit)
LPQ_TIE_EPS_FACTOR = 1e-11   # times W^2 * max|image|
BSIF_TIE_EPS_FACTOR = 1e-9   # times ||filter||_1 * max|image|


class ImageTooSmall(ValueError):
    """Image cannot accommodate the coder's neighborhood."""


@dataclass(frozen=True)
class CodeImage:
    """Integer code per pixel; only codes inside the margin are meaningful."""

    codes: np.ndarray
    code_range: int
    margin: int

    def __post_init__(self):
        h, w = self.codes.shape
        if self.margin < 0 or 2 * self.margin >= min(h, w):
            raise ValueError(f"margin {self.margin} leaves no interior in {h}x{w}")

    @property
    def height(self) -> int:
        return self.codes.shape[0]

    @property
    def width(self) -> int:
        return self.codes.shape[1]

    def interior(self) -> np.ndarray:
        m = self.margin
        h, w = self.codes.shape
        return self.codes[m:h - m, m:w - m]

    def histogram(self) -> np.ndarray:
        """Integer counts over ``code_range`` bins of the interior codes."""
        return np.bincount(self.interior().ravel(), minlength=self.code_range)


@dataclass(frozen=True)
class LbpParams:
    P: int
    R: float
    mapping: str = "uniform"

    def __post_init__(self):
        if self.P < 4:
            raise ValueError(f"LBP neighbor count must be >= 4, got {self.P}")
        if self.R < 1:
            raise ValueError(f"LBP radius must be >= 1, got {self.R}")
        if self.mapping not in ("full", "uniform"):
            raise ValueError(f"mapping must be 'full' or 'uniform', got {self.mapping!r}")

    @property
    def margin(self) -> int:
        return int(math.ceil(self.R))

    @property
    def n_bins(self) -> int:
        return 2 ** self.P if self.mapping == "full" else self.P * (self.P - 1) + 3


@dataclass(frozen=True)
class LpqParams:
    W: int

    def __post_init__(self):
        if self.W < 3 or self.W % 2 == 0:
            raise ValueError(f"LPQ window must be odd and >= 3, got {self.W}")

    @property
    def margin(self) -> int:
        return (self.W - 1) // 2

    @property
    def n_bins(self) -> int:
        return 256


@dataclass(frozen=True)
class FilterBank:
    """f zero-mean W x W filters; responses binarize into f-bit BSIF codes."""

    filters: np.ndarray

    def __post_init__(self):
        if self.filters.ndim != 3 or self.filters.shape[1] != self.filters.shape[2]:
            raise ValueError("filters must have shape (f, W, W)")
        f, w, _ = self.filters.shape
        if f < 1 or f > 24:
            raise ValueError(f"filter count must be in 1..24, got {f}")
        if w < 3 or w % 2 == 0:
            raise ValueError(f"filter side must be odd and >= 3, got {w}")
        means = np.abs(self.filters.mean(axis=(1, 2)))
        if means.max() >= 1e-9:
            raise ValueError(f"filters must have zero mean (max |mean| = {means.max():g})")

    @property
    def f(self) -> int:
        return self.filters.shape[0]

    @property
    def W(self) -> int:
        return self.filters.shape[1]

    @property
    def margin(self) -> int:
        return (self.W - 1) // 2

    @property
    def n_bins(self) -> int:
        return 2 ** self.f


def _as_float_image(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError(f"expected a 2D grayscale image, got shape {image.shape}")
    return image.astype(np.float64)


def _neighbor_offset(p: int, P: int, R: float) -> tuple[float, float]:
    """(dx, dy) of neighbor p at angle 2*pi*p/P; near-integer coords snap exactly."""
    theta = 2.0 * math.pi * p / P
    dx = R * math.cos(theta)
    dy = R * math.sin(theta)
    if abs(dx - round(dx)) < 1e-9:
        dx = float(round(dx))
    if abs(dy - round(dy)) < 1e-9:
        dy = float(round(dy))
    return dx, dy


def lbp_code(image: np.ndarray, params: LbpParams) -> CodeImage:
    """Classic circular LBP: bit p set iff neighbor p >= center (ties count as >=).

    Neighbors off the pixel grid are sampled with bilinear interpolation.
    With ``mapping='uniform'`` codes are remapped through uniform_mapping().
    """
    img = _as_float_image(image)
    h, w = img.shape
    m = params.margin
    if min(h, w) <= 2 * m:
        raise ImageTooSmall(
            f"image {h}x{w} too small for LBP radius {params.R} (needs > {2 * m})"
        )
    center = img[m:h - m, m:w - m]
    codes = np.zeros(center.shape, dtype=np.int64)
    for p in range(params.P):
        dx, dy = _neighbor_offset(p, params.P, params.R)
        x0 = int(math.floor(dx))
        y0 = int(math.floor(dy))
        fx = dx - x0
        fy = dy - y0
        # Four integer-shifted views of the interior grid; when the fractional
        # part is zero the second tap repeats the first with weight zero.
        x1 = x0 + 1 if fx != 0.0 else x0
        y1 = y0 + 1 if fy != 0.0 else y0
        v00 = img[m + y0:h - m + y0, m + x0:w - m + x0]
        v01 = img[m + y0:h - m + y0, m + x1:w - m + x1]
        v10 = img[m + y1:h - m + y1, m + x0:w - m + x0]
        v11 = img[m + y1:h - m + y1, m + x1:w - m + x1]
        value = (
            (1.0 - fx) * (1.0 - fy) * v00
            + fx * (1.0 - fy) * v01
            + (1.0 - fx) * fy * v10
            + fx * fy * v11
        )
        codes += (value - center >= -LBP_TIE_EPS).astype(np.int64) << p
    if params.mapping == "uniform":
        mapping = uniform_mapping(params.P)
        codes = mapping[codes]
        code_range = params.P * (params.P - 1) + 3
    else:
        code_range = 2 ** params.P
    full = np.zeros((h, w), dtype=np.int64)
    full[m:h - m, m:w - m] = codes
    return CodeImage(codes=full, code_range=code_range, margin=m)


_POPCOUNT8 = np.unpackbits(np.arange(256, dtype=np.uint8)[:, None], axis=1).sum(axis=1)


@lru_cache(maxsize=8)
def uniform_mapping(P: int) -> np.ndarray:
    """Map 2^P LBP codes to P(P-1)+3 bins: uniform codes (at most two circular
    0<->1 transitions) get their own bin in ascending code order, everything
    else shares the last bin."""
    if P < 4:
        raise ValueError(f"uniform mapping needs P >= 4, got {P}")
    if P > 24:
        raise ValueError(f"uniform mapping table for P={P} would be impractically large")
    codes = np.arange(2 ** P, dtype=np.uint32)
    rotated = (codes >> 1) | ((codes & 1) << (P - 1))  # circular right rotation
    diff = codes ^ rotated
    transitions = (
        _POPCOUNT8[diff & 0xFF]
        + _POPCOUNT8[(diff >> 8) & 0xFF]
        + _POPCOUNT8[(diff >> 16) & 0xFF]
        + _POPCOUNT8[(diff >> 24) & 0xFF]
    )
    is_uniform = transitions <= 2
    n_uniform = int(is_uniform.sum())
    assert n_uniform == P * (P - 1) + 2
    bins = np.full(codes.shape, n_uniform, dtype=np.int64)
    bins[is_uniform] = np.arange(n_uniform)
    bins.setflags(write=False)
    return bins


def _correlate1d_valid(img: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    """Valid-mode 1D correlation along rows (axis=1) or columns (axis=0)."""
    windows = np.lib.stride_tricks.sliding_window_view(img, kernel.shape[0], axis=axis)
    return windows @ kernel


def lpq_code(image: np.ndarray, params: LpqParams) -> CodeImage:
    """Local phase quantization over a W x W window.

    STFT coefficients are taken at the four frequencies (a,0), (0,a), (a,a)
    and (a,-a) with a = 1/W; the 8-bit code packs the signs (>= 0 maps to 1)
    of [Re u1..u4, Im u1..u4] as bits 0..7.
    """
    img = _as_float_image(image)
    h, w = img.shape
    W = params.W
    if min(h, w) <= W:
        raise ImageTooSmall(f"image {h}x{w} too small for LPQ window {W} (needs > {W})")
    r = params.margin
    d = np.arange(-r, r + 1, dtype=np.float64)
    a = 1.0 / W
    e1 = np.exp(-2j * np.pi * a * d)     # frequency a along one axis
    e0 = np.ones(W, dtype=np.complex128)  # frequency 0

    def stft(col_kernel: np.ndarray, row_kernel: np.ndarray) -> np.ndarray:
        rows = _correlate1d_valid(img.astype(np.complex128), row_kernel, axis=1)
        return _correlate1d_valid(rows, col_kernel, axis=0)

    coeffs = [
        stft(e0, e1),            # u1 = (a, 0): oscillates along x
        stft(e1, e0),            # u2 = (0, a): oscillates along y
        stft(e1, e1),            # u3 = (a, a)
        stft(np.conj(e1), e1),   # u4 = (a, -a)
    ]
    eps = LPQ_TIE_EPS_FACTOR * W * W * max(1.0, float(np.abs(img).max()))
    codes = np.zeros(coeffs[0].shape, dtype=np.int64)
    parts = [c.real for c in coeffs] + [c.imag for c in coeffs]
    for bit, part in enumerate(parts):
        snapped = np.where(np.abs(part) < eps, 0.0, part)
        codes += (snapped >= 0.0).astype(np.int64) << bit
    full = np.zeros((h, w), dtype=np.int64)
    full[r:h - r, r:w - r] = codes
    return CodeImage(codes=full, code_range=256, margin=r)


def bsif_code(image: np.ndarray, bank: FilterBank) -> CodeImage:
    """Binarized statistical image features: bit i set iff the correlation of
    filter i with the window is strictly positive (zero responses give 0)."""
    img = _as_float_image(image)
    h, w = img.shape
    W = bank.W
    if min(h, w) <= W:
        raise ImageTooSmall(f"image {h}x{w} too small for BSIF filter {W} (needs > {W})")
    r = bank.margin
    # Re-centering makes the zero-mean invariant exact at float precision, so
    # constant windows land inside the tie tolerance.
    filters = bank.filters - bank.filters.mean(axis=(1, 2), keepdims=True)
    windows = np.lib.stride_tricks.sliding_window_view(img, (W, W))
    responses = np.tensordot(windows, filters, axes=([2, 3], [1, 2]))
    scale = max(1.0, float(np.abs(img).max()))
    eps = BSIF_TIE_EPS_FACTOR * np.abs(filters).sum(axis=(1, 2)) * scale
    bits = responses > eps[None, None, :]
    codes = (bits.astype(np.int64) << np.arange(bank.f, dtype=np.int64)).sum(axis=2)
    full = np.zeros((h, w), dtype=np.int64)
    full[r:h - r, r:w - r] = codes
    return CodeImage(codes=full, code_range=2 ** bank.f, margin=r)


def _symmetric_decorrelate(W: np.ndarray) -> np.ndarray:
    """W <- (W W^T)^(-1/2) W."""
    s, u = np.linalg.eigh(W @ W.T)
    if s.min() <= 0:
        raise ValueError("degenerate unmixing matrix during ICA")
    return (u / np.sqrt(s)) @ u.T @ W


def whiten_patch_matrix(patches: np.ndarray, f: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-patch mean removal, feature centering, then PCA to f dimensions with
    whitening.  Returns (Z, whitening): Z = centered @ whitening.T is n x f with
    identity covariance."""
    patches = np.asarray(patches, dtype=np.float64)
    if patches.ndim == 2:
        side = int(round(math.sqrt(patches.shape[1])))
        patches = patches.reshape(patches.shape[0], side, side)
    n, W, W2 = patches.shape
    if W != W2:
        raise ValueError(f"patches must be square, got {W}x{W2}")
    if n < 50 * W * W:
        raise ValueError(f"need at least {50 * W * W} patches for W={W}, got {n}")
    if f > W * W - 1:
        raise ValueError(f"filter count {f} exceeds W^2-1 = {W * W - 1}")

    X = patches.reshape(n, W * W)
    X = X - X.mean(axis=1, keepdims=True)
    X = X - X.mean(axis=0, keepdims=True)

    cov = (X.T @ X) / n
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:f]
    evals = evals[order]
    evecs = evecs[:, order]
    if evals[-1] <= 0 or evals[-1] <= evals[0] * 1e-12:
        raise ValueError("patch covariance is rank-deficient; cannot whiten to f components")
    # fix eigenvector sign: largest-magnitude entry positive
    flips = evecs[np.abs(evecs).argmax(axis=0), np.arange(f)] < 0
    evecs[:, flips] *= -1.0
    whitening = (evecs / np.sqrt(evals)).T       # (f, W*W)
    return X @ whitening.T, whitening


def learn_bsif_filters(
    patches: np.ndarray,
    f: int,
    seed: int,
    max_iter: int = 1000,
    tol: float = 1e-4,
) -> FilterBank:
    """Learn a BSIF bank from natural image patches.

    Pipeline: per-patch mean removal, PCA to f dimensions with whitening,
    fixed-point symmetric ICA with the cube nonlinearity, then each unmixing
    row reshaped to W x W and normalized to zero mean and unit L2 norm.
    Deterministic for a fixed seed.

    The fixed point's residual oscillation floor scales with estimation noise,
    so reaching a tight ``tol`` needs substantially more than the minimum
    50*W*W patches (tens of thousands is typical for natural-image banks).
    """
    if f > 24:
        raise ValueError(f"filter count {f} exceeds the 24-bit code limit")
    patches = np.asarray(patches, dtype=np.float64)
    Z, whiten = whiten_patch_matrix(patches, f)
    n = Z.shape[0]
    W = whiten.shape[1]
    W = int(round(math.sqrt(W)))

    rng = np.random.default_rng(seed)
    Wica = _symmetric_decorrelate(rng.standard_normal((f, f)))
    converged = False
    for _ in range(max_iter):
        Y = Z @ Wica.T
        Wnew = (Y ** 3).T @ Z / n - (3.0 * (Y ** 2).mean(axis=0))[:, None] * Wica
        Wnew = _symmetric_decorrelate(Wnew)
        delta = np.abs(np.abs(np.diagonal(Wnew @ Wica.T)) - 1.0).max()
        Wica = Wnew
        if delta < tol:
            converged = True
            break
    if not converged:
        raise ValueError(f"ICA did not converge within {max_iter} iterations")

    filters = (Wica @ whiten).reshape(f, W, W)
    filters = filters - filters.mean(axis=(1, 2), keepdims=True)
    norms = np.sqrt((filters ** 2).sum(axis=(1, 2)))
    if norms.min() == 0:
        raise ValueError("ICA produced a null filter")
    filters = filters / norms[:, None, None]
    return FilterBank(filters=filters)


def random_filter_bank(f: int, W: int, seed: int) -> FilterBank:
    """Random zero-mean unit-norm bank (test fixtures, baselines)."""
    rng = np.random.default_rng(seed)
    filters = rng.standard_normal((f, W, W))
    filters -= filters.mean(axis=(1, 2), keepdims=True)
    filters /= np.sqrt((filters ** 2).sum(axis=(1, 2)))[:, None, None]
    return FilterBank(filters=filters)


def save_filter_bank(bank: FilterBank, path: str | Path) -> None:
    """Text format: header ``BSIF <f> <W>`` then f*W*W floats, filter-major,
    row-major within a filter, 17 significant digits (exact round-trip)."""
    lines = [f"BSIF {bank.f} {bank.W}"]
    for i in range(bank.f):
        lines.append(" ".join(format(v, ".17g") for v in bank.filters[i].ravel()))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_filter_bank(path: str | Path) -> FilterBank:
    text = Path(path).read_text(encoding="utf-8").split()
    if len(text) < 3 or text[0] != "BSIF":
        raise ValueError(f"{path}: expected header 'BSIF <f> <W>'")
    try:
        f, W = int(text[1]), int(text[2])
    except ValueError:
        raise ValueError(f"{path}: malformed filter counts in header") from None
    values = text[3:]
    expected = f * W * W
    if len(values) != expected:
        raise ValueError(f"{path}: expected {expected} values, found {len(values)}")
    filters = np.array([float(v) for v in values], dtype=np.float64).reshape(f, W, W)
    return FilterBank(filters=filters)
