"""Three-orthogonal-planes descriptor extraction.

A video volume is sliced into XY (appearance), XT and YT (dynamics) planes;
each slice set is coded with a 2D binary-pattern coder, the interior codes of
all slices of a plane are pooled into one L1-normalized histogram, and the
three plane histograms are concatenated.  Extraction at several coder scales
concatenates further, in scale order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureVector
from .media_io import FaceVideo
from .texture_coders import (
    CodeImage,
    FilterBank,
    ImageTooSmall,
    LbpParams,
    LpqParams,
    bsif_code,
    lbp_code,
    lpq_code,
)

LBP_DEFAULT_SCALES = (LbpParams(8, 1), LbpParams(16, 2), LbpParams(24, 3))
LPQ_DEFAULT_SCALES = (3, 5, 7, 9, 11, 13, 15, 17)


@dataclass(frozen=True)
class TopHistogram:
    """Per-plane histograms of one descriptor at one scale."""

    descriptor: str
    scale: tuple
    xy: np.ndarray
    xt: np.ndarray
    yt: np.ndarray

    @property
    def concatenated(self) -> np.ndarray:
        return np.concatenate([self.xy, self.xt, self.yt])


@dataclass(frozen=True)
class MultiScaleFeature:
    descriptor: str
    scales: tuple
    per_scale: tuple[TopHistogram, ...]

    @property
    def values(self) -> np.ndarray:
        return np.concatenate([h.concatenated for h in self.per_scale])

    def as_feature_vector(self) -> FeatureVector:
        return FeatureVector(self.descriptor, self.scales, self.values)


def slice_planes(video: FaceVideo) -> tuple[list[np.ndarray], list[np.ndarray], list[np.ndarray]]:
    """XY slices (T of H x W), XT slices (H of T x W), YT slices (W of T x H)."""
    vol = video.gray
    xy = [vol[t] for t in range(vol.shape[0])]
    xt = [vol[:, y, :] for y in range(vol.shape[1])]
    yt = [vol[:, :, x] for x in range(vol.shape[2])]
    return xy, xt, yt


def plane_histogram(slices, coder, return_counts: bool = False):
    """L1-normalized histogram of interior codes pooled over all slices.

    ``coder`` maps a 2D image to a CodeImage.  Slices too small for the
    coder's neighborhood are skipped; if every slice is skipped the error
    names the minimum size.  With ``return_counts`` the raw integer counts
    come back alongside the histogram.
    """
    counts = None
    skipped = 0
    last_error = None
    for img in slices:
        try:
            code_img: CodeImage = coder(img)
        except ImageTooSmall as err:
            skipped += 1
            last_error = err
            continue
        hist = code_img.histogram()
        counts = hist if counts is None else counts + hist
    if counts is None:
        raise ImageTooSmall(f"all {skipped} slices were too small: {last_error}")
    total = counts.sum()
    normalized = counts / total
    if return_counts:
        return normalized, counts
    return normalized


def _scale_coders(descriptor: str, scales) -> list[tuple[tuple, object, int]]:
    """(scale tag, coder callable, bin count) per scale for one descriptor."""
    descriptor = descriptor.upper()
    entries = []
    if descriptor == "LBP":
        for params in scales:
            if not isinstance(params, LbpParams):
                params = LbpParams(*params)
            entries.append(
                ((params.P, params.R), lambda im, p=params: lbp_code(im, p), params.n_bins)
            )
    elif descriptor == "LPQ":
        for w in scales:
            params = w if isinstance(w, LpqParams) else LpqParams(int(w))
            entries.append(
                ((params.W,), lambda im, p=params: lpq_code(im, p), params.n_bins)
            )
    elif descriptor == "BSIF":
        for bank in scales:
            if not isinstance(bank, FilterBank):
                raise TypeError("BSIF scales must be FilterBank instances")
            entries.append(
                ((bank.f, bank.W), lambda im, b=bank: bsif_code(im, b), bank.n_bins)
            )
    else:
        raise ValueError(f"unknown descriptor {descriptor!r} (expected LBP, LPQ or BSIF)")
    if not entries:
        raise ValueError("at least one scale is required")
    return entries


def feature_length(descriptor: str, scales) -> int:
    """Final vector length; a pure function of descriptor and scale parameters."""
    return sum(3 * n_bins for _, _, n_bins in _scale_coders(descriptor, scales))


def extract_top_multiscale(video: FaceVideo, descriptor: str, scales) -> MultiScaleFeature:
    """Code all three plane sets at every scale and concatenate the histograms.

    ``scales``: LbpParams (or (P, R) pairs) for LBP, window sizes for LPQ,
    FilterBank instances for BSIF.
    """
    planes = slice_planes(video)
    per_scale = []
    for tag, coder, _ in _scale_coders(descriptor, scales):
        hists = []
        for plane_name, plane_slices in zip(("XY", "XT", "YT"), planes):
            try:
                hists.append(plane_histogram(plane_slices, coder))
            except ImageTooSmall as err:
                raise ImageTooSmall(
                    f"{descriptor} scale {tag}, plane {plane_name}: {err}"
                ) from err
        per_scale.append(
            TopHistogram(descriptor.upper(), tag, xy=hists[0], xt=hists[1], yt=hists[2])
        )
    return MultiScaleFeature(
        descriptor=descriptor.upper(),
        scales=tuple(h.scale for h in per_scale),
        per_scale=tuple(per_scale),
    )
