"""Eye-coordinate face registration: similarity warp of every frame to a fixed template.

Alignment uses the two annotated eye centers only (4 DoF: rotation, uniform
scale, translation).  Each frame is warped independently with bilinear
interpolation; samples outside the source image are zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .media_io import FaceVideo


@dataclass(frozen=True)
class EyeAnnotation:
    """Viewer-left and viewer-right eye centers for one frame, sub-pixel image coords."""

    frame_index: int
    left: tuple[float, float]
    right: tuple[float, float]

    def __post_init__(self):
        if self.left == self.right:
            raise ValueError(f"frame {self.frame_index}: eye points coincide")


@dataclass(frozen=True)
class AlignmentTemplate:
    """Output crop size and target eye positions (same row for both eyes)."""

    size: int
    left_eye: tuple[float, float]
    right_eye: tuple[float, float]

    def __post_init__(self):
        for x, y in (self.left_eye, self.right_eye):
            if not (0 <= x < self.size and 0 <= y < self.size):
                raise ValueError("eye targets must lie inside the template")
        if self.left_eye[1] != self.right_eye[1]:
            raise ValueError("template eye targets must share the same y")


def texture_template(size: int = 64) -> AlignmentTemplate:
    """Default crop for the texture descriptors: eyes at (0.3*S, 0.35*S) / (0.7*S, 0.35*S)."""
    return AlignmentTemplate(size, (0.3 * size, 0.35 * size), (0.7 * size, 0.35 * size))


def deep_template() -> AlignmentTemplate:
    """224x224 crop feeding the convolutional network."""
    return texture_template(224)


def compute_similarity(
    src_left: tuple[float, float],
    src_right: tuple[float, float],
    template: AlignmentTemplate,
) -> np.ndarray:
    """2x3 similarity (rotation + uniform scale + translation) mapping the source
    eye points exactly onto the template targets.

    Treating points as complex numbers z, the transform is z -> a*z + t with
    a = (dst_r - dst_l) / (src_r - src_l) and t chosen so src_l maps to dst_l.
    """
    sl = complex(*src_left)
    sr = complex(*src_right)
    if sl == sr:
        raise ValueError("source eye points coincide")
    dl = complex(*template.left_eye)
    dr = complex(*template.right_eye)
    a = (dr - dl) / (sr - sl)
    t = dl - a * sl
    return np.array(
        [[a.real, -a.imag, t.real],
         [a.imag, a.real, t.imag]],
        dtype=np.float64,
    )


def apply_affine(matrix: np.ndarray, point: tuple[float, float]) -> tuple[float, float]:
    x, y = point
    return (
        matrix[0, 0] * x + matrix[0, 1] * y + matrix[0, 2],
        matrix[1, 0] * x + matrix[1, 1] * y + matrix[1, 2],
    )


def _invert_affine(matrix: np.ndarray) -> np.ndarray:
    a = matrix[:, :2]
    t = matrix[:, 2]
    inv = np.linalg.inv(a)
    return np.hstack([inv, (-inv @ t)[:, None]])


def _warp_plane(plane: np.ndarray, inverse: np.ndarray, size: int) -> np.ndarray:
    """Inverse-map bilinear warp of one 2D uint8 plane onto a size x size grid."""
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    sx = inverse[0, 0] * xs + inverse[0, 1] * ys + inverse[0, 2]
    sy = inverse[1, 0] * xs + inverse[1, 1] * ys + inverse[1, 2]

    h, w = plane.shape
    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0

    out = np.zeros((size, size), dtype=np.float64)
    src = plane.astype(np.float64)
    for dy in (0, 1):
        for dx in (0, 1):
            px = x0 + dx
            py = y0 + dy
            weight = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy)
            inside = (px >= 0) & (px < w) & (py >= 0) & (py < h)
            ix = np.clip(px, 0, w - 1).astype(np.intp)
            iy = np.clip(py, 0, h - 1).astype(np.intp)
            out += np.where(inside, weight * src[iy, ix], 0.0)
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def align_crop(
    video: FaceVideo,
    annotations: list[EyeAnnotation],
    template: AlignmentTemplate,
) -> FaceVideo:
    """Warp every frame to the template; output is T x S x S (RGB kept if present)."""
    if len(annotations) != video.frames:
        raise ValueError(
            f"annotation count {len(annotations)} does not match frame count {video.frames}"
        )
    size = template.size
    gray_out = np.empty((video.frames, size, size), dtype=np.uint8)
    rgb_out = (
        np.empty((video.frames, size, size, 3), dtype=np.uint8)
        if video.rgb is not None
        else None
    )
    for t, ann in enumerate(annotations):
        matrix = compute_similarity(ann.left, ann.right, template)
        inverse = _invert_affine(matrix)
        gray_out[t] = _warp_plane(video.gray[t], inverse, size)
        if rgb_out is not None:
            for c in range(3):
                rgb_out[t, :, :, c] = _warp_plane(video.rgb[t, :, :, c], inverse, size)
    return FaceVideo(gray=gray_out, rgb=rgb_out, fps=video.fps)


def load_annotations(path: str | Path) -> list[EyeAnnotation]:
    """Read the landmark CSV: header ``frame,lx,ly,rx,ry``, one row per frame."""
    annotations = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["frame", "lx", "ly", "rx", "ry"]:
            raise ValueError(f"{path}: expected header frame,lx,ly,rx,ry, got {header}")
        for row in reader:
            if not row:
                continue
            annotations.append(
                EyeAnnotation(
                    frame_index=int(row[0]),
                    left=(float(row[1]), float(row[2])),
                    right=(float(row[3]), float(row[4])),
                )
            )
    annotations.sort(key=lambda a: a.frame_index)
    return annotations


def save_annotations(annotations: list[EyeAnnotation], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "lx", "ly", "rx", "ry"])
        for a in annotations:
            writer.writerow([a.frame_index, repr(a.left[0]), repr(a.left[1]),
                             repr(a.right[0]), repr(a.right[1])])
