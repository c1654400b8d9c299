"""Frame and video ingestion: binary PGM/PPM directories, grayscale volumes, manifests.

A video on disk is a directory of frames named ``000001.pgm`` (grayscale) or
``000001.ppm`` (RGB), 1-based and contiguous, plus an entry in a JSON manifest.
Decoding is dependency-free and bit-exact so every descriptor test downstream
is reproducible.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_FRAME_RE = re.compile(r"^(\d{6})\.(pgm|ppm)$")

# ITU-R BT.601 luma weights, rounded half-up to uint8.
_LUMA = (0.299, 0.587, 0.114)

SMILE_TYPES = ("spontaneous", "posed")


@dataclass(frozen=True)
class Frame:
    """One image: ``data`` is uint8 with shape (H, W) or (H, W, 3)."""

    width: int
    height: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        expected = (self.height, self.width) if self.channels == 1 else (self.height, self.width, 3)
        if self.data.shape != expected or self.data.dtype != np.uint8:
            raise ValueError(
                f"frame data must be uint8 with shape {expected}, "
                f"got {self.data.dtype} {self.data.shape}"
            )


@dataclass(frozen=True)
class FaceVideo:
    """Grayscale intensity volume (T, H, W) with optional aligned RGB volume."""

    gray: np.ndarray
    rgb: np.ndarray | None = None
    fps: float | None = None

    def __post_init__(self):
        if self.gray.ndim != 3 or self.gray.dtype != np.uint8 or min(self.gray.shape) < 1:
            raise ValueError("gray volume must be a non-empty uint8 array of shape (T, H, W)")
        if self.rgb is not None:
            if self.rgb.shape != self.gray.shape + (3,) or self.rgb.dtype != np.uint8:
                raise ValueError("rgb volume must be uint8 with shape (T, H, W, 3) matching gray")

    @property
    def frames(self) -> int:
        return self.gray.shape[0]

    @property
    def height(self) -> int:
        return self.gray.shape[1]

    @property
    def width(self) -> int:
        return self.gray.shape[2]


@dataclass
class VideoManifest:
    video_id: str
    frames_dir: str
    landmarks: str
    subject_id: str
    smile_type: str

    def __post_init__(self):
        if self.smile_type not in SMILE_TYPES:
            raise ValueError(f"smile_type must be one of {SMILE_TYPES}, got {self.smile_type!r}")


def _read_pnm_header(buf: bytes, path: Path) -> tuple[bytes, int, int, int, int]:
    """Parse 'P5'/'P6' header; returns (magic, width, height, maxval, payload offset)."""
    if buf[:2] not in (b"P5", b"P6"):
        raise ValueError(f"{path.name}: not a binary PGM/PPM file (bad magic {buf[:2]!r})")
    magic = buf[:2]
    pos = 2
    fields = []
    while len(fields) < 3:
        if pos >= len(buf):
            raise ValueError(f"{path.name}: truncated header")
        c = buf[pos:pos + 1]
        if c in b" \t\r\n":
            pos += 1
        elif c == b"#":
            nl = buf.find(b"\n", pos)
            if nl < 0:
                raise ValueError(f"{path.name}: unterminated comment")
            pos = nl + 1
        elif c.isdigit():
            start = pos
            while pos < len(buf) and buf[pos:pos + 1].isdigit():
                pos += 1
            fields.append(int(buf[start:pos]))
        else:
            raise ValueError(f"{path.name}: malformed header near byte {pos}")
    # exactly one whitespace byte separates maxval from the payload
    if pos >= len(buf) or buf[pos:pos + 1] not in b" \t\r\n":
        raise ValueError(f"{path.name}: missing separator after maxval")
    pos += 1
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ValueError(f"{path.name}: invalid dimensions {width}x{height}")
    if not 1 <= maxval <= 255:
        raise ValueError(f"{path.name}: maxval {maxval} unsupported (need 1..255)")
    return magic, width, height, maxval, pos


def read_frame(path: str | Path) -> Frame:
    """Read one binary PGM (P5) or PPM (P6) file."""
    path = Path(path)
    buf = path.read_bytes()
    magic, width, height, _maxval, pos = _read_pnm_header(buf, path)
    channels = 1 if magic == b"P5" else 3
    n = width * height * channels
    payload = buf[pos:pos + n]
    if len(payload) != n:
        raise ValueError(f"{path.name}: expected {n} payload bytes, found {len(payload)}")
    shape = (height, width) if channels == 1 else (height, width, 3)
    data = np.frombuffer(payload, dtype=np.uint8).reshape(shape)
    return Frame(width=width, height=height, channels=channels, data=data)


def write_frame(frame: Frame, path: str | Path) -> None:
    """Write a frame as binary PGM/PPM with maxval 255 (canonical header layout)."""
    magic = b"P5" if frame.channels == 1 else b"P6"
    header = magic + b"\n%d %d\n255\n" % (frame.width, frame.height)
    Path(path).write_bytes(header + frame.data.tobytes())


def load_frames(frame_directory: str | Path) -> list[Frame]:
    """Load all ``NNNNNN.pgm``/``NNNNNN.ppm`` frames, 1-based and contiguous.

    Raises ValueError naming the offending file on a missing index, mixed
    dimensions, or a malformed header, and FileNotFoundError for the directory.
    """
    directory = Path(frame_directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"frame directory not found: {directory}")
    indexed: dict[int, Path] = {}
    for entry in directory.iterdir():
        m = _FRAME_RE.match(entry.name)
        if m:
            indexed[int(m.group(1))] = entry
    if not indexed:
        raise ValueError(f"{directory}: no NNNNNN.pgm/NNNNNN.ppm frames found")
    count = max(indexed)
    for idx in range(1, count + 1):
        if idx not in indexed:
            raise ValueError(f"{directory}: missing frame {idx:06d}")
    frames = [read_frame(indexed[idx]) for idx in range(1, count + 1)]
    first = frames[0]
    for idx, fr in enumerate(frames[1:], start=2):
        if (fr.width, fr.height) != (first.width, first.height):
            raise ValueError(
                f"{indexed[idx].name}: dimensions {fr.width}x{fr.height} differ from "
                f"{first.width}x{first.height}"
            )
    return frames


def to_gray(frame: Frame) -> Frame:
    """BT.601 luma conversion, round half up; identity on grayscale frames."""
    if frame.channels == 1:
        return frame
    rgb = frame.data.astype(np.float64)
    luma = _LUMA[0] * rgb[..., 0] + _LUMA[1] * rgb[..., 1] + _LUMA[2] * rgb[..., 2]
    gray = np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)
    return Frame(width=frame.width, height=frame.height, channels=1, data=gray)


def video_from_frames(frames: list[Frame], fps: float | None = None) -> FaceVideo:
    """Stack frames into a FaceVideo; keeps an RGB volume when every frame is RGB."""
    if not frames:
        raise ValueError("cannot build a video from zero frames")
    gray = np.stack([to_gray(f).data for f in frames])
    rgb = None
    if all(f.channels == 3 for f in frames):
        rgb = np.stack([f.data for f in frames])
    return FaceVideo(gray=gray, rgb=rgb, fps=fps)


def frames_from_video(video: FaceVideo) -> list[Frame]:
    """Unstack the grayscale volume back into frames."""
    return [
        Frame(width=video.width, height=video.height, channels=1, data=video.gray[t])
        for t in range(video.frames)
    ]


def save_video(video: FaceVideo, directory: str | Path) -> None:
    """Write a video as a 1-based PGM frame directory (PPM when RGB is present)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for t in range(video.frames):
        if video.rgb is not None:
            frame = Frame(video.width, video.height, 3, video.rgb[t])
            write_frame(frame, directory / f"{t + 1:06d}.ppm")
        else:
            frame = Frame(video.width, video.height, 1, video.gray[t])
            write_frame(frame, directory / f"{t + 1:06d}.pgm")


def load_video(frame_directory: str | Path, fps: float | None = None) -> FaceVideo:
    return video_from_frames(load_frames(frame_directory), fps=fps)


def load_manifest(path: str | Path) -> list[VideoManifest]:
    """Read a JSON array of manifest records; video ids must be unique.

    Relative ``frames_dir``/``landmarks`` entries resolve against the
    manifest's own directory, so datasets stay relocatable."""
    with open(path, "r", encoding="utf-8") as fh:
        records = json.load(fh)
    if not isinstance(records, list):
        raise ValueError(f"{path}: manifest must be a JSON array")
    base = Path(path).resolve().parent

    def resolve(p: str) -> str:
        return p if Path(p).is_absolute() else str(base / p)

    manifests = [
        VideoManifest(
            video_id=r["video_id"],
            frames_dir=resolve(r["frames_dir"]),
            landmarks=resolve(r["landmarks"]),
            subject_id=r["subject_id"],
            smile_type=r["smile_type"],
        )
        for r in records
    ]
    seen: set[str] = set()
    for m in manifests:
        if m.video_id in seen:
            raise ValueError(f"{path}: duplicate video_id {m.video_id!r}")
        seen.add(m.video_id)
    return manifests


def save_manifest(manifests: list[VideoManifest], path: str | Path) -> None:
    records = [
        {
            "video_id": m.video_id,
            "frames_dir": m.frames_dir,
            "landmarks": m.landmarks,
            "subject_id": m.subject_id,
            "smile_type": m.smile_type,
        }
        for m in manifests
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(records, fh, indent=2)
        fh.write("\n")
