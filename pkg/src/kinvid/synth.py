"""Synthetic kinship dataset generator for desk-scale end-to-end testing.

Each family owns a latent texture-dynamics vector (grating amplitudes,
spatial frequencies, temporal velocities).  Every video blends the family
latent with an independent per-video draw by the kin-similarity strength
alpha: at alpha=1 the two related subjects share dynamics exactly, at
alpha=0 all videos are unrelated draws.  Videos are written as PGM frame
directories plus landmark CSVs, a JSON manifest, and the ground-truth
positive pair list.

In ``dynamics_only`` mode the spatial appearance (amplitudes, spatial
frequencies) is one global constant, so the kin signal lives purely in the
temporal axes and is invisible to a single frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .eval_protocol import KinPairList, PairEntry, save_pairs
from .face_align import EyeAnnotation, save_annotations
from .kin_classifier import RELATIONS
from .media_io import FaceVideo, VideoManifest, save_manifest, save_video
from .rng import SplitMix64

_N_GRATINGS = 3


@dataclass(frozen=True)
class SynthConfig:
    families: int = 14
    videos_per_subject: int = 2
    frames: int = 10
    size: int = 32
    alpha: float = 1.0
    seed: int = 0
    relations: tuple[str, ...] = RELATIONS
    dynamics_only: bool = False

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.families < 2:
            raise ValueError("need at least 2 families so negatives exist")
        if self.frames < 4 or self.size < 8:
            raise ValueError("volume too small for the texture coders")
        for r in self.relations:
            if r not in RELATIONS:
                raise ValueError(f"unknown relation {r!r}")


def _draw_params(rng: SplitMix64) -> np.ndarray:
    """(amp, fx, fy, ft) per grating; frequencies in cycles per axis extent."""
    params = np.empty((_N_GRATINGS, 4))
    for g in range(_N_GRATINGS):
        params[g, 0] = 20.0 + 25.0 * rng.uniform()   # amplitude
        params[g, 1] = 0.5 + 4.0 * rng.uniform()     # cycles along x
        params[g, 2] = 0.5 + 4.0 * rng.uniform()     # cycles along y
        params[g, 3] = 0.5 + 5.0 * rng.uniform()     # cycles along t
    return params

_GLOBAL_SPATIAL = np.array([
    [35.0, 1.0, 2.0],
    [30.0, 2.5, 1.0],
    [25.0, 3.5, 3.0],
])


def _render_video(params: np.ndarray, phases: np.ndarray, noise_seed: int,
                  frames: int, size: int) -> FaceVideo:
    t = np.arange(frames, dtype=np.float64)[:, None, None] / frames
    y = np.arange(size, dtype=np.float64)[None, :, None] / size
    x = np.arange(size, dtype=np.float64)[None, None, :] / size
    vol = np.full((frames, size, size), 128.0)
    for g in range(_N_GRATINGS):
        amp, fx, fy, ft = params[g]
        vol += amp * np.sin(2.0 * np.pi * (fx * x + fy * y + ft * t) + phases[g])
    vol += 3.0 * np.random.default_rng(noise_seed).standard_normal(vol.shape)
    return FaceVideo(gray=np.clip(np.floor(vol + 0.5), 0, 255).astype(np.uint8))


def synth_generate(out_dir: str | Path, config: SynthConfig) -> tuple[list[VideoManifest], KinPairList]:
    """Write the dataset under ``out_dir`` and return (manifests, positives).

    Layout: ``videos/<video_id>/NNNNNN.pgm``, ``landmarks/<video_id>.csv``,
    ``manifest.json``, ``positives.csv``.  Bit-identical for identical config.
    """
    out_dir = Path(out_dir).resolve()
    (out_dir / "videos").mkdir(parents=True, exist_ok=True)
    (out_dir / "landmarks").mkdir(parents=True, exist_ok=True)
    rng = SplitMix64(config.seed)
    size = config.size
    base_left = (0.3 * size, 0.35 * size)
    base_right = (0.7 * size, 0.35 * size)

    manifests: list[VideoManifest] = []
    positives: list[PairEntry] = []
    for fam in range(config.families):
        relation = config.relations[fam % len(config.relations)]
        family_latent = _draw_params(rng)
        subject_ids = (f"s{fam:03d}a", f"s{fam:03d}b")
        fam_videos: dict[str, list[tuple[str, str]]] = {}
        for subject in subject_ids:
            videos = []
            for v in range(config.videos_per_subject):
                # blend noise is drawn per video: at alpha=0 every video is an
                # independent draw, so pairs carry no reusable identity signal
                # and the pipeline must score at chance
                own = _draw_params(rng)
                params = config.alpha * family_latent + (1.0 - config.alpha) * own
                if config.dynamics_only:
                    params = params.copy()
                    params[:, :3] = _GLOBAL_SPATIAL
                phases = np.array([2.0 * np.pi * rng.uniform() for _ in range(_N_GRATINGS)])
                noise_seed = rng.next_u64()
                shift = (3.0 * (rng.uniform() - 0.5), 3.0 * (rng.uniform() - 0.5))
                video = _render_video(params, phases, noise_seed, config.frames, size)
                video_id = f"f{fam:03d}{subject[-1]}v{v:02d}"
                smile = "spontaneous" if v % 2 == 0 else "posed"
                frames_dir = out_dir / "videos" / video_id
                save_video(video, frames_dir)
                annotations = [
                    EyeAnnotation(
                        frame_index=t,
                        left=(base_left[0] + shift[0], base_left[1] + shift[1]),
                        right=(base_right[0] + shift[0], base_right[1] + shift[1]),
                    )
                    for t in range(config.frames)
                ]
                landmark_path = out_dir / "landmarks" / f"{video_id}.csv"
                save_annotations(annotations, landmark_path)
                manifests.append(
                    VideoManifest(
                        video_id=video_id,
                        frames_dir=str(frames_dir),
                        landmarks=str(landmark_path),
                        subject_id=subject,
                        smile_type=smile,
                    )
                )
                videos.append((video_id, smile))
            fam_videos[subject] = videos
        for v in range(config.videos_per_subject):
            vid_a, smile = fam_videos[subject_ids[0]][v]
            vid_b, _ = fam_videos[subject_ids[1]][v]
            positives.append(
                PairEntry(
                    pair_id=f"p{fam:03d}_{v:02d}",
                    video_a=vid_a,
                    video_b=vid_b,
                    subject_a=subject_ids[0],
                    subject_b=subject_ids[1],
                    relation=relation,
                    smile_type=smile,
                    label=1,
                )
            )

    pair_list = KinPairList(entries=positives)
    # the written manifest uses paths relative to out_dir: identical output
    # trees for identical seeds, wherever they land
    relative = [
        VideoManifest(
            video_id=m.video_id,
            frames_dir=str(Path(m.frames_dir).relative_to(out_dir)),
            landmarks=str(Path(m.landmarks).relative_to(out_dir)),
            subject_id=m.subject_id,
            smile_type=m.smile_type,
        )
        for m in manifests
    ]
    save_manifest(relative, out_dir / "manifest.json")
    save_pairs(pair_list, out_dir / "positives.csv")
    return manifests, pair_list
