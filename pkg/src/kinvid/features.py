"""Tagged fixed-length feature vectors and their on-disk JSON format.

One file per video per descriptor:
``{"video_id", "descriptor", "scales", "length", "values": [floats]}``
with 17-significant-digit decimals so values round-trip exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class FeatureVector:
    descriptor: str
    scales: tuple
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    def __len__(self) -> int:
        return self.values.shape[0]


def save_feature(feature: FeatureVector, video_id: str, path: str | Path) -> None:
    rendered = ", ".join(format(float(v), ".17g") for v in feature.values)
    body = json.dumps(
        {
            "video_id": video_id,
            "descriptor": feature.descriptor,
            "scales": feature.scales,
            "length": len(feature),
            "values": None,
        },
        indent=2,
    )
    body = body.replace('"values": null', f'"values": [{rendered}]')
    Path(path).write_text(body + "\n", encoding="utf-8")


def load_feature(path: str | Path) -> tuple[str, FeatureVector]:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    values = np.asarray(obj["values"], dtype=np.float64)
    if len(values) != obj["length"]:
        raise ValueError(f"{path}: length field {obj['length']} != {len(values)} values")
    scales = obj["scales"]
    scales = tuple(tuple(s) if isinstance(s, list) else s for s in scales)
    return obj["video_id"], FeatureVector(obj["descriptor"], scales, values)
