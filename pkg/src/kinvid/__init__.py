"""Kinship verification from face videos.

Multi-scale spatio-temporal binary-pattern descriptors (LBP-TOP, LPQ-TOP,
BSIF-TOP) and frame-averaged deep CNN features, combined per pair by the
normalized absolute difference, classified with a linear SVM, fused at the
score level, and evaluated leave-one-out per kin relation.
"""

from .features import FeatureVector, load_feature, save_feature
from .media_io import FaceVideo, Frame, VideoManifest
from .texture_coders import FilterBank, LbpParams, LpqParams

__all__ = [
    "FaceVideo",
    "FeatureVector",
    "FilterBank",
    "Frame",
    "LbpParams",
    "LpqParams",
    "VideoManifest",
    "load_feature",
    "save_feature",
]

__version__ = "0.1.0"
