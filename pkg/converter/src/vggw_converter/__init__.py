"""VGG-face weight archive converter.

Converts published pre-trained weight archives into the portable VGGW1
binary format consumed by the kinship-verification pipeline, and validates
converted files by running an independent reference forward pass (torch)
and recording per-layer activation checksums.
"""

from .table import ARCHITECTURE, CONV_LAYER_NAMES
from .convert import convert, make_synthetic_archive
from .reference import validate

__all__ = [
    "ARCHITECTURE",
    "CONV_LAYER_NAMES",
    "convert",
    "make_synthetic_archive",
    "validate",
]

__version__ = "0.1.0"
