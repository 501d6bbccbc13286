"""Image-folder to traversal-bundle extraction with pretrained CNN backbones."""

from .backbones import available_backbones, load_backbone
from .extract import ExtractorConfig, extract
from .geo import EARTH_RADIUS_M, geo_to_local, local_to_geo

__version__ = "0.1.0"

__all__ = [
    "EARTH_RADIUS_M",
    "ExtractorConfig",
    "available_backbones",
    "extract",
    "geo_to_local",
    "load_backbone",
    "local_to_geo",
]
