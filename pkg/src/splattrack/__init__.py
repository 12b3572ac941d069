"""Robot pose estimation from external-camera rasters in a Gaussian-splat world map."""

__version__ = "0.1.0"
