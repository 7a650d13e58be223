"""Seeded generator of image-alignment and restoration datasets.

A texture is placed on a plane, viewed by randomised cameras under random
lights and occluders, path traced, and written out with occlusion masks, an
artifact-free label and exact pairwise homographies.
"""

__version__ = "0.1.0"
