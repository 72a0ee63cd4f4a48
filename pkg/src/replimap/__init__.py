"""Replicability and reproducibility toolkit for spatial object-detection results.

Partition the globe into regions, score detections per region, test the
resulting surfaces for spatial structure, and replay seeded simulation
experiments whose outputs are byte-for-byte reproducible.
"""
__version__ = "0.1.0"
