"""Place-specific camera selection for multi-camera visual localization.

The package simulates a multi-camera rig traversing a synthetic world,
localizes each image against a landmark map with PnP + RANSAC, scores each
camera per place by its expected localization cost, and selects the camera
to use at query time from a per-place table.  Baseline selection policies
and a worst-case (per-slice) evaluation harness round out the pipeline.
"""

__version__ = "0.1.0"
