"""posekit: template-based 2D human pose fitting.

Gaussian part templates, per-part affine transforms, reconstruction and
regularization losses, and keypoint consistency metrics.
"""

__version__ = "0.1.0"
