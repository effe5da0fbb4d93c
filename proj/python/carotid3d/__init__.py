"""Freehand 3D carotid ultrasound: pose regularization, volume
reconstruction and stenosis / plaque quantification.

Poses are (N, 7) float arrays [tx, ty, tz, qw, qx, qy, qz] in mm; images
are (H, W) uint8 arrays; volumes are dicts holding a (nz, ny, nx) uint8
``voxels`` array with ``origin`` and ``spacing``.
"""

from ._carotid3d import (
    DomainError,
    Error,
    InvalidArgument,
    IoError,
    __version__,
    boundary_points,
    bump_depth_for_grade,
    classification_rates,
    denoise,
    diagnose_volume,
    dsc,
    geodesic_distance,
    geodesic_interpolate,
    hausdorff,
    hd95,
    huber,
    mad,
    pearson,
    reconstruct,
    rerank,
    scan_diagnosis,
    simulate,
    stenosis_diameter,
    stenosis_grade,
    trajectory_rmse,
    tv_objective,
    wall_thickness_profile,
    world_centroids,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
