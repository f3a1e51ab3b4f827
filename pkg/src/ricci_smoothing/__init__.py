"""Ricci-flow smoothing laboratory for doubly warped product 4-manifolds.

The metrics handled here have the form ``g = w(s)^2 ds^2 + a(s)^2 dtheta^2 +
b(s)^2 g_{S^2}`` on a periodic ``s``-circle.  The subpackages are

``geometry``
    grids, metrics, curvature, volumes, tubes and the radial Laplacian.
``flow``
    explicit Ricci-flow integration with bound tracking.
``moser``
    heat-inequality solvers and the Moser iteration checks.
``analysis``
    Sobolev constants, coverings, concentration scans.
``harness``
    configuration, experiment runners and the command line interface.
"""

from ricci_smoothing.geometry import (
    CurvatureField,
    Grid,
    RadialFunction,
    Tube,
    WarpedMetric,
    build_metric,
    curvature,
    l2_curvature,
    laplacian_radial,
    tube_at,
    volume,
)

__all__ = [
    "CurvatureField",
    "Grid",
    "RadialFunction",
    "Tube",
    "WarpedMetric",
    "build_metric",
    "curvature",
    "l2_curvature",
    "laplacian_radial",
    "tube_at",
    "volume",
]

__version__ = "0.1.0"
