"""Degree-5 quadrature on polygonal cells via ear-clip triangulation.

The per-cell point/weight arrays are cached on the mesh, so repeated
integrations (stiffness checks, recovery systems, error norms) reuse them.
"""

from __future__ import annotations

import numpy as np

from .mesh import PolygonalMesh, ear_clip, signed_area

_SQRT15 = np.sqrt(15.0)

# 7-point rule, exact for polynomials of total degree 5 on a triangle
TRI7_BARY = np.array(
    [
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [(9.0 - 2.0 * _SQRT15) / 21.0, (6.0 + _SQRT15) / 21.0, (6.0 + _SQRT15) / 21.0],
        [(6.0 + _SQRT15) / 21.0, (9.0 - 2.0 * _SQRT15) / 21.0, (6.0 + _SQRT15) / 21.0],
        [(6.0 + _SQRT15) / 21.0, (6.0 + _SQRT15) / 21.0, (9.0 - 2.0 * _SQRT15) / 21.0],
        [(9.0 + 2.0 * _SQRT15) / 21.0, (6.0 - _SQRT15) / 21.0, (6.0 - _SQRT15) / 21.0],
        [(6.0 - _SQRT15) / 21.0, (9.0 + 2.0 * _SQRT15) / 21.0, (6.0 - _SQRT15) / 21.0],
        [(6.0 - _SQRT15) / 21.0, (6.0 - _SQRT15) / 21.0, (9.0 + 2.0 * _SQRT15) / 21.0],
    ]
)
TRI7_WEIGHTS = np.array(
    [9.0 / 40.0]
    + [(155.0 + _SQRT15) / 1200.0] * 3
    + [(155.0 - _SQRT15) / 1200.0] * 3
)


def triangle_quadrature(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Physical points and weights of the 7-point rule on one triangle."""
    pts = TRI7_BARY @ coords
    w = TRI7_WEIGHTS * abs(signed_area(coords))
    return pts, w


def cell_quadrature(mesh: PolygonalMesh, cell: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule over the ear-clip triangulation of a cell (cached)."""
    cached = mesh._quadrature_cache.get(cell)
    if cached is not None:
        return cached
    coords = mesh.cell_coords(cell)
    pts_list, w_list = [], []
    for tri in ear_clip(coords):
        p, w = triangle_quadrature(coords[list(tri)])
        pts_list.append(p)
        w_list.append(w)
    pts = np.vstack(pts_list)
    w = np.concatenate(w_list)
    mesh._quadrature_cache[cell] = (pts, w)
    return pts, w


def polygon_quadrature(mesh: PolygonalMesh, cell: int, integrand) -> float:
    """Integrate integrand(x, y) over a cell; x and y arrive as arrays."""
    pts, w = cell_quadrature(mesh, cell)
    return float(np.dot(w, np.asarray(integrand(pts[:, 0], pts[:, 1]), dtype=float)))
