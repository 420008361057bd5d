"""Equilibrated stress recovery by patch-wise complementary energy minimization.

On each patch the recovered stress is a linear combination of seven
self-equilibrated modes (three constants plus four divergence-free linear
fields) added to a particular stress that balances the sampled body force.
The mode coefficients minimize the patch complementary energy, in which the
computed displacement enters only through its trace on the outer patch
boundary: exactly the data a virtual element solution provides.

Modes are expressed in patch-local coordinates (shifted to the patch centroid
and scaled by its diameter) to keep the 7x7 systems uniformly conditioned.
The recovered field of a cell always comes from the patch centered on it:
"rcp0" uses the degenerate single-cell patch, "rcp1" the vertex-neighbor
patch (labelled PATCH1B when the central cell touches the boundary).
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .material import LameMaterial, compliance_matrix
from .mesh import (
    ElementPatch,
    PatchKind,
    PolygonalMesh,
    build_patch,
    centroid_of,
    patch_outer_edges,
    signed_area,
)
from .quadrature import cell_quadrature

logger = logging.getLogger(__name__)

_GAUSS2 = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))

RECOVERY_KINDS = ("rcp0", "rcp1")


class RecoveryConditioningError(Exception):
    """A patch system was too ill-conditioned to trust."""


@dataclass(frozen=True)
class StressModeBasis:
    """Local frame of the self-equilibrated stress modes of one patch."""

    center: np.ndarray
    scale: float


@dataclass
class ParticularStress:
    """Constant body-force sample of a patch with its antiderivative anchor.

    Within each member cell the particular stress is
    (-bx * (x - ax), -by * (y - ay), 0), whose divergence cancels the sampled
    force exactly. The sample is taken at the patch centroid (for a
    single-cell patch that is the cell centroid) and the free integration
    constants anchor the field there as well, so the particular stress is one
    linear field over the whole patch: it then lies in the span of the stress
    modes and cannot pollute the patch fit. An analytic antiderivative pair,
    when supplied, replaces the sampled form wholesale.
    """

    cells: dict
    antiderivative: object = None

    @property
    def is_zero(self) -> bool:
        if self.antiderivative is not None:
            return False
        return all(abs(b[0]) == 0.0 and abs(b[1]) == 0.0 for b, _ in self.cells.values())


@dataclass
class RecoveredStressField:
    """Recovered coefficients for every cell of a mesh."""

    mesh: PolygonalMesh
    kind: str
    betas: np.ndarray                 # (ncells, 7)
    bases: list                       # StressModeBasis per cell
    particulars: list                 # (b_sample, anchor, antiderivative) per cell
    fallback_cells: tuple = ()


def stress_modes_at(basis: StressModeBasis, points) -> np.ndarray:
    """Evaluate the 3x7 mode matrix at one point or a stack of points."""
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    xi = (pts[:, 0] - basis.center[0]) / basis.scale
    eta = (pts[:, 1] - basis.center[1]) / basis.scale
    m = len(pts)
    P = np.zeros((m, 3, 7))
    P[:, 0, 0] = 1.0
    P[:, 1, 1] = 1.0
    P[:, 2, 2] = 1.0
    P[:, 0, 3] = eta
    P[:, 1, 4] = xi
    P[:, 0, 5] = xi
    P[:, 2, 5] = -eta
    P[:, 1, 6] = eta
    P[:, 2, 6] = -xi
    return P[0] if single else P


def patch_basis(mesh: PolygonalMesh, patch: ElementPatch) -> StressModeBasis:
    """Area-weighted centroid and diameter of the patch."""
    total = 0.0
    center = np.zeros(2)
    vert_ids: set[int] = set()
    for ci in patch.member_cells:
        pts = mesh.cell_coords(ci)
        a = signed_area(pts)
        total += a
        center += a * centroid_of(pts)
        vert_ids.update(int(v) for v in mesh.cells[ci])
    center /= total
    coords = mesh.vertices[sorted(vert_ids)]
    diff = coords[:, None, :] - coords[None, :, :]
    scale = float(np.sqrt((diff ** 2).sum(axis=2).max()))
    return StressModeBasis(center=center, scale=scale)


def particular_solution(
    mesh: PolygonalMesh,
    patch: ElementPatch,
    body_force,
    anchor=None,
    antiderivative=None,
) -> ParticularStress:
    """Sample the body force once per patch, at its centroid.

    `antiderivative`, when given, is a callable (x, y) -> (Ix, Iy) with
    d/dx Ix = bx and d/dy Iy = by; it overrides the sampled fallback.
    """
    if anchor is None:
        anchor = patch_basis(mesh, patch).center
    anchor = np.asarray(anchor, dtype=float)
    if body_force is None:
        b = np.zeros(2)
    else:
        b = np.asarray(body_force(anchor[0], anchor[1]), dtype=float).reshape(2)
    cells = {ci: (b, anchor) for ci in patch.member_cells}
    return ParticularStress(cells=cells, antiderivative=antiderivative)


def particular_stress_at(particular: ParticularStress, cell: int, points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    out = np.zeros((len(pts), 3))
    if particular.antiderivative is not None:
        ix, iy = particular.antiderivative(pts[:, 0], pts[:, 1])
        out[:, 0] = -np.asarray(ix, dtype=float)
        out[:, 1] = -np.asarray(iy, dtype=float)
    else:
        b, a = particular.cells[cell]
        out[:, 0] = -b[0] * (pts[:, 0] - a[0])
        out[:, 1] = -b[1] * (pts[:, 1] - a[1])
    return out[0] if single else out


def compute_H(
    mesh: PolygonalMesh,
    patch: ElementPatch,
    material: LameMaterial,
    basis: StressModeBasis | None = None,
) -> np.ndarray:
    """Patch compliance Gram matrix of the stress modes (7x7, SPD)."""
    if basis is None:
        basis = patch_basis(mesh, patch)
    Cinv = compliance_matrix(material)
    pts, w = _patch_quadrature(mesh, patch)
    P = stress_modes_at(basis, pts)
    H = np.einsum("m,mia,ij,mjb->ab", w, P, Cinv, P, optimize=True)
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > 1e12:
        raise RecoveryConditioningError(
            f"patch at cell {patch.central_cell}: condition number {cond:.3e}"
        )
    return H


def _patch_quadrature(mesh, patch):
    pts_list, w_list = [], []
    for ci in patch.member_cells:
        p, w = cell_quadrature(mesh, ci)
        pts_list.append(p)
        w_list.append(w)
    return np.vstack(pts_list), np.concatenate(w_list)


def compute_g(
    mesh: PolygonalMesh,
    patch: ElementPatch,
    material: LameMaterial,
    basis: StressModeBasis,
    particular: ParticularStress,
    displacement,
) -> np.ndarray:
    """Right-hand side of the patch system.

    The work term pairs each mode's boundary traction with the displacement
    trace on the outer patch boundary only; interior inter-element edges
    cancel. `displacement` is either the global dof vector (its trace is
    interpolated linearly per edge) or a callable u(x, y) evaluated directly
    at the Gauss points. Two Gauss points per edge integrate the (at most
    cubic) integrand exactly.
    """
    outer = patch_outer_edges(mesh, patch)
    a_pts = np.empty((len(outer), 2))
    b_pts = np.empty((len(outer), 2))
    ia = np.empty(len(outer), dtype=np.int64)
    ib = np.empty(len(outer), dtype=np.int64)
    for k, (ci, e) in enumerate(outer):
        cell = mesh.cells[ci]
        i, j = int(cell[e]), int(cell[(e + 1) % len(cell)])
        ia[k], ib[k] = i, j
        a_pts[k] = mesh.vertices[i]
        b_pts[k] = mesh.vertices[j]
    tang = b_pts - a_pts
    lengths = np.hypot(tang[:, 0], tang[:, 1])
    normals = np.column_stack([tang[:, 1], -tang[:, 0]]) / lengths[:, None]

    g = np.zeros(7)
    for t in _GAUSS2:
        x = a_pts + t * tang
        if callable(displacement):
            u = np.asarray(displacement(x[:, 0], x[:, 1]), dtype=float)
        else:
            ua = np.column_stack([displacement[2 * ia], displacement[2 * ia + 1]])
            ub = np.column_stack([displacement[2 * ib], displacement[2 * ib + 1]])
            u = (1.0 - t) * ua + t * ub
        traction_pair = np.column_stack(
            [
                normals[:, 0] * u[:, 0],
                normals[:, 1] * u[:, 1],
                normals[:, 1] * u[:, 0] + normals[:, 0] * u[:, 1],
            ]
        )
        P = stress_modes_at(basis, x)
        g += np.einsum("m,mia,mi->a", 0.5 * lengths, P, traction_pair, optimize=True)

    if not particular.is_zero:
        Cinv = compliance_matrix(material)
        for ci in patch.member_cells:
            pts, w = cell_quadrature(mesh, ci)
            sp = particular_stress_at(particular, ci, pts)
            P = stress_modes_at(basis, pts)
            g -= np.einsum("m,mia,ij,mj->a", w, P, Cinv, sp, optimize=True)
    return g


def solve_patch(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    beta = np.linalg.solve(H, g)
    residual = np.linalg.norm(H @ beta - g)
    if not np.all(np.isfinite(beta)) or residual > 1e-12 * np.linalg.norm(g) + 1e-300:
        raise RecoveryConditioningError(
            f"patch solve residual {residual:.3e} for |g| = {np.linalg.norm(g):.3e}"
        )
    return beta


def recover_field(
    mesh: PolygonalMesh,
    material: LameMaterial,
    displacement,
    body_force,
    kind: str,
    workers: int = 1,
    antiderivative=None,
) -> RecoveredStressField:
    """Run the patch recovery centered on every cell.

    An ill-conditioned vertex-neighbor patch falls back to its single-cell
    patch; the affected cells are flagged on the returned field.
    """
    if kind not in RECOVERY_KINDS:
        raise ValueError(f"unknown recovery kind {kind!r}")
    patch_kind = PatchKind.PATCH0 if kind == "rcp0" else PatchKind.PATCH1
    nc = mesh.num_cells
    betas = np.empty((nc, 7))
    bases: list = [None] * nc
    particulars: list = [None] * nc
    fallbacks: list[int] = []

    def one_cell(ci: int):
        patch = build_patch(mesh, ci, patch_kind)
        try:
            beta, basis, part = _solve_one_patch(
                mesh, patch, material, displacement, body_force, antiderivative
            )
        except RecoveryConditioningError:
            if patch_kind is PatchKind.PATCH0:
                raise
            logger.warning("cell %d: vertex patch ill-conditioned, using single-cell patch", ci)
            fallbacks.append(ci)
            patch = build_patch(mesh, ci, PatchKind.PATCH0)
            beta, basis, part = _solve_one_patch(
                mesh, patch, material, displacement, body_force, antiderivative
            )
        betas[ci] = beta
        bases[ci] = basis
        b, anchor = part.cells[ci]
        particulars[ci] = (b, anchor, part.antiderivative)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one_cell, range(nc)))
    else:
        for ci in range(nc):
            one_cell(ci)
    return RecoveredStressField(
        mesh=mesh,
        kind=kind,
        betas=betas,
        bases=bases,
        particulars=particulars,
        fallback_cells=tuple(sorted(fallbacks)),
    )


def _solve_one_patch(mesh, patch, material, displacement, body_force, antiderivative=None):
    basis = patch_basis(mesh, patch)
    particular = particular_solution(
        mesh, patch, body_force, anchor=basis.center, antiderivative=antiderivative
    )
    H = compute_H(mesh, patch, material, basis)
    g = compute_g(mesh, patch, material, basis, particular, displacement)
    return solve_patch(H, g), basis, particular


def evaluate_recovered_stress(field: RecoveredStressField, cell: int, points) -> np.ndarray:
    """Recovered stress of `cell` at one point or an (m, 2) stack."""
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    P = stress_modes_at(field.bases[cell], pts)
    out = P @ field.betas[cell]
    b, anchor, antiderivative = field.particulars[cell]
    if antiderivative is not None:
        ix, iy = antiderivative(pts[:, 0], pts[:, 1])
        out[:, 0] -= np.asarray(ix, dtype=float)
        out[:, 1] -= np.asarray(iy, dtype=float)
    else:
        out[:, 0] -= b[0] * (pts[:, 0] - anchor[0])
        out[:, 1] -= b[1] * (pts[:, 1] - anchor[1])
    return out[0] if single else out
