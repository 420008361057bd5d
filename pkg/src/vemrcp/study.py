"""Stress-error norm and convergence-study orchestration."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .cases import ManufacturedCase, manufactured_case
from .generators import generate_mesh
from .material import LameMaterial, compliance_matrix, elastic_matrix
from .mesh import GENERATED_FAMILIES, MeshFamily, PolygonalMesh
from .quadrature import cell_quadrature
from .recovery import RecoveredStressField, evaluate_recovered_stress, recover_field
from .vem import element_stresses, solve_dirichlet_problem

logger = logging.getLogger(__name__)

METHODS = ("vem", "rcp0", "rcp1")


@dataclass
class ConvergenceRecord:
    test: str
    family: MeshFamily
    level: int
    subdivisions: int
    h: float
    dofs: int
    errors: dict
    wall_time: float


def exact_stress_provider(case: ManufacturedCase):
    def provider(cell: int, points: np.ndarray) -> np.ndarray:
        return case.stress(points[:, 0], points[:, 1])
    return provider


def vem_stress_provider(cell_stresses: np.ndarray):
    def provider(cell: int, points: np.ndarray) -> np.ndarray:
        return np.broadcast_to(cell_stresses[cell], (len(points), 3))
    return provider


def recovered_stress_provider(recovered: RecoveredStressField):
    def provider(cell: int, points: np.ndarray) -> np.ndarray:
        return evaluate_recovered_stress(recovered, cell, points)
    return provider


def energy_error_norm(
    mesh: PolygonalMesh,
    material: LameMaterial,
    case: ManufacturedCase,
    stress_provider,
) -> float:
    """Complementary-energy norm (squared form) of the stress mismatch."""
    Cinv = compliance_matrix(material)
    total = 0.0
    for ci in range(mesh.num_cells):
        pts, w = cell_quadrature(mesh, ci)
        d = case.stress(pts[:, 0], pts[:, 1]) - stress_provider(ci, pts)
        total += float(np.einsum("m,mi,ij,mj->", w, d, Cinv, d, optimize=True))
    return total


@dataclass
class LevelResult:
    """Everything a single solve-and-recover pass produced (for exporters)."""

    mesh: PolygonalMesh
    case: ManufacturedCase
    displacement: np.ndarray
    cell_stresses: np.ndarray
    recovered: dict = field(default_factory=dict)


def run_level(
    mesh: PolygonalMesh,
    material: LameMaterial,
    case: ManufacturedCase,
    methods=METHODS,
    workers: int = 1,
) -> tuple[LevelResult, dict]:
    """Solve one mesh and compute the requested error norms."""
    u, system = solve_dirichlet_problem(mesh, material, case.body_force, case.displacement)
    stresses = element_stresses(mesh, system, material, u)
    result = LevelResult(mesh=mesh, case=case, displacement=u, cell_stresses=stresses)
    errors = {}
    for method in methods:
        if method == "vem":
            provider = vem_stress_provider(stresses)
        else:
            recovered = recover_field(mesh, material, u, case.body_force, method, workers)
            result.recovered[method] = recovered
            provider = recovered_stress_provider(recovered)
        errors[method] = energy_error_norm(mesh, material, case, provider)
    return result, errors


def run_convergence_study(
    test_id: str,
    family: MeshFamily,
    levels: int,
    material: LameMaterial,
    methods=METHODS,
    seed: int = 0,
    base_subdivisions: int = 8,
    workers: int = 1,
    clock=time.perf_counter,
    on_level=None,
) -> list[ConvergenceRecord]:
    """Refinement sweep: subdivisions double per level starting at the base.

    A failing level is logged and skipped; the sweep continues, so callers can
    detect trouble by comparing the record count with `levels`.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    case = manufactured_case(test_id, material)
    records = []
    for level in range(levels):
        n = base_subdivisions * 2**level
        start = clock()
        try:
            mesh = generate_mesh(family, n, seed)
            result, errors = run_level(mesh, material, case, methods, workers)
        except Exception:
            logger.exception("%s/%s level %d (n=%d) failed", test_id, family.value, level, n)
            continue
        elapsed = clock() - start
        record = ConvergenceRecord(
            test=test_id,
            family=family,
            level=level,
            subdivisions=n,
            h=mesh.average_edge_length,
            dofs=2 * mesh.num_vertices,
            errors=errors,
            wall_time=elapsed,
        )
        records.append(record)
        if on_level is not None:
            on_level(record, result)
    return records


def observed_rate(records: list[ConvergenceRecord], method: str) -> float:
    """Least-squares slope of log(error) against log(edge length)."""
    pts = [(r.h, r.errors[method]) for r in records if method in r.errors]
    if len(pts) < 2:
        raise ValueError("need at least two records to fit a rate")
    h = np.log([p[0] for p in pts])
    e = np.log([p[1] for p in pts])
    if np.any(np.diff(e[np.argsort(h)]) < 0.0):
        logger.warning("non-monotone error sequence for method %s", method)
    slope, _ = np.polyfit(h, e, 1)
    return float(slope)


# ---------------------------------------------------------------------------
# linear-field patch test
# ---------------------------------------------------------------------------

PATCH_TEST_COEFFS = (0.3, 1.2, -0.7, -0.4, 0.5, 0.9)


def linear_patch_case(material: LameMaterial) -> ManufacturedCase:
    """Affine displacement with constant stress and zero body force."""
    a0, a1, a2, b0, b1, b2 = PATCH_TEST_COEFFS

    def displacement(x, y):
        return np.stack([a0 + a1 * x + a2 * y, b0 + b1 * x + b2 * y], axis=-1)

    def strain(x, y):
        shape = np.shape(np.asarray(x, dtype=float))
        e = np.array([a1, b2, a2 + b1])
        return np.broadcast_to(e, shape + (3,)).copy()

    C = elastic_matrix(material)

    def stress(x, y):
        return np.einsum("ij,...j->...i", C, strain(x, y))

    def body_force(x, y):
        z = np.zeros_like(np.asarray(x, dtype=float))
        return np.stack([z, z], axis=-1)

    return ManufacturedCase(
        id="linear", displacement=displacement, strain=strain, stress=stress,
        body_force=body_force,
    )


@dataclass
class PatchTestResult:
    family: MeshFamily
    displacement_error: float
    errors: dict

    def passed(self, disp_tol: float = 1e-10, energy_tol: float = 1e-18) -> bool:
        return self.displacement_error <= disp_tol and all(
            e <= energy_tol for e in self.errors.values()
        )


def run_patch_test(
    material: LameMaterial,
    families=None,
    subdivisions: int = 8,
    seed: int = 0,
    methods=METHODS,
    workers: int = 1,
) -> list[PatchTestResult]:
    """Impose the affine field on each family and measure the reproduction error."""
    case = linear_patch_case(material)
    results = []
    for family in families if families is not None else GENERATED_FAMILIES:
        mesh = generate_mesh(family, subdivisions, seed)
        result, errors = run_level(mesh, material, case, methods, workers)
        exact = case.displacement(mesh.vertices[:, 0], mesh.vertices[:, 1]).ravel()
        interior = np.repeat(~mesh.boundary_vertex_flags, 2)
        diff = np.abs(result.displacement[interior] - exact[interior])
        rel = float(diff.max() / np.abs(exact).max()) if interior.any() else 0.0
        results.append(PatchTestResult(family=family, displacement_error=rel, errors=errors))
    return results
