"""Virtual element plane-elasticity solver with equilibrated patch stress recovery."""

from .cases import CASE_IDS, ManufacturedCase, manufactured_case
from .generators import GenerationError, generate_mesh
from .material import LameMaterial, compliance_matrix, elastic_matrix, von_mises
from .mesh import (
    ElementPatch,
    MeshError,
    MeshFamily,
    MeshFormatError,
    MeshValidationError,
    PatchKind,
    PolygonalMesh,
    average_edge_length,
    build_patch,
    edge_outward_normal,
    load_mesh,
    polygon_area,
    polygon_centroid,
    save_mesh,
    triangulate_polygon,
    validate_mesh,
)
from .quadrature import cell_quadrature, polygon_quadrature
from .recovery import (
    RecoveredStressField,
    RecoveryConditioningError,
    StressModeBasis,
    evaluate_recovered_stress,
    recover_field,
    stress_modes_at,
)
from .study import (
    METHODS,
    ConvergenceRecord,
    energy_error_norm,
    observed_rate,
    run_convergence_study,
    run_patch_test,
)
from .vem import (
    ElementOperators,
    GlobalSystem,
    SolveError,
    apply_dirichlet,
    assemble_global,
    element_stress_vem,
    solve_dirichlet_problem,
    solve_system,
)

__version__ = "0.1.0"
