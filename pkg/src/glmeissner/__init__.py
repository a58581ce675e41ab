"""Numerical laboratory for screened magnetic fields and vortex nucleation
in the three-dimensional Ginzburg-Landau model on voxelized domains."""

__version__ = "0.1.0"

from .mesh import Ball, Box, DomainMesh, Ellipsoid, build_mesh, make_shape, signed_distance
from .fields import (
    ComplexField,
    ScalarField,
    VectorField,
    covariant_gradient,
    curl,
    divergence,
    gradient,
    integrate,
    integrate_slot,
    line_integral,
    sample_vector,
    write_csv_nodes,
    write_vtk,
)
from .london import (
    MeissnerData,
    analytic_ball_B0,
    analytic_ball_curlB0,
    ball_norm_star_exact,
    curl_b0_y_component,
    hc1_leading,
    solve_london,
    uniform_field,
)
from .normstar import (
    CurveCurrent,
    RatioGraph,
    build_ratio_graph,
    max_ratio_cycle,
    norm_star,
    norm_star_halfdisc,
)
from .glcore import (
    EnergyReport,
    GLState,
    VorticityField,
    check_vorticity_bound,
    free_energy,
    gauge_transform,
    gl_energy,
    gl_total_energy,
    hodge_decompose,
    meissner_state,
    supercurrent,
    vorticity,
)
from .minimize import (
    MinimizeOptions,
    SweepResult,
    convexity_diagnostic,
    energy_gradient,
    hc1_sweep,
    is_vortexless,
    minimize,
    seed_vortex,
)
from .exprparse import compile_expression
