"""Numerical toolkit for elliptic Lagrangian surfaces in affine symplectic R^4."""

from .config import DEFAULT_TOLS, Tolerances
from .core import (
    AffineAlgebra4,
    AffineSymplecticElement,
    J4,
    LagrangianPlane,
    SpAlgebra4,
    SymMat2,
    SymplMat4,
    act,
    exp_algebra,
    isl2c_embed,
    isl2c_embed_algebra,
    plane_chart,
    symplectic_defect,
)
from .grids import ComplexGrid, GridGeometry, d_z, d_zbar, load_grid, save_grid
from .invariants import (
    FormCoefficients,
    InvariantTriple,
    applicability_residual,
    dbar_fubini_residual,
    diffeq_residual,
    form_coefficients,
    genericity_ops,
    inteq_residual,
    is_generic,
    p1_from_p2,
    recover_p,
    shift_family,
)
from .frames import (
    FirstOrderFrameData,
    FrameField,
    ImmersionGrid,
    MaurerCartanField,
    congruence_defect,
    extract_invariants,
    flatness_residual,
    immersion_from_frame,
    integrate_frame,
    lagrangian_defect,
    load_immersion,
    numerical_maurer_cartan,
    reduction_pipeline,
    save_immersion,
    theta_from_invariants,
)
from .generators import (
    ConstantFamilyParams,
    UmbilicCurveSpec,
    closed_form_immersion,
    constant_ab,
    curve_to_immersion,
    family_triple,
    flex_defect,
    frame_columns,
    separated_t,
    umbilic_curve,
    umbilic_immersion,
)

__version__ = "0.1.0"
