//! Numerical solver for the capillary Christoffel–Minkowski problem
//! `σ_k(∇²h + hσ) = f` on a spherical cap with the Robin condition
//! `∇_μh = cot θ·h`.

pub mod body;
pub mod cap;
pub mod error;
pub mod field_io;
mod linsolve;
pub mod manufactured;
pub mod operator;
pub mod solver;
mod stencil;
pub mod symfunc;

pub use cap::{
    boundary_slope, boundary_trace, covariant_gradient, covariant_hessian, ell_field, embed, kernel_fields,
    CapDomain, CapGrid, GridMode, ScalarField, SymMatrixField,
};
pub use body::{
    capillary_area_measure, contact_angle_check, enclosed_volume, export_mesh, measure_report,
    minkowski_identity_check, obj_string, parse_mask, parse_obj, principal_radii, quermassintegrals, read_obj,
    reconstruct_surface, steiner_volume_check, vertex_csv, CapillaryBody, ContactAngleReport, MeasureReport,
    NodeMask, ObjMesh, SteinerCheck, SteinerSample,
};
pub use error::{Error, Result};
pub use field_io::{field_from_csv, field_to_csv, read_field, write_field};
pub use operator::{
    build_W, linearize, orthogonality_defect, residual, residual_normalized, robin_defect, LinearSystem,
    ResidualForm, SupportField,
};
pub use solver::{
    convexity_certificate, default_path, newton_solve, normalize_translation, solve, validate_data,
    ConvexityCertificate, HomotopyPath, ProblemSpec, Solution, SolveReport, SolverSettings,
};
pub use stencil::BoundaryClosure;
pub use symfunc::{
    binomial, gamma_cone_member, gamma_cone_member_with_margin, newton_maclaurin_check, sigma_k,
    sigma_k_gradient, sigma_k_hessian, sigma_k_matrix, MaclaurinCheck, Rank4, Spectrum, SymMatrix,
};
