//! Helmholtz-Hodge decomposition of sampled vector fields by matrix-kernel
//! quasi-interpolation with polyharmonic splines.

pub mod boundary;
pub mod bounded;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod hodge;
pub mod kernel;
pub mod lattice;
pub mod radial;
pub mod report;
pub mod stencil;
pub mod validate;

pub use boundary::{default_shape, eval_interpolant, fit_interpolant, matern_c8, BoundaryInterpolant, InterpolantPart};
pub use bounded::{
    build_leray_qi, leray_decompose, select_kernel_scale, BoundedConfig, Decomposition, LerayFit, LerayQi,
};
pub use error::{Error, Result};
pub use experiments::{
    run_bounded, run_wholespace, BoundedDiagnostics, BoundedOutcome, BoundedParams, SweepOutcome, WholespaceParams,
};
pub use fields::{BuiltinField, Part};
pub use hodge::{dense_convolution, fft_project, ConvolutionEstimate, ConvolutionOracle, Quadrature};
pub use kernel::{
    check_strang_fix, eval_kernel, eval_scalar_psi, fd_partial, fit_decay_exponent, kernel_hat, FarField,
    KernelEvaluator, KernelMatrix, KernelSampler, KernelSpec, StrangFixOptions, StrangFixReport, Variant,
};
pub use lattice::{
    project_curl, project_div, uniform_mesh, GridField, QiEval, QiWarning, QuasiInterpolant, Truncation,
};
pub use radial::{
    fundamental_constant, phi_expr, CompiledExprs, DerivativeTable, FundamentalConstants, MultiIndex, RadialExpr,
    RadialTerm, Rational,
};
pub use report::{fit_line, fit_slope, rmse, ConvergenceReport, ReportRow, Slopes};
pub use stencil::{build_q, multi_indices, psi_hat, rabut_coefficients, MultiPoly, Stencil};
pub use validate::{
    identities_suite, oracle_suite, run_validate, strangfix_suite, OracleOutcome, Suite, ValidateParams,
    ValidationEntry, ValidationReport,
};
