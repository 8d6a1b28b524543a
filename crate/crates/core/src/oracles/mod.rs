//! Ground truth: closed forms for named densities, brute-force quadrature
//! of truncated sums, periodization and the convolution identity.

mod closed_form;
mod convolution;
mod density;
mod quadrature;

pub use closed_form::{
    closed_form_distance, closed_form_quantity, periodized_distance, periodized_quantity,
    truncated_target, Coefficients, SUPPORTED_PAIRS,
};
pub use convolution::{convolution_identity_residual, stated_form_residual, TrigCoeffs};
pub use density::{periodized_density, Factor, NamedDensity, PointMasses};
pub use quadrature::{
    check_normalization, fourier_coefficient, l2_inner_on_box, quadrature_truncated_inner,
    total_mass, wrapped_axes, AxisDensity, COEFFICIENT_TOLERANCE,
};
