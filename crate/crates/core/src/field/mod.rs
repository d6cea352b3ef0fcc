//! Lattice exterior calculus on flat tori.

pub mod checks;
pub mod connection;
pub mod flow;
pub mod form_field;
pub mod grid;
pub mod ops;
pub mod snapshot;
pub mod stress;
pub mod tolerance;

pub use checks::{
    delta_prime, first_variation_check, ibp_check, ibp_prime_check, ibp_prime_residual, weitzenbock_check,
    FirstVariationReport, IbpReport, WeitzenbockReport,
};
pub use connection::{
    mean_curvature, mean_curvature_divergence, mean_curvature_pointwise, mean_curvature_scaled,
    volume_functionals, volumes_of_curvature, LineConnection, MeanCurvature, Volumes,
};
pub use flow::{gradient_flow, FlowParams, FlowResult, FlowRow, FlowStatus};
pub use form_field::{pairwise_sum, FormField};
pub use grid::TorusGrid;
pub use ops::{MetricField, Scheme, StencilOrder};
pub use stress::{div_stress, div_stress_direct};
pub use tolerance::{calibrate, fit_order, CalibrationReport, ToleranceModel};
