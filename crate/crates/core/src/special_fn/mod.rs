//! Gamma-family functions and the numerical Fox H-function.

pub mod foxh;
pub mod gamma;

pub use foxh::{
    auto_plan, fox_h, fox_h_bivariate, fox_h_fixed, validate_plan, ContourPlan, FoxHOptions, FoxHSpec, FoxHValue,
    GammaFactor,
};
pub use gamma::{
    ln_gamma, ln_regularized_upper, log_gamma_complex, regularized_lower, regularized_upper, upper_incomplete_gamma,
};
