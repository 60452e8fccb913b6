//! Log-domain scalars, gamma-family special functions and quadrature.

mod gamma;
mod logreal;
mod quadrature;

pub use gamma::{
    ln_factorial, ln_gamma, log_factorial, reg_gamma_lower, reg_gamma_pair, reg_gamma_upper, stirlerr,
    stirling_ratio,
};
pub use logreal::{log_add, log_sum, log_sum_exp, LogReal};
pub use quadrature::{
    composite_gauss, gauss_rule, integrate_adaptive, integrate_log, AdaptiveOptions, QuadratureRule,
};
