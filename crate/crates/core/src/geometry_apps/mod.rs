//! Applications in the cusp: the kernel quotient and its derivatives, pullback
//! metrics, and zeros of random sections.

mod metric;
mod quotient;
mod scan;
mod zeros;

pub use metric::{eta_p, fs_pullback, fs_pullback_at, FsPoint, DIFFERENTIATION_TOLERANCE};
pub use quotient::{finite_difference_s, finite_difference_z, FiniteDifference, radial_path_derivatives, CuspComparison};
pub use scan::{eta_sup, geometric_grid, ladder_fit, quotient_scan, scan_comparison, LadderFit, QuotientScan, ScanRow};
pub use zeros::{
    current_mass, gaussian_coefficients, sample_sections, sample_sections_strict, zero_statistics, SampleFailure,
    ZeroEnsemble, ZeroSample, ZeroStatistics, POLISH_TOLERANCE,
};
