//! Star-pattern prediction and measurement, and 2D Gaussian fitting of ERF maps.

mod gaussian;
mod peaks;
mod star;

pub use gaussian::{fit_gaussian_2d, fit_gaussian_grid, GaussianFit};
pub use peaks::{
    detect_peaks, find_star, gaussian_smooth, measure_star, DetectionParams, MatchReport, Peak, PeakSet, TapMatch,
};
pub use star::{predict_fcn_d6, predict_fcn_d6_span, predict_star, Layout, StarGeometry, Tap, DEFAULT_ALPHA, DIRECTIONS};
