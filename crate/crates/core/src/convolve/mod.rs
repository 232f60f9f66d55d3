//! Grid convolution, powers, stopped sums and related checks.

mod density;
mod engine;
mod kesten;
mod stopped;

pub use density::{density_convolve_square, density_square_at};
pub use engine::{
    convolve, convolve_power, convolve_window_at, convolve_with, linear, linear_direct, linear_fft,
    Method, FFT_THRESHOLD,
};
pub use kesten::{kesten_check, majorant_threshold, KestenReport, CALIBRATION_POWERS};
pub use stopped::{
    overshoot_local, stopped_sum, StoppedSum, StoppingLaw, TailKind, DEFAULT_TAIL_EPS,
};
