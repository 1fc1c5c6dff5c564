//! Remaining-useful-life estimation for rolling bearings.
//!
//! The pipeline runs vibration snapshots through wavelet denoising and
//! Savitzky-Golay smoothing, detects the onset of degradation from a kurtosis
//! series, turns sliding windows into wavelet-packet images, and regresses a
//! normalized RUL with a two-stream shifted-window transformer trained under
//! an asymmetric late-penalty loss.

pub mod signal;
pub mod features;
pub mod tensor;
pub mod model;
pub mod traineval;
pub mod dataio;
pub mod experiment;
