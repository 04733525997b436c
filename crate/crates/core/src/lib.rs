//! Phase retrieval from masked Fourier intensities: PhaseLift convex
//! relaxation, a constructive modulation-based recovery, and an
//! error-reduction baseline.

pub mod constructive;
pub mod error;
pub mod experiments;
pub mod fienup;
pub mod linalg;
pub mod measurement;
pub mod metrics;
pub mod noise;
pub mod psd;
pub mod rng;
pub mod signal;
pub mod solver;

pub use error::{Error, Result};
pub use measurement::{Illumination, IntensityData, MeasurementEnsemble, NoiseTag};
pub use psd::{FactoredPsd, LowRankHermitian};
pub use signal::{ComplexSignal, Mask, MaskKind, Shape, Shift, C64};
