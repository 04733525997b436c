use std::path::PathBuf;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Domain};
use crate::signal::{ComplexSignal, Shape, C64};

use super::pgm::{load_complex_image, load_image};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalKind {
    /// Real sum of three cosines, see [`SINUSOIDS`].
    SinusoidMix,
    /// Entries `a + ib` with `a, b ~ N(0, 1)` independent.
    ComplexGaussian,
    /// Entries uniform on `[0, 1)`.
    RealNonnegRandom,
    ImageFile,
}

/// `(cycles per period, amplitude, phase)` of the sinusoid mix; 2D signals
/// use the same cycles along both axes.
pub const SINUSOIDS: [(f64, f64, f64); 3] = [(2.0, 1.0, 0.0), (5.0, 0.6, 0.7), (11.0, 0.3, 1.9)];

#[derive(Clone, Debug)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub shape: Shape,
    pub image: Option<PathBuf>,
    pub phase_image: Option<PathBuf>,
}

pub fn make_signal(spec: &SignalSpec, seed: u64) -> Result<ComplexSignal> {
    let shape = spec.shape;
    let n = shape.len();
    let mut rng = stream_rng(seed, Domain::Signal, 0);
    match spec.kind {
        SignalKind::SinusoidMix => {
            let (n1, n2) = shape.rows_cols();
            let values: Vec<f64> = (0..n)
                .map(|idx| {
                    let (t1, t2) = ((idx / n2) as f64, (idx % n2) as f64);
                    SINUSOIDS
                        .iter()
                        .map(|&(f, a, p)| {
                            let arg = f * (t1 / n1 as f64 + t2 / n2 as f64);
                            a * (2.0 * std::f64::consts::PI * arg + p).cos()
                        })
                        .sum()
                })
                .collect();
            ComplexSignal::from_real(shape, &values)
        }
        SignalKind::ComplexGaussian => {
            let data = (0..n)
                .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            ComplexSignal::new(shape, data)
        }
        SignalKind::RealNonnegRandom => {
            let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            ComplexSignal::from_real(shape, &values)
        }
        SignalKind::ImageFile => {
            let path = spec
                .image
                .as_ref()
                .ok_or_else(|| Error::Config("image-file signals need an image path".into()))?;
            let x = match &spec.phase_image {
                Some(phase) => load_complex_image(path, phase)?,
                None => load_image(path)?,
            };
            if x.shape() != shape {
                return Err(Error::Config(format!("image is {} but the config asks for {shape}", x.shape())));
            }
            Ok(x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: SignalKind, shape: Shape) -> SignalSpec {
        SignalSpec {
            kind,
            shape,
            image: None,
            phase_image: None,
        }
    }

    #[test]
    fn deterministic_and_typed() {
        let s = spec(SignalKind::ComplexGaussian, Shape::D1(4));
        assert_eq!(make_signal(&s, 9).unwrap(), make_signal(&s, 9).unwrap());
        assert_ne!(make_signal(&s, 9).unwrap(), make_signal(&s, 10).unwrap());
        let x = make_signal(&spec(SignalKind::RealNonnegRandom, Shape::D2(4, 5)), 1).unwrap();
        assert!(x.data().iter().all(|z| z.re >= 0.0 && z.im == 0.0));
        let x = make_signal(&spec(SignalKind::SinusoidMix, Shape::D1(128)), 1).unwrap();
        assert!(x.data().iter().all(|z| z.im == 0.0));
        assert!(make_signal(&spec(SignalKind::ImageFile, Shape::D1(4)), 1).is_err());
    }
}
