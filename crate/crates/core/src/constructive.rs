//! Exact recovery from three modulated diffraction patterns.
//!
//! With `D^s` the modulation `x[t] ↦ x[t]·e^{i2π⟨s,t⟩/n}`, the patterns
//! `|Fx|²`, `|F(x + D^s x)|²` and `|F(x − iD^s x)|²` determine every
//! relative phase `φ[k−s] − φ[k]` of `x̂ = Fx`. Chaining these along the
//! orbit of `s` recovers `x̂` up to a global phase whenever the orbit covers
//! all frequencies.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::signal::{apply_mask, dft_unitary, idft_unitary, ComplexSignal, Mask, MaskKind, Shape, Shift, Spectrum, C64};

/// Relative threshold below which a DFT magnitude counts as vanishing.
pub const VANISH_RTOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ModulationTriple {
    pub shape: Shape,
    pub shift: Shift,
    /// `|Fx|²`.
    pub i0: Vec<f64>,
    /// `|F(x + D^s x)|²`.
    pub i_plus: Vec<f64>,
    /// `|F(x − iD^s x)|²`.
    pub i_minus_i: Vec<f64>,
}

impl ModulationTriple {
    fn validate(&self) -> Result<()> {
        self.shift.validate(self.shape)?;
        let n = self.shape.len();
        for block in [&self.i0, &self.i_plus, &self.i_minus_i] {
            if block.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: block.len(),
                });
            }
        }
        Ok(())
    }
}

/// `D^s x`.
pub fn modulate(x: &ComplexSignal, shift: Shift) -> Result<ComplexSignal> {
    shift.validate(x.shape())?;
    let (n1, n2) = x.shape().rows_cols();
    let (s1, s2) = shift.rows_cols();
    let data = x
        .data()
        .iter()
        .enumerate()
        .map(|(idx, z)| {
            let (t1, t2) = (idx / n2, idx % n2);
            // Reduce the products exactly before converting to an angle.
            let frac = ((s1 * t1) % n1) as f64 / n1 as f64 + ((s2 * t2) % n2) as f64 / n2 as f64;
            z * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * frac)
        })
        .collect();
    ComplexSignal::new(x.shape(), data)
}

/// Simulates the three patterns for shift `s`.
pub fn sense_triple(x: &ComplexSignal, shift: Shift) -> Result<ModulationTriple> {
    let xs = modulate(x, shift)?;
    let i = C64::new(0.0, 1.0);
    let plus = ComplexSignal::new(x.shape(), x.data().iter().zip(xs.data()).map(|(a, b)| a + b).collect())?;
    let minus_i = ComplexSignal::new(x.shape(), x.data().iter().zip(xs.data()).map(|(a, b)| a - i * b).collect())?;
    Ok(ModulationTriple {
        shape: x.shape(),
        shift,
        i0: dft_unitary(x).magnitudes().iter().map(|m| m * m).collect(),
        i_plus: dft_unitary(&plus).magnitudes().iter().map(|m| m * m).collect(),
        i_minus_i: dft_unitary(&minus_i).magnitudes().iter().map(|m| m * m).collect(),
    })
}

/// Triples for every shift, sensed on `W ⊙ x` when a scrambling mask is given.
pub fn sense_triples(x: &ComplexSignal, shifts: &[Shift], mask: Option<&Mask>) -> Result<Vec<ModulationTriple>> {
    let scrambled = match mask {
        Some(w) => apply_mask(x, w)?,
        None => x.clone(),
    };
    shifts.iter().map(|&s| sense_triple(&scrambled, s)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Uniqueness {
    Unique,
    NotUnique(String),
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Size of the subgroup of `Z/n1 × Z/n2` generated by `shifts`.
fn generated_subgroup_size(shape: Shape, shifts: &[Shift]) -> usize {
    let (n1, n2) = shape.rows_cols();
    let mut seen = vec![false; n1 * n2];
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    seen[0] = true;
    let mut count = 1;
    while let Some((a, b)) = queue.pop_front() {
        for s in shifts {
            let (s1, s2) = s.rows_cols();
            let next = ((a + s1) % n1, (b + s2) % n2);
            let idx = next.0 * n2 + next.1;
            if !seen[idx] {
                seen[idx] = true;
                count += 1;
                queue.push_back(next);
            }
        }
    }
    count
}

/// Whether the three-pattern data for `shifts` determines every signal
/// with nonvanishing DFT up to global phase, i.e. whether the shifts
/// generate the whole frequency group.
pub fn uniqueness_check(shape: Shape, shifts: &[Shift]) -> Result<Uniqueness> {
    if shifts.is_empty() {
        return Err(Error::InvalidParameter("at least one shift is required".into()));
    }
    for s in shifts {
        s.validate(shape)?;
    }
    let total = shape.len();
    if let [shift] = shifts {
        let verdict = match (*shift, shape) {
            (Shift::D1(s), Shape::D1(n)) => {
                let g = gcd(s, n);
                if g == 1 {
                    Uniqueness::Unique
                } else {
                    Uniqueness::NotUnique(format!("gcd({s}, {n}) = {g}: the orbit of the shift has {} of {n} frequencies", n / g))
                }
            }
            (Shift::D2(s1, s2), Shape::D2(n1, n2)) => {
                let order = lcm(n1 / gcd(n1, s1), n2 / gcd(n2, s2));
                if order == total {
                    Uniqueness::Unique
                } else {
                    Uniqueness::NotUnique(format!(
                        "shift ({s1}, {s2}) has order {order} in Z/{n1} x Z/{n2} (gcds {}, {}, {})",
                        gcd(s1, n1),
                        gcd(s2, n2),
                        gcd(n1, n2)
                    ))
                }
            }
            _ => unreachable!("validated above"),
        };
        if total > 1 && shift.rows_cols() == (0, 0) {
            return Ok(Uniqueness::NotUnique("trivial subgroup".into()));
        }
        return Ok(verdict);
    }
    let size = generated_subgroup_size(shape, shifts);
    Ok(if size == total {
        Uniqueness::Unique
    } else if size == 1 {
        Uniqueness::NotUnique("trivial subgroup".into())
    } else {
        Uniqueness::NotUnique(format!("shifts generate a subgroup of order {size} out of {total}"))
    })
}

/// Magnitudes and relative phases `δ[k] = φ[k−s] − φ[k]` read off one triple.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseDeltas {
    pub magnitudes: Vec<f64>,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
    pub deltas: Vec<f64>,
    /// False where `|x̂[k]|` or `|x̂[k−s]|` vanishes.
    pub valid: Vec<bool>,
}

/// Flat index of `k − s`.
fn minus_shift(shape: Shape, idx: usize, shift: Shift) -> usize {
    let (n1, n2) = shape.rows_cols();
    let (s1, s2) = shift.rows_cols();
    let (k1, k2) = (idx / n2, idx % n2);
    ((k1 + n1 - s1) % n1) * n2 + (k2 + n2 - s2) % n2
}

pub fn relative_phase_deltas(triple: &ModulationTriple) -> Result<PhaseDeltas> {
    triple.validate()?;
    let n = triple.shape.len();
    let magnitudes: Vec<f64> = triple.i0.iter().map(|v| v.max(0.0).sqrt()).collect();
    let threshold = VANISH_RTOL * magnitudes.iter().copied().fold(0.0, f64::max);
    let mut out = PhaseDeltas {
        magnitudes: magnitudes.clone(),
        cos: vec![0.0; n],
        sin: vec![0.0; n],
        deltas: vec![0.0; n],
        valid: vec![false; n],
    };
    for k in 0..n {
        let km = minus_shift(triple.shape, k, triple.shift);
        let (a, b) = (magnitudes[k], magnitudes[km]);
        if a <= threshold || b <= threshold {
            continue;
        }
        let base = triple.i0[k] + triple.i0[km];
        let c = (triple.i_plus[k] - base) / (2.0 * a * b);
        let s = (triple.i_minus_i[k] - base) / (2.0 * a * b);
        out.cos[k] = c;
        out.sin[k] = s;
        out.deltas[k] = s.atan2(c);
        out.valid[k] = true;
    }
    Ok(out)
}

/// Propagates phases over the graph whose edges join `k` and `k − s` for
/// every shift, starting from `φ = 0` at the first nonvanishing index in
/// the traversal rooted at 0. Phase factors are renormalized to the unit
/// circle, which also absorbs noise in the patterns.
fn propagate(shape: Shape, magnitudes: &[f64], edges: &[(Shift, &PhaseDeltas)]) -> Result<Vec<C64>> {
    let n = shape.len();
    let threshold = VANISH_RTOL * magnitudes.iter().copied().fold(0.0, f64::max);
    let nonzero: Vec<bool> = magnitudes.iter().map(|&m| m > threshold).collect();
    let mut phase = vec![C64::new(0.0, 0.0); n];
    let mut seen = vec![false; n];
    let root = if nonzero[0] { Some(0) } else { (0..n).find(|&k| nonzero[k]) };
    let Some(root) = root else {
        return Ok(phase);
    };
    phase[root] = C64::new(1.0, 0.0);
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    let unit = |d: &PhaseDeltas, k: usize| {
        let z = C64::new(d.cos[k], d.sin[k]);
        let r = z.norm();
        if r > 0.0 {
            z / r
        } else {
            C64::new(1.0, 0.0)
        }
    };
    while let Some(k) = queue.pop_front() {
        for &(shift, d) in edges {
            // Forward: φ[k−s] = φ[k] + δ[k].
            let km = minus_shift(shape, k, shift);
            if d.valid[k] && !seen[km] {
                phase[km] = phase[k] * unit(d, k);
                seen[km] = true;
                queue.push_back(km);
            }
            // Backward: φ[k+s] = φ[k] − δ[k+s].
            let kp = plus_shift(shape, k, shift);
            if d.valid[kp] && !seen[kp] {
                phase[kp] = phase[k] * unit(d, kp).conj();
                seen[kp] = true;
                queue.push_back(kp);
            }
        }
    }
    let orphans: Vec<usize> = (0..n).filter(|&k| nonzero[k] && !seen[k]).collect();
    if !orphans.is_empty() {
        let mut indices: Vec<usize> = (0..n).filter(|&k| !nonzero[k]).collect();
        if indices.is_empty() {
            indices = orphans;
        }
        return Err(Error::VanishingDft { indices });
    }
    Ok(magnitudes.iter().zip(&phase).map(|(m, p)| p * *m).collect())
}

fn plus_shift(shape: Shape, idx: usize, shift: Shift) -> usize {
    let (n1, n2) = shape.rows_cols();
    let (s1, s2) = shift.rows_cols();
    let (k1, k2) = (idx / n2, idx % n2);
    ((k1 + s1) % n1) * n2 + (k2 + s2) % n2
}

fn require_unique(shape: Shape, shifts: &[Shift]) -> Result<()> {
    match uniqueness_check(shape, shifts)? {
        Uniqueness::Unique => Ok(()),
        Uniqueness::NotUnique(reason) => Err(Error::NotCoprime(reason)),
    }
}

/// Spectrum `|x̂[k]|·e^{iφ[k]}` with `φ[0] = 0`, chained along the orbit
/// `0, −s, −2s, …`.
pub fn chain_phases(deltas: &PhaseDeltas, shift: Shift, shape: Shape) -> Result<Spectrum> {
    require_unique(shape, &[shift])?;
    if deltas.magnitudes.len() != shape.len() {
        return Err(Error::LengthMismatch {
            expected: shape.len(),
            actual: deltas.magnitudes.len(),
        });
    }
    let data = propagate(shape, &deltas.magnitudes, &[(shift, deltas)])?;
    Spectrum::new(shape, data)
}

/// Recovers `x` (up to global phase) from triples for one or several
/// shifts. With a scrambling mask the data must have been sensed on
/// `W ⊙ x`; the mask is divided out at the end.
pub fn recover(triples: &[ModulationTriple], shape: Shape, mask: Option<&Mask>) -> Result<ComplexSignal> {
    if let Some(w) = mask {
        if w.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape.to_string(),
                actual: w.shape().to_string(),
            });
        }
        if let Some(index) = w.weights().iter().position(|z| z.norm() == 0.0) {
            return Err(Error::ZeroMaskWeight { index });
        }
    }
    if triples.is_empty() {
        return Err(Error::InvalidParameter("at least one triple is required".into()));
    }
    for t in triples {
        if t.shape != shape {
            return Err(Error::ShapeMismatch {
                expected: shape.to_string(),
                actual: t.shape.to_string(),
            });
        }
    }
    let shifts: Vec<Shift> = triples.iter().map(|t| t.shift).collect();
    require_unique(shape, &shifts)?;
    let deltas = triples.iter().map(relative_phase_deltas).collect::<Result<Vec<_>>>()?;
    // Average the magnitude estimates; they coincide for clean data.
    let mut magnitudes = vec![0.0; shape.len()];
    for d in &deltas {
        for (m, v) in magnitudes.iter_mut().zip(&d.magnitudes) {
            *m += v / deltas.len() as f64;
        }
    }
    let edges: Vec<(Shift, &PhaseDeltas)> = shifts.iter().copied().zip(&deltas).collect();
    let spectrum = Spectrum::new(shape, propagate(shape, &magnitudes, &edges)?)?;
    let scrambled = idft_unitary(&spectrum);
    match mask {
        None => Ok(scrambled),
        Some(w) => ComplexSignal::new(
            shape,
            scrambled.data().iter().zip(w.weights()).map(|(z, w)| z / w).collect(),
        ),
    }
}

/// Recovery from a horizontal and a vertical modulation, which covers every
/// 2D shape regardless of how the side lengths relate.
pub fn multi_shift_recover(triples: &[ModulationTriple], shape: Shape) -> Result<ComplexSignal> {
    recover(triples, shape, None)
}

/// Multiplies the DFT coefficients in residue class `coset` modulo
/// `gcd(s, n)` by `phase`. When `gcd(s, n) > 1` the result has the same
/// three-pattern data as `x` yet is not a global-phase copy of it.
pub fn coset_phase_flip(x: &ComplexSignal, shift: usize, coset: usize, phase: C64) -> Result<ComplexSignal> {
    let Shape::D1(n) = x.shape() else {
        return Err(Error::InvalidShape("coset flips are defined for 1D signals".into()));
    };
    Shift::D1(shift).validate(x.shape())?;
    let g = gcd(shift, n);
    let mut spectrum = dft_unitary(x).into_data();
    for (k, z) in spectrum.iter_mut().enumerate() {
        if k % g == coset % g {
            *z *= phase;
        }
    }
    Ok(idft_unitary(&Spectrum::new(x.shape(), spectrum)?))
}

/// Default scrambling mask for constructive experiments.
pub fn scrambling_mask(shape: Shape, seed: u64) -> Result<Mask> {
    crate::signal::make_mask(shape, MaskKind::GaussianComplex, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(shape: Shape, v: &[(f64, f64)]) -> ComplexSignal {
        ComplexSignal::new(shape, v.iter().map(|&(a, b)| C64::new(a, b)).collect()).unwrap()
    }

    #[test]
    fn uniqueness_examples() {
        assert!(matches!(
            uniqueness_check(Shape::D1(6), &[Shift::D1(2)]).unwrap(),
            Uniqueness::NotUnique(_)
        ));
        assert_eq!(uniqueness_check(Shape::D2(3, 4), &[Shift::D2(1, 1)]).unwrap(), Uniqueness::Unique);
        assert_eq!(
            uniqueness_check(Shape::D2(4, 4), &[Shift::D2(1, 0), Shift::D2(0, 1)]).unwrap(),
            Uniqueness::Unique
        );
        assert_eq!(
            uniqueness_check(Shape::D1(6), &[Shift::D1(0)]).unwrap(),
            Uniqueness::NotUnique("trivial subgroup".into())
        );
        assert!(matches!(
            uniqueness_check(Shape::D2(4, 6), &[Shift::D2(1, 1)]).unwrap(),
            Uniqueness::NotUnique(_)
        ));
    }

    #[test]
    fn deltas_of_two_point_spectra() {
        // x̂ = (1, 1) and (1, i) for n = 2; x = F⁻¹x̂.
        let shape = Shape::D1(2);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let flat = sig(shape, &[(2.0 * r, 0.0), (0.0, 0.0)]);
        let d = relative_phase_deltas(&sense_triple(&flat, Shift::D1(1)).unwrap()).unwrap();
        assert!(d.deltas.iter().all(|v| v.abs() < 1e-12));

        let x = sig(shape, &[(r, r), (r, -r)]);
        let spec = dft_unitary(&x);
        assert!((spec.data()[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((spec.data()[1] - C64::new(0.0, 1.0)).norm() < 1e-12);
        let d = relative_phase_deltas(&sense_triple(&x, Shift::D1(1)).unwrap()).unwrap();
        let half_pi = std::f64::consts::FRAC_PI_2;
        assert!((d.deltas[0] - half_pi).abs() < 1e-12);
        assert!((d.deltas[1] + half_pi).abs() < 1e-12);
    }

    #[test]
    fn vanishing_bins_are_flagged() {
        // Spectrum (1, 0, 1, 1): x̂[1] = 0.
        let spec = Spectrum::new(
            Shape::D1(4),
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0)],
        )
        .unwrap();
        let x = idft_unitary(&spec);
        let d = relative_phase_deltas(&sense_triple(&x, Shift::D1(1)).unwrap()).unwrap();
        // δ[k] pairs k with k−1: k = 1 and k = 2 touch the zero.
        assert_eq!(d.valid, vec![true, false, false, true]);
    }

    #[test]
    fn zero_deltas_chain_to_magnitudes() {
        let d = PhaseDeltas {
            magnitudes: vec![1.0, 2.0, 3.0],
            cos: vec![1.0; 3],
            sin: vec![0.0; 3],
            deltas: vec![0.0; 3],
            valid: vec![true; 3],
        };
        let s = chain_phases(&d, Shift::D1(1), Shape::D1(3)).unwrap();
        for (z, m) in s.data().iter().zip([1.0, 2.0, 3.0]) {
            assert!((z - C64::new(m, 0.0)).norm() < 1e-15);
        }
        assert!(matches!(chain_phases(&d, Shift::D1(2), Shape::D1(6)), Err(Error::NotCoprime(_))));
    }

    #[test]
    fn modulation_shifts_the_spectrum() {
        let x = sig(Shape::D1(5), &[(1.0, 0.5), (-0.3, 0.2), (0.0, 1.0), (2.0, -1.0), (0.4, 0.4)]);
        let xs = modulate(&x, Shift::D1(2)).unwrap();
        let (a, b) = (dft_unitary(&x), dft_unitary(&xs));
        for k in 0..5 {
            assert!((b.data()[k] - a.data()[(k + 5 - 2) % 5]).norm() < 1e-12);
        }
    }

    #[test]
    fn mask_with_zero_weight_is_rejected() {
        let shape = Shape::D1(3);
        let x = sig(shape, &[(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
        let w = Mask::from_weights(shape, vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]).unwrap();
        let t = sense_triples(&x, &[Shift::D1(1)], Some(&w)).unwrap();
        assert!(matches!(recover(&t, shape, Some(&w)), Err(Error::ZeroMaskWeight { index: 1 })));
    }
}
