//! Energy spectra, power means and the two energy-shift solvers.
//!
//! A [`Spectrum`] stores distinct runs of levels with their multiplicities;
//! every mean is computed from the runs directly and the level list is only
//! expanded when a sampler needs one energy per amplitude.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::roots::{solve_increasing, DEFAULT_MAX_ITER};

/// Default relative tolerance of both shift solvers.
pub const DEFAULT_SHIFT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectrumRecord", into = "SpectrumRecord")]
pub struct Spectrum {
    levels: Vec<f64>,
    degeneracies: Vec<u64>,
    dim: u64,
}

/// On-disk form: `{"levels": [...], "degeneracies": [...]}` with the
/// degeneracies optional and defaulting to all ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpectrumRecord {
    levels: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    degeneracies: Option<Vec<u64>>,
}

impl TryFrom<SpectrumRecord> for Spectrum {
    type Error = Error;

    fn try_from(r: SpectrumRecord) -> Result<Self> {
        match r.degeneracies {
            Some(d) => Spectrum::with_degeneracies(r.levels, d),
            None => Spectrum::new(r.levels),
        }
    }
}

impl From<Spectrum> for SpectrumRecord {
    fn from(s: Spectrum) -> Self {
        let all_ones = s.degeneracies.iter().all(|&d| d == 1);
        SpectrumRecord {
            levels: s.levels,
            degeneracies: (!all_ones).then_some(s.degeneracies),
        }
    }
}

impl Spectrum {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        let degeneracies = vec![1; levels.len()];
        Self::with_degeneracies(levels, degeneracies)
    }

    pub fn with_degeneracies(levels: Vec<f64>, degeneracies: Vec<u64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidSpectrum("no levels".into()));
        }
        if levels.len() != degeneracies.len() {
            return Err(Error::InvalidSpectrum(format!(
                "{} levels but {} degeneracies",
                levels.len(),
                degeneracies.len()
            )));
        }
        if let Some(x) = levels.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidSpectrum(format!("non-finite level {x}")));
        }
        if degeneracies.contains(&0) {
            return Err(Error::InvalidSpectrum("zero degeneracy".into()));
        }
        let dim = degeneracies
            .iter()
            .try_fold(0u64, |acc, &d| acc.checked_add(d))
            .ok_or_else(|| Error::InvalidSpectrum("dimension overflows u64".into()))?;
        Ok(Spectrum {
            levels,
            degeneracies,
            dim,
        })
    }

    /// Each of `levels` repeated `multiplicity` times.
    pub fn uniform(levels: Vec<f64>, multiplicity: u64) -> Result<Self> {
        let d = vec![multiplicity; levels.len()];
        Self::with_degeneracies(levels, d)
    }

    /// Run-length encode an expanded level list. Expansion of the result
    /// reproduces `expanded` in order.
    pub fn from_expanded(expanded: &[f64]) -> Result<Self> {
        let mut levels = Vec::new();
        let mut degeneracies: Vec<u64> = Vec::new();
        for &x in expanded {
            match levels.last() {
                Some(&last) if last == x => *degeneracies.last_mut().unwrap() += 1,
                _ => {
                    levels.push(x);
                    degeneracies.push(1);
                }
            }
        }
        Self::with_degeneracies(levels, degeneracies)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn degeneracies(&self) -> &[u64] {
        &self.degeneracies
    }

    /// Expanded Hilbert-space dimension `n`.
    pub fn dim(&self) -> u64 {
        self.dim
    }

    pub fn min(&self) -> f64 {
        self.levels.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.levels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_equal(&self) -> bool {
        self.min() == self.max()
    }

    /// `(level, d_k / n)` pairs.
    pub fn weighted(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.dim as f64;
        self.levels
            .iter()
            .zip(&self.degeneracies)
            .map(move |(&e, &d)| (e, d as f64 / n))
    }

    pub fn arithmetic_mean(&self) -> f64 {
        self.weighted().map(|(e, w)| w * e).sum()
    }

    /// One level per amplitude, in basis order.
    pub fn expanded(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim as usize);
        for (&e, &d) in self.levels.iter().zip(&self.degeneracies) {
            out.extend(std::iter::repeat_n(e, d as usize));
        }
        out
    }

    pub fn negated(&self) -> Spectrum {
        Spectrum {
            levels: self.levels.iter().map(|e| -e).collect(),
            degeneracies: self.degeneracies.clone(),
            dim: self.dim,
        }
    }

    pub fn shifted(&self, s: f64) -> Spectrum {
        Spectrum {
            levels: self.levels.iter().map(|e| e + s).collect(),
            degeneracies: self.degeneracies.clone(),
            dim: self.dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Means {
    pub e_min: f64,
    pub e_max: f64,
    pub e_arith: f64,
    /// Harmonic mean; absent unless every level is positive.
    pub e_harm: Option<f64>,
    /// `(mean of E_k^-2)^(-1/2)`; absent unless every level is positive.
    pub e_quad: Option<f64>,
    pub n: u64,
}

pub fn compute_means(spectrum: &Spectrum) -> Means {
    let positive = spectrum.min() > 0.0;
    let (inv, inv2) = spectrum
        .weighted()
        .fold((0.0, 0.0), |(a, b), (e, w)| (a + w / e, b + w / (e * e)));
    Means {
        e_min: spectrum.min(),
        e_max: spectrum.max(),
        e_arith: spectrum.arithmetic_mean(),
        e_harm: positive.then(|| 1.0 / inv),
        e_quad: positive.then(|| 1.0 / inv2.sqrt()),
        n: spectrum.dim(),
    }
}

/// Which condition fixed the shift of an [`EnergyFrame`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftKind {
    /// Shifted harmonic mean equals shifted energy.
    Harmonic,
    /// `E' = (1 + 1/n)(1 + eps/sqrt(n)) E'_H`.
    Concentration { epsilon: f64 },
    Manual,
}

/// A spectrum with target energy `E` and an energy offset `s`.
///
/// `n` is the dimension entering the dimension-dependent formulas. It equals
/// the spectrum's own dimension unless a frame was solved at a nominal
/// dimension, in which case the spectrum only supplies level frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyFrame {
    pub base: Spectrum,
    pub energy: f64,
    pub shift: f64,
    pub n: u64,
    pub kind: ShiftKind,
}

impl EnergyFrame {
    /// Requires every shifted level and the shifted energy to be positive.
    pub fn new(base: Spectrum, energy: f64, shift: f64, n: u64, kind: ShiftKind) -> Result<Self> {
        if !(energy.is_finite() && shift.is_finite()) {
            return Err(domain("energy and shift must be finite"));
        }
        if base.min() + shift <= 0.0 {
            return Err(domain(format!(
                "shifted minimum level {} is not positive",
                base.min() + shift
            )));
        }
        if energy + shift <= 0.0 {
            return Err(domain(format!(
                "shifted energy {} is not positive",
                energy + shift
            )));
        }
        if n == 0 {
            return Err(domain("dimension must be positive"));
        }
        Ok(EnergyFrame {
            base,
            energy,
            shift,
            n,
            kind,
        })
    }

    /// `E' = E + s`.
    pub fn e_prime(&self) -> f64 {
        self.energy + self.shift
    }

    pub fn shifted_levels(&self) -> Vec<f64> {
        self.base.levels().iter().map(|e| e + self.shift).collect()
    }

    pub fn e_min(&self) -> f64 {
        self.base.min() + self.shift
    }

    pub fn e_max(&self) -> f64 {
        self.base.max() + self.shift
    }

    pub fn e_harm(&self) -> f64 {
        let inv: f64 = self.base.weighted().map(|(e, w)| w / (e + self.shift)).sum();
        1.0 / inv
    }

    pub fn e_quad(&self) -> f64 {
        let inv2: f64 = self
            .base
            .weighted()
            .map(|(e, w)| {
                let y = e + self.shift;
                w / (y * y)
            })
            .sum();
        1.0 / inv2.sqrt()
    }

    pub fn n_f64(&self) -> f64 {
        self.n as f64
    }
}

/// Sums over shifted levels `y_k = E_k + x` that the residuals need.
struct ShiftedSums {
    /// mean of 1/y
    m1: f64,
    /// weighted variance of 1/y
    var_inv: f64,
    /// mean of (E_A - E_k)/y
    dev: f64,
}

impl ShiftedSums {
    fn at(spectrum: &Spectrum, e_arith: f64, x: f64) -> Self {
        let mut m1 = 0.0;
        let mut dev = 0.0;
        for (e, w) in spectrum.weighted() {
            let inv = 1.0 / (e + x);
            m1 += w * inv;
            dev += w * (e_arith - e) * inv;
        }
        let var_inv = spectrum
            .weighted()
            .map(|(e, w)| {
                let d = 1.0 / (e + x) - m1;
                w * d * d
            })
            .sum();
        ShiftedSums { m1, var_inv, dev }
    }

    /// Harmonic mean of the shifted levels.
    fn harmonic(&self) -> f64 {
        1.0 / self.m1
    }

    /// `E_A(x) - E_H(x)`, computed without cancellation for large shifts.
    fn arith_minus_harm(&self) -> f64 {
        self.dev / self.m1
    }

    /// d/dx of `E_H(x) - x`.
    fn harmonic_slope_minus_one(&self) -> f64 {
        self.var_inv / (self.m1 * self.m1)
    }
}

/// `E_H({E_k + x}) - (E + x)`. Strictly increasing in `x` unless every
/// level is equal.
pub fn harmonic_residual(spectrum: &Spectrum, energy: f64, x: f64) -> f64 {
    let e_a = spectrum.arithmetic_mean();
    let s = ShiftedSums::at(spectrum, e_a, x);
    (e_a - energy) - s.arith_minus_harm()
}

/// Derivative of [`harmonic_residual`] with respect to the shift:
/// `mean(y^-2) / mean(y^-1)^2 - 1`.
pub fn harmonic_residual_slope(spectrum: &Spectrum, x: f64) -> f64 {
    let e_a = spectrum.arithmetic_mean();
    ShiftedSums::at(spectrum, e_a, x).harmonic_slope_minus_one()
}

fn lower_bracket(spectrum: &Spectrum) -> f64 {
    -spectrum.min() + 1e-14 * (spectrum.max() - spectrum.min())
}

/// Expand `hi` geometrically away from `lo` until `f(hi) > 0`.
fn upper_bracket<F: Fn(f64) -> f64>(f: F, lo: f64, scale: f64) -> Result<f64> {
    let mut width = scale.max(1.0);
    let mut last = f64::NAN;
    for _ in 0..200 {
        let hi = lo + width;
        last = f(hi);
        if last > 0.0 {
            return Ok(hi);
        }
        width *= 2.0;
    }
    Err(Error::NoSignChange {
        lo,
        hi: lo + width,
        f_lo: f64::NAN,
        f_hi: last,
    })
}

/// Shift `x` such that the harmonic mean of `{E_k + x}` equals `E + x`.
///
/// Requires `E_min <= E < E_A`. At `E = E_min` the answer is `-E_min`.
pub fn harmonic_shift_solve(spectrum: &Spectrum, energy: f64, tol: f64) -> Result<f64> {
    let e_min = spectrum.min();
    if spectrum.all_equal() {
        return if energy == e_min {
            Ok(0.0)
        } else {
            Err(domain(format!(
                "all levels equal {e_min}; energy {energy} is unreachable"
            )))
        };
    }
    let e_a = spectrum.arithmetic_mean();
    if !(energy >= e_min && energy < e_a) {
        return Err(domain(format!(
            "energy {energy} outside [E_min, E_A) = [{e_min}, {e_a})"
        )));
    }
    if energy == e_min {
        return Ok(-e_min);
    }

    let eval = |x: f64| {
        let s = ShiftedSums::at(spectrum, e_a, x);
        ((e_a - energy) - s.arith_minus_harm(), s.harmonic_slope_minus_one())
    };
    let mut lo = lower_bracket(spectrum);
    if eval(lo).0 >= 0.0 {
        // root between the pole and the margin
        lo = -e_min;
    }
    let hi = upper_bracket(|x| eval(x).0, lo, spectrum.max() - e_min)?;
    let root = solve_increasing(
        eval,
        lo,
        hi,
        None,
        |x, f| f.abs() <= tol * (energy + x).abs(),
        DEFAULT_MAX_ITER,
    )?;
    Ok(root.x)
}

/// The multiplier `(1 + 1/n)(1 + eps/sqrt(n))`.
pub fn concentration_multiplier(n: f64, epsilon: f64) -> f64 {
    (1.0 + 1.0 / n) * (1.0 + epsilon / n.sqrt())
}

/// `m E'_H(s) - E'(s)`; increasing in `s` and vanishing at the shift of
/// [`concentration_shift_solve`].
pub fn concentration_residual(spectrum: &Spectrum, energy: f64, epsilon: f64, n: f64, s: f64) -> f64 {
    let e_a = spectrum.arithmetic_mean();
    let sums = ShiftedSums::at(spectrum, e_a, s);
    let m = concentration_multiplier(n, epsilon);
    (e_a - energy) - sums.arith_minus_harm() + (m - 1.0) * sums.harmonic()
}

/// Solve `E + s = (1 + 1/n)(1 + eps/sqrt(n)) E_H({E_k + s})` at the
/// spectrum's own dimension.
pub fn concentration_shift_solve(
    spectrum: &Spectrum,
    energy: f64,
    epsilon: f64,
    tol: f64,
) -> Result<EnergyFrame> {
    concentration_shift_solve_at(spectrum, energy, epsilon, spectrum.dim(), tol)
}

/// As [`concentration_shift_solve`], treating the spectrum as level frequencies
/// of a system of dimension `n`.
pub fn concentration_shift_solve_at(
    spectrum: &Spectrum,
    energy: f64,
    epsilon: f64,
    n: u64,
    tol: f64,
) -> Result<EnergyFrame> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if n == 0 {
        return Err(domain("dimension must be positive"));
    }
    let nf = n as f64;
    let m = concentration_multiplier(nf, epsilon);
    let e_min = spectrum.min();
    let kind = ShiftKind::Concentration { epsilon };

    if spectrum.all_equal() {
        // (m - 1)(c + s) = E - c
        let c = e_min;
        let s = (energy - c) / (m - 1.0) - c;
        if c + s <= 0.0 {
            return Err(Error::NoSignChange {
                lo: -c,
                hi: f64::INFINITY,
                f_lo: c - energy,
                f_hi: f64::INFINITY,
            });
        }
        return EnergyFrame::new(spectrum.clone(), energy, s, n, kind);
    }

    let e_a = spectrum.arithmetic_mean();
    let eval = |s: f64| {
        let sums = ShiftedSums::at(spectrum, e_a, s);
        let h = sums.harmonic();
        let f = (e_a - energy) - sums.arith_minus_harm() + (m - 1.0) * h;
        let df = sums.harmonic_slope_minus_one() + (m - 1.0) * (sums.harmonic_slope_minus_one() + 1.0);
        (f, df)
    };

    if energy <= e_min {
        // the residual tends to E_min - E >= 0 at the pole, so it never changes sign
        return Err(Error::NoSignChange {
            lo: -e_min,
            hi: f64::INFINITY,
            f_lo: e_min - energy,
            f_hi: f64::INFINITY,
        });
    }
    let mut lo = lower_bracket(spectrum);
    let f_lo = eval(lo).0;
    if f_lo >= 0.0 {
        lo = -e_min;
    }
    let hi = upper_bracket(|s| eval(s).0, lo, spectrum.max() - e_min).map_err(|e| match e {
        Error::NoSignChange { lo, hi, f_hi, .. } => Error::NoSignChange { lo, hi, f_lo, f_hi },
        other => other,
    })?;
    let root = solve_increasing(
        eval,
        lo,
        hi,
        None,
        |s, f| f.abs() <= tol * (energy + s),
        DEFAULT_MAX_ITER,
    )?;
    EnergyFrame::new(spectrum.clone(), energy, root.x, n, kind)
}

/// Frame with the pure harmonic shift, as needed by the Gaussian sampler.
pub fn harmonic_frame(spectrum: &Spectrum, energy: f64, tol: f64) -> Result<EnergyFrame> {
    let s = harmonic_shift_solve(spectrum, energy, tol)?;
    EnergyFrame::new(spectrum.clone(), energy, s, spectrum.dim(), ShiftKind::Harmonic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sp(levels: &[f64]) -> Spectrum {
        Spectrum::new(levels.to_vec()).unwrap()
    }

    #[test]
    fn means_of_one_two_three() {
        let m = compute_means(&sp(&[1.0, 2.0, 3.0]));
        assert_relative_eq!(m.e_arith, 2.0);
        assert_relative_eq!(m.e_harm.unwrap(), 18.0 / 11.0, epsilon = 1e-15);
        assert_relative_eq!(m.e_quad.unwrap(), (108.0f64 / 49.0).sqrt(), epsilon = 1e-15);
        assert!((m.e_quad.unwrap() - 1.4846).abs() < 1e-4);
        assert_eq!(m.n, 3);
    }

    #[test]
    fn constant_spectrum_means_coincide() {
        let m = compute_means(&Spectrum::uniform(vec![2.5], 7).unwrap());
        for v in [m.e_min, m.e_max, m.e_arith, m.e_harm.unwrap(), m.e_quad.unwrap()] {
            assert_relative_eq!(v, 2.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_level_blocks_harmonic_mean() {
        // two spins with levels 0 and 1 each
        let s = Spectrum::with_degeneracies(vec![0.0, 1.0, 2.0], vec![1, 2, 1]).unwrap();
        let m = compute_means(&s);
        assert_eq!(m.e_arith, 1.0);
        assert!(m.e_harm.is_none());
        assert!(m.e_quad.is_none());
        assert_eq!(m.n, 4);
    }

    #[test]
    fn invalid_spectra_rejected() {
        assert!(Spectrum::new(vec![]).is_err());
        assert!(Spectrum::new(vec![1.0, f64::NAN]).is_err());
        assert!(Spectrum::with_degeneracies(vec![1.0], vec![0]).is_err());
        assert!(Spectrum::with_degeneracies(vec![1.0, 2.0], vec![1]).is_err());
    }

    #[test]
    fn json_defaults_degeneracies() {
        let s: Spectrum = serde_json::from_str(r#"{"levels":[1,2,3]}"#).unwrap();
        assert_eq!(s.degeneracies(), &[1, 1, 1]);
        let d: Spectrum =
            serde_json::from_str(r#"{"levels":[0,1],"degeneracies":[1,3]}"#).unwrap();
        assert_eq!(d.dim(), 4);
        assert!(serde_json::from_str::<Spectrum>(r#"{"levels":[]}"#).is_err());
        let back: Spectrum = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn run_length_round_trip() {
        let e = [1.0, 1.0, 2.0, 1.0, 3.0, 3.0];
        let s = Spectrum::from_expanded(&e).unwrap();
        assert_eq!(s.levels(), &[1.0, 2.0, 1.0, 3.0]);
        assert_eq!(s.expanded(), e.to_vec());
        let again = Spectrum::from_expanded(&s.expanded()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn harmonic_shift_two_levels() {
        let s = sp(&[1.0, 3.0]);
        assert!(harmonic_shift_solve(&s, 1.5, 1e-12).unwrap().abs() < 1e-10);
        // (1+d)(3+d)/(2+d) = 1.8 + d  =>  d = 3
        assert_relative_eq!(harmonic_shift_solve(&s, 1.8, 1e-12).unwrap(), 3.0, epsilon = 1e-10);
    }

    #[test]
    fn harmonic_shift_example_two() {
        let s = Spectrum::uniform(vec![1.0, 2.0, 3.0], 5).unwrap();
        let d = harmonic_shift_solve(&s, 1.5, 1e-12).unwrap();
        assert_relative_eq!(d, (-4.0 + 7f64.sqrt()) / 3.0, epsilon = 1e-12);
        assert!((d + 0.4514).abs() < 1e-4);
    }

    #[test]
    fn harmonic_shift_domain() {
        let s = sp(&[1.0, 2.0, 3.0]);
        assert!(matches!(harmonic_shift_solve(&s, 2.0, 1e-12), Err(Error::Domain(_))));
        assert!(matches!(harmonic_shift_solve(&s, 0.5, 1e-12), Err(Error::Domain(_))));
        assert_eq!(harmonic_shift_solve(&s, 1.0, 1e-12).unwrap(), -1.0);
        let flat = Spectrum::uniform(vec![2.0], 4).unwrap();
        assert_eq!(harmonic_shift_solve(&flat, 2.0, 1e-12).unwrap(), 0.0);
        assert!(harmonic_shift_solve(&flat, 1.0, 1e-12).is_err());
    }

    #[test]
    fn harmonic_shift_near_lower_edge() {
        let s = sp(&[0.0, 1.0, 5.0]);
        let e = 1e-13;
        let d = harmonic_shift_solve(&s, e, 1e-12).unwrap();
        assert!(d > 0.0);
        assert!(harmonic_residual(&s, e, d).abs() <= 1e-12 * (e + d));
    }

    #[test]
    fn concentration_two_level_example() {
        // (1 + 1/2)(1 + 1/sqrt 2) E'_H(s) = 1.6 + s
        let s = sp(&[1.0, 3.0]);
        let f = concentration_shift_solve(&s, 1.6, 1.0, 1e-13).unwrap();
        let m = 1.5 * (1.0 + 1.0 / 2f64.sqrt());
        let oracle = crate::roots::bisect_increasing(
            |x| {
                let eh = 2.0 / (1.0 / (1.0 + x) + 1.0 / (3.0 + x));
                m * eh - (1.6 + x)
            },
            -1.0 + 1e-15,
            100.0,
            400,
        );
        assert_relative_eq!(f.shift, oracle, epsilon = 1e-11);
        assert_relative_eq!(f.e_prime(), m * f.e_harm(), max_relative = 1e-12);
    }

    #[test]
    fn concentration_approaches_harmonic_shift() {
        let s = sp(&[1.0, 2.0, 3.0]);
        let h = harmonic_shift_solve(&s, 1.5, 1e-14).unwrap();
        let mut prev = f64::INFINITY;
        for n in [1u64 << 20, 1 << 30, 1 << 40, 1 << 50] {
            let f = concentration_shift_solve_at(&s, 1.5, 1e-3, n, 1e-14).unwrap();
            let gap = (f.shift - h).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-9);
    }

    #[test]
    fn concentration_example_one_bracket() {
        let s = Spectrum::uniform(vec![1.0, 2.0, 3.0], 8193 / 3).unwrap();
        assert_eq!(s.dim(), 8193);
        let f = concentration_shift_solve(&s, 1.5, 2.0, 1e-13).unwrap();
        assert!(f.shift > -0.5 && f.shift < 0.0, "s = {}", f.shift);
    }

    #[test]
    fn concentration_rejects_energy_at_minimum() {
        let s = sp(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            concentration_shift_solve(&s, 1.0, 1.0, 1e-12),
            Err(Error::NoSignChange { .. })
        ));
        assert!(concentration_shift_solve(&s, 1.5, 0.0, 1e-12).is_err());
    }

    #[test]
    fn frame_requires_positive_levels() {
        let s = sp(&[1.0, 2.0]);
        assert!(EnergyFrame::new(s.clone(), 1.5, -1.0, 2, ShiftKind::Manual).is_err());
        assert!(EnergyFrame::new(s.clone(), 1.5, -1.6, 2, ShiftKind::Manual).is_err());
        let f = EnergyFrame::new(s, 1.5, -0.5, 2, ShiftKind::Manual).unwrap();
        assert_eq!(f.shifted_levels(), vec![0.5, 1.5]);
        assert_eq!(f.e_prime(), 1.0);
    }
}
