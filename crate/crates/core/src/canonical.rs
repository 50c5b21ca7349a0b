//! Canonical reduced states for a non-interacting bipartite Hamiltonian
//! `H = H_A + H_B`, the determinant maximizer, and exact qubit results.

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::bounds::{ln_tail_bound, median_window, ConcentrationConstants};
use crate::density::DensityMatrix;
use crate::error::{domain, Error, Result};
use crate::spectrum::{
    concentration_shift_solve_at, harmonic_shift_solve, EnergyFrame, Spectrum, DEFAULT_SHIFT_TOL,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteSpectrum {
    pub levels_a: Vec<f64>,
    pub levels_b: Vec<f64>,
}

impl BipartiteSpectrum {
    pub fn new(levels_a: Vec<f64>, levels_b: Vec<f64>) -> Result<Self> {
        let bs = Self { levels_a, levels_b };
        bs.validate()?;
        Ok(bs)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("levels_a", &self.levels_a), ("levels_b", &self.levels_b)] {
            if v.is_empty() {
                return Err(Error::InvalidSpectrum(format!("{name} is empty")));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidSpectrum(format!("{name} has a non-finite entry")));
            }
        }
        Ok(())
    }

    pub fn dim_a(&self) -> usize {
        self.levels_a.len()
    }

    pub fn dim_b(&self) -> usize {
        self.levels_b.len()
    }

    /// `E_{kl} = E_k^A + E_l^B` in A-major order, so the basis index is
    /// `k * |B| + l`.
    pub fn combined_levels(&self) -> Vec<f64> {
        self.levels_a
            .iter()
            .flat_map(|a| self.levels_b.iter().map(move |b| a + b))
            .collect()
    }

    pub fn combined(&self) -> Result<Spectrum> {
        self.validate()?;
        Spectrum::from_expanded(&self.combined_levels())
    }
}

/// Canonical matrix together with the frame it was computed in. The matrix is
/// not renormalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalState {
    pub matrix: DensityMatrix,
    pub frame: EnergyFrame,
    pub epsilon: f64,
}

impl CanonicalState {
    pub fn trace_deviation(&self) -> f64 {
        self.matrix.trace() - 1.0
    }

    /// `(1 + 1/(2n)) n/(n+1) E'/E'_H - 1`
    pub fn analytic_trace_deviation(&self) -> f64 {
        let n = self.frame.n_f64();
        (1.0 + 1.0 / (2.0 * n)) * (n / (n + 1.0)) * self.frame.e_prime() / self.frame.e_harm() - 1.0
    }
}

pub fn rho_c_bipartite(bs: &BipartiteSpectrum, energy: f64, epsilon: f64) -> Result<CanonicalState> {
    let n = (bs.dim_a() * bs.dim_b()) as u64;
    rho_c_bipartite_at(bs, energy, epsilon, n)
}

/// Canonical matrix with the combined levels read as frequencies of an
/// `n`-dimensional system (each pair carries weight `n / (|A||B|)`).
pub fn rho_c_bipartite_at(
    bs: &BipartiteSpectrum,
    energy: f64,
    epsilon: f64,
    n: u64,
) -> Result<CanonicalState> {
    let combined = bs.combined()?;
    let frame = concentration_shift_solve_at(&combined, energy, epsilon, n, DEFAULT_SHIFT_TOL)?;
    let nf = n as f64;
    let pairs = (bs.dim_a() * bs.dim_b()) as f64;
    let pre = (1.0 + 1.0 / (2.0 * nf)) / (nf + 1.0) * (nf / pairs);
    let e_p = frame.e_prime();
    let diag: Vec<f64> = bs
        .levels_a
        .iter()
        .map(|a| {
            let sum: f64 = bs.levels_b.iter().map(|b| e_p / (a + b + frame.shift)).sum();
            pre * sum
        })
        .collect();
    Ok(CanonicalState {
        matrix: DensityMatrix::from_diagonal(&diag),
        frame,
        epsilon,
    })
}

/// Large-`n` limit of the canonical matrix with the level frequencies of the
/// combined spectrum held fixed; the shift becomes the harmonic one and the
/// trace is exactly one.
pub fn rho_c_limit(bs: &BipartiteSpectrum, energy: f64) -> Result<DensityMatrix> {
    let combined = bs.combined()?;
    let s = harmonic_shift_solve(&combined, energy, 1e-15)?;
    let e_p = energy + s;
    if !(e_p > 0.0) {
        return Err(domain("shifted energy is not positive"));
    }
    let pairs = (bs.dim_a() * bs.dim_b()) as f64;
    let diag: Vec<f64> = bs
        .levels_a
        .iter()
        .map(|a| bs.levels_b.iter().map(|b| e_p / (a + b + s)).sum::<f64>() / pairs)
        .collect();
    Ok(DensityMatrix::from_diagonal(&diag))
}

/// `sqrt(E'/E'_min (1 + 1/n))` times the median window at unit Lipschitz constant.
pub fn delta_deviation(k: &ConcentrationConstants) -> f64 {
    let f = &k.frame;
    let n = k.n_f64();
    (f.e_prime() / f.e_min() * (1.0 + 1.0 / n)).sqrt() * median_window(k, 1.0)
}

/// Natural log of [`reduced_dm_tail`].
pub fn ln_reduced_dm_tail(k: &ConcentrationConstants, dim_a: usize, t: f64) -> f64 {
    let da = dim_a as f64;
    (da * (da + 1.0)).ln() + ln_tail_bound(k, t)
}

/// Bound on `Prob{||psi^A - rho_c||_2 > sqrt(8)|A|(t + delta)}`.
///
/// `delta` only fixes the event; the bound itself does not depend on it.
/// Returns `NaN` for `t <= 0`.
pub fn reduced_dm_tail(k: &ConcentrationConstants, dim_a: usize, t: f64, _delta: f64) -> f64 {
    if !(t > 0.0) {
        return f64::NAN;
    }
    ln_reduced_dm_tail(k, dim_a, t).exp()
}

/// Maximizer of `det rho` over diagonal states with `Tr rho = 1` and
/// `Tr(rho H_A) = E`.
pub fn detmax_state(levels_a: &[f64], energy: f64, tol: f64) -> Result<DensityMatrix> {
    let spec = Spectrum::new(levels_a.to_vec())?;
    let (lo, hi) = (spec.min(), spec.max());
    if !(energy > lo && energy < hi) {
        return Err(domain(format!(
            "energy {energy} must lie strictly between {lo} and {hi}"
        )));
    }
    let da = levels_a.len() as f64;
    if levels_a.len() == 2 {
        let (x, y) = (levels_a[0], levels_a[1]);
        return Ok(DensityMatrix::from_diagonal(&[
            (energy - y) / (x - y),
            (x - energy) / (x - y),
        ]));
    }
    let e_a = spec.arithmetic_mean();
    let diag: Vec<f64> = if energy == e_a {
        vec![1.0 / da; levels_a.len()]
    } else {
        // above the mean the same construction runs on -H
        let sign = if energy < e_a { 1.0 } else { -1.0 };
        let flipped = if sign > 0.0 { spec } else { spec.negated() };
        let e = sign * energy;
        let s = harmonic_shift_solve(&flipped, e, tol)?;
        levels_a
            .iter()
            .map(|&l| (e + s) / da / (sign * l + s))
            .collect()
    };
    Ok(DensityMatrix::from_diagonal(&diag))
}

fn check_qubit_order(e1: f64, e2: f64, energy: f64) -> Result<()> {
    let ok = [e1, e2, energy].iter().all(|x| x.is_finite())
        && e2 < energy
        && energy < 0.5 * (e1 + e2)
        && 0.5 * (e1 + e2) < e1;
    if ok {
        Ok(())
    } else {
        Err(domain(format!(
            "need E2 < E < (E1+E2)/2 < E1, got E1 = {e1}, E2 = {e2}, E = {energy}"
        )))
    }
}

/// Canonical qubit state, ordered as `(E1, E2)`.
pub fn qubit_canonical(e1: f64, e2: f64, energy: f64) -> Result<DensityMatrix> {
    check_qubit_order(e1, e2, energy)?;
    let gap = e1 - e2;
    Ok(DensityMatrix::from_diagonal(&[
        (energy - e2) / gap,
        (e1 - energy) / gap,
    ]))
}

/// `1 - r_z^2 = 4(E1 - E)(E - E2)/(E1 - E2)^2`, the squared radius of the
/// energy disc in the Bloch ball.
pub fn qubit_disc_radius_sq(e1: f64, e2: f64, energy: f64) -> f64 {
    4.0 * (e1 - energy) * (energy - e2) / ((e1 - e2) * (e1 - e2))
}

/// Exact `Prob{||psi^A - rho_c||_1 >= eps}` for a qubit coupled to `dim_b` levels
/// of a trivial bath.
pub fn qubit_exact_tail(e1: f64, e2: f64, energy: f64, dim_b: usize, epsilon: f64) -> Result<f64> {
    check_qubit_order(e1, e2, energy)?;
    check_bath(dim_b)?;
    if !(epsilon >= 0.0) {
        return Err(domain("epsilon must be non-negative"));
    }
    let disc = qubit_disc_radius_sq(e1, e2, energy);
    let x = epsilon * epsilon / disc;
    if x >= 1.0 {
        return Ok(0.0);
    }
    Ok(((dim_b - 1) as f64 * (-x).ln_1p()).exp())
}

/// `exp(-eps^2 (|B|-1) / (1 - r_z^2))`
pub fn qubit_exponential_bound(e1: f64, e2: f64, energy: f64, dim_b: usize, epsilon: f64) -> Result<f64> {
    check_qubit_order(e1, e2, energy)?;
    check_bath(dim_b)?;
    let disc = qubit_disc_radius_sq(e1, e2, energy);
    Ok((-(epsilon * epsilon) * (dim_b - 1) as f64 / disc).exp())
}

fn check_bath(dim_b: usize) -> Result<()> {
    if dim_b < 2 {
        return Err(domain("need |B| >= 2"));
    }
    Ok(())
}

/// `c_B` with `int_{|x|<=1} c_B (1-|x|^2)^{|B|-2} dx = 1`.
pub fn hall_normalization(dim_b: usize) -> Result<f64> {
    check_bath(dim_b)?;
    Ok(1.0 / (2.0 * std::f64::consts::PI * ln_beta(1.5, dim_b as f64 - 1.0).exp()))
}

/// Radial eigenvalue density of a qubit reduced state in the Bloch ball.
pub fn hall_radial_density(dim_b: usize, r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(domain(format!("radius {r} outside [0, 1]")));
    }
    let c = hall_normalization(dim_b)?;
    if dim_b == 2 {
        return Ok(c);
    }
    Ok(c * (1.0 - r * r).powi((dim_b - 2) as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{constants_for, constants_for_at, tail_bound};
    use approx::assert_relative_eq;

    fn example_two(dim_b: usize) -> BipartiteSpectrum {
        BipartiteSpectrum::new(vec![1.0, 2.0, 3.0], vec![0.0; dim_b]).unwrap()
    }

    fn example_two_limit() -> [f64; 3] {
        let r7 = 7f64.sqrt();
        [(5.0 + r7) / 12.0, 2.0 * (4.0 - r7) / 12.0, (-1.0 + r7) / 12.0]
    }

    #[test]
    fn combined_levels_are_a_major() {
        let bs = BipartiteSpectrum::new(vec![0.0, 10.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(bs.combined_levels(), vec![1.0, 2.0, 3.0, 11.0, 12.0, 13.0]);
        assert_eq!(bs.combined().unwrap().dim(), 6);
        assert!(BipartiteSpectrum::new(vec![], vec![1.0]).is_err());
    }

    #[test]
    fn limit_matches_closed_form() {
        for dim_b in [1, 5] {
            let rho = rho_c_limit(&example_two(dim_b), 1.5).unwrap();
            for (got, want) in rho.diagonal().iter().zip(example_two_limit()) {
                assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            }
            assert!((rho.trace() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn finite_n_matches_written_out_form() {
        // diag((1+1/2n)(3/2+s)/(n+1) * n/3 * 1/(k+s))
        let bs = example_two(683);
        let st = rho_c_bipartite(&bs, 1.5, 2.0).unwrap();
        let n = 2049.0;
        let s = st.frame.shift;
        for (k, got) in st.matrix.diagonal().iter().enumerate() {
            let want = (1.0 + 0.5 / n) * (1.5 + s) / (n + 1.0) * n / 3.0 / (k as f64 + 1.0 + s);
            assert_relative_eq!(*got, want, max_relative = 1e-13);
        }
        assert_relative_eq!(st.trace_deviation(), st.analytic_trace_deviation(), epsilon = 1e-12);
    }

    #[test]
    fn single_site_is_near_one() {
        let bath: Vec<f64> = (0..3000).map(|i| 1.0 + i as f64 / 1000.0).collect();
        let bs = BipartiteSpectrum::new(vec![0.0], bath).unwrap();
        let st = rho_c_bipartite(&bs, 2.0, 1.0).unwrap();
        assert_eq!(st.matrix.dim(), 1);
        assert!((st.matrix.trace() - 1.0).abs() < 0.05, "trace {}", st.matrix.trace());
        assert_relative_eq!(st.trace_deviation(), st.analytic_trace_deviation(), epsilon = 1e-12);
    }

    #[test]
    fn constant_bath_gives_detmax_ratios() {
        let bs = BipartiteSpectrum::new(vec![0.5, 1.0, 4.0, 2.0], vec![7.0; 300]).unwrap();
        let st = rho_c_bipartite(&bs, 8.2, 1.0).unwrap();
        let d = st.matrix.diagonal();
        let s = st.frame.shift;
        for i in 0..4 {
            let ratio = d[i] / d[0];
            let want = (7.5 + s) / (7.0 + bs.levels_a[i] + s);
            assert_relative_eq!(ratio, want, max_relative = 1e-13);
        }
    }

    #[test]
    fn delta_by_hand() {
        let k = constants_for(&Spectrum::uniform(vec![1.0, 2.0, 3.0], 2731).unwrap(), 1.5, 2.0).unwrap();
        let n = 8193.0f64;
        let f = &k.frame;
        let r = f.e_prime() / f.e_min();
        let o = 2.0 / n.sqrt() + (2.0 * k.a * n.powf(1.5)).ln() / (2.0 * n);
        let want = (r * (1.0 + 1.0 / n)).sqrt() * (3.0 / (8.0 * n) + 15.0 * (r * o).sqrt());
        assert_relative_eq!(delta_deviation(&k), want, max_relative = 1e-13);
    }

    #[test]
    fn delta_example_two_sweep() {
        let s = Spectrum::new(vec![1.0, 2.0, 3.0]).unwrap();
        for n in [550u64, 1000, 8193, 100_000] {
            let k = constants_for_at(&s, 1.5, 2.0, n).unwrap();
            let d = delta_deviation(&k);
            assert!(d < 58.0 / (n as f64).powf(0.25), "n = {n}, delta = {d}");
        }
        let big = constants_for_at(&s, 1.5, 2.0, 10u64.pow(12)).unwrap();
        assert!(delta_deviation(&big) < 0.1);
    }

    #[test]
    fn reduced_tail_prefactor() {
        let k = constants_for(&Spectrum::uniform(vec![1.0, 2.0, 3.0], 2731).unwrap(), 1.5, 2.0).unwrap();
        let quoted = ConcentrationConstants {
            a: 30830.0,
            ..k.clone()
        };
        let t0 = 1.0 / (4.0 * 8193.0);
        let ratio = reduced_dm_tail(&quoted, 3, t0, 0.0) / (8193f64.powf(1.5) * (4.0 * 8193f64.sqrt()).exp());
        assert_relative_eq!(ratio, 369960.0, max_relative = 1e-10);
        for t in [0.3, 1.2] {
            assert_relative_eq!(reduced_dm_tail(&k, 1, t, 0.1), 2.0 * tail_bound(&k, t, 1.0), max_relative = 1e-13);
            assert_relative_eq!(reduced_dm_tail(&k, 4, t, 0.1), 20.0 * tail_bound(&k, t, 1.0), max_relative = 1e-13);
        }
        assert!(reduced_dm_tail(&k, 3, 0.0, 0.1).is_nan());
    }

    #[test]
    fn detmax_examples() {
        let q = detmax_state(&[1.0, 0.0], 0.25, 1e-14).unwrap();
        assert_eq!(q.diagonal(), vec![0.25, 0.75]);
        let d = detmax_state(&[1.0, 2.0, 3.0], 1.5, 1e-15).unwrap().diagonal();
        for (got, want) in d.iter().zip(example_two_limit()) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(detmax_state(&[1.0, 2.0, 3.0], 3.0, 1e-12).is_err());
        assert!(detmax_state(&[1.0, 2.0, 3.0], 0.5, 1e-12).is_err());
    }

    #[test]
    fn detmax_constraints_either_side_of_mean() {
        let levels = [0.3, 1.7, 2.2, 5.0];
        for e in [0.5, 1.0, 2.3, 2.8, 4.0] {
            let d = detmax_state(&levels, e, 1e-14).unwrap().diagonal();
            let tr: f64 = d.iter().sum();
            let en: f64 = d.iter().zip(levels).map(|(p, l)| p * l).sum();
            assert!((tr - 1.0).abs() < 1e-12 && (en - e).abs() < 1e-12, "E = {e}");
            assert!(d.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn detmax_at_mean_is_uniform() {
        let d = detmax_state(&[1.0, 2.0, 6.0], 3.0, 1e-12).unwrap().diagonal();
        assert_eq!(d, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn qubit_examples() {
        assert_eq!(qubit_canonical(1.0, 0.0, 0.25).unwrap().diagonal(), vec![0.25, 0.75]);
        let g = qubit_canonical(1.0, 0.0, 1e-13).unwrap().diagonal();
        assert!(g[0] < 1e-12 && (g[1] - 1.0).abs() < 1e-12);
        assert!(qubit_canonical(1.0, 0.0, 0.5).is_err());
        assert!(qubit_canonical(0.0, 1.0, 0.25).is_err());
        for (e1, e2, e) in [(1.0, 0.0, 0.25), (3.0, 1.0, 1.6)] {
            assert_eq!(
                qubit_canonical(e1, e2, e).unwrap(),
                detmax_state(&[e1, e2], e, 1e-14).unwrap()
            );
        }
    }

    #[test]
    fn qubit_tail_values() {
        assert_eq!(qubit_exact_tail(1.0, 0.0, 0.25, 100, 0.0).unwrap(), 1.0);
        let want = (1.0f64 - 0.04 / 0.75).powi(99);
        assert_relative_eq!(qubit_exact_tail(1.0, 0.0, 0.25, 100, 0.2).unwrap(), want, max_relative = 1e-13);
        assert_eq!(qubit_exact_tail(1.0, 0.0, 0.25, 100, 0.9).unwrap(), 0.0);
        for i in 0..40 {
            let eps = i as f64 * 0.025;
            let exact = qubit_exact_tail(3.0, 1.0, 1.6, 50, eps).unwrap();
            assert!(exact <= qubit_exponential_bound(3.0, 1.0, 1.6, 50, eps).unwrap());
        }
    }

    #[test]
    fn hall_density_normalization() {
        assert_relative_eq!(hall_normalization(2).unwrap(), 3.0 / (4.0 * std::f64::consts::PI), max_relative = 1e-14);
        assert_eq!(hall_radial_density(2, 0.3).unwrap(), hall_radial_density(2, 1.0).unwrap());
        assert_eq!(hall_radial_density(7, 1.0).unwrap(), 0.0);
        assert!(hall_radial_density(7, 1.1).is_err());
        assert!(hall_radial_density(1, 0.5).is_err());
        for b in [2usize, 5, 50] {
            // composite Simpson on 4 pi r^2 rho(r)
            let m = 20_000;
            let h = 1.0 / m as f64;
            let g = |r: f64| 4.0 * std::f64::consts::PI * r * r * hall_radial_density(b, r).unwrap();
            let mut acc = g(0.0) + g(1.0);
            for i in 1..m {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
            }
            assert_relative_eq!(acc * h / 3.0, 1.0, max_relative = 1e-10);
        }
    }
}
