//! Concentration constants, the tail bound and the median window.
//!
//! All exponentials are formed in log space; [`tail_bound`] only
//! exponentiates at the end and may legitimately return values far above one
//! (or `+inf` for very large `n`). Clamping is left to report rendering.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::spectrum::{concentration_shift_solve_at, EnergyFrame, Spectrum, DEFAULT_SHIFT_TOL};

/// `{0.5, 1.0, ..., 8.0}`.
pub fn default_epsilon_grid() -> Vec<f64> {
    (1..=16).map(|k| 0.5 * k as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowCheck {
    pub ok: bool,
    /// `E_A - pi (E_max - E_min) / sqrt(2(n-1)) - E`
    pub margin: f64,
}

/// Energy window check at the spectrum's own dimension.
pub fn check_energy_window(spectrum: &Spectrum, energy: f64) -> Result<WindowCheck> {
    check_energy_window_at(spectrum, energy, spectrum.dim())
}

pub fn check_energy_window_at(spectrum: &Spectrum, energy: f64, n: u64) -> Result<WindowCheck> {
    if n < 2 {
        return Err(domain("energy window needs n >= 2"));
    }
    let gap = PI * (spectrum.max() - spectrum.min()) / (2.0 * (n as f64 - 1.0)).sqrt();
    let margin = spectrum.arithmetic_mean() - gap - energy;
    Ok(WindowCheck {
        ok: margin >= 0.0 && energy > spectrum.min(),
        margin,
    })
}

/// Map an energy above the arithmetic mean to the mirrored problem
/// `H -> -H`, `E -> -E`.
pub fn flip_for_high_energy(spectrum: &Spectrum, energy: f64) -> Result<(Spectrum, f64)> {
    let e_a = spectrum.arithmetic_mean();
    if !(energy > e_a && energy < spectrum.max()) {
        return Err(domain(format!(
            "energy {energy} outside (E_A, E_max) = ({e_a}, {})",
            spectrum.max()
        )));
    }
    Ok((spectrum.negated(), -energy))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationConstants {
    pub frame: EnergyFrame,
    pub epsilon: f64,
    pub a: f64,
    pub c: f64,
    pub n: u64,
}

/// Flat record of the constants and the frame quantities behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsRecord {
    pub n: u64,
    pub energy: f64,
    pub epsilon: f64,
    pub shift: f64,
    pub e_prime: f64,
    pub e_prime_min: f64,
    pub e_prime_max: f64,
    pub e_prime_harm: f64,
    pub e_prime_quad: f64,
    pub a: f64,
    pub c: f64,
    pub ln_a: f64,
    pub finite_size_term: f64,
}

impl ConcentrationConstants {
    pub fn record(&self) -> ConstantsRecord {
        let f = &self.frame;
        ConstantsRecord {
            n: self.n,
            energy: f.energy,
            epsilon: self.epsilon,
            shift: f.shift,
            e_prime: f.e_prime(),
            e_prime_min: f.e_min(),
            e_prime_max: f.e_max(),
            e_prime_harm: f.e_harm(),
            e_prime_quad: f.e_quad(),
            a: self.a,
            c: self.c,
            ln_a: self.a.ln(),
            finite_size_term: self.finite_size_term(),
        }
    }

    pub fn n_f64(&self) -> f64 {
        self.n as f64
    }

    /// `eps/sqrt(n) + ln(2 a n^{3/2}) / (2n)`, the O(n^{-1/2}) term shared by
    /// the median window and the reduced-state deviation.
    pub fn finite_size_term(&self) -> f64 {
        let n = self.n_f64();
        self.epsilon / n.sqrt() + ((2.0 * self.a).ln() + 1.5 * n.ln()) / (2.0 * n)
    }
}

/// `E'/E'_Q` at a frame; `a > 0` exactly when epsilon exceeds it.
pub fn required_epsilon(frame: &EnergyFrame) -> f64 {
    frame.e_prime() / frame.e_quad()
}

/// Concentration constants at the spectrum's own dimension.
pub fn constants_for(spectrum: &Spectrum, energy: f64, epsilon: f64) -> Result<ConcentrationConstants> {
    constants_for_at(spectrum, energy, epsilon, spectrum.dim())
}

/// Concentration constants with the spectrum read as level frequencies of an
/// `n`-dimensional system.
pub fn constants_for_at(
    spectrum: &Spectrum,
    energy: f64,
    epsilon: f64,
    n: u64,
) -> Result<ConcentrationConstants> {
    let window = check_energy_window_at(spectrum, energy, n)?;
    if !window.ok {
        return Err(domain(format!(
            "energy {energy} fails the window check (margin {})",
            window.margin
        )));
    }
    let frame = concentration_shift_solve_at(spectrum, energy, epsilon, n, DEFAULT_SHIFT_TOL)?;
    let e_p = frame.e_prime();
    let ratio = e_p / (epsilon * frame.e_quad());
    let denom = 1.0 - ratio * ratio;
    if !(denom > 0.0) {
        return Err(Error::InfeasibleEpsilon {
            epsilon,
            required: required_epsilon(&frame),
            min_feasible: min_feasible_epsilon(spectrum, energy, epsilon, n),
        });
    }
    let c = 3.0 * frame.e_min() / (32.0 * e_p);
    let a = 3040.0 * frame.e_max().powi(2) / (e_p * e_p * denom);
    Ok(ConcentrationConstants {
        frame,
        epsilon,
        a,
        c,
        n,
    })
}

/// Smallest epsilon above `from` for which `a > 0`, located by doubling
/// then bisection on `eps - E'(eps)/E'_Q(eps)`.
fn min_feasible_epsilon(spectrum: &Spectrum, energy: f64, from: f64, n: u64) -> Option<f64> {
    let gap = |eps: f64| -> Option<f64> {
        let frame = concentration_shift_solve_at(spectrum, energy, eps, n, DEFAULT_SHIFT_TOL).ok()?;
        Some(eps - required_epsilon(&frame))
    };
    let mut lo = from;
    let mut hi = from.max(1e-3) * 2.0;
    loop {
        if gap(hi)? > 0.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 {
            return None;
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Natural log of `a n^{3/2} exp(-c n (t - 1/(4n))^2 + 2 eps sqrt(n))`.
pub fn ln_tail_bound(k: &ConcentrationConstants, t: f64) -> f64 {
    let n = k.n_f64();
    let d = t - 1.0 / (4.0 * n);
    k.a.ln() + 1.5 * n.ln() - k.c * n * d * d + 2.0 * k.epsilon * n.sqrt()
}

/// Upper bound on `Prob{|f - median| > lambda t}` for lambda-Lipschitz `f`.
///
/// Lambda only rescales the event, so the value does not depend on it. The
/// raw formula value is returned; it is `NaN` for `t < 0` or `lambda <= 0`.
pub fn tail_bound(k: &ConcentrationConstants, t: f64, lambda: f64) -> f64 {
    if !(t >= 0.0 && lambda > 0.0) {
        return f64::NAN;
    }
    ln_tail_bound(k, t).exp()
}

/// Pick the grid point with the smallest bound at `t`. Infeasible points are
/// skipped; ties resolve to the earliest grid entry.
pub fn optimize_epsilon(
    spectrum: &Spectrum,
    energy: f64,
    t: f64,
    grid: &[f64],
) -> Result<ConcentrationConstants> {
    optimize_epsilon_at(spectrum, energy, t, grid, spectrum.dim())
}

pub fn optimize_epsilon_at(
    spectrum: &Spectrum,
    energy: f64,
    t: f64,
    grid: &[f64],
    n: u64,
) -> Result<ConcentrationConstants> {
    if grid.is_empty() {
        return Err(domain("empty epsilon grid"));
    }
    let evaluated: Vec<Option<(f64, ConcentrationConstants)>> = grid
        .par_iter()
        .map(|&eps| {
            constants_for_at(spectrum, energy, eps, n)
                .ok()
                .map(|k| (ln_tail_bound(&k, t), k))
        })
        .collect();
    let mut best: Option<(f64, ConcentrationConstants)> = None;
    for (lb, k) in evaluated.into_iter().flatten() {
        if best.as_ref().is_none_or(|(b, _)| lb < *b) {
            best = Some((lb, k));
        }
    }
    best.map(|(_, k)| k).ok_or(Error::NoFeasibleEpsilon {
        tried: grid.to_vec(),
    })
}

/// Half-width of the window around the ellipsoid average that contains the
/// median of a `lambda_n`-Lipschitz function.
pub fn median_window(k: &ConcentrationConstants, lambda_n: f64) -> f64 {
    let n = k.n_f64();
    let f = &k.frame;
    lambda_n * (3.0 / (8.0 * n) + 15.0 * (f.e_prime() / f.e_min() * k.finite_size_term()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidAxis {
    pub radius: f64,
    /// Number of complex directions sharing this radius.
    pub multiplicity: u64,
}

/// The full ellipsoid `<z|H'|z> <= E'(1 + 1/(2n))`, one axis per run of
/// equal levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub axes: Vec<EllipsoidAxis>,
}

impl Ellipsoid {
    /// One radius per complex dimension.
    pub fn radii(&self) -> Vec<f64> {
        self.axes
            .iter()
            .flat_map(|a| std::iter::repeat_n(a.radius, a.multiplicity as usize))
            .collect()
    }

    pub fn max_radius(&self) -> f64 {
        self.axes.iter().map(|a| a.radius).fold(0.0, f64::max)
    }

    pub fn min_radius(&self) -> f64 {
        self.axes.iter().map(|a| a.radius).fold(f64::INFINITY, f64::min)
    }
}

pub fn ellipsoid_for(frame: &EnergyFrame) -> Ellipsoid {
    let n = frame.n_f64();
    let scale = frame.e_prime() * (1.0 + 1.0 / (2.0 * n));
    let axes = frame
        .base
        .levels()
        .iter()
        .zip(frame.base.degeneracies())
        .map(|(&e, &d)| EllipsoidAxis {
            radius: (scale / (e + frame.shift)).sqrt(),
            multiplicity: d,
        })
        .collect();
    Ellipsoid { axes }
}
