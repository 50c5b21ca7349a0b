//! Random state vectors: the Gaussian approximate sampler for the mean-energy
//! ensemble, uniform points on the complex unit sphere, and an exact
//! small-dimension oracle for the geometric measure on the energy manifold.
//!
//! # Oracle construction
//!
//! For a uniform state on the unit sphere of `C^n` the level occupations
//! `p_j = sum_{k in level j} |psi_k|^2` are Dirichlet distributed with the
//! degeneracies as parameters, and given the occupations the amplitudes inside
//! each degenerate block are uniform on a sphere of radius `sqrt(p_j)`. The
//! oracle therefore draws occupations, keeps those whose energy lies within
//! `eta` of the target and expands only the accepted ones to full vectors.
//!
//! Occupations come from independent `Gamma(d_j, rate beta_j)` variables,
//! normalized. With `beta_j = 1` this is exactly the uniform-sphere shell
//! rejection. The tilted proposal uses `beta_j = E'_j / E'` at the harmonic
//! shift, which centers the proposal on the target energy; its density
//! relative to the uniform sphere is `(sum_j beta_j p_j)^{-n}`, a factor that
//! equals one on the manifold and is undone by the importance weight. Every
//! accepted state also carries the shell-to-surface factor
//! `||P_S grad E||`, so weighted averages estimate expectations under the
//! geometric (Hausdorff) measure as `eta -> 0`.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::{par_blocks, Domain, RngSpec, BLOCK_LEN};
use crate::spectrum::{harmonic_shift_solve, EnergyFrame, ShiftKind, Spectrum, DEFAULT_SHIFT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(domain("state has non-finite amplitudes"));
        }
        let v = Self { amplitudes };
        if !(v.norm_sqr() > 0.0) {
            return Err(domain("state has zero norm"));
        }
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> StateVector {
        let s = self.norm_sqr().sqrt().recip();
        StateVector {
            amplitudes: self.amplitudes.iter().map(|z| z * s).collect(),
        }
    }

    /// `<psi|H|psi>` for `H` diagonal with the expanded spectrum.
    pub fn energy(&self, spectrum: &Spectrum) -> Result<f64> {
        check_dim(spectrum, self.dim())?;
        Ok(level_sums(spectrum, &self.amplitudes)
            .iter()
            .zip(spectrum.levels())
            .map(|(p, e)| p * e)
            .sum())
    }
}

fn check_dim(spectrum: &Spectrum, found: usize) -> Result<()> {
    if spectrum.dim() != found as u64 {
        return Err(Error::DimensionMismatch {
            expected: spectrum.dim() as usize,
            found,
        });
    }
    Ok(())
}

/// Per-level sums of `|psi_k|^2`.
pub fn level_sums(spectrum: &Spectrum, amps: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(spectrum.levels().len());
    let mut k = 0usize;
    for &d in spectrum.degeneracies() {
        let d = d as usize;
        out.push(amps[k..k + d].iter().map(|z| z.norm_sqr()).sum());
        k += d;
    }
    out
}

/// `2 sqrt(sum_j E_j^2 p_j - (sum_j E_j p_j)^2)` for occupations summing to
/// one, evaluated in centered form.
pub fn occupation_gradient_norm(levels: &[f64], occupations: &[f64]) -> f64 {
    let total: f64 = occupations.iter().sum();
    let mean = levels.iter().zip(occupations).map(|(e, p)| e * p).sum::<f64>() / total;
    let var = levels
        .iter()
        .zip(occupations)
        .map(|(e, p)| p * (e - mean) * (e - mean))
        .sum::<f64>()
        / total;
    2.0 * var.max(0.0).sqrt()
}

/// Norm of the energy gradient projected onto the tangent space of the sphere.
pub fn gradient_norm(spectrum: &Spectrum, state: &StateVector) -> Result<f64> {
    check_dim(spectrum, state.dim())?;
    let norm = state.norm_sqr();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(domain(format!("state is not normalized (|psi|^2 = {norm})")));
    }
    Ok(occupation_gradient_norm(
        spectrum.levels(),
        &level_sums(spectrum, &state.amplitudes),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    Gaussian,
    Sphere,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proposal {
    #[default]
    Uniform,
    Tilted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowAcceptance {
    pub accepted: usize,
    pub requested: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMeta {
    pub mode: SamplerMode,
    pub dim: usize,
    pub energy: Option<f64>,
    pub shift: Option<f64>,
    /// Whether every state has unit norm.
    pub normalized: bool,
    pub eta: Option<f64>,
    pub proposal: Option<Proposal>,
    pub draws: Option<u64>,
    pub acceptance_rate: Option<f64>,
    pub low_acceptance: Option<LowAcceptance>,
}

impl BatchMeta {
    pub fn require_full(&self) -> Result<()> {
        match self.low_acceptance {
            Some(l) => Err(Error::LowAcceptance {
                accepted: l.accepted,
                requested: l.requested,
                rate: l.rate,
            }),
            None => Ok(()),
        }
    }

    fn plain(mode: SamplerMode, dim: usize, normalized: bool) -> Self {
        Self {
            mode,
            dim,
            energy: None,
            shift: None,
            normalized,
            eta: None,
            proposal: None,
            draws: None,
            acceptance_rate: None,
            low_acceptance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub states: Vec<StateVector>,
    pub weights: Option<Vec<f64>>,
    pub rng_spec: RngSpec,
    pub meta: BatchMeta,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.meta.dim
    }

    /// Error if the sampler stopped short of the requested count.
    pub fn require_full(&self) -> Result<()> {
        self.meta.require_full()
    }

    /// Copy with every state scaled to unit norm.
    pub fn normalized(&self) -> SampleBatch {
        SampleBatch {
            states: self.states.par_iter().map(StateVector::normalized).collect(),
            weights: self.weights.clone(),
            rng_spec: self.rng_spec,
            meta: BatchMeta {
                normalized: true,
                ..self.meta.clone()
            },
        }
    }
}

/// A generator of i.i.d. states, consumed block by block.
pub trait StateSource: Sync {
    fn dim(&self) -> usize;
    fn domain(&self) -> Domain;
    fn fill(&self, rng: &mut ChaCha8Rng, out: &mut [Complex64]);
}

/// Independent complex Gaussians with per-component standard deviation
/// `sqrt(E' / (2 n E'_k))`.
#[derive(Debug, Clone)]
pub struct GaussianSource {
    sigmas: Vec<f64>,
}

impl GaussianSource {
    pub fn new(frame: &EnergyFrame) -> Result<Self> {
        if frame.kind != ShiftKind::Harmonic {
            return Err(domain("the Gaussian sampler needs a frame with the harmonic shift"));
        }
        let n = frame.n_f64();
        let e_p = frame.e_prime();
        let mut sigmas = Vec::with_capacity(frame.base.dim() as usize);
        for (&e, &d) in frame.base.levels().iter().zip(frame.base.degeneracies()) {
            let ek = e + frame.shift;
            if !(ek > 0.0 && e_p > 0.0) {
                return Err(domain("shifted levels must be positive"));
            }
            let s = (e_p / (2.0 * n * ek)).sqrt();
            sigmas.extend(std::iter::repeat_n(s, d as usize));
        }
        Ok(Self { sigmas })
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }
}

impl StateSource for GaussianSource {
    fn dim(&self) -> usize {
        self.sigmas.len()
    }

    fn domain(&self) -> Domain {
        Domain::Gaussian
    }

    fn fill(&self, rng: &mut ChaCha8Rng, out: &mut [Complex64]) {
        for (z, &s) in out.iter_mut().zip(&self.sigmas) {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z = Complex64::new(s * re, s * im);
        }
    }
}

/// Uniform points on the unit sphere of `C^n`.
#[derive(Debug, Clone, Copy)]
pub struct SphereSource {
    pub n: usize,
}

impl StateSource for SphereSource {
    fn dim(&self) -> usize {
        self.n
    }

    fn domain(&self) -> Domain {
        Domain::Sphere
    }

    fn fill(&self, rng: &mut ChaCha8Rng, out: &mut [Complex64]) {
        fill_unit(rng, out, 1.0);
    }
}

fn fill_unit(rng: &mut ChaCha8Rng, out: &mut [Complex64], radius: f64) {
    let mut norm = 0.0;
    for z in out.iter_mut() {
        *z = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        norm += z.norm_sqr();
    }
    let s = radius / norm.sqrt();
    for z in out.iter_mut() {
        *z *= s;
    }
}

/// Fold the states of each fixed-size block into an accumulator. Returns one
/// accumulator per block, in block order; the states seen are the same as
/// those produced by [`map_states`] for the same arguments.
pub fn fold_state_blocks<S, A, I, F>(source: &S, count: usize, rng: RngSpec, init: I, step: F) -> Vec<A>
where
    S: StateSource,
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &[Complex64]) + Sync,
{
    let dim = source.dim();
    par_blocks(count, BLOCK_LEN, |b, range| {
        let mut r = rng.block_rng(source.domain(), b);
        let mut buf = vec![Complex64::new(0.0, 0.0); dim];
        let mut acc = init();
        for _ in range {
            source.fill(&mut r, &mut buf);
            step(&mut acc, &buf);
        }
        vec![acc]
    })
}

/// Apply `f` to `count` states from `source` without keeping them. Results are
/// in draw order and do not depend on the thread pool size.
pub fn map_states<S, T, F>(source: &S, count: usize, rng: RngSpec, f: F) -> Vec<T>
where
    S: StateSource,
    T: Send,
    F: Fn(&[Complex64]) -> T + Sync,
{
    fold_state_blocks(source, count, rng, Vec::new, |acc: &mut Vec<T>, buf| acc.push(f(buf)))
        .into_iter()
        .flatten()
        .collect()
}

fn collect_states<S: StateSource>(source: &S, count: usize, rng: RngSpec) -> Vec<StateVector> {
    map_states(source, count, rng, |buf| StateVector {
        amplitudes: buf.to_vec(),
    })
}

pub fn sample_gaussian_ensemble(frame: &EnergyFrame, count: usize, rng: RngSpec) -> Result<SampleBatch> {
    let source = GaussianSource::new(frame)?;
    let mut meta = BatchMeta::plain(SamplerMode::Gaussian, source.dim(), false);
    meta.energy = Some(frame.energy);
    meta.shift = Some(frame.shift);
    Ok(SampleBatch {
        states: collect_states(&source, count, rng),
        weights: None,
        rng_spec: rng,
        meta,
    })
}

pub fn sample_sphere(n: usize, count: usize, rng: RngSpec) -> Result<SampleBatch> {
    if n == 0 {
        return Err(domain("sphere dimension must be positive"));
    }
    Ok(SampleBatch {
        states: collect_states(&SphereSource { n }, count, rng),
        weights: None,
        rng_spec: rng,
        meta: BatchMeta::plain(SamplerMode::Sphere, n, true),
    })
}

/// `0.02 (E_max - E_min) / sqrt(n)`
pub fn default_eta(spectrum: &Spectrum) -> f64 {
    0.02 * (spectrum.max() - spectrum.min()) / (spectrum.dim() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub eta: f64,
    pub max_draws: u64,
    pub proposal: Proposal,
}

impl OracleConfig {
    pub fn for_spectrum(spectrum: &Spectrum, count: usize) -> Self {
        Self {
            eta: default_eta(spectrum),
            max_draws: 1000 * count as u64,
            proposal: Proposal::Uniform,
        }
    }
}

/// Accepted level occupations with their importance weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationBatch {
    /// One row per accepted draw, one column per distinct level.
    pub occupations: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub rng_spec: RngSpec,
    pub meta: BatchMeta,
}

impl OccupationBatch {
    pub fn require_full(&self) -> Result<()> {
        self.meta.require_full()
    }
}

const DRAW_BLOCK: usize = 1024;
const ROUND_BLOCKS: usize = 64;

struct Tilt {
    betas: Vec<f64>,
    shift: Option<f64>,
}

fn tilt(spectrum: &Spectrum, energy: f64, proposal: Proposal) -> Result<Tilt> {
    let j = spectrum.levels().len();
    let e_a = spectrum.arithmetic_mean();
    if proposal == Proposal::Uniform || energy == e_a {
        return Ok(Tilt {
            betas: vec![1.0; j],
            shift: None,
        });
    }
    // above the mean the tilt is built on -H
    let sign = if energy < e_a { 1.0 } else { -1.0 };
    let base = if sign > 0.0 { spectrum.clone() } else { spectrum.negated() };
    let s = harmonic_shift_solve(&base, sign * energy, DEFAULT_SHIFT_TOL)?;
    let e_p = sign * energy + s;
    Ok(Tilt {
        betas: spectrum.levels().iter().map(|&l| (sign * l + s) / e_p).collect(),
        shift: Some(s),
    })
}

/// Draw occupations until `count` are accepted or `max_draws` is reached.
pub fn oracle_occupations(
    spectrum: &Spectrum,
    energy: f64,
    cfg: &OracleConfig,
    count: usize,
    rng: RngSpec,
) -> Result<OccupationBatch> {
    if spectrum.all_equal() {
        return if energy == spectrum.min() {
            Err(Error::DegenerateManifold)
        } else {
            Err(domain("energy differs from the single level"))
        };
    }
    if !(energy > spectrum.min() && energy < spectrum.max()) {
        return Err(domain(format!(
            "energy {energy} must lie strictly between {} and {}",
            spectrum.min(),
            spectrum.max()
        )));
    }
    if !(cfg.eta > 0.0) {
        return Err(domain("shell width must be positive"));
    }
    let t = tilt(spectrum, energy, cfg.proposal)?;
    let gammas: Vec<Gamma<f64>> = spectrum
        .degeneracies()
        .iter()
        .zip(&t.betas)
        .map(|(&d, &b)| Gamma::new(d as f64, 1.0 / b).map_err(|e| domain(e.to_string())))
        .collect::<Result<_>>()?;
    let levels = spectrum.levels();
    let n = spectrum.dim() as f64;
    let tilted = t.shift.is_some();

    let mut occupations: Vec<Vec<f64>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut draws: u64 = 0;
    let mut block: u64 = 0;
    while occupations.len() < count && draws < cfg.max_draws {
        let sizes: Vec<(u64, usize)> = (0..ROUND_BLOCKS)
            .map_while(|i| {
                let start = draws + (i * DRAW_BLOCK) as u64;
                (start < cfg.max_draws).then(|| {
                    let len = (cfg.max_draws - start).min(DRAW_BLOCK as u64) as usize;
                    (block + i as u64, len)
                })
            })
            .collect();
        let round: Vec<Vec<(Vec<f64>, f64)>> = sizes
            .par_iter()
            .map(|&(b, len)| {
                let mut r = rng.block_rng(Domain::OracleDraw, b);
                let mut x = vec![0.0; levels.len()];
                let mut out = Vec::new();
                for _ in 0..len {
                    let mut total = 0.0;
                    for (xj, g) in x.iter_mut().zip(&gammas) {
                        *xj = g.sample(&mut r);
                        total += *xj;
                    }
                    let e: f64 = x.iter().zip(levels).map(|(xj, l)| xj * l).sum::<f64>() / total;
                    if (e - energy).abs() < cfg.eta {
                        let p: Vec<f64> = x.iter().map(|xj| xj / total).collect();
                        let mut w = occupation_gradient_norm(levels, &p);
                        if tilted {
                            let ratio: f64 = p.iter().zip(&t.betas).map(|(pj, b)| pj * b).sum();
                            w *= (n * ratio.ln()).exp();
                        }
                        out.push((p, w));
                    }
                }
                out
            })
            .collect();
        for (_, len) in &sizes {
            draws += *len as u64;
        }
        block += sizes.len() as u64;
        for (p, w) in round.into_iter().flatten() {
            occupations.push(p);
            weights.push(w);
        }
    }

    let accepted_total = occupations.len();
    occupations.truncate(count);
    weights.truncate(count);
    let rate = if draws > 0 {
        accepted_total as f64 / draws as f64
    } else {
        0.0
    };
    if occupations.is_empty() && count > 0 {
        return Err(Error::LowAcceptance {
            accepted: 0,
            requested: count,
            rate,
        });
    }
    let mut meta = BatchMeta::plain(SamplerMode::Oracle, spectrum.dim() as usize, true);
    meta.energy = Some(energy);
    meta.shift = t.shift;
    meta.eta = Some(cfg.eta);
    meta.proposal = Some(cfg.proposal);
    meta.draws = Some(draws);
    meta.acceptance_rate = Some(rate);
    if occupations.len() < count {
        meta.low_acceptance = Some(LowAcceptance {
            accepted: occupations.len(),
            requested: count,
            rate,
        });
    }
    Ok(OccupationBatch {
        occupations,
        weights,
        rng_spec: rng,
        meta,
    })
}

/// Apply `f` to the full state vector of every accepted occupation without
/// keeping the vectors. Each state is a uniform direction inside each
/// degenerate block, scaled to `sqrt(p_j)`.
pub fn map_expanded<T, F>(spectrum: &Spectrum, batch: &OccupationBatch, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[Complex64]) -> T + Sync,
{
    let degs = spectrum.degeneracies();
    let dim = spectrum.dim() as usize;
    batch
        .occupations
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut r = batch.rng_spec.block_rng(Domain::OracleExpand, i as u64);
            let mut amps = vec![Complex64::new(0.0, 0.0); dim];
            let mut k = 0;
            for (&d, &pj) in degs.iter().zip(p) {
                let d = d as usize;
                fill_unit(&mut r, &mut amps[k..k + d], pj.sqrt());
                k += d;
            }
            f(&amps)
        })
        .collect()
}

pub fn expand_occupations(spectrum: &Spectrum, batch: &OccupationBatch) -> SampleBatch {
    SampleBatch {
        states: map_expanded(spectrum, batch, |a| StateVector { amplitudes: a.to_vec() }),
        weights: Some(batch.weights.clone()),
        rng_spec: batch.rng_spec,
        meta: batch.meta.clone(),
    }
}

/// Shell rejection from the uniform sphere with gradient-norm weights.
pub fn oracle_manifold_sample(
    spectrum: &Spectrum,
    energy: f64,
    eta: f64,
    count: usize,
    max_draws: u64,
    rng: RngSpec,
) -> Result<SampleBatch> {
    let cfg = OracleConfig {
        eta,
        max_draws,
        proposal: Proposal::Uniform,
    };
    oracle_manifold_sample_with(spectrum, energy, &cfg, count, rng)
}

pub fn oracle_manifold_sample_with(
    spectrum: &Spectrum,
    energy: f64,
    cfg: &OracleConfig,
    count: usize,
    rng: RngSpec,
) -> Result<SampleBatch> {
    let occ = oracle_occupations(spectrum, energy, cfg, count, rng)?;
    Ok(expand_occupations(spectrum, &occ))
}
