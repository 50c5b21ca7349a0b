//! Monte Carlo harnesses comparing sampled ensembles with the analytic results.
//!
//! Every harness returns an [`ExperimentReport`]: a list of measured quantities,
//! each paired with an analytic reference and a pass rule, or explicitly
//! without a reference. Standard errors come from 32 contiguous sub-batches.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::function::factorial::binomial;

use crate::bounds::{constants_for, ln_tail_bound, tail_bound};
use crate::canonical::{delta_deviation, rho_c_bipartite, BipartiteSpectrum};
use crate::density::DensityMatrix;
use crate::error::{domain, Error, Result};
use crate::rng::{par_blocks, RngSpec, BLOCK_LEN};
use crate::sampler::{
    default_eta, fold_state_blocks, level_sums, map_expanded, map_states, oracle_occupations,
    GaussianSource, OracleConfig, Proposal, SampleBatch, SamplerMode, StateSource, StateVector,
};
use crate::spectrum::{harmonic_frame, harmonic_shift_solve, EnergyFrame, Spectrum, DEFAULT_SHIFT_TOL};
use crate::stats::{batch_mean, batch_variance, weighted_median, Estimate, DEFAULT_GROUPS};

pub const DEFAULT_SIGMAS: f64 = 5.0;

/// Pass rule for a measured value against its reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Check {
    /// No analytic reference.
    None,
    WithinSigmas { sigmas: f64 },
    Relative { tol: f64 },
    Absolute { tol: f64 },
    AtLeast { sigmas: f64 },
    AtMost { sigmas: f64 },
    WithinFactor { factor: f64 },
}

impl Check {
    fn evaluate(&self, value: f64, se: Option<f64>, reference: Option<f64>) -> Option<bool> {
        let r = reference?;
        let se = se.unwrap_or(0.0);
        Some(match *self {
            Check::None => return None,
            Check::WithinSigmas { sigmas } => (value - r).abs() <= sigmas * se,
            Check::Relative { tol } => (value - r).abs() <= tol * r.abs(),
            Check::Absolute { tol } => (value - r).abs() <= tol,
            Check::AtLeast { sigmas } => value >= r - sigmas * se,
            Check::AtMost { sigmas } => value <= r + sigmas * se,
            Check::WithinFactor { factor } => r > 0.0 && value >= r / factor && value <= r * factor,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub name: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub reference: Option<f64>,
    pub check: Check,
    pub pass: Option<bool>,
}

impl Quantity {
    pub fn new(
        name: impl Into<String>,
        value: f64,
        std_error: Option<f64>,
        reference: Option<f64>,
        check: Check,
    ) -> Self {
        let pass = check.evaluate(value, std_error, reference);
        Self {
            name: name.into(),
            value,
            std_error,
            reference,
            check,
            pass,
        }
    }

    pub fn estimate(name: impl Into<String>, est: Estimate, reference: f64, check: Check) -> Self {
        Self::new(name, est.value, Some(est.std_error), Some(reference), check)
    }

    pub fn unreferenced(name: impl Into<String>, value: f64, std_error: Option<f64>) -> Self {
        Self::new(name, value, std_error, None, Check::None)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportInputs {
    pub spectrum_digest: String,
    pub energy: Option<f64>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub stream: Option<u32>,
    pub count: Option<usize>,
    pub params: BTreeMap<String, f64>,
}

impl ReportInputs {
    fn new(digest: String, energy: f64, count: usize, rng: Option<RngSpec>) -> Self {
        Self {
            spectrum_digest: digest,
            energy: Some(energy),
            seed: rng.map(|r| r.seed),
            stream: rng.map(|r| r.stream),
            count: Some(count),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub inputs: ReportInputs,
    pub quantities: Vec<Quantity>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    fn new(name: &str, inputs: ReportInputs) -> Self {
        Self {
            name: name.to_string(),
            inputs,
            quantities: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn push(&mut self, q: Quantity) {
        self.quantities.push(q);
    }

    /// True when no checked quantity failed.
    pub fn passed(&self) -> bool {
        self.quantities.iter().all(|q| q.pass != Some(false))
    }

    pub fn failures(&self) -> Vec<&Quantity> {
        self.quantities.iter().filter(|q| q.pass == Some(false)).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Quantity> {
        self.quantities.iter().find(|q| q.name == name)
    }
}

/// SHA-256 of the compact JSON encoding.
pub fn digest_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    hex::encode(Sha256::digest(&bytes))
}

pub fn spectrum_digest(spectrum: &Spectrum) -> String {
    digest_json(spectrum)
}

// ---------------------------------------------------------------------------
// reduced states

/// `Tr_B |psi><psi| / <psi|psi>` with basis index `i * dim_b + l`.
pub fn partial_trace_normalized(amps: &[Complex64], dim_a: usize, dim_b: usize) -> DMatrix<Complex64> {
    let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    DMatrix::from_fn(dim_a, dim_a, |i, j| {
        let row_i = &amps[i * dim_b..(i + 1) * dim_b];
        let row_j = &amps[j * dim_b..(j + 1) * dim_b];
        row_i.iter().zip(row_j).map(|(a, b)| a * b.conj()).sum::<Complex64>() / norm
    })
}

fn check_split(dim: usize, dim_a: usize, dim_b: usize) -> Result<()> {
    if dim_a == 0 || dim_b == 0 || dim_a * dim_b != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: dim_a * dim_b,
        });
    }
    Ok(())
}

/// Weighted average of the normalized reduced states of a batch.
pub fn estimate_reduced_dm(batch: &SampleBatch, dim_a: usize, dim_b: usize) -> Result<DensityMatrix> {
    if batch.is_empty() {
        return Err(domain("empty batch"));
    }
    check_split(batch.dim(), dim_a, dim_b)?;
    let w = |i: usize| batch.weights.as_ref().map_or(1.0, |w| w[i]);
    let parts = par_blocks(batch.len(), BLOCK_LEN, |_, range| {
        let mut acc = DMatrix::<Complex64>::zeros(dim_a, dim_a);
        let mut total = 0.0;
        for i in range {
            let rho = partial_trace_normalized(&batch.states[i].amplitudes, dim_a, dim_b);
            acc += rho * Complex64::new(w(i), 0.0);
            total += w(i);
        }
        vec![(acc, total)]
    });
    let mut acc = DMatrix::<Complex64>::zeros(dim_a, dim_a);
    let mut total = 0.0;
    for (a, t) in parts {
        acc += a;
        total += t;
    }
    DensityMatrix::from_matrix(acc / Complex64::new(total, 0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedDmSummary {
    pub mean_state: DensityMatrix,
    /// Mean over samples of `||psi^A - reference||_2`.
    pub deviation: Estimate,
    pub max_deviation: f64,
}

/// Reduced states of `count` streamed states compared with `reference`.
pub fn reduced_dm_streamed<S: StateSource>(
    source: &S,
    count: usize,
    rng: RngSpec,
    dim_a: usize,
    dim_b: usize,
    reference: &DensityMatrix,
) -> Result<ReducedDmSummary> {
    check_split(source.dim(), dim_a, dim_b)?;
    if reference.dim() != dim_a {
        return Err(Error::DimensionMismatch {
            expected: dim_a,
            found: reference.dim(),
        });
    }
    let per = map_states(source, count, rng, |buf| {
        let rho = partial_trace_normalized(buf, dim_a, dim_b);
        let dist = (&rho - reference.matrix()).norm();
        (rho, dist)
    });
    let mut acc = DMatrix::<Complex64>::zeros(dim_a, dim_a);
    for (rho, _) in &per {
        acc += rho;
    }
    let dists: Vec<f64> = per.iter().map(|(_, d)| *d).collect();
    Ok(ReducedDmSummary {
        mean_state: DensityMatrix::from_matrix(acc / Complex64::new(count as f64, 0.0))?,
        deviation: batch_mean(&dists, None, DEFAULT_GROUPS)?,
        max_deviation: dists.iter().copied().fold(0.0, f64::max),
    })
}

/// Gaussian-sampler reduced states against the canonical matrix.
pub fn reduced_dm_report(
    bs: &BipartiteSpectrum,
    energy: f64,
    epsilon: f64,
    count: usize,
    rng: RngSpec,
) -> Result<ExperimentReport> {
    let combined = bs.combined()?;
    let (da, db) = (bs.dim_a(), bs.dim_b());
    let canonical = rho_c_bipartite(bs, energy, epsilon)?;
    let k = constants_for(&combined, energy, epsilon)?;
    let delta = delta_deviation(&k);
    let frame = harmonic_frame(&combined, energy, DEFAULT_SHIFT_TOL)?;
    let source = GaussianSource::new(&frame)?;
    let summary = reduced_dm_streamed(&source, count, rng, da, db, &canonical.matrix)?;

    let mut inputs = ReportInputs::new(digest_json(bs), energy, count, Some(rng));
    inputs.epsilon = Some(epsilon);
    inputs.params.insert("dim_a".into(), da as f64);
    inputs.params.insert("dim_b".into(), db as f64);
    let mut r = ExperimentReport::new("reduced_dm", inputs);
    let envelope = 8f64.sqrt() * da as f64 * delta;
    r.push(Quantity::estimate(
        "mean_hs_deviation",
        summary.deviation,
        envelope,
        Check::AtMost { sigmas: 0.0 },
    ));
    r.push(Quantity::unreferenced("max_hs_deviation", summary.max_deviation, None));
    r.push(Quantity::new(
        "mean_state_trace",
        summary.mean_state.trace(),
        None,
        Some(1.0),
        Check::Absolute { tol: 1e-10 },
    ));
    let normalized = canonical.matrix.normalized()?;
    r.push(Quantity::unreferenced(
        "mean_state_distance_to_normalized_rho_c",
        summary.mean_state.hs_distance(&normalized)?,
        None,
    ));
    r.push(Quantity::new(
        "rho_c_trace_deviation",
        canonical.trace_deviation(),
        None,
        Some(canonical.analytic_trace_deviation()),
        Check::Absolute { tol: 1e-12 },
    ));
    r.push(Quantity::unreferenced("delta", delta, None));
    for (i, (m, c)) in summary
        .mean_state
        .diagonal()
        .iter()
        .zip(canonical.matrix.diagonal())
        .enumerate()
    {
        r.push(Quantity::unreferenced(format!("mean_state_diag_{i}"), *m, None));
        r.push(Quantity::unreferenced(format!("rho_c_diag_{i}"), c, None));
    }
    r.notes.push("samples from the Gaussian sampler, each normalized before the partial trace".into());
    r.notes.push("mean_hs_deviation reference is sqrt(8)|A| delta, the deviation scale at t -> 0".into());
    Ok(r)
}

// ---------------------------------------------------------------------------
// tails

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub median: f64,
    pub ts: Vec<f64>,
    pub exceedance: Vec<f64>,
}

/// Weighted frequency of `|f - median| > t` for each `t`.
pub fn tail_curve(values: &[f64], weights: Option<&[f64]>, ts: &[f64]) -> Result<TailCurve> {
    if values.is_empty() {
        return Err(domain("empty sample"));
    }
    if ts.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(domain("t values must be sorted"));
    }
    let median = weighted_median(values, weights)?;
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..values.len()).map(w).sum();
    let mut devs: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .map(|(i, v)| ((v - median).abs(), w(i)))
        .collect();
    devs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // suffix weights over the sorted deviations
    let mut tail = vec![0.0; devs.len() + 1];
    for i in (0..devs.len()).rev() {
        tail[i] = tail[i + 1] + devs[i].1;
    }
    let exceedance = ts
        .iter()
        .map(|&t| {
            let first = devs.partition_point(|d| d.0 <= t);
            tail[first] / total
        })
        .collect();
    Ok(TailCurve {
        median,
        ts: ts.to_vec(),
        exceedance,
    })
}

pub fn empirical_tail<F>(batch: &SampleBatch, f: F, ts: &[f64]) -> Result<TailCurve>
where
    F: Fn(&StateVector) -> f64 + Sync + Send,
{
    let values: Vec<f64> = par_blocks(batch.len(), BLOCK_LEN, |_, r| {
        r.map(|i| f(&batch.states[i])).collect()
    });
    tail_curve(&values, batch.weights.as_deref(), ts)
}

/// Test functions with known Lipschitz constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// `Re psi_1`, Lipschitz constant 1.
    RePsi1,
    /// `|psi_1|^2`, Lipschitz constant 2.
    AbsSqPsi1,
}

impl Observable {
    pub fn lipschitz(&self) -> f64 {
        match self {
            Observable::RePsi1 => 1.0,
            Observable::AbsSqPsi1 => 2.0,
        }
    }

    /// Value on the normalized state.
    pub fn eval(&self, amps: &[Complex64]) -> f64 {
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        match self {
            Observable::RePsi1 => amps[0].re / norm.sqrt(),
            Observable::AbsSqPsi1 => amps[0].norm_sqr() / norm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailSampler {
    Gaussian,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub t: f64,
    pub exceedance: f64,
    pub bound: f64,
    pub bound_clamped: f64,
    pub log10_bound: f64,
}

/// Empirical tail of an observable against the concentration bound.
#[allow(clippy::too_many_arguments)]
pub fn tail_report(
    spectrum: &Spectrum,
    energy: f64,
    epsilon: f64,
    observable: Observable,
    sampler: TailSampler,
    count: usize,
    rng: RngSpec,
    ts: &[f64],
) -> Result<(ExperimentReport, Vec<TailRow>)> {
    let k = constants_for(spectrum, energy, epsilon)?;
    let (values, weights, eta) = match sampler {
        TailSampler::Gaussian => {
            let frame = harmonic_frame(spectrum, energy, DEFAULT_SHIFT_TOL)?;
            let source = GaussianSource::new(&frame)?;
            (map_states(&source, count, rng, |b| observable.eval(b)), None, None)
        }
        TailSampler::Oracle => {
            let cfg = OracleConfig {
                proposal: Proposal::Tilted,
                ..OracleConfig::for_spectrum(spectrum, count)
            };
            let occ = oracle_occupations(spectrum, energy, &cfg, count, rng)?;
            occ.require_full()?;
            let v = map_expanded(spectrum, &occ, |b| observable.eval(b));
            (v, Some(occ.weights), Some(cfg.eta))
        }
    };
    let curve = tail_curve(&values, weights.as_deref(), ts)?;
    let lambda = observable.lipschitz();
    let rows: Vec<TailRow> = curve
        .ts
        .iter()
        .zip(&curve.exceedance)
        .map(|(&t, &e)| {
            // deviation t is the event lambda * (t / lambda)
            let bound = tail_bound(&k, t / lambda, lambda);
            TailRow {
                t,
                exceedance: e,
                bound,
                bound_clamped: bound.clamp(0.0, 1.0),
                log10_bound: ln_tail_bound(&k, t / lambda) / std::f64::consts::LN_10,
            }
        })
        .collect();

    let mut inputs = ReportInputs::new(spectrum_digest(spectrum), energy, count, Some(rng));
    inputs.epsilon = Some(epsilon);
    inputs.params.insert("lipschitz".into(), lambda);
    if let Some(eta) = eta {
        inputs.params.insert("eta".into(), eta);
    }
    let mut r = ExperimentReport::new("tail", inputs);
    r.push(Quantity::unreferenced("median", curve.median, None));
    for row in &rows {
        r.push(Quantity::new(
            format!("exceedance[t={}]", row.t),
            row.exceedance,
            None,
            Some(row.bound_clamped),
            Check::AtMost { sigmas: 0.0 },
        ));
    }
    r.notes.push(format!(
        "observable {observable:?} on {sampler:?} samples; deviations measured from the empirical median"
    ));
    Ok((r, rows))
}

// ---------------------------------------------------------------------------
// Gaussian-sampler moments

#[derive(Debug, Clone, Default)]
struct MomentAcc {
    pairs: Vec<(f64, f64)>,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

fn moment_step(shifted: &[f64]) -> impl Fn(&mut MomentAcc, &[Complex64]) + Sync + '_ {
    move |acc: &mut MomentAcc, amps: &[Complex64]| {
        if acc.sum.is_empty() {
            acc.sum = vec![0.0; amps.len()];
            acc.sumsq = vec![0.0; amps.len()];
        }
        let mut norm = 0.0;
        let mut en = 0.0;
        for (k, z) in amps.iter().enumerate() {
            let a = z.norm_sqr();
            norm += a;
            en += shifted[k] * a;
            acc.sum[k] += a;
            acc.sumsq[k] += a * a;
        }
        acc.pairs.push((norm, en));
    }
}

fn expanded_shifted(frame: &EnergyFrame) -> Vec<f64> {
    frame.base.expanded().iter().map(|e| e + frame.shift).collect()
}

/// Compare a Gaussian batch with the sampler's analytic moments.
pub fn moment_report(batch: &SampleBatch, frame: &EnergyFrame, sigmas: f64) -> Result<ExperimentReport> {
    let matches = batch.meta.mode == SamplerMode::Gaussian
        && batch.meta.energy == Some(frame.energy)
        && batch.meta.shift == Some(frame.shift)
        && batch.dim() as u64 == frame.base.dim();
    if !matches {
        return Err(domain("batch was not drawn from the Gaussian sampler for this frame"));
    }
    let shifted = expanded_shifted(frame);
    let step = moment_step(&shifted);
    let accs = par_blocks(batch.len(), BLOCK_LEN, |_, range| {
        let mut acc = MomentAcc::default();
        for i in range {
            step(&mut acc, &batch.states[i].amplitudes);
        }
        vec![acc]
    });
    build_moment_report(frame, accs, batch.len(), Some(batch.rng_spec), sigmas)
}

/// Same as [`moment_report`] for `count` states that are never stored.
pub fn moment_report_streamed(
    frame: &EnergyFrame,
    count: usize,
    rng: RngSpec,
    sigmas: f64,
) -> Result<ExperimentReport> {
    let source = GaussianSource::new(frame)?;
    let shifted = expanded_shifted(frame);
    let accs = fold_state_blocks(&source, count, rng, MomentAcc::default, moment_step(&shifted));
    build_moment_report(frame, accs, count, Some(rng), sigmas)
}

fn build_moment_report(
    frame: &EnergyFrame,
    accs: Vec<MomentAcc>,
    count: usize,
    rng: Option<RngSpec>,
    sigmas: f64,
) -> Result<ExperimentReport> {
    if count < 2 {
        return Err(domain("moment report needs at least two samples"));
    }
    let dim = frame.base.dim() as usize;
    let mut sum = vec![0.0; dim];
    let mut sumsq = vec![0.0; dim];
    let mut norms = Vec::with_capacity(count);
    let mut energies = Vec::with_capacity(count);
    for a in accs {
        for (k, (s, q)) in a.sum.iter().zip(&a.sumsq).enumerate() {
            sum[k] += s;
            sumsq[k] += q;
        }
        for (nn, e) in a.pairs {
            norms.push(nn);
            energies.push(e);
        }
    }
    let n = frame.n_f64();
    let e_p = frame.e_prime();
    let var_norm_ref: f64 = frame
        .base
        .weighted()
        .map(|(l, w)| w * n * (e_p / (l + frame.shift)).powi(2))
        .sum::<f64>()
        / (n * n);

    let mut inputs = ReportInputs::new(spectrum_digest(&frame.base), frame.energy, count, rng);
    inputs.params.insert("shift".into(), frame.shift);
    inputs.params.insert("sigmas".into(), sigmas);
    let mut r = ExperimentReport::new("moments", inputs);
    let within = Check::WithinSigmas { sigmas };
    r.push(Quantity::estimate("mean_norm_sq", batch_mean(&norms, None, DEFAULT_GROUPS)?, 1.0, within));
    r.push(Quantity::estimate(
        "mean_shifted_energy",
        batch_mean(&energies, None, DEFAULT_GROUPS)?,
        e_p,
        within,
    ));
    r.push(Quantity::estimate(
        "var_shifted_energy",
        batch_variance(&energies, DEFAULT_GROUPS)?,
        e_p * e_p / n,
        Check::Relative { tol: 0.1 },
    ));
    r.push(Quantity::estimate(
        "var_norm_sq",
        batch_variance(&norms, DEFAULT_GROUPS)?,
        var_norm_ref,
        Check::Relative { tol: 0.1 },
    ));

    // per-component second moments E|psi_k|^2 = E'/(n E'_k)
    let cnt = count as f64;
    let mut worst_z = 0.0f64;
    let mut k = 0usize;
    for (j, (&l, &d)) in frame.base.levels().iter().zip(frame.base.degeneracies()).enumerate() {
        let reference = e_p / (n * (l + frame.shift));
        let d = d as usize;
        let (mut s, mut q) = (0.0, 0.0);
        for c in k..k + d {
            let mean = sum[c] / cnt;
            let var = (sumsq[c] / cnt - mean * mean) * cnt / (cnt - 1.0);
            let se = (var / cnt).sqrt();
            if se > 0.0 {
                worst_z = worst_z.max((mean - reference).abs() / se);
            }
            s += sum[c];
            q += sumsq[c];
        }
        let m = cnt * d as f64;
        let mean = s / m;
        let var = (q / m - mean * mean) * m / (m - 1.0);
        r.push(Quantity::new(
            format!("second_moment_level_{j}"),
            mean,
            Some((var / m).sqrt()),
            Some(reference),
            within,
        ));
        k += d;
    }
    r.push(Quantity::new(
        "max_component_z",
        worst_z,
        None,
        Some(sigmas),
        Check::AtMost { sigmas: 0.0 },
    ));
    r.notes.push("samples are not normalized".into());
    Ok(r)
}

// ---------------------------------------------------------------------------
// oracle against the Gaussian sampler

/// Level occupations from the oracle (at the default shell width and at half
/// of it) against the Gaussian sampler.
pub fn oracle_agreement_report(
    spectrum: &Spectrum,
    energy: f64,
    count: usize,
    rng: RngSpec,
    sigmas: f64,
) -> Result<ExperimentReport> {
    let frame = harmonic_frame(spectrum, energy, DEFAULT_SHIFT_TOL)?;
    let source = GaussianSource::new(&frame)?;
    let gauss = map_states(&source, count, rng, |b| level_sums(spectrum, b));
    let eta = default_eta(spectrum);
    let run = |eta: f64, stream: u32| -> Result<crate::sampler::OccupationBatch> {
        let cfg = OracleConfig {
            eta,
            max_draws: 10_000 * count as u64,
            proposal: Proposal::Uniform,
        };
        let b = oracle_occupations(spectrum, energy, &cfg, count, rng.with_stream(stream))?;
        b.require_full()?;
        Ok(b)
    };
    let full = run(eta, rng.stream)?;
    let half = run(0.5 * eta, rng.stream.wrapping_add(1))?;

    let mut inputs = ReportInputs::new(spectrum_digest(spectrum), energy, count, Some(rng));
    inputs.params.insert("eta".into(), eta);
    inputs.params.insert("acceptance_rate".into(), full.meta.acceptance_rate.unwrap_or(0.0));
    inputs
        .params
        .insert("acceptance_rate_half_eta".into(), half.meta.acceptance_rate.unwrap_or(0.0));
    let mut r = ExperimentReport::new("oracle_agreement", inputs);
    let within = Check::WithinSigmas { sigmas };
    for j in 0..spectrum.levels().len() {
        let g: Vec<f64> = gauss.iter().map(|p| p[j]).collect();
        let o: Vec<f64> = full.occupations.iter().map(|p| p[j]).collect();
        let h: Vec<f64> = half.occupations.iter().map(|p| p[j]).collect();
        let ge = batch_mean(&g, None, DEFAULT_GROUPS)?;
        let oe = batch_mean(&o, Some(&full.weights), DEFAULT_GROUPS)?;
        let he = batch_mean(&h, Some(&half.weights), DEFAULT_GROUPS)?;
        r.push(Quantity::unreferenced(format!("level_{j}_gaussian"), ge.value, Some(ge.std_error)));
        r.push(Quantity::unreferenced(format!("level_{j}_oracle"), oe.value, Some(oe.std_error)));
        r.push(Quantity::unreferenced(format!("level_{j}_oracle_half_eta"), he.value, Some(he.std_error)));
        r.push(Quantity::new(
            format!("level_{j}_oracle_minus_gaussian"),
            oe.value - ge.value,
            Some(oe.std_error.hypot(ge.std_error)),
            Some(0.0),
            within,
        ));
        r.push(Quantity::new(
            format!("level_{j}_half_eta_shift"),
            he.value - oe.value,
            Some(he.std_error.hypot(oe.std_error)),
            Some(0.0),
            within,
        ));
    }
    r.notes.push("oracle uses uniform-sphere shell rejection with gradient-norm weights".into());
    Ok(r)
}

// ---------------------------------------------------------------------------
// non-interacting spins

/// `m` spins with levels 0 and 1: total energy `k` with degeneracy `C(m, k)`.
pub fn spin_spectrum(m: u32) -> Result<Spectrum> {
    if !(1..=30).contains(&m) {
        return Err(domain(format!("spin count {m} outside 1..=30")));
    }
    let levels = (0..=m).map(f64::from).collect();
    let degs = (0..=m).map(|k| binomial(m as u64, k as u64).round() as u64).collect();
    Spectrum::with_degeneracies(levels, degs)
}

pub fn binary_entropy(gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(domain(format!("{gamma} outside [0, 1]")));
    }
    let h = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    Ok(h(gamma) + h(1.0 - gamma))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinEnsembleSpec {
    pub m: u32,
    pub alpha: f64,
    pub gamma: f64,
}

impl SpinEnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(domain("alpha must lie in (0, 1/2)"));
        }
        if !(self.gamma > self.alpha && self.gamma < 0.5) {
            return Err(domain("gamma must lie in (alpha, 1/2)"));
        }
        if !(1..=30).contains(&self.m) {
            return Err(domain("m must lie in 1..=30"));
        }
        Ok(())
    }

    pub fn energy(&self) -> f64 {
        self.alpha * self.m as f64
    }
}

/// Deterministic part of the spin probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSummary {
    pub spec: SpinEnsembleSpec,
    pub n: u64,
    pub energy: f64,
    pub harmonic_shift: f64,
    /// `3 E'_min / (32 E')` at the harmonic shift.
    pub c: f64,
    /// `(3/32) 2^{-m}`
    pub c_estimate: f64,
    /// `E'/E'_Q` at the harmonic shift.
    pub required_epsilon: f64,
    pub low_level_count: u64,
    /// `2^{m H(gamma) + log2 m}`
    pub low_level_bound: f64,
    pub l_floor: f64,
    /// `2 n^{H(gamma) + log2(m)/m} / (1 - alpha/gamma)`, to be multiplied by `b`.
    pub kappa_ceiling_over_b: f64,
}

pub fn spin_summary(spec: &SpinEnsembleSpec) -> Result<SpinSummary> {
    spec.validate()?;
    let spectrum = spin_spectrum(spec.m)?;
    let energy = spec.energy();
    let s = harmonic_shift_solve(&spectrum, energy, DEFAULT_SHIFT_TOL)?;
    let frame = EnergyFrame::new(
        spectrum.clone(),
        energy,
        s,
        spectrum.dim(),
        crate::spectrum::ShiftKind::Harmonic,
    )?;
    let m = spec.m as f64;
    let h = binary_entropy(spec.gamma)?;
    let cut = spec.gamma * m;
    let low_level_count = spectrum
        .levels()
        .iter()
        .zip(spectrum.degeneracies())
        .filter(|(l, _)| **l < cut)
        .map(|(_, d)| d)
        .sum();
    let l_floor = 1.0 - spec.alpha / spec.gamma;
    Ok(SpinSummary {
        spec: *spec,
        n: spectrum.dim(),
        energy,
        harmonic_shift: s,
        c: 3.0 * frame.e_min() / (32.0 * frame.e_prime()),
        c_estimate: 3.0 / 32.0 * (-m).exp2(),
        required_epsilon: frame.e_prime() / frame.e_quad(),
        low_level_count,
        low_level_bound: (m * h + m.log2()).exp2(),
        l_floor,
        kappa_ceiling_over_b: 2.0 * (m * h + m.log2()).exp2() / l_floor,
    })
}

/// Oracle estimate of the low-energy weight `L` and the quantities bounding
/// the best possible concentration rate for `m` free spins.
pub fn spin_concentration_probe(
    spec: &SpinEnsembleSpec,
    count: usize,
    rng: RngSpec,
    sigmas: f64,
) -> Result<ExperimentReport> {
    let summary = spin_summary(spec)?;
    let spectrum = spin_spectrum(spec.m)?;
    let cfg = OracleConfig {
        proposal: Proposal::Tilted,
        ..OracleConfig::for_spectrum(&spectrum, count)
    };
    let occ = oracle_occupations(&spectrum, summary.energy, &cfg, count, rng)?;
    occ.require_full()?;
    let cut = spec.gamma * spec.m as f64;
    let low = |p: &Vec<f64>| -> f64 {
        p.iter().zip(spectrum.levels()).filter(|(_, l)| **l < cut).map(|(x, _)| x).sum()
    };
    let high = |p: &Vec<f64>| -> f64 {
        p.iter().zip(spectrum.levels()).filter(|(_, l)| **l >= cut).map(|(x, _)| x).sum()
    };
    let w = Some(occ.weights.as_slice());
    let l_vals: Vec<f64> = occ.occupations.iter().map(low).collect();
    let r_vals: Vec<f64> = occ.occupations.iter().map(high).collect();
    let l_est = batch_mean(&l_vals, w, DEFAULT_GROUPS)?;
    let r_est = batch_mean(&r_vals, w, DEFAULT_GROUPS)?;

    let mut inputs = ReportInputs::new(spectrum_digest(&spectrum), summary.energy, count, Some(rng));
    inputs.params.insert("m".into(), spec.m as f64);
    inputs.params.insert("alpha".into(), spec.alpha);
    inputs.params.insert("gamma".into(), spec.gamma);
    inputs.params.insert("eta".into(), cfg.eta);
    inputs.params.insert("acceptance_rate".into(), occ.meta.acceptance_rate.unwrap_or(0.0));
    let mut r = ExperimentReport::new("spins", inputs);
    r.push(Quantity::estimate("l_empirical", l_est, summary.l_floor, Check::AtLeast { sigmas }));
    r.push(Quantity::estimate(
        "r_empirical",
        r_est,
        spec.alpha / spec.gamma,
        Check::AtMost { sigmas },
    ));
    r.push(Quantity::new(
        "l_plus_r",
        l_est.value + r_est.value,
        None,
        Some(1.0),
        Check::Absolute { tol: 1e-12 },
    ));
    r.push(Quantity::new(
        "low_level_count",
        summary.low_level_count as f64,
        None,
        Some(summary.low_level_bound),
        Check::AtMost { sigmas: 0.0 },
    ));
    r.push(Quantity::new(
        "c_harmonic_shift",
        summary.c,
        None,
        Some(summary.c_estimate),
        Check::WithinFactor { factor: 2.0 },
    ));
    r.push(Quantity::unreferenced("harmonic_shift", summary.harmonic_shift, None));
    r.push(Quantity::unreferenced("required_epsilon", summary.required_epsilon, None));
    r.push(Quantity::unreferenced("kappa_ceiling_over_b", summary.kappa_ceiling_over_b, None));
    // Var(Re psi_i) = E|psi_i|^2 / 2 for a coordinate in level k
    for (k, &d) in spectrum.degeneracies().iter().enumerate() {
        let vals: Vec<f64> = occ.occupations.iter().map(|p| p[k] / (2.0 * d as f64)).collect();
        let est = batch_mean(&vals, w, DEFAULT_GROUPS)?;
        r.push(Quantity::unreferenced(
            format!("coordinate_variance_level_{k}"),
            est.value,
            Some(est.std_error),
        ));
    }
    r.notes.push("oracle with tilted occupation proposal at the harmonic shift".into());
    r.notes.push("c is evaluated at the harmonic shift; no epsilon makes the concentration constants feasible here".into());
    Ok(r)
}
