//! Batch-means error bars and medians.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub const DEFAULT_GROUPS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

fn group_ranges(len: usize, groups: usize) -> impl Iterator<Item = std::ops::Range<usize>> {
    let g = groups.min(len);
    (0..g).map(move |i| (i * len / g)..((i + 1) * len / g))
}

fn spread(means: &[f64]) -> f64 {
    let g = means.len() as f64;
    let m = means.iter().sum::<f64>() / g;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (g - 1.0);
    (var / g).sqrt()
}

fn check(len: usize, weights: Option<&[f64]>) -> Result<()> {
    if len < 2 {
        return Err(domain("batch-means estimate needs at least two values"));
    }
    if let Some(w) = weights {
        if w.len() != len {
            return Err(crate::Error::DimensionMismatch {
                expected: len,
                found: w.len(),
            });
        }
    }
    Ok(())
}

/// (Weighted) mean with a standard error from contiguous sub-batch means.
pub fn batch_mean(values: &[f64], weights: Option<&[f64]>, groups: usize) -> Result<Estimate> {
    check(values.len(), weights)?;
    let ratio = |r: std::ops::Range<usize>| -> f64 {
        match weights {
            None => values[r.clone()].iter().sum::<f64>() / r.len() as f64,
            Some(w) => {
                let num: f64 = values[r.clone()].iter().zip(&w[r.clone()]).map(|(x, w)| x * w).sum();
                num / w[r].iter().sum::<f64>()
            }
        }
    };
    let means: Vec<f64> = group_ranges(values.len(), groups).map(ratio).collect();
    Ok(Estimate {
        value: ratio(0..values.len()),
        std_error: spread(&means),
    })
}

fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
}

/// Unbiased sample variance with a sub-batch standard error.
pub fn batch_variance(values: &[f64], groups: usize) -> Result<Estimate> {
    check(values.len(), None)?;
    let per: Vec<f64> = group_ranges(values.len(), groups)
        .filter(|r| r.len() >= 2)
        .map(|r| variance(&values[r]))
        .collect();
    let std_error = if per.len() >= 2 { spread(&per) } else { 0.0 };
    Ok(Estimate {
        value: variance(values),
        std_error,
    })
}

/// Median; with weights, the smallest value whose cumulative weight reaches half.
pub fn weighted_median(values: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    if values.is_empty() {
        return Err(domain("median of an empty sample"));
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    match weights {
        None => {
            let n = idx.len();
            Ok(if n % 2 == 1 {
                values[idx[n / 2]]
            } else {
                0.5 * (values[idx[n / 2 - 1]] + values[idx[n / 2]])
            })
        }
        Some(w) => {
            if w.len() != values.len() {
                return Err(crate::Error::DimensionMismatch {
                    expected: values.len(),
                    found: w.len(),
                });
            }
            let half = 0.5 * w.iter().sum::<f64>();
            let mut acc = 0.0;
            for &i in &idx {
                acc += w[i];
                if acc >= half {
                    return Ok(values[i]);
                }
            }
            Ok(values[*idx.last().unwrap()])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_constant_has_zero_error() {
        let e = batch_mean(&[2.0; 100], None, 32).unwrap();
        assert_eq!(e, Estimate { value: 2.0, std_error: 0.0 });
    }

    #[test]
    fn periodic_values_have_small_error() {
        let x: Vec<f64> = (0..6400).map(|i| (i % 7) as f64).collect();
        let e = batch_mean(&x, None, 32).unwrap();
        assert_eq!(e.value, x.iter().sum::<f64>() / 6400.0);
        // each group of 200 holds at most one partial period
        assert!(e.std_error < 0.01);
    }

    #[test]
    fn weights_select_values() {
        let x = [1.0, 5.0, 1.0, 5.0];
        let w = [1.0, 0.0, 1.0, 0.0];
        assert_eq!(batch_mean(&x, Some(&w), 2).unwrap().value, 1.0);
        assert!(batch_mean(&x, Some(&w[..3]), 2).is_err());
        assert!(batch_mean(&[1.0], None, 2).is_err());
    }

    #[test]
    fn variance_estimate() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((batch_variance(&x, 32).unwrap().value - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn medians() {
        assert_eq!(weighted_median(&[3.0, 1.0, 2.0], None).unwrap(), 2.0);
        assert_eq!(weighted_median(&[4.0, 1.0, 2.0, 3.0], None).unwrap(), 2.5);
        assert_eq!(weighted_median(&[1.0, 2.0, 3.0], Some(&[1.0, 1.0, 5.0])).unwrap(), 3.0);
        assert!(weighted_median(&[], None).is_err());
    }
}
