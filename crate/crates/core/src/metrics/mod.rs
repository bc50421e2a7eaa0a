//! Measurements over pipeline artifacts: MML, safe code, CSR, laziness rate
//! and CodeBLEU, plus the report that gathers them.

pub mod codebleu;
mod mml;
pub mod report;
mod safe;

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::translator::LazinessVerdict;

pub use codebleu::{codebleu, CodeBleu, DEFAULT_WEIGHTS};
pub use mml::{compute_mml, significant_lines};
pub use report::{FunctionMetrics, MetricsReport, ModuleMetrics, SummaryRow};
pub use safe::{count_safe_lines, SafeCount};

/// An exact fraction; `den` is never 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Fraction of results that compiled.
pub fn compute_csr(compiled: &[bool]) -> Result<Ratio> {
    if compiled.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(Ratio {
        num: compiled.iter().filter(|c| **c).count() as u64,
        den: compiled.len() as u64,
    })
}

/// CSR after each of `0..=cap` repair rounds. `rounds[i]` is the round after
/// which function `i` first compiled (0 = without repair), `None` if repair
/// never made it compile.
pub fn csr_trajectory(rounds: &[Option<usize>], cap: usize) -> Result<Vec<Ratio>> {
    (0..=cap)
        .map(|k| compute_csr(&rounds.iter().map(|r| r.is_some_and(|r| r <= k)).collect::<Vec<_>>()))
        .collect()
}

/// `100 * count / total` rounded half-up to hundredths, computed in integers
/// so ties are decided exactly. `None` for a zero total.
pub fn pct_hundredths(count: u64, total: u64) -> Option<u64> {
    if total == 0 {
        return None;
    }
    let scaled = count as u128 * 10_000;
    Some(((2 * scaled + total as u128) / (2 * total as u128)) as u64)
}

pub fn pct(count: u64, total: u64) -> Option<f64> {
    pct_hundredths(count, total).map(|h| h as f64 / 100.0)
}

/// A percentage with two decimals, e.g. `12.98`.
pub fn format_pct(count: u64, total: u64) -> String {
    match pct_hundredths(count, total) {
        Some(h) => format!("{}.{:02}", h / 100, h % 100),
        None => "n/a".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRate {
    pub lines: Range<usize>,
    pub members: usize,
    pub lazy: usize,
    /// Absent when the bin has no members.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LazinessRate {
    pub total: usize,
    pub lazy: usize,
    pub overall: Option<f64>,
    pub bins: Vec<BinRate>,
}

/// Overall and per-line-count-bin share of lazy verdicts. Bins are
/// half-open line ranges; a function may fall into several or none.
pub fn laziness_rate(
    verdicts: &[LazinessVerdict],
    line_counts: &[usize],
    bins: &[Range<usize>],
) -> Result<LazinessRate> {
    if verdicts.len() != line_counts.len() {
        return Err(Error::LengthMismatch {
            left: verdicts.len(),
            right: line_counts.len(),
        });
    }
    let lazy = verdicts.iter().filter(|v| v.lazy).count();
    let total = verdicts.len();
    let bins = bins
        .iter()
        .map(|range| {
            let (mut members, mut lazy) = (0, 0);
            for (v, n) in verdicts.iter().zip(line_counts) {
                if range.contains(n) {
                    members += 1;
                    lazy += usize::from(v.lazy);
                }
            }
            BinRate {
                lines: range.clone(),
                members,
                lazy,
                rate: (members > 0).then(|| lazy as f64 / members as f64),
            }
        })
        .collect();
    Ok(LazinessRate {
        total,
        lazy,
        overall: (total > 0).then(|| lazy as f64 / total as f64),
        bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_counts_cumulatively() {
        let t = csr_trajectory(&[Some(0), Some(2), None, Some(1)], 3).unwrap();
        let nums: Vec<u64> = t.iter().map(|r| r.num).collect();
        assert_eq!(nums, [1, 2, 3, 3]);
        assert!(t.iter().all(|r| r.den == 4));
    }

    #[test]
    fn percentages_round_half_up() {
        assert_eq!(format_pct(74, 570), "12.98");
        assert_eq!(format_pct(1, 8), "12.50");
        assert_eq!(format_pct(1, 200), "0.50");
        assert_eq!(format_pct(1, 400), "0.25");
        assert_eq!(format_pct(1, 800), "0.13");
        assert_eq!(format_pct(0, 5), "0.00");
        assert_eq!(format_pct(5, 5), "100.00");
        assert_eq!(pct(1, 0), None);
    }

    #[test]
    fn csr_is_exact() {
        let mut v = vec![true; 7];
        v.extend(vec![false; 11]);
        let r = compute_csr(&v).unwrap();
        assert_eq!(r.to_string(), "7/18");
        assert!((r.value() - 0.3889).abs() < 5e-5);
        assert!(matches!(compute_csr(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn empty_bins_are_absent() {
        let mut lazy = LazinessVerdict::not_lazy();
        lazy.lazy = true;
        let r = laziness_rate(
            &[LazinessVerdict::not_lazy(), lazy],
            &[10, 300],
            &[0..200, 200..500, 500..usize::MAX],
        )
        .unwrap();
        assert_eq!(r.overall, Some(0.5));
        assert_eq!(r.bins[0].rate, Some(0.0));
        assert_eq!(r.bins[1].rate, Some(1.0));
        assert_eq!(r.bins[2].rate, None);
        assert!(matches!(
            laziness_rate(&[LazinessVerdict::not_lazy()], &[], &[]),
            Err(Error::LengthMismatch { left: 1, right: 0 })
        ));
    }
}
