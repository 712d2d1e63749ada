//! Fixed temporal basis functions for the causal kernels.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `K` basis functions tabulated on the lags `1..=tau`.
///
/// `value(k, d)` is the weight of basis `k` at lag `d` (1-based lag).
#[derive(Debug, Clone, PartialEq)]
pub struct BasisBank {
    k: usize,
    tau: usize,
    values: Vec<Vec<f64>>,
}

impl BasisBank {
    /// Log-warped raised cosines.
    ///
    /// With `phi(d) = ln d`, centres `c_k` equally spaced on `[0, ln tau]` and
    /// half-width `w` equal to the centre spacing,
    /// `a_k(d) = (1 + cos(pi (phi(d) - c_k) / w)) / 2` inside `|phi(d) - c_k| <= w`
    /// and zero outside. A single basis (`K = 1`) is centred at lag 1 with twice
    /// the span as half-width so it stays positive over the whole support. When
    /// `tau = 1` every centre sits on the only lag and all values are 1.
    pub fn raised_cosine(k: usize, tau: usize) -> Result<Self> {
        if k == 0 || tau == 0 {
            return Err(Error::InvalidBasis(format!(
                "raised cosine needs K >= 1 and tau >= 1, got K={k}, tau={tau}"
            )));
        }
        let span = (tau as f64).ln();
        let spacing = if k > 1 { span / (k - 1) as f64 } else { 0.0 };
        let width = if k > 1 { spacing } else { 2.0 * span };
        let values = (0..k)
            .map(|kk| {
                let centre = spacing * kk as f64;
                (1..=tau)
                    .map(|d| {
                        if width == 0.0 {
                            return 1.0;
                        }
                        let off = (d as f64).ln() - centre;
                        if off.abs() <= width {
                            (0.5 * (1.0 + (PI * off / width).cos())).clamp(0.0, 1.0)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self { k, tau, values })
    }

    /// Wrap an explicit `K x tau` table.
    pub fn custom(values: Vec<Vec<f64>>) -> Result<Self> {
        let k = values.len();
        let tau = values.first().map_or(0, Vec::len);
        if k == 0 || tau == 0 {
            return Err(Error::InvalidBasis("basis table must be non-empty".into()));
        }
        if values.iter().any(|row| row.len() != tau) {
            return Err(Error::InvalidBasis("basis table is ragged".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBasis("basis table has non-finite entries".into()));
        }
        Ok(Self { k, tau, values })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Weight of basis `k` (0-based) at lag `lag` (1-based, `1..=tau`).
    #[inline]
    pub fn value(&self, k: usize, lag: usize) -> f64 {
        self.values[k][lag - 1]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }
}

/// Basis description used in configuration and checkpoint files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisSpec {
    RaisedCosine {
        #[serde(alias = "K")]
        k: usize,
        tau: usize,
    },
    Custom {
        values: Vec<Vec<f64>>,
    },
}

impl BasisSpec {
    pub fn build(&self) -> Result<BasisBank> {
        match self {
            BasisSpec::RaisedCosine { k, tau } => BasisBank::raised_cosine(*k, *tau),
            BasisSpec::Custom { values } => BasisBank::custom(values.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tap_bank() {
        let b = BasisBank::raised_cosine(1, 1).unwrap();
        assert_eq!(b.values(), &[vec![1.0]]);
    }

    #[test]
    fn two_bases_peak_at_their_centres() {
        let b = BasisBank::raised_cosine(2, 10).unwrap();
        assert!((b.value(0, 1) - 1.0).abs() < 1e-12);
        assert!((b.value(1, 10) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn peaks_reach_one_when_centres_land_on_lags() {
        // exp(c_k) is an integer lag for each of these (K, tau).
        for (k, tau) in [(1, 5), (2, 10), (3, 9), (3, 25), (4, 27)] {
            let b = BasisBank::raised_cosine(k, tau).unwrap();
            for row in b.values() {
                let max = row.iter().cloned().fold(f64::MIN, f64::max);
                assert!((max - 1.0).abs() < 1e-12, "K={k} tau={tau} max={max}");
            }
        }
    }

    #[test]
    fn values_in_unit_interval_and_deterministic() {
        for k in 1..6 {
            for tau in 1..40 {
                let b = BasisBank::raised_cosine(k, tau).unwrap();
                assert!(b.values().iter().flatten().all(|v| (0.0..=1.0).contains(v)));
                assert_eq!(b, BasisBank::raised_cosine(k, tau).unwrap());
            }
        }
    }

    #[test]
    fn single_basis_covers_support() {
        for tau in 1..50 {
            let b = BasisBank::raised_cosine(1, tau).unwrap();
            assert!(b.values()[0].iter().all(|&v| v > 0.0), "tau={tau}");
        }
    }

    #[test]
    fn invalid_arguments() {
        assert!(BasisBank::raised_cosine(0, 3).is_err());
        assert!(BasisBank::raised_cosine(2, 0).is_err());
        assert!(BasisBank::custom(vec![]).is_err());
        assert!(BasisBank::custom(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(BasisBank::custom(vec![vec![f64::NAN]]).is_err());
    }

    #[test]
    fn custom_tables_are_kept_verbatim() {
        for t in [vec![vec![1.0]], vec![vec![0.0, 1.0]], vec![vec![0.5, 0.5]]] {
            let b = BasisBank::custom(t.clone()).unwrap();
            assert_eq!(b.values(), t.as_slice());
        }
    }

    #[test]
    fn spec_round_trip() {
        let s: BasisSpec = serde_json::from_str(r#"{"kind":"raised_cosine","K":2,"tau":5}"#).unwrap();
        assert_eq!(s, BasisSpec::RaisedCosine { k: 2, tau: 5 });
        let c: BasisSpec = serde_json::from_str(r#"{"kind":"custom","values":[[0.5,0.25]]}"#).unwrap();
        assert_eq!(c.build().unwrap().tau(), 2);
    }
}
