//! Multinomial estimation and goodness-of-fit diagnostics for samples of
//! count vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::gamma_q;
use crate::vector::{CountVector, ProbabilityVector};

/// Result of the chi-squared homogeneity test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub statistic: f64,
    pub df: u64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotSd {
    pub observed_sd: f64,
    pub theoretical_sd: f64,
}

/// Observed vs. multinomial-implied standard deviation, per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdDiagnostic {
    pub slots: Vec<SlotSd>,
}

fn uniform_len(cs: &[CountVector]) -> Result<usize> {
    let len = cs.first().ok_or(Error::EmptySample)?.len();
    if let Some(bad) = cs.iter().find(|c| c.len() != len) {
        return Err(Error::LengthMismatch {
            expected: len,
            actual: bad.len(),
        });
    }
    Ok(len)
}

fn column_sums(cs: &[CountVector], len: usize) -> Vec<f64> {
    let mut sums = vec![0.0; len];
    for c in cs {
        for (s, v) in sums.iter_mut().zip(c.values()) {
            *s += v;
        }
    }
    sums
}

/// Pooled maximum likelihood estimate: column totals over the grand total.
pub fn mle(cs: &[CountVector]) -> Result<ProbabilityVector> {
    let len = uniform_len(cs)?;
    let sums = column_sums(cs, len);
    let total: f64 = cs.iter().map(CountVector::total).sum();
    if total <= 0.0 {
        return Err(Error::ZeroTotal);
    }
    ProbabilityVector::new(sums.into_iter().map(|s| s / total).collect())
}

/// Chi-squared survival function `Q(df/2, x/2)`.
pub fn chi_squared_sf(x: f64, df: u64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(df as f64 / 2.0, x / 2.0)
}

/// Tests whether all vectors in the sample share one multinomial.
///
/// Requires raw integer counts. Slots never observed in the sample are left
/// out of both the statistic and the slot count `m`.
pub fn chi_squared_fit(cs: &[CountVector]) -> Result<FitReport> {
    if cs.len() < 2 {
        return Err(Error::DegenerateSample(format!(
            "need at least 2 count vectors, got {}",
            cs.len()
        )));
    }
    for c in cs {
        if let Some((index, &value)) = c
            .values()
            .iter()
            .enumerate()
            .find(|(_, v)| v.fract() != 0.0)
        {
            return Err(Error::NonIntegerCount { index, value });
        }
    }
    let p_hat = mle(cs)?;
    let included: Vec<usize> = p_hat
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, _)| i)
        .collect();
    if included.len() < 2 {
        return Err(Error::DegenerateSample(format!(
            "need at least 2 observed slots, got {}",
            included.len()
        )));
    }
    let mut statistic = 0.0;
    for c in cs {
        let n = c.total();
        if n <= 0.0 {
            return Err(Error::DegenerateSample(format!(
                "window {} has zero total",
                c.window_index()
            )));
        }
        for &i in &included {
            let expected = p_hat.probs()[i] * n;
            let diff = c.values()[i] - expected;
            statistic += diff * diff / expected;
        }
    }
    let df = ((included.len() - 1) * (cs.len() - 1)) as u64;
    Ok(FitReport {
        statistic,
        df,
        p_value: chi_squared_sf(statistic, df),
    })
}

/// Compares the sample spread of each slot with `sqrt(n p (1 - p))`.
pub fn sd_diagnostic(cs: &[CountVector], p: &ProbabilityVector, n: f64) -> Result<SdDiagnostic> {
    if cs.len() < 2 {
        return Err(Error::DegenerateSample(format!(
            "need at least 2 count vectors, got {}",
            cs.len()
        )));
    }
    let len = uniform_len(cs)?;
    if p.len() != len {
        return Err(Error::LengthMismatch {
            expected: len,
            actual: p.len(),
        });
    }
    if !(n > 0.0) {
        return Err(Error::InvalidConfig(format!("n must be positive, got {n}")));
    }
    let count = cs.len() as f64;
    let means: Vec<f64> = column_sums(cs, len)
        .into_iter()
        .map(|s| s / count)
        .collect();
    let slots = (0..len)
        .map(|i| {
            let ss: f64 = cs.iter().map(|c| (c.values()[i] - means[i]).powi(2)).sum();
            let pi = p.probs()[i];
            SlotSd {
                observed_sd: (ss / (count - 1.0)).sqrt(),
                theoretical_sd: (n * pi * (1.0 - pi)).max(0.0).sqrt(),
            }
        })
        .collect();
    Ok(SdDiagnostic { slots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cv(v: &[f64]) -> CountVector {
        CountVector::new(v.to_vec(), 0).unwrap()
    }

    #[test]
    fn mle_examples() {
        assert_eq!(
            mle(&[cv(&[2.0, 3.0, 5.0])]).unwrap().probs(),
            &[0.2, 0.3, 0.5]
        );
        assert_eq!(
            mle(&[cv(&[1.0, 0.0]), cv(&[0.0, 1.0])]).unwrap().probs(),
            &[0.5, 0.5]
        );
        assert_eq!(
            mle(&[cv(&[1.0, 1.0, 2.0]), cv(&[3.0, 1.0, 0.0])])
                .unwrap()
                .probs(),
            &[0.5, 0.25, 0.25]
        );
    }

    #[test]
    fn mle_errors() {
        assert!(matches!(mle(&[]), Err(Error::EmptySample)));
        assert!(matches!(mle(&[cv(&[0.0, 0.0])]), Err(Error::ZeroTotal)));
        assert!(matches!(
            mle(&[cv(&[1.0]), cv(&[1.0, 2.0])]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn exact_fit_gives_zero_statistic() {
        let r = chi_squared_fit(&[cv(&[1.0, 1.0]), cv(&[2.0, 2.0])]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.df, 1);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn fit_hand_computed() {
        // p_hat = [0.5, 0.5]; expected [2,2] per row; X = 4 * (1^2 / 2) = 2
        let r = chi_squared_fit(&[cv(&[3.0, 1.0, 0.0]), cv(&[1.0, 3.0, 0.0])]).unwrap();
        assert_abs_diff_eq!(r.statistic, 2.0, epsilon = 1e-12);
        assert_eq!(r.df, 1);
        assert_abs_diff_eq!(r.p_value, chi_squared_sf(2.0, 1), epsilon = 1e-15);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(matches!(
            chi_squared_fit(&[cv(&[1.0, 1.0])]),
            Err(Error::DegenerateSample(_))
        ));
        assert!(matches!(
            chi_squared_fit(&[cv(&[1.0, 0.0]), cv(&[2.0, 0.0])]),
            Err(Error::DegenerateSample(_))
        ));
        assert!(matches!(
            chi_squared_fit(&[cv(&[0.5, 0.5]), cv(&[1.0, 1.0])]),
            Err(Error::NonIntegerCount { .. })
        ));
        assert!(matches!(
            chi_squared_fit(&[cv(&[1.0, 1.0]), cv(&[0.0, 0.0])]),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn sf_examples() {
        assert_eq!(chi_squared_sf(0.0, 7), 1.0);
        assert!(chi_squared_sf(1e4, 2) <= 1e-300);
        assert_abs_diff_eq!(chi_squared_sf(2.0, 2), (-1.0f64).exp(), epsilon = 1e-10);
        assert_abs_diff_eq!(chi_squared_sf(3.841, 1), 0.05, epsilon = 1e-3);
    }

    #[test]
    fn sf_matches_df2_closed_form_on_grid() {
        let mut prev = 1.0;
        for i in 0..=40 {
            let x = 0.5 * i as f64;
            let q = chi_squared_sf(x, 2);
            assert_abs_diff_eq!(q, (-x / 2.0).exp(), epsilon = 1e-10);
            assert!(q <= prev);
            prev = q;
        }
    }

    #[test]
    fn sd_examples() {
        let same = vec![cv(&[0.5, 0.5]); 3];
        let p = ProbabilityVector::new(vec![0.5, 0.5]).unwrap();
        let d = sd_diagnostic(&same, &p, 1.0).unwrap();
        for s in &d.slots {
            assert_eq!(s.observed_sd, 0.0);
            assert_eq!(s.theoretical_sd, 0.5);
        }
        let p = ProbabilityVector::new(vec![1.0, 0.0]).unwrap();
        let d = sd_diagnostic(&same, &p, 4.0).unwrap();
        assert!(d.slots.iter().all(|s| s.theoretical_sd == 0.0));
        // sample sd of {0, 2} = sqrt(2)
        let d = sd_diagnostic(&[cv(&[0.0, 1.0]), cv(&[2.0, 1.0])], &p, 4.0).unwrap();
        assert_abs_diff_eq!(d.slots[0].observed_sd, 2f64.sqrt(), epsilon = 1e-15);
        assert!(sd_diagnostic(&same[..1], &p, 1.0).is_err());
    }
}
