//! Paired-sample statistics: paired t-test, per-arm means and reductions.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Paired observations `(filter off, filter on)`, one pair per subject.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSamples {
    pairs: Vec<(f64, f64)>,
}

impl PairedSamples {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(bad) = pairs
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .find(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(Error::invalid(
                "pairs",
                format!("values must be finite and > 0, got {bad}"),
            ));
        }
        Ok(Self { pairs })
    }

    pub fn from_arms(off: &[f64], on: &[f64]) -> Result<Self> {
        if off.len() != on.len() {
            return Err(Error::invalid(
                "pairs",
                format!("arm lengths differ: {} vs {}", off.len(), on.len()),
            ));
        }
        Self::new(off.iter().copied().zip(on.iter().copied()).collect())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    /// Swaps the two arms.
    pub fn swapped(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|&(a, b)| (b, a)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.pairs.iter().map(|&(a, b)| (a * c, b * c)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: u32,
    pub p_two_sided: f64,
}

/// Two-sided tail probability `2 P(T > |t|)` of Student's t with `df`
/// degrees of freedom, via `I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn t_two_sided_p(t: f64, df: u32) -> Result<f64> {
    if df < 1 {
        return Err(Error::invalid("df", "must be >= 1"));
    }
    if t.is_nan() {
        return Err(Error::invalid("t", "must not be NaN"));
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    let nu = df as f64;
    let x = nu / (nu + t * t);
    Ok(beta_reg(nu / 2.0, 0.5, x).clamp(0.0, 1.0))
}

/// Paired t-test on `d_i = off_i - on_i` with the n-1 sample deviation.
///
/// All-zero differences give `t = 0, p = 1`. Identical nonzero differences
/// have zero spread and give an infinite `t` with `p = 0`.
pub fn paired_t_test(samples: &PairedSamples) -> Result<TTestResult> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let diffs: Vec<f64> = samples.pairs().iter().map(|&(off, on)| off - on).collect();
    let df = (n - 1) as u32;
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();

    if diffs.iter().all(|&d| d == 0.0) {
        return Ok(TTestResult {
            t: 0.0,
            df,
            p_two_sided: 1.0,
        });
    }
    let t = if sd == 0.0 {
        f64::INFINITY.copysign(mean)
    } else {
        mean / (sd / (n as f64).sqrt())
    };
    Ok(TTestResult {
        t,
        df,
        p_two_sided: t_two_sided_p(t, df)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mean_off: f64,
    pub mean_on: f64,
    pub difference: f64,
    pub reduction_pct: f64,
}

impl SummaryRow {
    pub fn from_means(mean_off: f64, mean_on: f64) -> Self {
        let difference = mean_off - mean_on;
        let reduction_pct = if mean_off > 0.0 {
            100.0 * difference / mean_off
        } else {
            0.0
        };
        Self {
            mean_off,
            mean_on,
            difference,
            reduction_pct,
        }
    }
}

pub fn summarize(samples: &PairedSamples) -> Result<SummaryRow> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let (sum_off, sum_on) = samples
        .pairs()
        .iter()
        .fold((0.0, 0.0), |(a, b), &(off, on)| (a + off, b + on));
    Ok(SummaryRow::from_means(
        sum_off / n as f64,
        sum_on / n as f64,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Significance {
    RejectNull,
    AcceptNull,
}

pub const DEFAULT_ALPHA: f64 = 0.05;

/// `RejectNull` iff `p < alpha`.
pub fn significance_label(p: f64, alpha: f64) -> Result<Significance> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p", format!("must lie in [0, 1], got {p}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(
            "alpha",
            format!("must lie in [0, 1], got {alpha}"),
        ));
    }
    Ok(if p < alpha {
        Significance::RejectNull
    } else {
        Significance::AcceptNull
    })
}

/// Mean and sample standard deviation (n-1); `sd` is 0 for a single value.
pub fn mean_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Two-sided p by Simpson quadrature of the t density in the angle
    /// substitution `x = sqrt(nu) tan(theta)`, where the density becomes
    /// proportional to `cos^(nu-1)(theta)` on `[0, pi/2)`.
    fn quadrature_p(t: f64, df: u32) -> f64 {
        let nu = df as f64;
        let f = |th: f64| th.cos().powf(nu - 1.0);
        let simpson = |a: f64, b: f64| {
            let n = 200_000;
            let h = (b - a) / n as f64;
            let mut s = f(a) + f(b);
            for k in 1..n {
                s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let theta = (t.abs() / nu.sqrt()).atan();
        1.0 - simpson(0.0, theta) / simpson(0.0, std::f64::consts::FRAC_PI_2)
    }

    fn pairs_from_diffs(diffs: &[f64]) -> PairedSamples {
        PairedSamples::new(diffs.iter().map(|d| (20.0 + d, 20.0)).collect()).unwrap()
    }

    #[test]
    fn identical_pairs_give_unit_p() {
        let s = PairedSamples::new(vec![(3.0, 3.0), (4.5, 4.5), (9.0, 9.0)]).unwrap();
        let r = paired_t_test(&s).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p_two_sided, 1.0);
        assert_eq!(r.df, 2);
    }

    #[test]
    fn differences_one_two_three() {
        let r = paired_t_test(&pairs_from_diffs(&[1.0, 2.0, 3.0])).unwrap();
        assert_abs_diff_eq!(r.t, 3.4641, epsilon = 1e-4);
        assert_eq!(r.df, 2);
        // closed-form df = 2 CDF: F(t) = 1/2 + t / (2 sqrt(2 + t^2))
        let closed = 2.0 * (1.0 - (0.5 + r.t / (2.0 * (2.0 + r.t * r.t).sqrt())));
        assert_abs_diff_eq!(r.p_two_sided, closed, epsilon = 1e-9);
        assert_abs_diff_eq!(r.p_two_sided, 0.0742, epsilon = 1e-4);
    }

    #[test]
    fn too_few_pairs() {
        let s = PairedSamples::new(vec![(2.0, 1.0)]).unwrap();
        assert!(matches!(
            paired_t_test(&s),
            Err(Error::InsufficientData { .. })
        ));
        assert!(PairedSamples::new(vec![(0.0, 1.0)]).is_err());
        assert!(PairedSamples::new(vec![(f64::NAN, 1.0)]).is_err());
    }

    #[test]
    fn constant_nonzero_differences() {
        let r = paired_t_test(&pairs_from_diffs(&[2.0, 2.0, 2.0])).unwrap();
        assert!(r.t.is_infinite() && r.t > 0.0);
        assert_eq!(r.p_two_sided, 0.0);
    }

    #[test]
    fn printed_t_to_p_pairs() {
        let cases = [
            (3.1750, 0.0035),
            (1.8518, 0.0742),
            (0.7833, 0.4397),
            (4.5569, 0.00008),
            (2.1426, 0.0406),
            (1.0608, 0.2975),
        ];
        for (t, p) in cases {
            let got = t_two_sided_p(t, 29).unwrap();
            assert!((got - p).abs() < 5e-4, "t={t}: {got} vs {p}");
        }
    }

    #[test]
    fn t_p_edge_cases() {
        assert_eq!(t_two_sided_p(0.0, 7).unwrap(), 1.0);
        assert!(t_two_sided_p(1.0, 0).is_err());
        assert_eq!(t_two_sided_p(f64::INFINITY, 3).unwrap(), 0.0);
    }

    #[test]
    fn matches_quadrature_for_small_integer_samples() {
        let sets: [&[f64]; 5] = [
            &[1.0, 2.0],
            &[1.0, 2.0, 3.0],
            &[-1.0, 4.0, 2.0, 0.0],
            &[3.0, 1.0, 1.0, 2.0, -2.0],
            &[5.0, 4.0, 6.0, 5.0, 7.0],
        ];
        for diffs in sets {
            let r = paired_t_test(&pairs_from_diffs(diffs)).unwrap();
            let oracle = quadrature_p(r.t, r.df);
            assert!(
                (r.p_two_sided - oracle).abs() < 1e-6,
                "{diffs:?}: {} vs {oracle}",
                r.p_two_sided
            );
        }
    }

    #[test]
    fn summary_rows_from_means() {
        let s = PairedSamples::new(vec![(24.700, 14.125)]).unwrap();
        let row = summarize(&s).unwrap();
        assert_abs_diff_eq!(row.difference, 10.575, epsilon = 1e-9);
        assert_abs_diff_eq!(row.reduction_pct, 42.81, epsilon = 0.01);

        let row = SummaryRow::from_means(21.507, 11.924);
        assert_abs_diff_eq!(row.difference, 9.583, epsilon = 1e-9);
        assert_abs_diff_eq!(row.reduction_pct, 44.56, epsilon = 0.01);

        let row = SummaryRow::from_means(8.0, 8.0);
        assert_eq!((row.difference, row.reduction_pct), (0.0, 0.0));
        assert!(summarize(&PairedSamples::new(vec![]).unwrap()).is_err());
    }

    #[test]
    fn significance_examples() {
        assert_eq!(
            significance_label(0.0035, 0.05).unwrap(),
            Significance::RejectNull
        );
        assert_eq!(
            significance_label(0.0742, 0.05).unwrap(),
            Significance::AcceptNull
        );
        assert_eq!(
            significance_label(0.05, 0.05).unwrap(),
            Significance::AcceptNull
        );
        assert!(significance_label(1.5, 0.05).is_err());
    }

    fn arb_samples() -> impl Strategy<Value = PairedSamples> {
        prop::collection::vec((1.0f64..50.0, 1.0f64..50.0), 2..40)
            .prop_filter("needs spread", |v| {
                let d: Vec<f64> = v.iter().map(|(a, b)| a - b).collect();
                d.iter().any(|x| (x - d[0]).abs() > 1e-6)
            })
            .prop_map(|v| PairedSamples::new(v).unwrap())
    }

    proptest! {
        #[test]
        fn scale_equivariance(s in arb_samples(), c in 0.1f64..10.0) {
            let a = paired_t_test(&s).unwrap();
            let scaled = s.scaled(c).unwrap();
            let b = paired_t_test(&scaled).unwrap();
            prop_assert!((a.t - b.t).abs() < 1e-6 * a.t.abs().max(1.0));
            prop_assert!((a.p_two_sided - b.p_two_sided).abs() < 1e-9);
            let (ra, rb) = (summarize(&s).unwrap(), summarize(&scaled).unwrap());
            prop_assert!((rb.difference - c * ra.difference).abs() < 1e-9 * c.max(1.0) * 50.0);
        }

        #[test]
        fn antisymmetry(s in arb_samples()) {
            let a = paired_t_test(&s).unwrap();
            let b = paired_t_test(&s.swapped()).unwrap();
            prop_assert!((a.t + b.t).abs() < 1e-9 * a.t.abs().max(1.0));
            prop_assert!((a.p_two_sided - b.p_two_sided).abs() < 1e-12);
            let (ra, rb) = (summarize(&s).unwrap(), summarize(&s.swapped()).unwrap());
            prop_assert!((ra.difference + rb.difference).abs() < 1e-9);
        }

        #[test]
        fn p_decreasing_in_abs_t(t in 0.0f64..8.0, dt in 0.01f64..2.0, df in 1u32..100) {
            let p1 = t_two_sided_p(t, df).unwrap();
            let p2 = t_two_sided_p(t + dt, df).unwrap();
            prop_assert!(p2 < p1);
            prop_assert!((t_two_sided_p(-t, df).unwrap() - p1).abs() < 1e-15);
        }
    }
}
