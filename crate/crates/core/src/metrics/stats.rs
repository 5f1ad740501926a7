use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("samples have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooFew(usize),
    /// Zero variance. For paired_t on identical samples the statistic is
    /// defined (t = 0) and carried here.
    #[error("degenerate sample: {reason}")]
    DegenerateSample {
        reason: String,
        statistic: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsResult {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pearson_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_statistic: Option<f64>,
    /// Two-sided.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub n: usize,
}

fn check(xs: &[f64], ys: &[f64]) -> Result<usize, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(StatsError::TooFew(xs.len()));
    }
    Ok(xs.len())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Whether a sum of squared deviations is rounding noise relative to the
/// magnitude of the values it came from.
fn negligible(sum_sq: f64, values: &[f64]) -> bool {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    sum_sq <= (16.0 * f64::EPSILON * scale).powi(2) * values.len() as f64
}

fn two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// Pearson correlation. The p-value tests r = 0 with n − 2 degrees of
/// freedom and is omitted when n = 2.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<StatsResult, StatsError> {
    let n = check(xs, ys)?;
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if negligible(sxx, xs) || negligible(syy, ys) {
        return Err(StatsError::DegenerateSample {
            reason: "zero variance in one sample".into(),
            statistic: None,
        });
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let p_value = if n > 2 {
        let df = (n - 2) as f64;
        let t = if r.abs() == 1.0 {
            f64::INFINITY
        } else {
            r * (df / (1.0 - r * r)).sqrt()
        };
        Some(two_sided_p(t, df))
    } else {
        None
    };
    Ok(StatsResult {
        pearson_r: Some(r),
        t_statistic: None,
        p_value,
        n,
    })
}

/// Paired t-test on x − y with n − 1 degrees of freedom.
pub fn paired_t(xs: &[f64], ys: &[f64]) -> Result<StatsResult, StatsError> {
    let n = check(xs, ys)?;
    let d: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x - y).collect();
    let md = mean(&d);
    let var = d.iter().map(|v| (v - md).powi(2)).sum::<f64>() / (n - 1) as f64;
    if negligible(var * (n - 1) as f64, &d) {
        return Err(StatsError::DegenerateSample {
            reason: "differences have zero variance".into(),
            statistic: (md.abs()
                <= 16.0 * f64::EPSILON * d.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .then_some(0.0),
        });
    }
    let t = md / (var.sqrt() / (n as f64).sqrt());
    Ok(StatsResult {
        pearson_r: None,
        t_statistic: Some(t),
        p_value: Some(two_sided_p(t, (n - 1) as f64)),
        n,
    })
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_correlations() {
        let x = [1.0, 2.5, 3.0, 7.0, 4.2];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap().pearson_r.unwrap() - 1.0).abs() < 1e-9);
        assert!((pearson(&x, &neg).unwrap().pearson_r.unwrap() + 1.0).abs() < 1e-9);
        assert_eq!(pearson(&x, &x).unwrap().p_value, Some(0.0));
    }

    #[test]
    fn paired_t_identical_is_degenerate_with_zero_statistic() {
        let x = [1.0, 2.0, 3.0];
        match paired_t(&x, &x) {
            Err(StatsError::DegenerateSample { statistic, .. }) => assert_eq!(statistic, Some(0.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn input_checks() {
        assert_eq!(pearson(&[1.0], &[1.0]), Err(StatsError::TooFew(1)));
        assert_eq!(
            paired_t(&[1.0, 2.0], &[1.0]),
            Err(StatsError::LengthMismatch(2, 1))
        );
        assert!(matches!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(StatsError::DegenerateSample { .. })
        ));
    }

    #[test]
    fn word_counts() {
        assert_eq!(word_count(""), 0);
        assert_eq!(word_count("a b  c"), 3);
        assert_eq!(
            word_count("Gotcha! So you're referring to the Tony Hawk's Pro Skater 3 sports game, which was released in 2001?"),
            18
        );
    }

    proptest! {
        #[test]
        fn affine_invariance(
            xs in proptest::collection::vec(-100.0f64..100.0, 3..30),
            noise in proptest::collection::vec(-10.0f64..10.0, 30),
            a in 0.1f64..50.0,
            b in -100.0f64..100.0,
        ) {
            let ys: Vec<f64> = xs.iter().zip(&noise).map(|(x, e)| 0.5 * x + e).collect();
            let base = pearson(&xs, &ys);
            prop_assume!(base.is_ok());
            let moved: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            let r0 = base.unwrap().pearson_r.unwrap();
            let r1 = pearson(&moved, &ys).unwrap().pearson_r.unwrap();
            prop_assert!((r0 - r1).abs() < 1e-9);
        }
    }
}
