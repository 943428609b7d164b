//! Sample statistics over repetitions.

use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std_dev: f64,
    /// Half-width of the two-sided Student-t interval; NaN below two samples.
    pub half_width: f64,
}

impl Summary {
    pub fn std_error(&self) -> f64 {
        self.std_dev / (self.n as f64).sqrt()
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Quantile `p` of Student's t with `df` degrees of freedom.
pub fn t_quantile(p: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).expect("df > 0").inverse_cdf(p)
}

pub fn summarize(xs: &[f64], confidence: f64) -> Summary {
    let n = xs.len();
    let m = mean(xs);
    let sd = std_dev(xs);
    let half_width = if n < 2 {
        f64::NAN
    } else if sd == 0.0 {
        0.0
    } else {
        t_quantile(0.5 + confidence / 2.0, (n - 1) as f64) * sd / (n as f64).sqrt()
    };
    Summary { n, mean: m, std_dev: sd, half_width }
}

/// One-sided paired t-test of `mean(a − b) > 0`; returns the p-value.
pub fn paired_greater_p(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "paired samples");
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    if n < 2 {
        return f64::NAN;
    }
    let (m, sd) = (mean(&d), std_dev(&d));
    if sd == 0.0 {
        return if m > 0.0 { 0.0 } else { 1.0 };
    }
    let t = m / (sd / (n as f64).sqrt());
    1.0 - StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("df > 0").cdf(t)
}
