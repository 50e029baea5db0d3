//! Least-squares line fits for convergence and cost rates.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence half-width of the slope; infinite with two points.
    pub half_width: f64,
}

/// Ordinary least squares of `ys` against `xs`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            what: "regression abscissae vs ordinates",
            expected: xs.len(),
            actual: ys.len(),
        });
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::Numeric(
            "a line fit needs at least two points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value in regression data".into()));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Numeric("regression abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let half_width = if n > 2 {
        let rss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        let se = (rss / (nf - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, nf - 2.0)
            .map_err(|e| Error::Numeric(e.to_string()))?
            .inverse_cdf(0.975);
        t * se
    } else {
        f64::INFINITY
    };
    Ok(LinearFit {
        slope,
        intercept,
        half_width,
    })
}

/// Fit of `log2 |y|` against `x`, skipping zero entries.
pub fn fit_log2(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    let (px, py): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| y.abs() > 0.0)
        .map(|(x, y)| (*x, y.abs().log2()))
        .unzip();
    fit_line(&px, &py)
}
