//! Log-log power-law fits of regret against horizon.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_FIT_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub used: usize,
    /// Points dropped because their mean regret was not positive.
    pub excluded: usize,
}

/// OLS of `ln mean` on `ln T` over points with positive mean.
pub fn fit_regret_exponent(points: &[(f64, f64)]) -> Result<ExponentFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, m)| *t > 0.0 && *m > 0.0)
        .map(|(t, m)| (t.ln(), m.ln()))
        .collect();
    let excluded = points.len() - usable.len();
    if usable.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} usable points ({excluded} excluded), need {MIN_FIT_POINTS}",
            usable.len()
        )));
    }
    let k = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / k;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = usable.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all horizons are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(ExponentFit {
        slope,
        intercept,
        r_squared,
        used: usable.len(),
        excluded,
    })
}

/// Reads `T, mean_regret` columns of a summary CSV.
pub fn read_summary_points(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid("summary", format!("missing column `{name}`")))
    };
    let (ti, mi) = (col("T")?, col("mean_regret")?);
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let parse = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .map_err(|_| Error::invalid("summary", format!("bad number `{}`", &record[i])))
        };
        out.push((parse(ti)?, parse(mi)?));
    }
    Ok(out)
}

pub fn fit_summary_file(path: &Path) -> Result<ExponentFit> {
    fit_regret_exponent(&read_summary_points(path)?)
}
