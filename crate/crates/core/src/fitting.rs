//! Power-law fit of `N(x) = N (x/100)^alpha` and the e_p index.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::double_rank::CountSeries;
use crate::error::{Error, Result};

/// Integer percentiles 1..=10.
pub fn default_percentiles() -> Vec<f64> {
    (1..=10).map(f64::from).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterceptMode {
    /// Intercept pinned to `log10(N_e)`; only the exponent is estimated.
    #[default]
    FixedAtTotal,
    /// Ordinary least squares on both slope and intercept.
    Free,
}

impl fmt::Display for InterceptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InterceptMode::FixedAtTotal => "fixed-at-total",
            InterceptMode::Free => "free",
        })
    }
}

impl FromStr for InterceptMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed-at-total" | "fixed" => Ok(InterceptMode::FixedAtTotal),
            "free" => Ok(InterceptMode::Free),
            other => Err(Error::Config(format!(
                "unknown intercept mode {other:?} (expected fixed-at-total or free)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    /// `10^-alpha`.
    pub ep: f64,
    pub intercept_mode: InterceptMode,
    /// Fitted `log10` prefactor.
    pub log10_intercept: f64,
    /// Percentiles that entered the regression.
    pub sample: Vec<f64>,
    /// Coefficient of determination in log space.
    pub r_squared: f64,
    /// Sampled percentiles skipped because `N_e(x) = 0`.
    pub dropped_points: Vec<f64>,
    /// Fewer than three points survived.
    pub low_confidence: bool,
}

impl PowerLawFit {
    /// A fit carrying only an exponent recovered from a published e_p value.
    pub fn from_ep(ep: f64) -> Result<Self> {
        if !(ep > 0.0 && ep.is_finite()) {
            return Err(Error::Config(format!("e_p must be positive, got {ep}")));
        }
        Ok(Self {
            alpha: -ep.log10(),
            ep,
            intercept_mode: InterceptMode::FixedAtTotal,
            log10_intercept: f64::NAN,
            sample: Vec::new(),
            r_squared: f64::NAN,
            dropped_points: Vec::new(),
            low_confidence: false,
        })
    }
}

/// Least squares of `log10 N_e(x)` on `log10(x/100)`.
///
/// `sample` restricts the fit to a subset of the series' percentiles; every
/// requested percentile must be present in the series.
pub fn fit_power_law(
    series: &CountSeries,
    mode: InterceptMode,
    sample: Option<&[f64]>,
) -> Result<PowerLawFit> {
    let chosen: Vec<(f64, f64)> = match sample {
        None => series.points.iter().map(|p| (p.x, p.count)).collect(),
        Some(xs) => xs
            .iter()
            .map(|&x| series.at(x).map(|n| (x, n)).ok_or(Error::MissingPercentile(x)))
            .collect::<Result<_>>()?,
    };
    let (kept, dropped): (Vec<_>, Vec<_>) = chosen.into_iter().partition(|&(_, n)| n > 0.0);
    let dropped_points: Vec<f64> = dropped.into_iter().map(|(x, _)| x).collect();
    if kept.len() < 2 {
        return Err(Error::Fit(format!(
            "{} usable point(s) with N(x) > 0, need at least 2",
            kept.len()
        )));
    }

    let t: Vec<f64> = kept.iter().map(|&(x, _)| (x / 100.0).log10()).collect();
    let y: Vec<f64> = kept.iter().map(|&(_, n)| n.log10()).collect();
    let n = t.len() as f64;

    let (alpha, intercept) = match mode {
        InterceptMode::FixedAtTotal => {
            if series.entity_total == 0 {
                return Err(Error::Fit("entity total is zero".into()));
            }
            let b = (series.entity_total as f64).log10();
            let stt: f64 = t.iter().map(|v| v * v).sum();
            if stt == 0.0 {
                return Err(Error::Fit("all sampled percentiles are 100".into()));
            }
            let sty: f64 = t.iter().zip(&y).map(|(a, v)| a * (v - b)).sum();
            (sty / stt, b)
        }
        InterceptMode::Free => {
            let tm = t.iter().sum::<f64>() / n;
            let ym = y.iter().sum::<f64>() / n;
            let stt: f64 = t.iter().map(|v| (v - tm).powi(2)).sum();
            if stt == 0.0 {
                return Err(Error::Fit("sampled percentiles do not vary".into()));
            }
            let sty: f64 = t.iter().zip(&y).map(|(a, v)| (a - tm) * (v - ym)).sum();
            let slope = sty / stt;
            (slope, ym - slope * tm)
        }
    };

    let ym = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
    let ss_res: f64 = t
        .iter()
        .zip(&y)
        .map(|(a, v)| (v - (intercept + alpha * a)).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res <= 1e-24 {
        1.0
    } else {
        0.0
    };

    Ok(PowerLawFit {
        alpha,
        ep: 10f64.powf(-alpha),
        intercept_mode: mode,
        log10_intercept: intercept,
        sample: kept.iter().map(|&(x, _)| x).collect(),
        r_squared,
        low_confidence: kept.len() < 3,
        dropped_points,
    })
}

/// `N_e(1) / N_e(10)`.
pub fn ep_direct(series: &CountSeries) -> Result<f64> {
    let top1 = series.at(1.0).ok_or(Error::MissingPercentile(1.0))?;
    let top10 = series.at(10.0).ok_or(Error::MissingPercentile(10.0))?;
    if top10 <= 0.0 {
        return Err(Error::UndefinedRatio(10.0));
    }
    Ok(top1 / top10)
}
