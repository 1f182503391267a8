//! Indicators derived from a power-law fit, and the tables built from them.
//!
//! `P(x0) = (x0/100)^alpha` is the probability that one entity paper lands in
//! the world top-`x0` percentile, `P_top = N P(x0)` the expected number of such
//! papers, and the per-capita value divides `P_top` by a user-supplied size.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EntityDefinition, ScopeFilter, YearFilter};
use crate::double_rank::{check_percentile, count_series, rank_descending, CountSeries, RankRounding, RankedCorpus};
use crate::error::{Error, Result};
use crate::fitting::{default_percentiles, fit_power_law, InterceptMode, PowerLawFit};

/// `(x0/100)^alpha`.
pub fn probability_at(fit: &PowerLawFit, x0: f64) -> Result<f64> {
    check_percentile(x0)?;
    Ok((x0 / 100.0).powf(fit.alpha))
}

/// `n_pubs * P(x0)`.
pub fn p_top(fit: &PowerLawFit, x0: f64, n_pubs: u64) -> Result<f64> {
    Ok(n_pubs as f64 * probability_at(fit, x0)?)
}

pub fn per_capita(p_top_value: f64, denominator: f64) -> Result<f64> {
    if !(denominator > 0.0 && denominator.is_finite()) {
        return Err(Error::NonPositiveDenominator(denominator));
    }
    Ok(p_top_value / denominator)
}

/// Everything that shapes a fit, echoed into output metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub percentiles: Vec<f64>,
    pub intercept_mode: InterceptMode,
    pub rank_rounding: RankRounding,
    pub x0: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            percentiles: default_percentiles(),
            intercept_mode: InterceptMode::FixedAtTotal,
            rank_rounding: RankRounding::HalfUp,
            x0: 0.01,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        check_percentile(self.x0)?;
        if self.percentiles.is_empty() {
            return Err(Error::Config("percentile sample is empty".into()));
        }
        for &x in &self.percentiles {
            check_percentile(x)?;
        }
        if self.percentiles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::PercentilesNotIncreasing);
        }
        Ok(())
    }
}

/// A row of an indicator table: an entity's domestic papers, or the papers
/// shared by a pair of entities.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub name: String,
    pub entity: EntityDefinition,
    pub partner: Option<EntityDefinition>,
}

impl Cohort {
    pub fn domestic(entity: EntityDefinition) -> Self {
        Self {
            name: entity.name.clone(),
            entity,
            partner: None,
        }
    }

    /// Papers between `a` and `b`, named "`a` and `b`".
    pub fn pair(a: EntityDefinition, b: EntityDefinition) -> Result<Self> {
        if !a.is_disjoint(&b) {
            return Err(Error::Config(format!(
                "entities {:?} and {:?} overlap",
                a.name, b.name
            )));
        }
        Ok(Self {
            name: format!("{} and {}", a.name, b.name),
            entity: a,
            partner: Some(b),
        })
    }

    pub fn select(&self, world: &Corpus) -> Result<Corpus> {
        let filter = match &self.partner {
            Some(p) => ScopeFilter::Collaboration(p.clone()),
            None => ScopeFilter::Domestic,
        };
        world.subset(&self.entity, &filter, None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorRow {
    pub entity: String,
    pub n_pubs: u64,
    pub ep: Option<f64>,
    pub prob_top: Option<f64>,
    pub p_top: Option<f64>,
    pub per_capita: Option<f64>,
    pub x0: f64,
    #[serde(default)]
    pub year: Option<YearFilter>,
    pub alpha: Option<f64>,
    pub r_squared: Option<f64>,
    #[serde(default)]
    pub low_confidence: bool,
    /// Why no indicators could be computed for this row.
    #[serde(default)]
    pub flag: Option<String>,
}

impl IndicatorRow {
    fn flagged(entity: String, n_pubs: u64, x0: f64, flag: String) -> Self {
        Self {
            entity,
            n_pubs,
            ep: None,
            prob_top: None,
            p_top: None,
            per_capita: None,
            x0,
            year: None,
            alpha: None,
            r_squared: None,
            low_confidence: false,
            flag: Some(flag),
        }
    }

    pub fn from_fit(entity: String, n_pubs: u64, fit: &PowerLawFit, x0: f64) -> Result<Self> {
        let prob = probability_at(fit, x0)?;
        Ok(Self {
            entity,
            n_pubs,
            ep: Some(fit.ep),
            prob_top: Some(prob),
            p_top: Some(n_pubs as f64 * prob),
            per_capita: None,
            x0,
            year: None,
            alpha: Some(fit.alpha),
            r_squared: Some(fit.r_squared),
            low_confidence: fit.low_confidence,
            flag: None,
        })
    }
}

fn evaluate_cohort(
    world: &RankedCorpus,
    world_corpus: &Corpus,
    cohort: &Cohort,
    config: &AnalysisConfig,
) -> Result<IndicatorRow> {
    let subset = cohort.select(world_corpus)?;
    let n = subset.len() as u64;
    if subset.is_empty() {
        return Ok(IndicatorRow::flagged(
            cohort.name.clone(),
            0,
            config.x0,
            "zero-count: no publications in scope".into(),
        ));
    }
    let series = count_series(world, &subset, &config.percentiles, config.rank_rounding)?;
    match fit_power_law(&series, config.intercept_mode, None) {
        Ok(fit) => IndicatorRow::from_fit(cohort.name.clone(), n, &fit, config.x0),
        Err(Error::Fit(msg)) => Ok(IndicatorRow::flagged(
            cohort.name.clone(),
            n,
            config.x0,
            format!("unfitted: {msg}"),
        )),
        Err(e) => Err(e),
    }
}

/// Descending e_p; rows without an e_p go last in their original order.
fn sort_rows(rows: &mut [IndicatorRow]) {
    rows.sort_by(|a, b| match (a.ep, b.ep) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
}

/// One row per cohort against a single world ranking, sorted by e_p descending.
///
/// `populations` maps cohort names to positive denominators for the
/// per-capita column; cohorts missing from the map get no per-capita value.
pub fn indicator_table(
    world: &Corpus,
    cohorts: &[Cohort],
    config: &AnalysisConfig,
    populations: Option<&BTreeMap<String, f64>>,
) -> Result<Vec<IndicatorRow>> {
    config.validate()?;
    if let Some(pops) = populations {
        if let Some((name, &v)) = pops.iter().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!(
                "denominator for {name:?} must be positive, got {v}"
            )));
        }
    }
    let ranked = rank_descending(world)?;
    let mut rows = cohorts
        .par_iter()
        .map(|c| evaluate_cohort(&ranked, world, c, config))
        .collect::<Result<Vec<_>>>()?;
    if let Some(pops) = populations {
        for row in &mut rows {
            if let (Some(p), Some(&d)) = (row.p_top, pops.get(&row.entity)) {
                row.per_capita = Some(per_capita(p, d)?);
            }
        }
    }
    sort_rows(&mut rows);
    Ok(rows)
}

/// Indicator rows per year, each year ranked within its own world corpus.
/// Output is ordered by year, then as [`indicator_table`] orders rows.
pub fn time_series(
    worlds: &BTreeMap<i32, Corpus>,
    cohorts: &[Cohort],
    years: &[i32],
    config: &AnalysisConfig,
) -> Result<Vec<IndicatorRow>> {
    let mut out = Vec::new();
    for &year in years {
        let world = worlds.get(&year).ok_or(Error::MissingYear(year))?;
        let mut rows = indicator_table(world, cohorts, config, None)?;
        for row in &mut rows {
            row.year = Some(YearFilter::single(year));
        }
        out.extend(rows);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub x: f64,
    /// `N_e(x) / N_e`.
    pub empirical: f64,
    /// `(x/100)^alpha`.
    pub fitted: f64,
}

pub fn plot_data(series: &CountSeries, fit: &PowerLawFit) -> Vec<PlotPoint> {
    let total = series.entity_total as f64;
    series
        .points
        .iter()
        .map(|p| PlotPoint {
            x: p.x,
            empirical: if total > 0.0 { p.count / total } else { 0.0 },
            fitted: (p.x / 100.0).powf(fit.alpha),
        })
        .collect()
}

/// Number formatting for human-facing CSV tables.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisplayProfile {
    /// e_p 4 decimals, probability 7, P_top 4, per-capita 5.
    #[default]
    Paper,
    /// Shortest round-trip representation.
    Full,
}

impl fmt::Display for DisplayProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DisplayProfile::Paper => "paper",
            DisplayProfile::Full => "full",
        })
    }
}

impl FromStr for DisplayProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(DisplayProfile::Paper),
            "full" => Ok(DisplayProfile::Full),
            other => Err(Error::Config(format!(
                "unknown display profile {other:?} (expected paper or full)"
            ))),
        }
    }
}

impl DisplayProfile {
    pub const EP_DECIMALS: usize = 4;
    pub const PROB_DECIMALS: usize = 7;
    pub const P_TOP_DECIMALS: usize = 4;
    pub const PER_CAPITA_DECIMALS: usize = 5;

    fn fmt(self, v: Option<f64>, decimals: usize) -> String {
        match (v, self) {
            (None, _) => String::new(),
            (Some(v), DisplayProfile::Paper) => format!("{v:.decimals$}"),
            (Some(v), DisplayProfile::Full) => v.to_string(),
        }
    }
}

/// Columns of every indicator CSV, after an optional leading `year`.
pub const TABLE_COLUMNS: [&str; 6] = ["entity", "n_pubs", "ep", "prob_top", "p_top", "per_capita"];

fn write_metadata_comment(sink: &mut impl Write, metadata: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(metadata)?;
    for line in text.lines() {
        writeln!(sink, "# {line}")?;
    }
    Ok(())
}

/// CSV table preceded by `#`-prefixed JSON metadata. A `year` column is
/// prepended when `with_year` is set.
pub fn write_rows_csv(
    rows: &[IndicatorRow],
    metadata: &serde_json::Value,
    profile: DisplayProfile,
    with_year: bool,
    mut sink: impl Write,
) -> Result<()> {
    write_metadata_comment(&mut sink, metadata)?;
    let mut w = csv::Writer::from_writer(sink);
    let mut header: Vec<&str> = Vec::new();
    if with_year {
        header.push("year");
    }
    header.extend(TABLE_COLUMNS);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = Vec::with_capacity(header.len());
        if with_year {
            rec.push(r.year.map(|y| y.to_string()).unwrap_or_default());
        }
        rec.push(r.entity.clone());
        rec.push(r.n_pubs.to_string());
        rec.push(profile.fmt(r.ep, DisplayProfile::EP_DECIMALS));
        rec.push(profile.fmt(r.prob_top, DisplayProfile::PROB_DECIMALS));
        rec.push(profile.fmt(r.p_top, DisplayProfile::P_TOP_DECIMALS));
        rec.push(profile.fmt(r.per_capita, DisplayProfile::PER_CAPITA_DECIMALS));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `{"metadata": ..., "rows": [...]}` at full precision.
pub fn write_rows_json(
    rows: &[IndicatorRow],
    metadata: &serde_json::Value,
    mut sink: impl Write,
) -> Result<()> {
    let doc = serde_json::json!({ "metadata": metadata, "rows": rows });
    serde_json::to_writer_pretty(&mut sink, &doc)?;
    sink.write_all(b"\n")?;
    Ok(())
}

pub fn write_plot_csv(
    points: &[PlotPoint],
    metadata: &serde_json::Value,
    mut sink: impl Write,
) -> Result<()> {
    write_metadata_comment(&mut sink, metadata)?;
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["x", "empirical", "fitted"])?;
    for p in points {
        w.write_record([p.x.to_string(), p.empirical.to_string(), p.fitted.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_plot_json(
    points: &[PlotPoint],
    metadata: &serde_json::Value,
    mut sink: impl Write,
) -> Result<()> {
    let doc = serde_json::json!({ "metadata": metadata, "points": points });
    serde_json::to_writer_pretty(&mut sink, &doc)?;
    sink.write_all(b"\n")?;
    Ok(())
}
