//! Synthetic worlds with a planted exponent, plus independent oracles for the
//! tie-apportioned counts.
//!
//! A world of `M` papers gets citations from a discrete heavy-tailed model.
//! Planting walks the world in rank order and admits the paper at percentile
//! position `u = i/M` with probability `s a u^(a-1)`, so the entity's expected
//! count inside the top `x` percent is `M s (x/100)^a`.
//!
//! The oracles work from raw citation and label slices and share no code with
//! [`crate::double_rank`] beyond the rank-rounding rule.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Pareto};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, PublicationRecord};
use crate::double_rank::RankRounding;
use crate::error::{Error, Result};

/// Country code of unplanted synthetic papers.
pub const WORLD_COUNTRY: &str = "WORLD";
/// Country code given to papers of the planted entity.
pub const PLANTED_COUNTRY: &str = "PLANTED";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CitationModel {
    /// `floor(exp(N(mu, sigma^2)))`; `sigma = 0` ties every paper.
    Lognormal { mu: f64, sigma: f64 },
    /// `floor(Pareto(scale, shape))`.
    Pareto { scale: f64, shape: f64 },
}

impl Default for CitationModel {
    fn default() -> Self {
        // median ~10 citations, top-1% cutoff near 100
        CitationModel::Lognormal { mu: 2.3, sigma: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub world_size: usize,
    pub citation_model: CitationModel,
    /// Expected entity share `s` of the world.
    pub entity_fraction: f64,
    pub planted_alpha: f64,
    pub seed: u64,
    /// Publication year stamped on every record.
    pub year: i32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            world_size: 200_000,
            citation_model: CitationModel::default(),
            entity_fraction: 0.1,
            planted_alpha: 0.9,
            seed: 0,
            year: 2014,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.world_size < 100 {
            return Err(Error::Config(format!(
                "world_size must be at least 100, got {}",
                self.world_size
            )));
        }
        if !(self.entity_fraction > 0.0 && self.entity_fraction < 1.0) {
            return Err(Error::Config(format!(
                "entity_fraction must lie in (0, 1), got {}",
                self.entity_fraction
            )));
        }
        if !(self.planted_alpha > 0.0 && self.planted_alpha.is_finite()) {
            return Err(Error::Config(format!(
                "planted_alpha must be positive, got {}",
                self.planted_alpha
            )));
        }
        match self.citation_model {
            CitationModel::Lognormal { mu, sigma } => {
                if !(mu.is_finite() && sigma.is_finite() && sigma >= 0.0) {
                    return Err(Error::Config("lognormal needs finite mu and sigma >= 0".into()));
                }
            }
            CitationModel::Pareto { scale, shape } => {
                if !(scale > 0.0 && shape > 0.0) {
                    return Err(Error::Config("pareto needs scale > 0 and shape > 0".into()));
                }
            }
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedWorld {
    pub corpus: Corpus,
    pub warnings: Vec<String>,
}

fn synthetic_id(i: usize) -> String {
    format!("w{i:07}")
}

pub fn generate_world(config: &GeneratorConfig) -> Result<GeneratedWorld> {
    config.validate()?;
    let mut rng = config.rng(0);
    let mut warnings = Vec::new();
    let m = config.world_size;

    let citations: Vec<u64> = match config.citation_model {
        CitationModel::Lognormal { mu, sigma: 0.0 } => {
            warnings.push("zero-variance citation model: every paper is tied".to_string());
            vec![mu.exp().floor() as u64; m]
        }
        CitationModel::Lognormal { mu, sigma } => {
            let d = LogNormal::new(mu, sigma).map_err(|e| Error::Config(e.to_string()))?;
            (0..m).map(|_| d.sample(&mut rng).floor() as u64).collect()
        }
        CitationModel::Pareto { scale, shape } => {
            let d = Pareto::new(scale, shape).map_err(|e| Error::Config(e.to_string()))?;
            (0..m).map(|_| d.sample(&mut rng).floor() as u64).collect()
        }
    };

    let records = citations
        .into_iter()
        .enumerate()
        .map(|(i, c)| PublicationRecord {
            id: synthetic_id(i),
            year: config.year,
            citations: c,
            countries: vec![WORLD_COUNTRY.to_string()],
        })
        .collect();
    Ok(GeneratedWorld {
        corpus: Corpus::new(format!("synthetic seed {}", config.seed), records)?,
        warnings,
    })
}

#[derive(Debug, Clone)]
pub struct PlantedWorld {
    /// World with entity papers relabelled to [`PLANTED_COUNTRY`].
    pub corpus: Corpus,
    /// Entity membership per record, aligned with `corpus.records()`.
    pub labels: Vec<bool>,
    /// Ranks whose inclusion probability exceeded 1 and was clipped.
    pub clipped: usize,
    pub warnings: Vec<String>,
}

impl PlantedWorld {
    pub fn entity_size(&self) -> usize {
        self.labels.iter().filter(|&&b| b).count()
    }
}

/// Inclusion probability `min(1, s a u^(a-1))` at percentile position `u`.
pub fn inclusion_probability(entity_fraction: f64, alpha: f64, u: f64) -> f64 {
    (entity_fraction * alpha * u.powf(alpha - 1.0)).min(1.0)
}

pub fn plant_entity(world: &Corpus, config: &GeneratorConfig) -> Result<PlantedWorld> {
    config.validate()?;
    if world.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let m = world.len();
    let cites: Vec<u64> = world.citations().collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| cites[b].cmp(&cites[a]));

    let mut rng = config.rng(1);
    let mut labels = vec![false; m];
    let mut clipped = 0;
    for (pos, &idx) in order.iter().enumerate() {
        let u = (pos + 1) as f64 / m as f64;
        let raw = config.entity_fraction * config.planted_alpha * u.powf(config.planted_alpha - 1.0);
        if raw > 1.0 {
            clipped += 1;
        }
        labels[idx] = rng.random::<f64>() < raw.min(1.0);
    }

    let records = world
        .records()
        .iter()
        .zip(&labels)
        .map(|(r, &inside)| {
            let mut r = r.clone();
            if inside {
                r.countries = vec![PLANTED_COUNTRY.to_string()];
            }
            r
        })
        .collect();
    let mut warnings = Vec::new();
    if clipped > 0 {
        warnings.push(format!(
            "inclusion probability clipped at 1 for {clipped} top rank(s); planted exponent is biased there"
        ));
    }
    Ok(PlantedWorld {
        corpus: Corpus::new(world.label().to_string(), records)?,
        labels,
        clipped,
        warnings,
    })
}

/// [`generate_world`] followed by [`plant_entity`].
pub fn synthesize(config: &GeneratorConfig) -> Result<PlantedWorld> {
    let world = generate_world(config)?;
    let mut planted = plant_entity(&world.corpus, config)?;
    let mut warnings = world.warnings;
    warnings.append(&mut planted.warnings);
    planted.warnings = warnings;
    Ok(planted)
}

/// Cutoff geometry recomputed from scratch.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TieCut {
    cutoff: u64,
    rank: usize,
    world_above: usize,
    world_tied: usize,
    entity_above: usize,
    entity_tied: usize,
}

fn tie_cut(citations: &[u64], labels: &[bool], x: f64, rounding: RankRounding) -> Result<TieCut> {
    if citations.len() != labels.len() {
        return Err(Error::Config("citations and labels differ in length".into()));
    }
    if citations.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if !(x > 0.0 && x <= 100.0) {
        return Err(Error::PercentileOutOfRange(x));
    }
    let rank = rounding.rank_cutoff(x, citations.len());
    let mut sorted = citations.to_vec();
    sorted.sort_unstable();
    let cutoff = sorted[sorted.len() - rank];
    let mut cut = TieCut {
        cutoff,
        rank,
        world_above: 0,
        world_tied: 0,
        entity_above: 0,
        entity_tied: 0,
    };
    for (&c, &inside) in citations.iter().zip(labels) {
        if c > cutoff {
            cut.world_above += 1;
            cut.entity_above += usize::from(inside);
        } else if c == cutoff {
            cut.world_tied += 1;
            cut.entity_tied += usize::from(inside);
        }
    }
    Ok(cut)
}

/// Mean of the hypergeometric count of marked items among `draws` taken
/// without replacement from `population` items, `marked` of them marked,
/// summed over the probability mass function.
pub fn hypergeometric_mean(population: usize, marked: usize, draws: usize) -> f64 {
    let lo = draws.saturating_sub(population - marked);
    let hi = draws.min(marked);
    let mut log_w = Vec::with_capacity(hi - lo + 1);
    let mut lw = 0.0f64;
    log_w.push(lw);
    for j in lo..hi {
        let num = ((marked - j) * (draws - j)) as f64;
        let den = ((j + 1) * (population - marked + j + 1 - draws)) as f64;
        lw += num.ln() - den.ln();
        log_w.push(lw);
    }
    let peak = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut mass, mut first) = (0.0, 0.0);
    for (k, lw) in log_w.iter().enumerate() {
        let w = (lw - peak).exp();
        mass += w;
        first += (lo + k) as f64 * w;
    }
    first / mass
}

/// Expected number of labelled papers inside the top-`x` rank cutoff when
/// the papers tied at the cutoff are ordered uniformly at random.
pub fn oracle_top_count(
    citations: &[u64],
    labels: &[bool],
    x: f64,
    rounding: RankRounding,
) -> Result<f64> {
    let cut = tie_cut(citations, labels, x, rounding)?;
    let inside = cut.rank - cut.world_above;
    Ok(cut.entity_above as f64 + hypergeometric_mean(cut.world_tied, cut.entity_tied, inside))
}

/// The same expectation by enumerating every subset of tied positions that
/// can fall inside the cutoff. Only for tie groups of at most 20 papers.
pub fn oracle_exhaustive(
    citations: &[u64],
    labels: &[bool],
    x: f64,
    rounding: RankRounding,
) -> Result<f64> {
    let cut = tie_cut(citations, labels, x, rounding)?;
    if cut.world_tied > 20 {
        return Err(Error::Config(format!(
            "{} tied papers is too many to enumerate",
            cut.world_tied
        )));
    }
    let tied: Vec<bool> = citations
        .iter()
        .zip(labels)
        .filter(|(&c, _)| c == cut.cutoff)
        .map(|(_, &l)| l)
        .collect();
    let inside = cut.rank - cut.world_above;
    let (mut total, mut subsets) = (0u64, 0u64);
    for mask in 0u32..(1u32 << tied.len()) {
        if mask.count_ones() as usize != inside {
            continue;
        }
        subsets += 1;
        total += tied
            .iter()
            .enumerate()
            .filter(|&(i, &l)| l && mask & (1 << i) != 0)
            .count() as u64;
    }
    Ok(cut.entity_above as f64 + total as f64 / subsets as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

/// Sample random orderings of the cutoff tie group and count labelled papers
/// landing inside the percentile.
pub fn oracle_monte_carlo(
    citations: &[u64],
    labels: &[bool],
    x: f64,
    rounding: RankRounding,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if samples < 2 {
        return Err(Error::Config("need at least 2 Monte Carlo samples".into()));
    }
    let cut = tie_cut(citations, labels, x, rounding)?;
    let tied: Vec<bool> = citations
        .iter()
        .zip(labels)
        .filter(|(&c, _)| c == cut.cutoff)
        .map(|(_, &l)| l)
        .collect();
    let inside = cut.rank - cut.world_above;
    // draw the smaller of the inside/outside sets
    let complement = inside * 2 > tied.len();
    let draw = if complement { tied.len() - inside } else { inside };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let picked = index::sample(&mut rng, tied.len(), draw)
            .iter()
            .filter(|&i| tied[i])
            .count();
        let hits = if complement { cut.entity_tied - picked } else { picked };
        let v = (cut.entity_above + hits) as f64;
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(MonteCarloEstimate {
        mean,
        std_err: (var / n).sqrt(),
        samples,
    })
}
