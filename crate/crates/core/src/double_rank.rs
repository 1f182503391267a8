//! World citation ranking, percentile thresholds and fractional entity counts.
//!
//! The world list is sorted by citations (descending, stable). The top-`x`
//! percentile ends at rank `R`; the citation count of the rank-`R` paper is the
//! cutoff `c`. An entity's count is its papers strictly above `c` plus the same
//! fraction of its `c`-tied papers as the world places inside the percentile:
//! `E_gt + f E_eq` with `f = (R - G_gt) / G_eq`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// How the fractional rank `x N / 100` becomes an integer cutoff.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankRounding {
    #[default]
    HalfUp,
    Floor,
    Ceil,
}

impl RankRounding {
    /// Rank cutoff for percentile `x` in a world of `total` papers, clamped to `[1, total]`.
    pub fn rank_cutoff(self, x: f64, total: usize) -> usize {
        let v = x * total as f64 / 100.0;
        // absorbs binary representation error in x (e.g. 0.07 * 100)
        let eps = 1e-9 * v.max(1.0);
        let r = match self {
            RankRounding::HalfUp => (v + 0.5 + eps).floor(),
            RankRounding::Floor => (v + eps).floor(),
            RankRounding::Ceil => (v - eps).ceil(),
        };
        (r as usize).clamp(1, total.max(1))
    }
}

impl fmt::Display for RankRounding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankRounding::HalfUp => "half-up",
            RankRounding::Floor => "floor",
            RankRounding::Ceil => "ceil",
        })
    }
}

impl FromStr for RankRounding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half-up" => Ok(RankRounding::HalfUp),
            "floor" => Ok(RankRounding::Floor),
            "ceil" => Ok(RankRounding::Ceil),
            other => Err(Error::Config(format!(
                "unknown rank rounding {other:?} (expected half-up, floor or ceil)"
            ))),
        }
    }
}

/// Ranks `first..=last` (1-based) all carrying `citations`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TieGroup {
    pub citations: u64,
    pub first: usize,
    pub last: usize,
}

impl TieGroup {
    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// The world list in descending citation order.
#[derive(Debug, Clone)]
pub struct RankedCorpus {
    /// Index into the source corpus for each rank position.
    order: Vec<usize>,
    citations: Vec<u64>,
    tie_groups: Vec<TieGroup>,
}

/// Stable descending sort of `corpus` by citations.
pub fn rank_descending(corpus: &Corpus) -> Result<RankedCorpus> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let source: Vec<u64> = corpus.citations().collect();
    let mut order: Vec<usize> = (0..source.len()).collect();
    order.sort_by(|&a, &b| source[b].cmp(&source[a]));
    let citations: Vec<u64> = order.iter().map(|&i| source[i]).collect();

    let mut tie_groups = Vec::new();
    let mut start = 0;
    for i in 1..=citations.len() {
        if i == citations.len() || citations[i] != citations[start] {
            tie_groups.push(TieGroup {
                citations: citations[start],
                first: start + 1,
                last: i,
            });
            start = i;
        }
    }
    Ok(RankedCorpus {
        order,
        citations,
        tie_groups,
    })
}

impl RankedCorpus {
    /// World size `N_w`.
    pub fn total(&self) -> usize {
        self.citations.len()
    }

    /// Citations in rank order.
    pub fn citations(&self) -> &[u64] {
        &self.citations
    }

    /// Source-corpus index at each rank position.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn tie_groups(&self) -> &[TieGroup] {
        &self.tie_groups
    }

    /// The tie group occupying 1-based `rank`.
    pub fn group_at(&self, rank: usize) -> &TieGroup {
        let idx = self.tie_groups.partition_point(|g| g.last < rank);
        &self.tie_groups[idx]
    }

    /// Threshold for the top-`x` percentile.
    pub fn percentile_threshold(&self, x: f64, rounding: RankRounding) -> Result<PercentileThreshold> {
        check_percentile(x)?;
        let rank_cutoff = rounding.rank_cutoff(x, self.total());
        let group = *self.group_at(rank_cutoff);
        let above = group.first - 1;
        let tied = group.len();
        Ok(PercentileThreshold {
            x,
            rank_cutoff,
            citation_cutoff: group.citations,
            above,
            tied,
            tie_fraction: (rank_cutoff - above) as f64 / tied as f64,
        })
    }
}

pub(crate) fn check_percentile(x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 && x <= 100.0 {
        Ok(())
    } else {
        Err(Error::PercentileOutOfRange(x))
    }
}

/// Where the top-`x` percentile ends in the world ranking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PercentileThreshold {
    pub x: f64,
    /// `R`, 1-based.
    pub rank_cutoff: usize,
    /// Citations of the rank-`R` paper.
    pub citation_cutoff: u64,
    /// World papers with more citations than the cutoff (`G_gt`).
    pub above: usize,
    /// World papers tied at the cutoff (`G_eq`).
    pub tied: usize,
    /// Share of the tied papers inside the percentile, in `(0, 1]`.
    pub tie_fraction: f64,
}

/// Fractional number of `entity` papers inside `threshold`.
pub fn entity_count_at(entity: &Corpus, threshold: &PercentileThreshold) -> f64 {
    let (mut above, mut tied) = (0usize, 0usize);
    for c in entity.citations() {
        if c > threshold.citation_cutoff {
            above += 1;
        } else if c == threshold.citation_cutoff {
            tied += 1;
        }
    }
    above as f64 + threshold.tie_fraction * tied as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountPoint {
    pub x: f64,
    pub count: f64,
}

/// Entity counts `N_e(x)` at a list of percentiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSeries {
    pub points: Vec<CountPoint>,
    /// `N_e`, all publications of the entity.
    pub entity_total: usize,
}

impl CountSeries {
    /// Count at percentile `x`, matched to within 1e-9.
    pub fn at(&self, x: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| (p.x - x).abs() <= 1e-9)
            .map(|p| p.count)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `N_e(x)` for each percentile of a strictly increasing list.
pub fn count_series(
    world: &RankedCorpus,
    entity: &Corpus,
    percentiles: &[f64],
    rounding: RankRounding,
) -> Result<CountSeries> {
    for &x in percentiles {
        check_percentile(x)?;
    }
    if percentiles.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::PercentilesNotIncreasing);
    }
    let mut sorted: Vec<u64> = entity.citations().collect();
    sorted.sort_unstable_by(|a, b| b.cmp(a));

    let points = percentiles
        .iter()
        .map(|&x| {
            let t = world.percentile_threshold(x, rounding)?;
            let above = sorted.partition_point(|&c| c > t.citation_cutoff);
            let through = sorted.partition_point(|&c| c >= t.citation_cutoff);
            Ok(CountPoint {
                x,
                count: above as f64 + t.tie_fraction * (through - above) as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CountSeries {
        points,
        entity_total: entity.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PublicationRecord;

    fn corpus(cites: &[u64]) -> Corpus {
        let recs = cites
            .iter()
            .enumerate()
            .map(|(i, &c)| PublicationRecord::new(format!("p{i}"), 2014, c, vec!["XX".into()]).unwrap())
            .collect();
        Corpus::new("t", recs).unwrap()
    }

    #[test]
    fn distinct_values_rank_descending() {
        let r = rank_descending(&corpus(&[5, 9, 7])).unwrap();
        assert_eq!(r.citations(), &[9, 7, 5]);
        assert_eq!(r.order(), &[1, 2, 0]);
    }

    #[test]
    fn tie_group_spans() {
        let r = rank_descending(&corpus(&[9, 7, 7, 5])).unwrap();
        assert_eq!(
            r.tie_groups()[1],
            TieGroup {
                citations: 7,
                first: 2,
                last: 3
            }
        );
        assert_eq!(r.group_at(3).citations, 7);
        assert_eq!(r.group_at(4).citations, 5);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(rank_descending(&corpus(&[])), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn rank_cutoff_rules() {
        assert_eq!(RankRounding::HalfUp.rank_cutoff(10.0, 1000), 100);
        assert_eq!(RankRounding::HalfUp.rank_cutoff(1.0, 148_375), 1484);
        assert_eq!(RankRounding::HalfUp.rank_cutoff(1.0, 76_299), 763);
        assert_eq!(RankRounding::Floor.rank_cutoff(1.0, 148_375), 1483);
        assert_eq!(RankRounding::Ceil.rank_cutoff(1.0, 76_299), 763);
        assert_eq!(RankRounding::HalfUp.rank_cutoff(0.01, 100), 1);
        assert_eq!(RankRounding::HalfUp.rank_cutoff(2.5, 100), 3);
        assert_eq!(RankRounding::HalfUp.rank_cutoff(100.0, 7), 7);
    }

    #[test]
    fn percentile_out_of_range() {
        let r = rank_descending(&corpus(&[1, 2])).unwrap();
        for x in [0.0, -1.0, 100.5, f64::NAN] {
            assert!(r.percentile_threshold(x, RankRounding::HalfUp).is_err());
        }
    }

    #[test]
    fn ten_tied_four_inside() {
        // 20 world papers: 6 above, 10 tied at 50, 4 below; top 50% ends at rank 10.
        let mut cites = vec![100u64; 6];
        cites.extend([50; 10]);
        cites.extend([1; 4]);
        let world = rank_descending(&corpus(&cites)).unwrap();
        let t = world.percentile_threshold(50.0, RankRounding::HalfUp).unwrap();
        assert_eq!(t.rank_cutoff, 10);
        assert_eq!(t.citation_cutoff, 50);
        assert_eq!((t.above, t.tied), (6, 10));
        assert!((t.tie_fraction - 0.4).abs() < 1e-15);

        let mut e = vec![100u64; 7];
        e.extend([50; 5]);
        e.push(1);
        assert!((entity_count_at(&corpus(&e), &t) - 9.0).abs() < 1e-12);
        assert_eq!(entity_count_at(&corpus(&[1, 1]), &t), 0.0);
    }

    #[test]
    fn self_count_is_rank_cutoff() {
        let c = corpus(&[3, 3, 3, 2, 2, 9, 0, 0, 0, 0, 1]);
        let world = rank_descending(&c).unwrap();
        for x in [1.0, 9.0, 10.0, 27.3, 50.0, 99.0, 100.0] {
            let t = world.percentile_threshold(x, RankRounding::HalfUp).unwrap();
            assert!((entity_count_at(&c, &t) - t.rank_cutoff as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn series_validation() {
        let c = corpus(&[1, 2, 3]);
        let world = rank_descending(&c).unwrap();
        assert!(matches!(
            count_series(&world, &c, &[2.0, 1.0], RankRounding::HalfUp),
            Err(Error::PercentilesNotIncreasing)
        ));
        assert!(count_series(&world, &c, &[0.0, 1.0], RankRounding::HalfUp).is_err());
        let s = count_series(&world, &c, &[50.0, 100.0], RankRounding::HalfUp).unwrap();
        assert_eq!(s.at(100.0), Some(3.0));
        assert_eq!(s.entity_total, 3);
    }

    #[test]
    fn top_decile_entity_saturates() {
        let cites: Vec<u64> = (0..1000).collect();
        let world_c = corpus(&cites);
        let world = rank_descending(&world_c).unwrap();
        let top = corpus(&cites[900..]);
        let xs: Vec<f64> = (1..=20).map(f64::from).collect();
        let s = count_series(&world, &top, &xs, RankRounding::HalfUp).unwrap();
        for p in &s.points {
            let expect = if p.x <= 10.0 { p.x * 10.0 } else { 100.0 };
            assert!((p.count - expect).abs() < 1e-12, "{p:?}");
        }
    }
}
