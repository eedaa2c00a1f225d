//! How well a score corrects for field and year differences.
//!
//! Publications are binned into `Q` quantile intervals within every
//! (year, field) cell. For each interval `q` the Theil index `I(q)` of the
//! cell means measures how much citation levels at the same relative
//! position still differ between cells; a perfectly normalized score gives
//! `I(q) = 0` throughout. The total Theil inequality `I` of a score splits
//! exactly into `W` (within cell-intervals), `S` (between intervals) and
//! `IDCP` (between cells at fixed interval).

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::classification::{ClassificationSystem, FieldId};
use crate::corpus::PubId;
use crate::error::{Error, Result};
use crate::normalization::{ScoreKind, ScoreTable};

pub const DEFAULT_QUANTILES: u32 = 100;

/// Tolerance on `|I - (W + S + IDCP)|`.
pub const ADDITIVITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPub {
    pub pub_id: PubId,
    pub year: i32,
    pub value: f64,
}

/// Defined values of one score column.
pub fn score_column(table: &ScoreTable, kind: ScoreKind) -> Vec<ScoredPub> {
    table
        .rows
        .iter()
        .filter_map(|r| {
            r.value(kind).map(|value| ScoredPub {
                pub_id: r.pub_id,
                year: r.year,
                value,
            })
        })
        .collect()
}

/// One (publication, field) row with its quantile interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRow {
    pub pub_id: PubId,
    pub year: i32,
    pub field: FieldId,
    pub value: f64,
    pub q: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellInterval {
    pub n: usize,
    pub sum: f64,
}

impl CellInterval {
    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub quantiles: u32,
    /// Sorted by (year, field, q, value, pub id).
    pub rows: Vec<EvalRow>,
    /// Keyed by (q, year, field); only non-empty entries.
    pub cells: BTreeMap<(u32, i32, FieldId), CellInterval>,
    /// Scored publications without a field in the system.
    pub unassigned: usize,
}

/// Quantile interval of the 1-based `rank` in a cell of `size` rows.
pub fn quantile_of(rank: usize, size: usize, quantiles: u32) -> u32 {
    (rank as u64 * quantiles as u64).div_ceil(size as u64) as u32
}

/// Expands publications to one row per assigned field and ranks the rows
/// within every (year, field) cell, ties broken by publication id.
pub fn assign_quantiles(
    scores: &[ScoredPub],
    system: &ClassificationSystem,
    years: Option<(i32, i32)>,
    quantiles: u32,
) -> Result<CellStats> {
    if quantiles == 0 {
        return Err(Error::Config("number of quantile intervals must be at least 1".into()));
    }
    let mut by_cell: BTreeMap<(i32, FieldId), Vec<(f64, PubId)>> = BTreeMap::new();
    let mut unassigned = 0;
    for s in scores {
        if years.is_some_and(|(lo, hi)| !(lo..=hi).contains(&s.year)) {
            continue;
        }
        if !(s.value >= 0.0) {
            return Err(Error::Config(format!(
                "publication {} has invalid score {}",
                s.pub_id, s.value
            )));
        }
        let fields = system.fields_of(s.pub_id);
        if fields.is_empty() {
            unassigned += 1;
        }
        for &f in fields {
            by_cell.entry((s.year, f)).or_default().push((s.value, s.pub_id));
        }
    }
    if unassigned > 0 {
        log::info!("{unassigned} scored publications are not assigned in {}", system.name());
    }

    let rows: Vec<EvalRow> = by_cell
        .into_par_iter()
        .flat_map_iter(|((year, field), mut members)| {
            members.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let size = members.len();
            members.into_iter().enumerate().map(move |(k, (value, pub_id))| EvalRow {
                pub_id,
                year,
                field,
                value,
                q: quantile_of(k + 1, size, quantiles),
            })
        })
        .collect();

    let mut cells: BTreeMap<(u32, i32, FieldId), CellInterval> = BTreeMap::new();
    for r in &rows {
        let c = cells
            .entry((r.q, r.year, r.field))
            .or_insert(CellInterval { n: 0, sum: 0.0 });
        c.n += 1;
        c.sum += r.value;
    }
    Ok(CellStats {
        quantiles,
        rows,
        cells,
        unassigned,
    })
}

/// Weighted Theil index, `(1/n) sum n_k (v_k/mu) ln(v_k/mu)` with `n` the
/// total weight and `0 ln 0 = 0`. `None` when the weighted mean is zero.
pub fn theil(values: &[f64], weights: &[f64]) -> Option<f64> {
    assert_eq!(values.len(), weights.len());
    let n: f64 = weights.iter().sum();
    if !(n > 0.0) {
        return None;
    }
    let total: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    let mu = total / n;
    if !(mu > 0.0) {
        return None;
    }
    let mut live = values.iter().zip(weights).filter(|(_, &w)| w > 0.0);
    let first = live.next().map(|(v, _)| *v);
    if live.all(|(v, _)| Some(*v) == first) {
        return Some(0.0);
    }
    let sum: f64 = values
        .iter()
        .zip(weights)
        .filter(|(&v, &w)| v > 0.0 && w > 0.0)
        .map(|(&v, &w)| {
            let x = v / mu;
            w * x * x.ln()
        })
        .sum();
    Some((sum / n).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantilePoint {
    pub q: u32,
    pub n: usize,
    pub mu: f64,
    /// Undefined when `mu = 0`.
    pub inequality: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuantileAggregate {
    /// Non-empty intervals in ascending order.
    pub points: Vec<QuantilePoint>,
}

impl QuantileAggregate {
    pub fn get(&self, q: u32) -> Option<&QuantilePoint> {
        self.points.iter().find(|p| p.q == q)
    }
}

/// `I(q)`: Theil index over cell means `mu(q,i,j)` weighted by `n(q,i,j)`.
pub fn inequality_curve(cells: &CellStats) -> QuantileAggregate {
    let mut by_q: BTreeMap<u32, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (&(q, _, _), c) in &cells.cells {
        let e = by_q.entry(q).or_default();
        e.0.push(c.mean());
        e.1.push(c.n as f64);
    }
    let points = by_q
        .into_iter()
        .map(|(q, (means, counts))| {
            let n: f64 = counts.iter().sum();
            let mu = means.iter().zip(&counts).map(|(m, c)| m * c).sum::<f64>() / n;
            QuantilePoint {
                q,
                n: n as usize,
                mu,
                inequality: theil(&means, &counts),
            }
        })
        .collect();
    QuantileAggregate { points }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionResult {
    pub total: f64,
    pub within: f64,
    pub between_intervals: f64,
    pub idcp: f64,
    pub n: usize,
    pub mu: f64,
}

impl DecompositionResult {
    pub fn residual(&self) -> f64 {
        self.total - (self.within + self.between_intervals + self.idcp)
    }
}

/// `I = W + S + IDCP` over the expanded rows of `cells`.
pub fn decompose(cells: &CellStats) -> Result<DecompositionResult> {
    let n = cells.rows.len();
    let sum: f64 = cells.rows.iter().map(|r| r.value).sum();
    if n == 0 || !(sum > 0.0) {
        return Err(Error::Undefined("decomposition of a score with zero mean".into()));
    }
    let mu = sum / n as f64;
    let n_mu = n as f64 * mu;

    let values: Vec<f64> = cells.rows.iter().map(|r| r.value).collect();
    let total = theil(&values, &vec![1.0; n]).unwrap_or(0.0);

    // Rows are contiguous per (year, field, q).
    let mut within = 0.0;
    let mut start = 0;
    while start < n {
        let key = |r: &EvalRow| (r.year, r.field, r.q);
        let k = key(&cells.rows[start]);
        let mut end = start;
        while end < n && key(&cells.rows[end]) == k {
            end += 1;
        }
        let group = &values[start..end];
        let g_sum: f64 = group.iter().sum();
        if g_sum > 0.0 {
            let t = theil(group, &vec![1.0; group.len()]).unwrap_or(0.0);
            within += g_sum / n_mu * t;
        }
        start = end;
    }

    let curve = inequality_curve(cells);
    let mut between = 0.0;
    let mut idcp = 0.0;
    for p in &curve.points {
        if p.mu > 0.0 {
            let share = p.n as f64 * p.mu / n_mu;
            between += share * (p.mu / mu).ln();
            idcp += share * p.inequality.unwrap_or(0.0);
        }
    }

    let result = DecompositionResult {
        total,
        within,
        between_intervals: between.max(0.0),
        idcp,
        n,
        mu,
    };
    if result.residual().abs() > ADDITIVITY_TOLERANCE {
        return Err(Error::Integrity(format!(
            "decomposition does not add up: I = {total}, W + S + IDCP = {}",
            within + between + idcp
        )));
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct YearlyMeans {
    pub year: i32,
    /// Rows counted, after multi-assignment expansion.
    pub n: usize,
    pub means: BTreeMap<ScoreKind, Option<f64>>,
}

/// Mean of each score column per publication year. With a system, each
/// publication counts once per assigned field and unassigned publications
/// are left out; undefined NCS values are skipped.
pub fn yearly_means(table: &ScoreTable, system: Option<&ClassificationSystem>) -> Vec<YearlyMeans> {
    let mut acc: BTreeMap<i32, (usize, BTreeMap<ScoreKind, (f64, usize)>)> = BTreeMap::new();
    for r in &table.rows {
        let mult = system.map_or(1, |s| s.fields_of(r.pub_id).len());
        if mult == 0 {
            continue;
        }
        let e = acc.entry(r.year).or_default();
        e.0 += mult;
        for kind in ScoreKind::ALL {
            let slot = e.1.entry(kind).or_insert((0.0, 0));
            if let Some(v) = r.value(kind) {
                slot.0 += v * mult as f64;
                slot.1 += mult;
            }
        }
    }
    acc.into_iter()
        .map(|(year, (n, sums))| YearlyMeans {
            year,
            n,
            means: sums
                .into_iter()
                .map(|(k, (s, c))| (k, (c > 0).then(|| s / c as f64)))
                .collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scored(rows: &[(PubId, i32, f64)]) -> Vec<ScoredPub> {
        rows.iter()
            .map(|&(pub_id, year, value)| ScoredPub { pub_id, year, value })
            .collect()
    }

    /// Direct evaluation of the Theil index over unit-weight values.
    fn theil_oracle(values: &[f64]) -> f64 {
        let n = values.len() as f64;
        let mu = values.iter().sum::<f64>() / n;
        values
            .iter()
            .map(|v| if *v == 0.0 { 0.0 } else { (v / mu) * (v / mu).ln() })
            .sum::<f64>()
            / n
    }

    #[test]
    fn theil_reference_values() {
        let two_one = 0.5 * ((4.0f64 / 3.0) * (4.0f64 / 3.0).ln() + (2.0f64 / 3.0) * (2.0f64 / 3.0).ln());
        let t = theil(&[2.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!((t - two_one).abs() < 1e-15);
        assert!((t - 0.0566330).abs() < 1e-6);
        assert!((theil(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert_eq!(theil(&[0.3; 7], &[2.0; 7]), Some(0.0));
        assert_eq!(theil(&[0.0, 0.0], &[1.0, 1.0]), None);
        assert_eq!(theil(&[], &[]), None);
    }

    #[test]
    fn weights_act_as_repetition() {
        let w = theil(&[3.0, 1.0, 0.5], &[2.0, 1.0, 3.0]).unwrap();
        let direct = theil_oracle(&[3.0, 3.0, 1.0, 0.5, 0.5, 0.5]);
        assert!((w - direct).abs() < 1e-14);
    }

    #[test]
    fn quantile_boundaries() {
        // Cell of 300: ranks 1-3 in the first interval.
        assert_eq!((1..=3).map(|k| quantile_of(k, 300, 100)).collect::<Vec<_>>(), [1, 1, 1]);
        assert_eq!(quantile_of(4, 300, 100), 2);
        assert_eq!(quantile_of(1, 1, 100), 100);
        assert!((1..=17).all(|k| quantile_of(k, 17, 1) == 1));
    }

    #[test]
    fn ties_follow_pub_id() {
        let sys = ClassificationSystem::single("s", [(5, "F"), (3, "F"), (9, "F")]);
        let cells = assign_quantiles(&scored(&[(5, 2000, 1.0), (3, 2000, 1.0), (9, 2000, 0.0)]), &sys, None, 3).unwrap();
        let order: Vec<_> = cells.rows.iter().map(|r| (r.pub_id, r.q)).collect();
        assert_eq!(order, [(9, 1), (3, 2), (5, 3)]);
    }

    #[test]
    fn multi_assignment_expands_rows() {
        let sys = ClassificationSystem::from_pairs("s", [(1, "A"), (1, "B"), (2, "A")]);
        let cells = assign_quantiles(&scored(&[(1, 2000, 1.0), (2, 2000, 2.0), (3, 2000, 5.0)]), &sys, None, 1).unwrap();
        assert_eq!(cells.rows.len(), 3);
        assert_eq!(cells.unassigned, 1);
    }

    #[test]
    fn curve_two_cells() {
        let sys = ClassificationSystem::single("s", [(1, "A"), (2, "A"), (3, "B"), (4, "B")]);
        let cells = assign_quantiles(
            &scored(&[(1, 2000, 2.0), (2, 2000, 2.0), (3, 2000, 1.0), (4, 2000, 1.0)]),
            &sys,
            None,
            1,
        )
        .unwrap();
        let curve = inequality_curve(&cells);
        let p = curve.get(1).unwrap();
        assert_eq!(p.n, 4);
        assert_eq!(p.mu, 1.5);
        assert!((p.inequality.unwrap() - 0.0566330).abs() < 1e-6);
    }

    #[test]
    fn zero_mean_interval_is_undefined() {
        let sys = ClassificationSystem::single("s", [(1, "A"), (2, "A"), (3, "B"), (4, "B")]);
        let cells = assign_quantiles(
            &scored(&[(1, 2000, 0.0), (2, 2000, 2.0), (3, 2000, 0.0), (4, 2000, 1.0)]),
            &sys,
            None,
            2,
        )
        .unwrap();
        let curve = inequality_curve(&cells);
        assert_eq!(curve.get(1).unwrap().inequality, None);
        assert!(curve.get(2).unwrap().inequality.is_some());
    }

    #[test]
    fn constant_intervals_collapse_to_between() {
        // One field and year, one distinct score per interval: W = IDCP = 0.
        let sys = ClassificationSystem::single("s", (1..=4).map(|i| (i, "F")));
        let cells = assign_quantiles(
            &scored(&[(1, 2000, 0.0), (2, 2000, 1.0), (3, 2000, 2.0), (4, 2000, 5.0)]),
            &sys,
            None,
            4,
        )
        .unwrap();
        let d = decompose(&cells).unwrap();
        assert_eq!(d.within, 0.0);
        assert_eq!(d.idcp, 0.0);
        assert!((d.total - d.between_intervals).abs() < 1e-15);
        assert!((d.total - theil_oracle(&[0.0, 1.0, 2.0, 5.0])).abs() < 1e-15);
    }

    #[test]
    fn decomposition_of_zero_scores_is_undefined() {
        let sys = ClassificationSystem::single("s", [(1, "F")]);
        let cells = assign_quantiles(&scored(&[(1, 2000, 0.0)]), &sys, None, 1).unwrap();
        assert!(decompose(&cells).is_err());
    }

    #[test]
    fn yearly_means_expand_multi_assignment() {
        use crate::normalization::ScoreRow;
        let row = |id, year, cs| ScoreRow {
            pub_id: id,
            year,
            cs,
            ncs: None,
            sncs1: 0.0,
            sncs2: 0.0,
            sncs3: 0.0,
        };
        let table = ScoreTable {
            ncs_system: None,
            rows: vec![row(1, 2000, 4), row(2, 2000, 1), row(3, 2001, 2)],
        };
        let sys = ClassificationSystem::from_pairs("s", [(1, "A"), (1, "B"), (2, "A"), (3, "A")]);
        let y = yearly_means(&table, Some(&sys));
        assert_eq!(y[0].n, 3);
        assert_eq!(y[0].means[&ScoreKind::Cs], Some(3.0));
        assert_eq!(y[0].means[&ScoreKind::Ncs], None);
        let plain = yearly_means(&table, None);
        assert_eq!(plain[0].means[&ScoreKind::Cs], Some(2.5));
    }

    fn random_cells() -> impl Strategy<Value = Vec<(PubId, i32, u8, f64)>> {
        prop::collection::vec((0i32..3, 0u8..4, 0.0f64..20.0), 1..120).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (y, f, s))| (i as PubId, 2000 + y, f, (s * 4.0).round() / 4.0))
                .collect()
        })
    }

    fn build(rows: &[(PubId, i32, u8, f64)], scale: f64, q: u32) -> CellStats {
        let sys = ClassificationSystem::single("s", rows.iter().map(|r| (r.0, format!("f{}", r.2))));
        let s: Vec<_> = rows
            .iter()
            .map(|r| ScoredPub {
                pub_id: r.0,
                year: r.1,
                value: r.3 * scale,
            })
            .collect();
        assign_quantiles(&s, &sys, None, q).unwrap()
    }

    proptest! {
        #[test]
        fn theil_nonnegative(v in prop::collection::vec(0.0f64..100.0, 1..50)) {
            if let Some(t) = theil(&v, &vec![1.0; v.len()]) {
                prop_assert!(t >= 0.0);
                prop_assert!(t <= (v.len() as f64).ln() + 1e-12);
            }
        }

        #[test]
        fn decomposition_adds_up(rows in random_cells(), q in 1u32..12) {
            let cells = build(&rows, 1.0, q);
            if let Ok(d) = decompose(&cells) {
                let values: Vec<f64> = rows.iter().map(|r| r.3).collect();
                prop_assert!((d.total - theil_oracle(&values)).abs() < 1e-12);
                prop_assert!(d.residual().abs() <= 1e-9);
                prop_assert!(d.within >= 0.0 && d.between_intervals >= 0.0 && d.idcp >= 0.0);
            }
        }

        #[test]
        fn scale_invariance(rows in random_cells(), q in 1u32..12, scale in 0.01f64..1000.0) {
            let a = build(&rows, 1.0, q);
            let b = build(&rows, scale, q);
            if let (Ok(da), Ok(db)) = (decompose(&a), decompose(&b)) {
                for (x, y) in [(da.total, db.total), (da.within, db.within), (da.between_intervals, db.between_intervals), (da.idcp, db.idcp)] {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
            let (ca, cb) = (inequality_curve(&a), inequality_curve(&b));
            for (pa, pb) in ca.points.iter().zip(&cb.points) {
                prop_assert_eq!(pa.q, pb.q);
                match (pa.inequality, pb.inequality) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-9),
                    (x, y) => prop_assert_eq!(x.is_none(), y.is_none()),
                }
            }
        }

        #[test]
        fn order_of_input_is_irrelevant(rows in random_cells(), q in 1u32..12, seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(build(&rows, 1.0, q), build(&shuffled, 1.0, q));
        }
    }
}
