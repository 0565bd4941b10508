//! Pearson chi-square tests used to check samplers against exact laws.
//!
//! Cells are pooled smallest-first until every expected count is at least
//! [`MIN_EXPECTED`].

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use crate::error::{Error, Result};

pub const MIN_EXPECTED: f64 = 5.0;
pub const DEFAULT_SIGNIFICANCE: f64 = 1e-3;

/// Result of one test. `passed` is `p_value >= significance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatReport {
    pub name: String,
    /// Result the check is about.
    pub anchor: String,
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
    pub significance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl StatReport {
    fn chi_square(statistic: f64, dof: u64, significance: f64) -> Self {
        let p_value = chi_square_sf(statistic, dof);
        Self {
            name: String::new(),
            anchor: String::new(),
            statistic,
            dof,
            p_value,
            significance,
            passed: p_value >= significance,
            detail: None,
        }
    }

    /// A yes/no check reported in the same shape: `statistic` is the
    /// measured quantity and the p-value is 1 on success, 0 on failure.
    pub fn deterministic(name: impl Into<String>, anchor: impl Into<String>, statistic: f64, passed: bool) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            statistic,
            dof: 0,
            p_value: if passed { 1.0 } else { 0.0 },
            significance: DEFAULT_SIGNIFICANCE,
            passed,
            detail: None,
        }
    }

    pub fn named(mut self, name: impl Into<String>, anchor: impl Into<String>) -> Self {
        self.name = name.into();
        self.anchor = anchor.into();
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

/// Upper tail of the chi-square law; infinite statistics give 0.
pub fn chi_square_sf(statistic: f64, dof: u64) -> f64 {
    if !statistic.is_finite() {
        return 0.0;
    }
    if statistic <= 0.0 {
        return 1.0;
    }
    let d = ChiSquared::new(dof as f64).expect("dof >= 1");
    d.sf(statistic).clamp(0.0, 1.0)
}

/// Groups of cell indices: sort by expected count ascending, fill a group
/// until it reaches `min`, and fold a short final group into the one before.
fn pool_groups(expected: &[f64], min: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..expected.len()).collect();
    order.sort_by(|&a, &b| expected[a].total_cmp(&expected[b]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut cur = Vec::new();
    let mut mass = 0.0;
    for i in order {
        cur.push(i);
        mass += expected[i];
        if mass >= min {
            groups.push(std::mem::take(&mut cur));
            mass = 0.0;
        }
    }
    if !cur.is_empty() {
        match groups.last_mut() {
            Some(g) => g.extend(cur),
            None => groups.push(cur),
        }
    }
    groups
}

/// Goodness of fit of `observed` counts against cell probabilities `probs`
/// (which should sum to one; any shortfall is not tested).
pub fn gof_test(observed: &[u64], probs: &[f64], significance: f64) -> Result<StatReport> {
    if observed.len() != probs.len() {
        return Err(Error::DimensionMismatch { expected: probs.len(), got: observed.len() });
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(Error::InsufficientSamples("no observations".into()));
    }
    let nf = n as f64;
    // Mass on a zero-probability cell is an outright rejection.
    let impossible: u64 = observed.iter().zip(probs).filter(|(_, p)| **p <= 0.0).map(|(o, _)| *o).sum();
    let live: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
    let expected: Vec<f64> = live.iter().map(|&i| probs[i] * nf).collect();
    let groups = pool_groups(&expected, MIN_EXPECTED);
    if groups.len() < 2 || groups.iter().any(|g| g.iter().map(|&j| expected[j]).sum::<f64>() < MIN_EXPECTED) {
        return Err(Error::InsufficientSamples(format!(
            "{n} observations leave fewer than two cells with expected count >= {MIN_EXPECTED}"
        )));
    }
    let dof = groups.len() as u64 - 1;
    if impossible > 0 {
        return Ok(StatReport::chi_square(f64::INFINITY, dof, significance)
            .with_detail(format!("{impossible} observations on zero-probability cells")));
    }
    let stat: f64 = groups
        .iter()
        .map(|g| {
            let o: u64 = g.iter().map(|&j| observed[live[j]]).sum();
            let e: f64 = g.iter().map(|&j| expected[j]).sum();
            (o as f64 - e).powi(2) / e
        })
        .sum();
    Ok(StatReport::chi_square(stat, dof, significance))
}

/// Goodness of fit of raw samples against an exact law given as
/// `(value, probability)` pairs.
pub fn gof_samples<T: Ord + Clone>(samples: &[T], law: &[(T, f64)], significance: f64) -> Result<StatReport> {
    let index: BTreeMap<&T, usize> = law.iter().enumerate().map(|(i, (v, _))| (v, i)).collect();
    let mut counts = vec![0u64; law.len() + 1];
    for s in samples {
        match index.get(s) {
            Some(&i) => counts[i] += 1,
            None => counts[law.len()] += 1,
        }
    }
    let mut probs: Vec<f64> = law.iter().map(|(_, p)| *p).collect();
    probs.push(0.0);
    gof_test(&counts, &probs, significance)
}

/// Goodness of fit of integer samples against `pmf` on `{0, ..., h}`
/// (`pmf[k] = P(T = k)`), with everything past `h` gathered in one tail
/// cell of mass `1 - sum(pmf)`.
pub fn gof_runtime(samples: &[u64], pmf: &[f64], significance: f64) -> Result<StatReport> {
    let h = pmf.len();
    let mut counts = vec![0u64; h + 1];
    for &t in samples {
        counts[(t as usize).min(h)] += 1;
    }
    let mut probs = pmf.to_vec();
    let covered: f64 = pmf.iter().sum();
    probs.push((1.0 - covered).max(0.0));
    gof_test(&counts, &probs, significance)
}

/// Rows and columns merged so that every expected count reaches `min`.
struct PooledTable {
    rows: Vec<Vec<usize>>,
    cols: Vec<Vec<usize>>,
}

/// Repeatedly merges the row or column with the smallest margin into the
/// next smallest one until the smallest expected cell reaches `min`.
fn pool_table(row_margin: &[f64], col_margin: &[f64], total: f64, min: f64) -> Option<PooledTable> {
    let mut rows: Vec<(Vec<usize>, f64)> =
        (0..row_margin.len()).filter(|&i| row_margin[i] > 0.0).map(|i| (vec![i], row_margin[i])).collect();
    let mut cols: Vec<(Vec<usize>, f64)> =
        (0..col_margin.len()).filter(|&j| col_margin[j] > 0.0).map(|j| (vec![j], col_margin[j])).collect();
    let smallest =
        |v: &[(Vec<usize>, f64)]| -> usize { (0..v.len()).min_by(|&a, &b| v[a].1.total_cmp(&v[b].1)).unwrap_or(0) };
    loop {
        if rows.len() < 2 || cols.len() < 2 {
            return None;
        }
        let ri = smallest(&rows);
        let ci = smallest(&cols);
        let min_expected = rows[ri].1 * cols[ci].1 / total;
        if min_expected >= min {
            break;
        }
        let target = if rows[ri].1 / total <= cols[ci].1 / total { &mut rows } else { &mut cols };
        let i = smallest(target);
        let (idx, mass) = target.remove(i);
        let k = smallest(target);
        target[k].0.extend(idx);
        target[k].1 += mass;
    }
    Some(PooledTable {
        rows: rows.into_iter().map(|(g, _)| g).collect(),
        cols: cols.into_iter().map(|(g, _)| g).collect(),
    })
}

/// Chi-square test of independence on a contingency table of counts.
pub fn independence_test(table: &[Vec<u64>], significance: f64) -> Result<StatReport> {
    let ncols = table.first().map_or(0, Vec::len);
    if table.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidInput("ragged contingency table".into()));
    }
    let row_margin: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_margin: Vec<f64> = (0..ncols).map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64).collect();
    let total: f64 = row_margin.iter().sum();
    let pooled = pool_table(&row_margin, &col_margin, total, MIN_EXPECTED).ok_or_else(|| {
        Error::InsufficientSamples(format!(
            "{total} observations cannot fill a 2x2 table with expected counts >= {MIN_EXPECTED}"
        ))
    })?;
    let mut stat = 0.0;
    for rg in &pooled.rows {
        let rm: f64 = rg.iter().map(|&i| row_margin[i]).sum();
        for cg in &pooled.cols {
            let cm: f64 = cg.iter().map(|&j| col_margin[j]).sum();
            let o: u64 = rg.iter().flat_map(|&i| cg.iter().map(move |&j| table[i][j])).sum();
            let e = rm * cm / total;
            stat += (o as f64 - e).powi(2) / e;
        }
    }
    let dof = ((pooled.rows.len() - 1) * (pooled.cols.len() - 1)) as u64;
    Ok(StatReport::chi_square(stat, dof, significance))
}

/// Contingency table of `(row key, column key)` pairs with keys in sorted order.
pub fn contingency<A: Ord + Clone, B: Ord + Clone>(pairs: &[(A, B)]) -> (Vec<A>, Vec<B>, Vec<Vec<u64>>) {
    let rows: Vec<A> =
        pairs.iter().map(|(a, _)| a.clone()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let cols: Vec<B> =
        pairs.iter().map(|(_, b)| b.clone()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let mut table = vec![vec![0u64; cols.len()]; rows.len()];
    for (a, b) in pairs {
        let i = rows.binary_search(a).expect("row key present");
        let j = cols.binary_search(b).expect("column key present");
        table[i][j] += 1;
    }
    (rows, cols, table)
}

/// Independence of the two coordinates of observed pairs.
pub fn independence_pairs<A: Ord + Clone, B: Ord + Clone>(pairs: &[(A, B)], significance: f64) -> Result<StatReport> {
    let (_, _, table) = contingency(pairs);
    independence_test(&table, significance)
}

/// Two-sample homogeneity test on integer-valued samples.
pub fn two_sample_test(a: &[u64], b: &[u64], significance: f64) -> Result<StatReport> {
    let pairs: Vec<(u8, u64)> = a.iter().map(|&x| (0, x)).chain(b.iter().map(|&x| (1, x))).collect();
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientSamples("two-sample test needs both samples non-empty".into()));
    }
    independence_pairs(&pairs, significance)
}

/// Power of the independence test at sample size `n` when the true joint
/// law is `joint` (rows x columns of probabilities): the statistic is
/// approximately noncentral chi-square with noncentrality
/// `n * sum (p_ij - p_i q_j)^2 / (p_i q_j)` over the pooled table.
pub fn independence_power(joint: &[Vec<f64>], n: u64, significance: f64) -> Result<f64> {
    let ncols = joint.first().map_or(0, Vec::len);
    let nf = n as f64;
    let row_margin: Vec<f64> = joint.iter().map(|r| r.iter().sum::<f64>() * nf).collect();
    let col_margin: Vec<f64> = (0..ncols).map(|j| joint.iter().map(|r| r[j]).sum::<f64>() * nf).collect();
    let pooled = pool_table(&row_margin, &col_margin, nf, MIN_EXPECTED)
        .ok_or_else(|| Error::InsufficientSamples(format!("sample size {n} too small to test")))?;
    let mut lambda = 0.0;
    for rg in &pooled.rows {
        let p: f64 = rg.iter().map(|&i| row_margin[i]).sum::<f64>() / nf;
        for cg in &pooled.cols {
            let q: f64 = cg.iter().map(|&j| col_margin[j]).sum::<f64>() / nf;
            let pij: f64 = rg.iter().flat_map(|&i| cg.iter().map(move |&j| joint[i][j])).sum();
            lambda += (pij - p * q).powi(2) / (p * q);
        }
    }
    lambda *= nf;
    let dof = ((pooled.rows.len() - 1) * (pooled.cols.len() - 1)) as u64;
    noncentral_chi_square_sf(critical_value(dof, significance), dof, lambda)
}

/// `c` with `P(chi2_dof > c) = significance`.
pub fn critical_value(dof: u64, significance: f64) -> f64 {
    let d = ChiSquared::new(dof as f64).expect("dof >= 1");
    d.inverse_cdf(1.0 - significance)
}

/// Upper tail of the noncentral chi-square law as a Poisson mixture of
/// central laws.
pub fn noncentral_chi_square_sf(x: f64, dof: u64, lambda: f64) -> Result<f64> {
    if lambda <= 0.0 {
        return Ok(chi_square_sf(x, dof));
    }
    let pois = Poisson::new(lambda / 2.0).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mean = lambda / 2.0;
    let hi = (mean + 40.0 * mean.sqrt() + 40.0).ceil() as u64;
    let lo = (mean - 40.0 * mean.sqrt()).max(0.0).floor() as u64;
    let total: f64 = (lo..=hi).map(|k| pois.pmf(k) * chi_square_sf(x, dof + 2 * k)).sum();
    Ok(total.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::distr::{weighted::WeightedIndex, Distribution};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pooling_reaches_minimum() {
        let e = [0.5, 1.0, 2.0, 3.0, 10.0, 20.0];
        let groups = pool_groups(&e, 5.0);
        for g in &groups {
            assert!(g.iter().map(|&i| e[i]).sum::<f64>() >= 5.0);
        }
        assert_eq!(groups.iter().map(Vec::len).sum::<usize>(), e.len());
    }

    #[test]
    fn gof_passes_under_null() {
        let probs = [0.5, 0.25, 0.125, 0.0625, 0.0625];
        let d = WeightedIndex::new(probs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [0u64; 5];
        for _ in 0..20_000 {
            counts[d.sample(&mut rng)] += 1;
        }
        let r = gof_test(&counts, &probs, 1e-3).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.dof, 4);
    }

    #[test]
    fn gof_rejects_wrong_law() {
        let counts = [600, 400];
        let r = gof_test(&counts, &[0.5, 0.5], 1e-3).unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn gof_rejects_impossible_cell() {
        let r = gof_test(&[50, 50, 1], &[0.5, 0.5, 0.0], 1e-3).unwrap();
        assert!(!r.passed);
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn gof_needs_samples() {
        assert!(matches!(gof_test(&[1, 2], &[0.5, 0.5], 1e-3), Err(Error::InsufficientSamples(_))));
    }

    #[test]
    fn independence_detects_dependence() {
        let t = vec![vec![300, 100], vec![100, 300]];
        assert!(!independence_test(&t, 1e-3).unwrap().passed);
        let t = vec![vec![200, 200], vec![210, 190]];
        assert!(independence_test(&t, 1e-3).unwrap().passed);
    }

    #[test]
    fn two_sample_same_law_passes() {
        let a: Vec<u64> = (0..2000).map(|i| i % 7).collect();
        let b: Vec<u64> = (0..3000).map(|i| (i * 3) % 7).collect();
        assert!(two_sample_test(&a, &b, 1e-3).unwrap().passed);
    }

    #[test]
    fn noncentral_reduces_to_central() {
        let c = critical_value(3, 0.01);
        assert!((chi_square_sf(c, 3) - 0.01).abs() < 1e-9);
        assert!((noncentral_chi_square_sf(c, 3, 0.0).unwrap() - 0.01).abs() < 1e-9);
        assert!(noncentral_chi_square_sf(c, 3, 50.0).unwrap() > 0.99);
    }

    #[test]
    fn power_of_product_law_is_size() {
        let joint = vec![vec![0.25, 0.25], vec![0.25, 0.25]];
        let p = independence_power(&joint, 1000, 0.01).unwrap();
        assert!((p - 0.01).abs() < 1e-9);
    }
}
