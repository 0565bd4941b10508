//! Exact mean running times against the rate constants `k_n`.

use std::io::Write;

use serde::Serialize;

use crate::analytics::{family_means, rate_constant};
use crate::error::{Error, Result};
use crate::mtf::WeightFamily;

/// One CSV row: `family, params, n, mean_rev, mean_id, k_n, ratio_rev`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub family: String,
    pub params: String,
    pub n: usize,
    pub mean_rev: f64,
    pub mean_id: f64,
    pub k_n: f64,
    pub ratio_rev: f64,
}

fn split(family: WeightFamily) -> (String, String) {
    match family {
        WeightFamily::Uniform => ("uniform".into(), String::new()),
        WeightFamily::Zipf => ("zipf".into(), String::new()),
        WeightFamily::Gzl { alpha } => ("gzl".into(), format!("alpha={alpha}")),
        WeightFamily::Power { s } => ("power".into(), format!("s={s}")),
        WeightFamily::Geometric { theta } => ("geometric".into(), format!("theta={theta}")),
    }
}

/// Families in the order given, each at every size.
pub fn scaling_table(families: &[WeightFamily], sizes: &[usize]) -> Result<Vec<ScalingRow>> {
    let mut rows = Vec::with_capacity(families.len() * sizes.len());
    for &family in families {
        let (name, params) = split(family);
        for &n in sizes {
            let (mean_rev, mean_id) = family_means(family, n)?;
            let k_n = rate_constant(family, n as f64)?;
            rows.push(ScalingRow {
                family: name.clone(),
                params: params.clone(),
                n,
                mean_rev,
                mean_id,
                k_n,
                ratio_rev: mean_rev / k_n,
            });
        }
    }
    Ok(rows)
}

pub fn write_scaling_csv<W: Write>(rows: &[ScalingRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r).map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    }
    wr.flush().map_err(|e| Error::InvalidInput(format!("csv: {e}")))
}

/// The six families of the rate table.
pub fn default_families() -> Vec<WeightFamily> {
    vec![
        WeightFamily::Uniform,
        WeightFamily::Zipf,
        WeightFamily::Gzl { alpha: 0.5 },
        WeightFamily::Gzl { alpha: 2.0 },
        WeightFamily::Power { s: 1.0 },
        WeightFamily::Geometric { theta: 0.5 },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_ratio_near_one() {
        let rows = scaling_table(&[WeightFamily::Geometric { theta: 0.5 }], &[100]).unwrap();
        let r = &rows[0];
        let exact: f64 = 99.0 + (2..=100).map(|k| 0.5f64.powi(k) / (1.0 - 0.5f64.powi(k))).sum::<f64>();
        assert!((r.mean_rev - exact).abs() < 1e-9);
        assert!((r.ratio_rev - 1.0).abs() < 0.01);
    }

    #[test]
    fn geometric_speedup_at_twenty() {
        let rows = scaling_table(&[WeightFamily::Geometric { theta: 0.5 }], &[20]).unwrap();
        assert!(rows[0].mean_id / rows[0].mean_rev > 1e4);
    }

    #[test]
    fn zipf_ratio_in_range_and_decreasing() {
        let rows = scaling_table(&[WeightFamily::Zipf], &[1_000, 10_000, 100_000]).unwrap();
        assert!(rows[2].ratio_rev >= 1.0 && rows[2].ratio_rev <= 1.25);
        assert!(rows[0].ratio_rev > rows[1].ratio_rev && rows[1].ratio_rev > rows[2].ratio_rev);
    }

    #[test]
    fn csv_header() {
        let rows = scaling_table(&[WeightFamily::Uniform], &[10]).unwrap();
        let mut buf = Vec::new();
        write_scaling_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("family,params,n,mean_rev,mean_id,k_n,ratio_rev\n"));
    }
}
