//! Median excess risk per sweep point and log-log rate fits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use anyhow::Result;
use serde::Serialize;

use crate::runner::ResultRow;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatePoint {
    pub n: usize,
    pub median_excess_risk: f64,
    pub count: usize,
}

/// One `(algorithm, d, ε)` group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupSummary {
    pub algorithm: String,
    pub d: usize,
    pub epsilon: f64,
    pub points: Vec<RatePoint>,
    /// Least-squares slope of `ln median` against `ln n`; `None` with fewer
    /// than two usable points.
    pub slope: Option<f64>,
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Slope of the least-squares line through `(ln x, ln y)`, skipping points
/// with a non-positive `y`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

pub fn summarize(rows: &[ResultRow]) -> Vec<GroupSummary> {
    // ε is keyed by its bit pattern so that `inf` groups cleanly.
    let mut groups: BTreeMap<(String, usize, u64), BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.algorithm.clone(), r.d, r.epsilon.to_bits()))
            .or_default()
            .entry(r.n)
            .or_default()
            .push(r.excess_risk);
    }
    groups
        .into_iter()
        .map(|((algorithm, d, eps), by_n)| {
            let points: Vec<RatePoint> = by_n
                .into_iter()
                .map(|(n, mut v)| RatePoint {
                    n,
                    count: v.len(),
                    median_excess_risk: median(&mut v),
                })
                .collect();
            let slope = loglog_slope(
                &points
                    .iter()
                    .map(|p| (p.n as f64, p.median_excess_risk))
                    .collect::<Vec<_>>(),
            );
            GroupSummary {
                algorithm,
                d,
                epsilon: f64::from_bits(eps),
                points,
                slope,
            }
        })
        .collect()
}

pub fn render_text(groups: &[GroupSummary]) -> String {
    let mut s = String::new();
    for g in groups {
        let slope = g
            .slope
            .map_or("undefined".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(
            s,
            "{} d={} epsilon={}: slope {}",
            g.algorithm, g.d, g.epsilon, slope
        );
        for p in &g.points {
            let _ = writeln!(
                s,
                "  n={:<8} median_excess_risk={:.6e} ({} runs)",
                p.n, p.median_excess_risk, p.count
            );
        }
    }
    s
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    algorithm: &'a str,
    d: usize,
    epsilon: f64,
    n: usize,
    median_excess_risk: f64,
    count: usize,
    slope: String,
}

pub fn write_summary_csv<W: Write>(w: W, groups: &[GroupSummary]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for g in groups {
        let slope = g.slope.map_or("undefined".to_string(), |v| v.to_string());
        for p in &g.points {
            wr.serialize(SummaryRow {
                algorithm: &g.algorithm,
                d: g.d,
                epsilon: g.epsilon,
                n: p.n,
                median_excess_risk: p.median_excess_risk,
                count: p.count,
                slope: slope.clone(),
            })?;
        }
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(alg: &str, n: usize, risk: f64) -> ResultRow {
        ResultRow {
            algorithm: alg.into(),
            n,
            d: 3,
            rank: Some(3),
            epsilon: 1.0,
            delta: 1e-3,
            b_used: 1.0,
            seed: 0,
            excess_risk: risk,
            empirical_risk: 0.0,
            runtime_ms: 0,
            schedule_json: "{}".into(),
        }
    }

    #[test]
    fn planted_law() {
        let rows: Vec<ResultRow> = [128, 256, 512, 1024, 2048]
            .iter()
            .map(|&n| row("a", n, 3.0 / (n as f64).sqrt()))
            .collect();
        let g = summarize(&rows);
        assert_eq!(g.len(), 1);
        assert!((g[0].slope.unwrap() + 0.5).abs() < 0.01);
    }

    #[test]
    fn single_row_is_undefined() {
        let g = summarize(&[row("a", 100, 0.1)]);
        assert_eq!(g[0].slope, None);
        assert!(render_text(&g).contains("undefined"));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
