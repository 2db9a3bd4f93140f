use std::collections::BTreeMap;
use std::io::{Read, Write};

use gridfree_core::estimate::EstimationResult;
use gridfree_core::matching::Matching;
use gridfree_core::signal::PathSet;
use serde::{Deserialize, Serialize};

/// Method tag used for the bound rows of a report.
pub const CRB_METHOD: &str = "crb";

pub const CSV_HEADER: &str =
    "method,snr_bin_db,mse_tau,mse_alpha,mean_mo_error,missed_rate,ghost_rate,n_trials,mean_runtime_s";

/// How trials are grouped by SNR. A bare number is a bin width anchored at
/// 0 dB; a list gives explicit ascending edges and drops trials outside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnrBins {
    Width(f64),
    Edges(Vec<f64>),
}

impl Default for SnrBins {
    fn default() -> Self {
        SnrBins::Width(5.0)
    }
}

impl SnrBins {
    pub fn validate(&self) -> anyhow::Result<()> {
        match self {
            SnrBins::Width(w) if !(*w > 0.0 && w.is_finite()) => anyhow::bail!("snr bin width must be positive"),
            SnrBins::Edges(e) if e.len() < 2 || e.windows(2).any(|p| !(p[0] < p[1])) => {
                anyhow::bail!("snr bin edges need at least two strictly increasing values")
            }
            _ => Ok(()),
        }
    }

    /// Lower edge of the bin holding `snr_db`.
    pub fn bin(&self, snr_db: f64) -> Option<f64> {
        if !snr_db.is_finite() {
            return None;
        }
        match self {
            SnrBins::Width(w) => Some((snr_db / w).floor() * w),
            SnrBins::Edges(e) => e.windows(2).find(|p| snr_db >= p[0] && snr_db < p[1]).map(|p| p[0]),
        }
    }

    /// Parses `5` as a width and `0,10,20` as edges.
    pub fn parse(s: &str) -> anyhow::Result<Self> {
        let values = s
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| anyhow::anyhow!("bad --snr-bins value `{s}`: {e}"))?;
        let bins = match values.as_slice() {
            [w] => SnrBins::Width(*w),
            _ => SnrBins::Edges(values),
        };
        bins.validate()?;
        Ok(bins)
    }
}

/// One line of the benchmark CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub snr_bin_db: f64,
    /// Mean squared wrapped delay error over matched pairs.
    pub mse_tau: f64,
    pub mse_alpha: f64,
    /// Mean of `P_hat - P`.
    pub mean_mo_error: f64,
    /// Unmatched true paths over all true paths.
    pub missed_rate: f64,
    /// Unmatched estimates over all estimates.
    pub ghost_rate: f64,
    pub n_trials: usize,
    pub mean_runtime_s: f64,
}

#[derive(Debug, Clone, Default)]
struct Acc {
    sq_tau: f64,
    sq_alpha: f64,
    pairs: usize,
    mo_error: i64,
    missed: usize,
    truth: usize,
    ghosts: usize,
    estimated: usize,
    trials: usize,
    runtime: f64,
}

fn ratio(num: f64, den: usize) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num / den as f64
    }
}

fn wrapped(d: f64) -> f64 {
    d - d.round()
}

/// Per-(method, bin) accumulation of trial outcomes.
#[derive(Debug, Clone, Default)]
pub struct ReportBuilder {
    order: Vec<String>,
    acc: BTreeMap<(usize, i64), Acc>,
    crb: BTreeMap<i64, (f64, f64, usize)>,
}

// bins are keyed in millibels so the map orders them numerically
fn key(bin: f64) -> i64 {
    (bin * 100.0).round() as i64
}

impl ReportBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn slot(&mut self, method: &str, bin: f64) -> &mut Acc {
        let idx = match self.order.iter().position(|m| m == method) {
            Some(i) => i,
            None => {
                self.order.push(method.to_string());
                self.order.len() - 1
            }
        };
        self.acc.entry((idx, key(bin))).or_default()
    }

    pub fn add_trial(&mut self, bin: f64, estimate: &EstimationResult, truth: &PathSet, matching: &Matching) {
        let a = self.slot(estimate.method.as_str(), bin);
        for &(e, t, _) in &matching.pairs {
            a.sq_tau += wrapped(estimate.paths.taus[e] - truth.taus[t]).powi(2);
            a.sq_alpha += wrapped(estimate.paths.alphas[e] - truth.alphas[t]).powi(2);
        }
        a.pairs += matching.pairs.len();
        a.mo_error += estimate.p_hat() as i64 - truth.len() as i64;
        a.missed += matching.unmatched_truth.len();
        a.truth += truth.len();
        a.ghosts += matching.unmatched_estimates.len();
        a.estimated += estimate.p_hat();
        a.trials += 1;
        a.runtime += estimate.wall_time;
    }

    /// Adds the per-path bounds of one trial (delay and Doppler variances).
    pub fn add_crb(&mut self, bin: f64, bounds: &[(f64, f64)]) {
        let e = self.crb.entry(key(bin)).or_insert((0.0, 0.0, 0));
        for &(t, a) in bounds {
            e.0 += t;
            e.1 += a;
            e.2 += 1;
        }
    }

    pub fn finish(self) -> BenchReport {
        let mut rows = Vec::new();
        for ((m, bin), a) in &self.acc {
            rows.push(BenchRow {
                method: self.order[*m].clone(),
                snr_bin_db: *bin as f64 / 100.0,
                mse_tau: ratio(a.sq_tau, a.pairs),
                mse_alpha: ratio(a.sq_alpha, a.pairs),
                mean_mo_error: ratio(a.mo_error as f64, a.trials),
                missed_rate: ratio(a.missed as f64, a.truth),
                ghost_rate: ratio(a.ghosts as f64, a.estimated),
                n_trials: a.trials,
                mean_runtime_s: ratio(a.runtime, a.trials),
            });
        }
        for (bin, (t, a, n)) in &self.crb {
            if *n == 0 {
                continue;
            }
            rows.push(BenchRow {
                method: CRB_METHOD.into(),
                snr_bin_db: *bin as f64 / 100.0,
                mse_tau: t / *n as f64,
                mse_alpha: a / *n as f64,
                mean_mo_error: f64::NAN,
                missed_rate: f64::NAN,
                ghost_rate: f64::NAN,
                n_trials: *n,
                mean_runtime_s: f64::NAN,
            });
        }
        BenchReport { rows }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn rows_for<'a>(&'a self, method: &str) -> impl Iterator<Item = &'a BenchRow> + 'a {
        let method = method.to_string();
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn methods(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method) {
                out.push(r.method.clone());
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record(CSV_HEADER.split(','))?;
        }
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> anyhow::Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        anyhow::ensure!(header.join(",") == CSV_HEADER, "unexpected report header `{}`", header.join(","));
        let rows = r.deserialize().collect::<Result<Vec<BenchRow>, _>>()?;
        Ok(Self { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gridfree_core::estimate::Method;
    use gridfree_core::matching::match_paths;
    use num_complex::Complex64;

    fn paths(taus: &[f64], alphas: &[f64]) -> PathSet {
        PathSet::new(vec![Complex64::new(1.0, 0.0); taus.len()], taus.to_vec(), alphas.to_vec()).unwrap()
    }

    #[test]
    fn bins() {
        let w = SnrBins::default();
        assert_eq!(w.bin(12.3), Some(10.0));
        assert_eq!(w.bin(-0.1), Some(-5.0));
        assert_eq!(w.bin(f64::INFINITY), None);
        let e = SnrBins::parse("0, 10, 30").unwrap();
        assert_eq!(e.bin(29.9), Some(10.0));
        assert_eq!(e.bin(30.0), None);
        assert_eq!(SnrBins::parse("2.5").unwrap(), SnrBins::Width(2.5));
        assert!(SnrBins::parse("10,5").is_err());
        assert!(SnrBins::parse("0").is_err());
    }

    #[test]
    fn accumulates_matched_errors_and_counts() {
        let truth = paths(&[0.1, 0.5, 0.9], &[0.1, 0.5, 0.9]);
        // one near match, one exact, one ghost and one missed path
        let est = EstimationResult::new(paths(&[0.5, 0.11, 0.3], &[0.5, 0.08, 0.3]), Method::Periodogram);
        let m = match_paths(&est.paths, &truth, 0.05);
        let mut b = ReportBuilder::new();
        b.add_trial(30.0, &est, &truth, &m);
        b.add_crb(30.0, &[(1e-6, 2e-6), (3e-6, 4e-6)]);
        let rep = b.finish();
        let r = &rep.rows[0];
        assert_eq!(r.method, "periodogram");
        assert!((r.mse_tau - 0.01f64.powi(2) / 2.0).abs() < 1e-15, "{r:?}");
        assert!((r.mse_alpha - 0.02f64.powi(2) / 2.0).abs() < 1e-15);
        assert_eq!(r.mean_mo_error, 0.0);
        assert!((r.missed_rate - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.ghost_rate - 1.0 / 3.0).abs() < 1e-15);
        let c = &rep.rows[1];
        assert_eq!((c.method.as_str(), c.n_trials), (CRB_METHOD, 2));
        assert!((c.mse_tau - 2e-6).abs() < 1e-18);
    }

    #[test]
    fn csv_round_trip_keeps_header() {
        let truth = paths(&[0.2], &[0.3]);
        let est = EstimationResult::new(paths(&[0.21], &[0.3]), Method::Cnn);
        let mut b = ReportBuilder::new();
        b.add_trial(5.0, &est, &truth, &match_paths(&est.paths, &truth, 0.05));
        let rep = b.finish();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(BenchReport::read_csv(buf.as_slice()).unwrap(), rep);

        let mut empty = Vec::new();
        BenchReport::default().write_csv(&mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim(), CSV_HEADER);
    }
}
