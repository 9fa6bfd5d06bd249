use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// 1-based rank of each query's ground-truth gallery item.
///
/// Items scoring higher than the truth rank ahead of it, and so do items with
/// an equal score at a lower gallery index.
pub fn rank_targets(sim: &Matrix, truth: &[usize]) -> Result<Vec<usize>> {
    if sim.rows() != truth.len() {
        return Err(Error::dims(
            format!("{} truth indices", sim.rows()),
            truth.len(),
        ));
    }
    if sim.rows() == 0 || sim.cols() == 0 {
        return Err(Error::EmptyInput("similarity matrix"));
    }
    if !sim.is_finite() {
        return Err(Error::NonFinite("similarity matrix".into()));
    }
    truth
        .iter()
        .enumerate()
        .map(|(q, &t)| {
            if t >= sim.cols() {
                return Err(Error::IndexOutOfRange {
                    index: t,
                    len: sim.cols(),
                });
            }
            let row = sim.row(q);
            let st = row[t];
            let ahead = row
                .iter()
                .enumerate()
                .filter(|&(j, &s)| s > st || (s == st && j < t))
                .count();
            Ok(ahead + 1)
        })
        .collect()
}

/// Recall percentages, median and mean rank.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalReport {
    pub r1: f64,
    pub r5: f64,
    pub r10: f64,
    pub mdr: f64,
    pub mnr: f64,
    pub n_queries: usize,
    pub seed: Option<u64>,
}

pub const METRIC_NAMES: [&str; 5] = ["r1", "r5", "r10", "mdr", "mnr"];

impl RetrievalReport {
    pub fn values(&self) -> [f64; 5] {
        [self.r1, self.r5, self.r10, self.mdr, self.mnr]
    }

    fn from_values(v: [f64; 5], n_queries: usize) -> Self {
        Self {
            r1: v[0],
            r5: v[1],
            r10: v[2],
            mdr: v[3],
            mnr: v[4],
            n_queries,
            seed: None,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (name, v) in METRIC_NAMES.iter().zip(self.values()) {
            let _ = writeln!(out, "{name},{v}");
        }
        let _ = writeln!(out, "n_queries,{}", self.n_queries);
        if let Some(s) = self.seed {
            let _ = writeln!(out, "seed,{s}");
        }
        out
    }

    pub fn to_table(&self) -> String {
        table(
            &["", "R@1", "R@5", "R@10", "MdR", "MnR"],
            &[("".into(), self.clone())],
        )
    }
}

pub fn compute_metrics(ranks: &[usize]) -> Result<RetrievalReport> {
    if ranks.is_empty() {
        return Err(Error::EmptyInput("rank vector"));
    }
    let q = ranks.len() as f64;
    let recall = |k: usize| 100.0 * ranks.iter().filter(|&&r| r <= k).count() as f64 / q;
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let mdr = if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0
    };
    let mnr = ranks.iter().map(|&r| r as f64).sum::<f64>() / q;
    Ok(RetrievalReport::from_values(
        [recall(1), recall(5), recall(10), mdr, mnr],
        ranks.len(),
    ))
}

/// How spread across seeds is summarized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StdKind {
    /// Divide by `n - 1`; zero for a single run.
    #[default]
    Sample,
    /// Divide by `n`.
    Population,
}

impl std::str::FromStr for StdKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(StdKind::Sample),
            "population" => Ok(StdKind::Population),
            other => Err(Error::InvalidConfig(format!("unknown std kind `{other}`"))),
        }
    }
}

/// Per-metric mean and standard deviation over several reports.
pub fn summarize(
    reports: &[RetrievalReport],
    kind: StdKind,
) -> Result<(RetrievalReport, RetrievalReport)> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("no reports to summarize"));
    }
    let n = reports.len() as f64;
    let mut mean = [0.0; 5];
    for r in reports {
        for (m, v) in mean.iter_mut().zip(r.values()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut std = [0.0; 5];
    let denom = match kind {
        StdKind::Sample => n - 1.0,
        StdKind::Population => n,
    };
    if denom > 0.0 {
        for r in reports {
            for ((s, v), m) in std.iter_mut().zip(r.values()).zip(mean) {
                *s += (v - m) * (v - m);
            }
        }
        std.iter_mut().for_each(|s| *s = (*s / denom).sqrt());
    }
    let q = reports[0].n_queries;
    Ok((
        RetrievalReport::from_values(mean, q),
        RetrievalReport::from_values(std, q),
    ))
}

/// Keyed rows as `key,r1,r5,r10,mdr,mnr` CSV.
pub fn rows_csv(key: &str, rows: &[(String, RetrievalReport)]) -> String {
    let mut out = format!("{key},{}\n", METRIC_NAMES.join(","));
    for (k, r) in rows {
        let v = r.values();
        let _ = writeln!(out, "{k},{},{},{},{},{}", v[0], v[1], v[2], v[3], v[4]);
    }
    out
}

/// Fixed-width table for terminals.
pub fn table(header: &[&str], rows: &[(String, RetrievalReport)]) -> String {
    let key_w = rows
        .iter()
        .map(|(k, _)| k.len())
        .chain([header[0].len()])
        .max()
        .unwrap_or(0);
    let mut out = format!("{:<key_w$}", header[0]);
    for h in &header[1..] {
        let _ = write!(out, " {h:>7}");
    }
    out.push('\n');
    for (k, r) in rows {
        let _ = write!(out, "{k:<key_w$}");
        for v in r.values() {
            let _ = write!(out, " {v:>7.2}");
        }
        out.push('\n');
    }
    out
}
