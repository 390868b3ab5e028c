//! Evaluation reports: key-value lines for machines, an aligned table for people.

use std::fmt::Write as _;

use crate::eval::experiment::{FlattenConfig, HopOrder};
use crate::table::FeatureGroups;

#[derive(Debug, Clone, PartialEq)]
pub enum SeedStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub status: SeedStatus,
    /// Filter-bank order used; `0` when the table has no neighbourhood block.
    pub order: Option<usize>,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    pub select_secs: f64,
    pub score_secs: f64,
}

/// Mean and sample standard deviation (`n - 1` denominator).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(xs: &[f64]) -> Option<MeanStd> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() < 2 {
        0.0
    } else {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Some(MeanStd { mean, std })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub k: usize,
    pub order: HopOrder,
    pub mask: FeatureGroups,
    pub standardize: bool,
    pub backend: String,
    pub table_width: usize,
    pub seeds: Vec<SeedResult>,
    pub flatten_secs: f64,
}

impl EvalReport {
    pub fn new(cfg: &FlattenConfig, backend: String, seeds: Vec<SeedResult>, table_width: usize) -> Self {
        EvalReport {
            k: cfg.embedding.k,
            order: cfg.order,
            mask: cfg.mask,
            standardize: cfg.standardize,
            backend,
            table_width,
            seeds,
            flatten_secs: 0.0,
        }
    }

    pub fn completed(&self) -> usize {
        self.seeds.iter().filter(|s| s.status == SeedStatus::Ok).count()
    }

    pub fn is_complete(&self) -> bool {
        self.completed() == self.seeds.len()
    }

    pub fn auroc(&self) -> Option<MeanStd> {
        mean_std(&self.seeds.iter().filter_map(|s| s.auroc).collect::<Vec<_>>())
    }

    pub fn auprc(&self) -> Option<MeanStd> {
        mean_std(&self.seeds.iter().filter_map(|s| s.auprc).collect::<Vec<_>>())
    }

    /// Key-value lines. Timing lines are omitted unless `timings` is set, so
    /// that repeated runs render identically.
    pub fn to_key_value(&self, timings: bool) -> String {
        let mut s = String::new();
        let f4 = |x: Option<f64>| x.map_or("nan".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(s, "config.k = {}", self.k);
        let _ = writeln!(s, "config.order = {}", self.order);
        let _ = writeln!(s, "config.mask = {}", self.mask);
        let _ = writeln!(s, "config.standardize = {}", self.standardize);
        let _ = writeln!(s, "config.backend = {}", self.backend);
        let _ = writeln!(s, "config.table_width = {}", self.table_width);
        let _ = writeln!(s, "config.seeds = {}", self.seeds.len());
        for (i, r) in self.seeds.iter().enumerate() {
            let _ = writeln!(s, "seed.{i}.id = {}", r.seed);
            match &r.status {
                SeedStatus::Ok => {
                    let _ = writeln!(s, "seed.{i}.status = ok");
                }
                SeedStatus::Failed(e) => {
                    let _ = writeln!(s, "seed.{i}.status = failed");
                    let _ = writeln!(s, "seed.{i}.error = {}", e.replace('\n', " "));
                }
            }
            if let Some(c) = r.order {
                let _ = writeln!(s, "seed.{i}.order = {c}");
            }
            let _ = writeln!(s, "seed.{i}.auroc = {}", f4(r.auroc));
            let _ = writeln!(s, "seed.{i}.auprc = {}", f4(r.auprc));
            if timings {
                let _ = writeln!(s, "seed.{i}.time_select_s = {:.3}", r.select_secs);
                let _ = writeln!(s, "seed.{i}.time_score_s = {:.3}", r.score_secs);
            }
        }
        let _ = writeln!(s, "summary.completed = {}", self.completed());
        for (name, ms) in [("auroc", self.auroc()), ("auprc", self.auprc())] {
            let _ = writeln!(s, "summary.{name}_mean = {}", f4(ms.map(|m| m.mean)));
            let _ = writeln!(s, "summary.{name}_std = {}", f4(ms.map(|m| m.std)));
        }
        if timings {
            let _ = writeln!(s, "time.flatten_s = {:.3}", self.flatten_secs);
        }
        s
    }

    /// Aligned per-seed table with a mean ± std footer.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let f4 = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(s, "{:>6}  {:>3}  {:>15}  {:>15}  status", "seed", "C", "AUROC", "AUPRC");
        for r in &self.seeds {
            let status = match &r.status {
                SeedStatus::Ok => "ok".to_string(),
                SeedStatus::Failed(e) => format!("failed: {e}"),
            };
            let c = r.order.filter(|&c| c > 0).map_or("-".to_string(), |c| c.to_string());
            let _ = writeln!(
                s,
                "{:>6}  {:>3}  {:>15}  {:>15}  {}",
                r.seed,
                c,
                f4(r.auroc),
                f4(r.auprc),
                status
            );
        }
        let pm = |m: Option<MeanStd>| m.map_or("-".to_string(), |m| format!("{:.4}±{:.4}", m.mean, m.std));
        let _ = writeln!(s, "{:>6}  {:>3}  {:>15}  {:>15}", "mean", "", pm(self.auroc()), pm(self.auprc()));
        s
    }

    /// Key-value block followed by the table as `#` comment lines.
    pub fn render(&self, timings: bool) -> String {
        let mut s = self.to_key_value(timings);
        for line in self.to_table().lines() {
            let _ = writeln!(s, "# {line}");
        }
        s
    }
}
