use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::Mode;
use crate::ddpg::{metrics_from_csv, EpisodeMetrics};
use crate::error::{Error, Result};

use super::run::RunRecord;

/// Mean and sample standard deviation of a pooled sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, n }
    }
}

/// Relative change of `value` over `base`, in percent.
pub fn improvement_pct(value: f64, base: f64) -> f64 {
    100.0 * (value - base) / base.abs()
}

/// Pooled statistics of one mode over the evaluation window.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeReport {
    pub mode: Mode,
    pub seeds: Vec<u64>,
    pub factory_score: Summary,
    pub manager_score: Summary,
    pub raw_score: Summary,
    pub incentive: Summary,
    pub ofr_reward: Summary,
    pub order_s0: Summary,
    pub order_s1: Summary,
    /// Window-mean raw score of each seed, in seed order.
    pub raw_by_seed: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedComparison {
    pub seed: u64,
    pub naive_raw: f64,
    pub managed_raw: f64,
    pub improvement_pct: f64,
}

/// Managed mode measured against naive mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub raw_improvement_pct: f64,
    pub factory_improvement_pct: f64,
    pub manager_improvement_pct: f64,
    /// Seeds present in both modes.
    pub per_seed: Vec<SeedComparison>,
}

impl Comparison {
    /// Number of seeds whose managed raw score beats naive by at least
    /// `threshold_pct` percent.
    pub fn seeds_improved(&self, threshold_pct: f64) -> usize {
        self.per_seed
            .iter()
            .filter(|s| s.improvement_pct >= threshold_pct)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub window: usize,
    pub modes: Vec<ModeReport>,
    pub comparison: Option<Comparison>,
}

fn window_of(run: &RunRecord, window: usize) -> Result<&[EpisodeMetrics]> {
    if run.metrics.len() < window {
        return Err(Error::InsufficientEpisodes {
            required: window,
            available: run.metrics.len(),
        });
    }
    Ok(&run.metrics[run.metrics.len() - window..])
}

fn mode_report(mode: Mode, runs: &[&RunRecord], window: usize) -> Result<ModeReport> {
    let mut pooled: Vec<&EpisodeMetrics> = Vec::new();
    let mut raw_by_seed = Vec::new();
    for run in runs {
        let w = window_of(run, window)?;
        raw_by_seed.push((
            run.seed,
            w.iter().map(|m| m.raw_score).sum::<f64>() / w.len() as f64,
        ));
        pooled.extend(w);
    }
    let stat = |f: fn(&EpisodeMetrics) -> f64| {
        Summary::of(&pooled.iter().map(|m| f(m)).collect::<Vec<_>>())
    };
    Ok(ModeReport {
        mode,
        seeds: runs.iter().map(|r| r.seed).collect(),
        factory_score: stat(|m| m.factory_score),
        manager_score: stat(|m| m.manager_score),
        raw_score: stat(|m| m.raw_score),
        incentive: stat(|m| m.incentive),
        ofr_reward: stat(|m| m.ofr_reward),
        order_s0: stat(|m| m.orders[0]),
        order_s1: stat(|m| m.orders[1]),
        raw_by_seed,
    })
}

/// Pools the last `window` episodes of every run per mode and compares
/// managed against naive when both are present.
pub fn evaluate(runs: &[RunRecord], window: usize) -> Result<EvaluationReport> {
    if window == 0 {
        return Err(Error::config("eval_window", "must be at least 1"));
    }
    let mut modes = Vec::new();
    for mode in [Mode::Naive, Mode::Managed] {
        let mut of_mode: Vec<&RunRecord> = runs.iter().filter(|r| r.mode == mode).collect();
        of_mode.sort_by_key(|r| r.seed);
        if !of_mode.is_empty() {
            modes.push(mode_report(mode, &of_mode, window)?);
        }
    }
    let find = |m: Mode| modes.iter().find(|r| r.mode == m);
    let comparison = match (find(Mode::Naive), find(Mode::Managed)) {
        (Some(n), Some(m)) => Some(Comparison {
            raw_improvement_pct: improvement_pct(m.raw_score.mean, n.raw_score.mean),
            factory_improvement_pct: improvement_pct(m.factory_score.mean, n.factory_score.mean),
            manager_improvement_pct: improvement_pct(m.manager_score.mean, n.manager_score.mean),
            per_seed: m
                .raw_by_seed
                .iter()
                .filter_map(|&(seed, managed_raw)| {
                    let &(_, naive_raw) = n.raw_by_seed.iter().find(|(s, _)| *s == seed)?;
                    Some(SeedComparison {
                        seed,
                        naive_raw,
                        managed_raw,
                        improvement_pct: improvement_pct(managed_raw, naive_raw),
                    })
                })
                .collect(),
        }),
        _ => None,
    };
    Ok(EvaluationReport {
        window,
        modes,
        comparison,
    })
}

impl EvaluationReport {
    pub fn mode(&self, mode: Mode) -> Option<&ModeReport> {
        self.modes.iter().find(|r| r.mode == mode)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Mean ± std over the last {} episodes, pooled across seeds and episodes",
            self.window
        );
        let _ = writeln!(
            s,
            "{:<8} {:>6} {:>17} {:>17} {:>17} {:>9} {:>9} {:>9}",
            "mode", "n", "factory", "manager", "raw", "incent.", "order_s0", "order_s1"
        );
        let pm = |x: Summary| format!("{:.3} ± {:.3}", x.mean, x.std);
        for r in &self.modes {
            let _ = writeln!(
                s,
                "{:<8} {:>6} {:>17} {:>17} {:>17} {:>9.4} {:>9.2} {:>9.2}",
                r.mode.as_str(),
                r.raw_score.n,
                pm(r.factory_score),
                pm(r.manager_score),
                pm(r.raw_score),
                r.incentive.mean,
                r.order_s0.mean,
                r.order_s1.mean,
            );
        }
        if let Some(c) = &self.comparison {
            let _ = writeln!(
                s,
                "managed vs naive: raw {:+.1}%, factory {:+.1}%, manager {:+.1}%",
                c.raw_improvement_pct, c.factory_improvement_pct, c.manager_improvement_pct
            );
            for p in &c.per_seed {
                let _ = writeln!(
                    s,
                    "  seed {:>3}: naive raw {:.3}, managed raw {:.3} ({:+.1}%)",
                    p.seed, p.naive_raw, p.managed_raw, p.improvement_pct
                );
            }
        }
        s
    }

    /// One row per mode and statistic: `mode,metric,mean,std,n`, followed
    /// by per-seed comparison rows when both modes are present.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("mode,metric,mean,std,n\n");
        for r in &self.modes {
            for (name, x) in [
                ("factory_score", r.factory_score),
                ("manager_score", r.manager_score),
                ("raw_score", r.raw_score),
                ("incentive", r.incentive),
                ("ofr_reward", r.ofr_reward),
                ("order_s0", r.order_s0),
                ("order_s1", r.order_s1),
            ] {
                let _ = writeln!(s, "{},{name},{},{},{}", r.mode, x.mean, x.std, x.n);
            }
        }
        if let Some(c) = &self.comparison {
            for (name, v) in [
                ("raw_improvement_pct", c.raw_improvement_pct),
                ("factory_improvement_pct", c.factory_improvement_pct),
                ("manager_improvement_pct", c.manager_improvement_pct),
            ] {
                let _ = writeln!(s, "comparison,{name},{v},,");
            }
            for p in &c.per_seed {
                let _ = writeln!(
                    s,
                    "seed{},raw_improvement_pct,{},,",
                    p.seed, p.improvement_pct
                );
            }
        }
        s
    }
}

/// Reads every `<mode>_seed<k>.csv` in `dir`, sorted by mode then seed.
pub fn load_runs(dir: &Path) -> Result<Vec<RunRecord>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut runs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some((mode, seed)) = name
            .strip_suffix(".csv")
            .and_then(|stem| stem.split_once("_seed"))
        else {
            continue;
        };
        let (Ok(mode), Ok(seed)) = (mode.parse::<Mode>(), seed.parse::<u64>()) else {
            continue;
        };
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let metrics = metrics_from_csv(&text).map_err(|e| match e {
            Error::Metrics { reason, .. } => Error::Metrics {
                path: path.clone(),
                reason,
            },
            other => other,
        })?;
        runs.push(RunRecord {
            mode,
            seed,
            metrics,
        });
    }
    if runs.is_empty() {
        return Err(Error::Metrics {
            path: dir.to_path_buf(),
            reason: "no metrics files found".into(),
        });
    }
    runs.sort_by_key(|r| (r.mode, r.seed));
    Ok(runs)
}

/// Seed-averaged value of one metric per (mode, episode).
fn curve(runs: &[RunRecord], f: impl Fn(&EpisodeMetrics) -> f64) -> Vec<(Mode, usize, f64)> {
    let mut out = Vec::new();
    for mode in [Mode::Naive, Mode::Managed] {
        let of_mode: Vec<&RunRecord> = runs.iter().filter(|r| r.mode == mode).collect();
        let Some(len) = of_mode.iter().map(|r| r.metrics.len()).min() else {
            continue;
        };
        for e in 0..len {
            let sum: f64 = of_mode.iter().map(|r| f(&r.metrics[e])).sum();
            out.push((mode, e, sum / of_mode.len() as f64));
        }
    }
    out
}

/// Mean order quantity per supplier for every (mode, episode), averaged
/// over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionPoint {
    pub mode: Mode,
    pub episode: usize,
    pub order_s0: f64,
    pub order_s1: f64,
}

pub fn action_distribution(runs: &[RunRecord]) -> Vec<ActionPoint> {
    curve(runs, |m| m.orders[0])
        .into_iter()
        .zip(curve(runs, |m| m.orders[1]))
        .map(
            |((mode, episode, order_s0), (_, _, order_s1))| ActionPoint {
                mode,
                episode,
                order_s0,
                order_s1,
            },
        )
        .collect()
}

pub fn actions_to_csv(points: &[ActionPoint]) -> String {
    let mut s = String::from("mode,episode,order_s0,order_s1\n");
    for p in points {
        let _ = writeln!(s, "{},{},{},{}", p.mode, p.episode, p.order_s0, p.order_s1);
    }
    s
}

/// Seed-averaged training curves: `mode,episode,factory_score,manager_score,raw_score`.
pub fn curves_to_csv(runs: &[RunRecord]) -> String {
    let mut s = String::from("mode,episode,factory_score,manager_score,raw_score\n");
    let fac = curve(runs, |m| m.factory_score);
    let mgr = curve(runs, |m| m.manager_score);
    let raw = curve(runs, |m| m.raw_score);
    for ((f, m), r) in fac.iter().zip(&mgr).zip(&raw) {
        let _ = writeln!(s, "{},{},{},{},{}", f.0, f.1, f.2, m.2, r.2);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_run(
        mode: Mode,
        seed: u64,
        episodes: usize,
        score: f64,
        incentive: f64,
    ) -> RunRecord {
        RunRecord {
            mode,
            seed,
            metrics: (0..episodes)
                .map(|e| EpisodeMetrics {
                    episode: e,
                    steps: 52,
                    raw_score: score,
                    factory_score: score + incentive,
                    incentive,
                    manager_score: score - incentive,
                    orders: [99.0, 0.0],
                    ..EpisodeMetrics::default()
                })
                .collect(),
        }
    }

    #[test]
    fn constant_reward_summary() {
        let runs = vec![
            constant_run(Mode::Naive, 0, 30, 0.5, 0.0),
            constant_run(Mode::Naive, 1, 30, 0.5, 0.0),
        ];
        let r = evaluate(&runs, 25).unwrap();
        let n = r.mode(Mode::Naive).unwrap();
        assert_eq!(
            n.factory_score,
            Summary {
                mean: 0.5,
                std: 0.0,
                n: 50
            }
        );
        assert_eq!(n.factory_score, n.manager_score);
        assert!(r.comparison.is_none());
    }

    #[test]
    fn raw_is_shaped_minus_incentive() {
        let runs = vec![constant_run(Mode::Managed, 0, 10, 0.6, 0.05)];
        let m = evaluate(&runs, 10).unwrap().modes.remove(0);
        approx::assert_abs_diff_eq!(
            m.raw_score.mean,
            m.factory_score.mean - m.incentive.mean,
            epsilon = 1e-12
        );
    }

    #[test]
    fn improvement_recomputes_from_means() {
        let runs = vec![
            constant_run(Mode::Naive, 0, 5, 0.5, 0.0),
            constant_run(Mode::Managed, 0, 5, 0.6, 0.02),
        ];
        let r = evaluate(&runs, 5).unwrap();
        let c = r.comparison.as_ref().unwrap();
        let (n, m) = (r.mode(Mode::Naive).unwrap(), r.mode(Mode::Managed).unwrap());
        assert_eq!(
            c.raw_improvement_pct,
            improvement_pct(m.raw_score.mean, n.raw_score.mean)
        );
        approx::assert_abs_diff_eq!(c.raw_improvement_pct, 20.0, epsilon = 1e-9);
        assert_eq!(c.seeds_improved(8.0), 1);
        assert!(r.to_table().contains("+20.0%"));
        assert!(r.to_csv().contains("comparison,raw_improvement_pct,"));
    }

    #[test]
    fn insufficient_episodes() {
        let runs = vec![constant_run(Mode::Naive, 0, 10, 0.5, 0.0)];
        assert!(matches!(
            evaluate(&runs, 25),
            Err(Error::InsufficientEpisodes {
                required: 25,
                available: 10
            })
        ));
    }

    #[test]
    fn action_distribution_of_constant_orders() {
        let mut zero = constant_run(Mode::Naive, 0, 3, 0.5, 0.0);
        for m in &mut zero.metrics {
            m.orders = [0.0, 0.0];
        }
        let pts = action_distribution(&[zero, constant_run(Mode::Managed, 0, 3, 0.5, 0.0)]);
        assert_eq!(pts.len(), 6);
        assert_eq!((pts[0].order_s0, pts[0].order_s1), (0.0, 0.0));
        assert_eq!((pts[5].order_s0, pts[5].order_s1), (99.0, 0.0));
        assert!(actions_to_csv(&pts).starts_with("mode,episode,order_s0,order_s1\nnaive,0,0,0\n"));
    }
}
