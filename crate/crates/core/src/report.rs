//! Aggregation of trial results into comparison tables, and model selection.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::disruption::{
    build_schedule, evaluate_delays, Built, DelayScenario, Method, SkipReason, TrialContext, TrialResult,
};
use crate::extract::ExtractionMethod;
use crate::generator::{generate_instance, DatasetProfile, GeneratorConfig};
use crate::policy::PolicyWeights;
use crate::seeds::SeedSplitter;
use crate::stats::{mean, paired_t_test, std_dev, welch_t_test, TTest};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Trials with a disruption count.
    pub n: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub skipped: usize,
    pub timed_out: usize,
    pub median_build_ms: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Paired,
    Welch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: Method,
    pub b: Method,
    pub kind: TestKind,
    /// Pairs for the paired test, `(n_a, n_b)` sample sizes for Welch.
    pub sizes: (usize, usize),
    pub test: Option<TTest>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub fraction_delayed: f64,
    pub trials: usize,
    pub methods: Vec<MethodSummary>,
    pub comparisons: Vec<Comparison>,
}

impl ReportRow {
    pub fn summary(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }

    pub fn mean(&self, m: Method) -> Option<f64> {
        self.summary(m).and_then(|s| s.mean)
    }

    pub fn comparison(&self, a: Method, b: Method) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.a == a && c.b == b)
    }

    /// Relative reduction of `m` against the baseline mean.
    pub fn reduction_vs_baseline(&self, m: Method) -> Option<f64> {
        let base = self.mean(Method::Baseline)?;
        if base <= 0.0 {
            return None;
        }
        Some((base - self.mean(m)?) / base)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DisruptionReport {
    pub density: f64,
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
}

fn disruptions_by_trial(results: &[TrialResult], m: Method) -> BTreeMap<usize, f64> {
    results
        .iter()
        .filter(|r| r.method == m)
        .filter_map(|r| r.disruptions.map(|d| (r.trial, d as f64)))
        .collect()
}

fn summarize_method(results: &[TrialResult], m: Method) -> MethodSummary {
    let mine: Vec<&TrialResult> = results.iter().filter(|r| r.method == m).collect();
    let values: Vec<f64> = mine.iter().filter_map(|r| r.disruptions.map(|d| d as f64)).collect();
    let mut build: Vec<f64> = mine.iter().map(|r| r.build_time.as_secs_f64() * 1e3).collect();
    build.sort_by(f64::total_cmp);
    MethodSummary {
        method: m,
        n: values.len(),
        mean: (!values.is_empty()).then(|| mean(&values)),
        sd: (!values.is_empty()).then(|| std_dev(&values)),
        skipped: mine.iter().filter(|r| r.skipped()).count(),
        timed_out: mine.iter().filter(|r| r.timed_out).count(),
        median_build_ms: median(&build),
    }
}

/// Median of a sorted slice.
fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some(0.5 * (sorted[n / 2 - 1] + sorted[n / 2])),
    }
}

fn paired(results: &[TrialResult], a: Method, b: Method) -> Comparison {
    let xa = disruptions_by_trial(results, a);
    let xb = disruptions_by_trial(results, b);
    let (va, vb): (Vec<f64>, Vec<f64>) = xa
        .iter()
        .filter_map(|(t, x)| xb.get(t).map(|y| (*x, *y)))
        .unzip();
    let (test, note) = match paired_t_test(&va, &vb) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Comparison {
        a,
        b,
        kind: TestKind::Paired,
        sizes: (va.len(), vb.len()),
        test,
        note,
    }
}

fn welch(results: &[TrialResult], a: Method, b: Method) -> Comparison {
    let va: Vec<f64> = disruptions_by_trial(results, a).into_values().collect();
    let vb: Vec<f64> = disruptions_by_trial(results, b).into_values().collect();
    let (test, note) = match welch_t_test(&va, &vb) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Comparison {
        a,
        b,
        kind: TestKind::Welch,
        sizes: (va.len(), vb.len()),
        test,
        note,
    }
}

/// One table row. The paired test is reserved for NICE against the
/// baseline; comparisons involving RL use Welch's test.
pub fn summarize(fraction_delayed: f64, methods: &[Method], results: &[TrialResult]) -> ReportRow {
    let trials = results.iter().map(|r| r.trial).collect::<std::collections::BTreeSet<_>>().len();
    let has = |m: Method| methods.contains(&m);
    let mut comparisons = Vec::new();
    if has(Method::Nice) && has(Method::Baseline) {
        comparisons.push(paired(results, Method::Nice, Method::Baseline));
    }
    if has(Method::Rl) && has(Method::Baseline) {
        comparisons.push(welch(results, Method::Rl, Method::Baseline));
    }
    if has(Method::Rl) && has(Method::Nice) {
        comparisons.push(welch(results, Method::Rl, Method::Nice));
    }
    ReportRow {
        fraction_delayed,
        trials,
        methods: methods.iter().map(|&m| summarize_method(results, m)).collect(),
        comparisons,
    }
}

impl DisruptionReport {
    /// Plain-text table: one row per delay fraction, `mean ± sd` per method
    /// and the p-values of the row's comparisons. Methods that never produced
    /// a repaired schedule get no column.
    pub fn render(&self) -> String {
        let Some(first) = self.rows.first() else {
            return "no results\n".into();
        };
        let shown: Vec<Method> = first
            .methods
            .iter()
            .map(|s| s.method)
            .filter(|&m| self.rows.iter().any(|r| r.summary(m).is_some_and(|s| s.n > 0)))
            .collect();
        let mut out = String::new();
        let _ = writeln!(out, "Disruptions at density {} (mean ± sd over repaired trials)", self.density);
        let mut header = format!("{:>6}", "f(%)");
        for m in &shown {
            let _ = write!(header, " {:>15}", m.label());
        }
        for c in &first.comparisons {
            let _ = write!(header, " {:>15}", format!("p({}~{})", c.a, c.b));
        }
        let _ = writeln!(out, "{header}");
        for row in &self.rows {
            let _ = write!(out, "{:>6}", format!("{:.0}", row.fraction_delayed * 100.0));
            for &m in &shown {
                let cell = match row.summary(m) {
                    Some(MethodSummary {
                        mean: Some(mu),
                        sd: Some(sd),
                        ..
                    }) => format!("{mu:.2} ± {sd:.2}"),
                    _ => "-".into(),
                };
                let _ = write!(out, " {cell:>15}");
            }
            for c in &row.comparisons {
                let cell = c.test.map_or("n/a".to_string(), |t| format!("{:.4}", t.p_value));
                let _ = write!(out, " {cell:>15}");
            }
            let _ = writeln!(out);
        }
        for row in &self.rows {
            for s in &row.methods {
                if s.skipped > 0 || s.timed_out > 0 {
                    let _ = writeln!(
                        out,
                        "f={:.0}%: {} skipped {} of {} trials, {} construction timeouts",
                        row.fraction_delayed * 100.0,
                        s.method,
                        s.skipped,
                        row.trials,
                        s.timed_out
                    );
                }
            }
        }
        for m in first.methods.iter().map(|s| s.method).filter(|m| !shown.contains(m)) {
            let _ = writeln!(out, "{m}: no repaired schedule in any trial; column omitted");
        }
        for n in &self.notes {
            let _ = writeln!(out, "{n}");
        }
        out
    }
}

/// Ratio of mean NICE to mean baseline disruptions over trials where both
/// were repaired. `None` when no such trial exists or the baseline mean is 0.
pub fn disruption_ratio(results: &[TrialResult]) -> Option<f64> {
    let nice = disruptions_by_trial(results, Method::Nice);
    let base = disruptions_by_trial(results, Method::Baseline);
    let (a, b): (Vec<f64>, Vec<f64>) = nice.iter().filter_map(|(t, x)| base.get(t).map(|y| (*x, *y))).unzip();
    if a.is_empty() {
        return None;
    }
    let mb = mean(&b);
    (mb > 0.0).then(|| mean(&a) / mb)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub index: usize,
    pub training_density: f64,
    pub n: usize,
    pub seed: u64,
    pub r: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Candidate whose `r` is closest to its group's median.
    pub index: usize,
    pub n: usize,
    pub training_density: f64,
    /// Median `r` of the winning (density, n) group.
    pub r: f64,
    pub scores: Vec<CandidateScore>,
    pub warnings: Vec<String>,
}

/// Picks the (training density, n) group with the lowest median `r`; ties go
/// to the group seen first. Candidates without a defined `r` are ignored.
pub fn select_from_scores(scores: &[CandidateScore]) -> Option<(usize, f64)> {
    let mut groups: Vec<((u64, usize), Vec<&CandidateScore>)> = Vec::new();
    for s in scores.iter().filter(|s| s.r.is_some()) {
        let key = (s.training_density.to_bits(), s.n);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(s),
            None => groups.push((key, vec![s])),
        }
    }
    let mut best: Option<(f64, &Vec<&CandidateScore>)> = None;
    for (_, members) in &groups {
        let mut rs: Vec<f64> = members.iter().filter_map(|s| s.r).collect();
        rs.sort_by(f64::total_cmp);
        let med = median(&rs)?;
        if best.is_none_or(|(b, _)| med < b) {
            best = Some((med, members));
        }
    }
    let (med, members) = best?;
    let pick = members
        .iter()
        .min_by(|x, y| {
            let dx = (x.r.unwrap() - med).abs();
            let dy = (y.r.unwrap() - med).abs();
            dx.total_cmp(&dy).then(x.index.cmp(&y.index))
        })
        .expect("non-empty group");
    Some((pick.index, med))
}

#[derive(Clone, Debug)]
pub struct SelectionConfig {
    pub density: f64,
    pub trials: usize,
    pub fraction_delayed: f64,
    pub time_limit: Duration,
    pub seed: u64,
}

/// Scores every `(weights, n)` candidate on the same `trials` instances and
/// delay draws, then applies [`select_from_scores`].
pub fn select_model(
    candidates: &[(&PolicyWeights, usize)],
    profile: &DatasetProfile,
    cfg: &SelectionConfig,
) -> Result<Selection, crate::Error> {
    assert!(!candidates.is_empty(), "select_model needs candidates");
    let seeds = SeedSplitter::new(cfg.seed);
    let mut per_candidate: Vec<Vec<TrialResult>> = vec![Vec::new(); candidates.len()];
    for trial in 0..cfg.trials {
        let inst = generate_instance(
            profile,
            &GeneratorConfig::new(cfg.density, 1, seeds.seed("instance", trial as u64)),
        )?;
        let scn = DelayScenario::new(cfg.fraction_delayed, seeds.seed("delays", trial as u64));
        let base_ctx = TrialContext::new(cfg.time_limit, None);
        let base = build_schedule(Method::Baseline, &inst, &base_ctx)?;
        for (i, (w, n)) in candidates.iter().enumerate() {
            let ctx = TrialContext {
                weights: Some(*w),
                extraction: ExtractionMethod::from_n(*n),
                seed: seeds.seed("extract", trial as u64),
                ..TrialContext::new(cfg.time_limit, Some(*w))
            };
            let mut built: Vec<Built> = vec![base.clone(), build_schedule(Method::Nice, &inst, &ctx)?];
            if base.skip == Some(SkipReason::Infeasible) {
                built[1].schedule = None;
                built[1].skip = Some(SkipReason::Infeasible);
            }
            per_candidate[i].extend(evaluate_delays(trial, &built, &inst, &scn, &ctx)?);
        }
    }
    let mut warnings = Vec::new();
    let scores: Vec<CandidateScore> = candidates
        .iter()
        .enumerate()
        .map(|(i, (w, n))| {
            let r = disruption_ratio(&per_candidate[i]);
            if r.is_none() {
                warnings.push(format!(
                    "candidate {i} (density {}, n {n}, seed {}): r undefined, excluded",
                    w.metadata.training_density, w.metadata.seed
                ));
            }
            CandidateScore {
                index: i,
                training_density: w.metadata.training_density,
                n: *n,
                seed: w.metadata.seed,
                r,
            }
        })
        .collect();
    let (index, r) = select_from_scores(&scores).ok_or_else(|| {
        crate::disruption::DisruptionError::Incomparable("no candidate has a defined ratio".into())
    })?;
    Ok(Selection {
        index,
        n: scores[index].n,
        training_density: scores[index].training_density,
        r,
        scores,
        warnings,
    })
}
