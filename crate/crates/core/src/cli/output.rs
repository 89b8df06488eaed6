//! JSON and CSV writers. Floats carry 17 significant digits; non-finite
//! values become JSON `null`.

use serde::Serialize;
use serde_json::value::RawValue;

use crate::estimators::{EstimationResult, LevelDiag};

pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn num(x: f64) -> Option<Box<RawValue>> {
    x.is_finite().then(|| RawValue::from_string(format!("{x:.16e}")).expect("formatted float is valid JSON"))
}

fn opt_num(x: Option<f64>) -> Option<Box<RawValue>> {
    x.and_then(num)
}

#[derive(Serialize)]
struct JsonLevel {
    level: usize,
    s: Option<Box<RawValue>>,
    s_next: Option<Box<RawValue>>,
    stop_cv: Option<Box<RawValue>>,
    gamma: Option<Box<RawValue>>,
    rank: Option<usize>,
    weights_cv: Option<Box<RawValue>>,
    excluded: usize,
    smoothing_degenerate: bool,
}

impl From<&LevelDiag> for JsonLevel {
    fn from(l: &LevelDiag) -> Self {
        Self {
            level: l.level,
            s: num(l.s),
            s_next: opt_num(l.s_next),
            stop_cv: opt_num(l.stop_cv),
            gamma: opt_num(l.gamma),
            rank: l.rank,
            weights_cv: opt_num(l.weights_cv),
            excluded: l.excluded,
            smoothing_degenerate: l.smoothing_degenerate,
        }
    }
}

#[derive(Serialize)]
struct JsonResult<'a> {
    method: &'a str,
    seed: u64,
    p_hat: Option<Box<RawValue>>,
    cv_hat: Option<Box<RawValue>>,
    n_levels: usize,
    lsf_calls: usize,
    grad_calls: usize,
    converged: bool,
    cv_before_refine: Option<Box<RawValue>>,
    reference_p: Option<Box<RawValue>>,
    note: Option<&'a str>,
    per_level: Vec<JsonLevel>,
}

/// One result as a JSON document. Wall-clock timings are left out so that
/// repeated runs produce identical bytes.
pub fn result_json(result: &EstimationResult, method: &str, seed: u64, reference_p: Option<f64>) -> String {
    let doc = JsonResult {
        method,
        seed,
        p_hat: num(result.p_hat),
        cv_hat: num(result.cv_hat),
        n_levels: result.n_levels,
        lsf_calls: result.lsf_calls,
        grad_calls: result.grad_calls,
        converged: result.converged,
        cv_before_refine: opt_num(result.cv_before_refine),
        reference_p: opt_num(reference_p),
        note: result.note.as_deref(),
        per_level: result.per_level.iter().map(JsonLevel::from).collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("result serializes");
    s.push('\n');
    s
}

pub const STUDY_HEADER: [&str; 8] =
    ["run", "seed", "p_hat", "cv_hat", "n_levels", "lsf_calls", "grad_calls", "converged"];

/// Mean of counts, printed as an integer when exact.
fn fmt_mean(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        fmt_float(x)
    }
}

pub fn study_row(run: usize, seed: u64, r: &EstimationResult) -> Vec<String> {
    vec![
        run.to_string(),
        seed.to_string(),
        fmt_float(r.p_hat),
        fmt_float(r.cv_hat),
        r.n_levels.to_string(),
        r.lsf_calls.to_string(),
        r.grad_calls.to_string(),
        r.converged.to_string(),
    ]
}

/// Summary row: mean estimate, empirical cv across runs (the run's own cv
/// estimate when there is only one), mean counters, and whether every run
/// converged. Runs without a finite estimate are left out of the averages.
pub fn study_summary(results: &[EstimationResult]) -> Vec<String> {
    let ok: Vec<&EstimationResult> = results.iter().filter(|r| r.p_hat.is_finite()).collect();
    let n = ok.len() as f64;
    let mean = |f: &dyn Fn(&EstimationResult) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / n;
    let p_mean = mean(&|r| r.p_hat);
    let cv = if ok.len() == 1 {
        ok[0].cv_hat
    } else {
        let var = ok.iter().map(|r| (r.p_hat - p_mean).powi(2)).sum::<f64>() / (n - 1.0);
        var.sqrt() / p_mean
    };
    vec![
        "summary".into(),
        String::new(),
        fmt_float(p_mean),
        fmt_float(cv),
        fmt_mean(mean(&|r| r.n_levels as f64)),
        fmt_mean(mean(&|r| r.lsf_calls as f64)),
        fmt_mean(mean(&|r| r.grad_calls as f64)),
        results.iter().all(|r| r.converged).to_string(),
    ]
}
