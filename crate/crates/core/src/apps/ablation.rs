//! Precision comparison between analysis modes on exit dependency sets.

use serde::Serialize;

use crate::flow::{analyze_fn, FlowConfig, FlowResult, Mode, Theta};
use crate::lang::parse_located;
use crate::ownership::{typecheck, TypedProgram};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub program: String,
    pub function: String,
    pub variable: String,
    pub mode: Mode,
    pub size: usize,
    pub base_size: usize,
    /// `None` when the baseline set is empty.
    pub pct_increase: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeSummary {
    pub base: Mode,
    pub mode: Mode,
    pub compared: usize,
    pub zero_fraction: f64,
    pub median_nonzero: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Skipped {
    pub program: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationReport {
    pub base: Mode,
    pub rows: Vec<AblationRow>,
    pub summary: Vec<ModeSummary>,
    pub skipped: Vec<Skipped>,
}

/// `(m - base) / base`, undefined for an empty baseline.
pub fn pct_increase(base: usize, m: usize) -> Option<f64> {
    (base > 0).then(|| (m as f64 - base as f64) / base as f64)
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

fn var_size(th: &Theta, v: &str) -> usize {
    th.restrict_root(v).total_size()
}

/// Summed entry sizes of the places rooted at the parameter at exit and at each local when it leaves scope.
fn sizes(r: &FlowResult, param: &str) -> Vec<(String, usize)> {
    let mut out = vec![(param.to_string(), var_size(&r.exit_theta, param))];
    for (v, th) in &r.rec.var_exit {
        out.push((v.clone(), var_size(th, v)));
    }
    out
}

pub fn summarize(base: Mode, rows: &[AblationRow], modes: &[Mode]) -> Vec<ModeSummary> {
    modes
        .iter()
        .map(|&mode| {
            let pcts: Vec<f64> = rows
                .iter()
                .filter(|r| r.mode == mode)
                .filter_map(|r| r.pct_increase)
                .collect();
            let nonzero: Vec<f64> = pcts.iter().copied().filter(|p| *p != 0.0).collect();
            ModeSummary {
                base,
                mode,
                compared: pcts.len(),
                zero_fraction: if pcts.is_empty() {
                    0.0
                } else {
                    (pcts.len() - nonzero.len()) as f64 / pcts.len() as f64
                },
                median_nonzero: median(&nonzero),
            }
        })
        .collect()
}

fn rows_for(name: &str, tp: &TypedProgram, base: Mode, others: &[Mode], rows: &mut Vec<AblationRow>) {
    for f in &tp.program.fns {
        let Some(rb) = analyze_fn(tp, &f.name, FlowConfig::new(base)) else { continue };
        let bs = sizes(&rb, &f.param);
        for &mode in others {
            let rm = analyze_fn(tp, &f.name, FlowConfig::new(mode)).expect("function with a body");
            for ((var, b), (_, m)) in bs.iter().zip(sizes(&rm, &f.param)) {
                rows.push(AblationRow {
                    program: name.to_string(),
                    function: f.name.clone(),
                    variable: var.clone(),
                    mode,
                    size: m,
                    base_size: *b,
                    pct_increase: pct_increase(*b, m),
                });
            }
        }
    }
}

/// Compare `others` against `base` on every program given as `(name, source)`.
pub fn ablation_report(programs: &[(String, String)], base: Mode, others: &[Mode]) -> AblationReport {
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (name, src) in programs {
        let tp = match parse_located(src) {
            Err(e) => Err(e.to_string()),
            Ok(p) => typecheck(&p).map_err(|errs| {
                errs.iter()
                    .map(|(f, e)| format!("{f}: {e}"))
                    .collect::<Vec<_>>()
                    .join("; ")
            }),
        };
        match tp {
            Ok(tp) => rows_for(name, &tp, base, others, &mut rows),
            Err(reason) => skipped.push(Skipped {
                program: name.clone(),
                reason,
            }),
        }
    }
    AblationReport {
        base,
        summary: summarize(base, &rows, others),
        rows,
        skipped,
    }
}

impl AblationReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["program", "function", "variable", "mode", "size", "base_size", "pct_increase"])
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.program.clone(),
                r.function.clone(),
                r.variable.clone(),
                r.mode.to_string(),
                r.size.to_string(),
                r.base_size.to_string(),
                r.pct_increase.map(|p| p.to_string()).unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Summary plus the percentage samples of each mode, ready for plotting.
    pub fn histogram_json(&self) -> serde_json::Value {
        let per_mode: serde_json::Map<String, serde_json::Value> = self
            .summary
            .iter()
            .map(|s| {
                let xs: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.mode == s.mode)
                    .filter_map(|r| r.pct_increase)
                    .collect();
                (s.mode.to_string(), serde_json::json!(xs))
            })
            .collect();
        serde_json::json!({
            "base": self.base,
            "summary": self.summary,
            "samples": per_mode,
            "skipped": self.skipped,
        })
    }
}
