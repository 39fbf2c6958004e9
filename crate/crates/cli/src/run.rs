//! Scenario execution, report assembly and trace output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use riemap_core::{CheckReport, Verdict};
use serde::Serialize;

use crate::builtin;
use crate::checks::{run_check, Context};
use crate::error::{CliError, CliResult};
use crate::model::{Curve, Model, RunOptions};
use crate::schema::{parse_scenario, CheckBlock, CheckKind, Expect, Scenario};

/// A report together with the outcome it was held to.
#[derive(Debug, Clone, Serialize)]
pub struct Entry {
    pub expected: String,
    pub met: bool,
    #[serde(flatten)]
    pub report: CheckReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub block: String,
    pub kind: CheckKind,
    pub tolerance: f64,
    pub met: bool,
    pub reports: Vec<Entry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveSummary {
    pub name: String,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariant_drift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub checks: usize,
    pub reports: usize,
    pub unmet: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub description: String,
    pub seed: u64,
    pub tolerance: f64,
    pub nonconformant: bool,
    pub notes: Vec<String>,
    pub geodesics: Vec<CurveSummary>,
    pub checks: Vec<CheckOutcome>,
    pub summary: Summary,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.summary.unmet == 0
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    /// Every report of every check, in declaration order.
    pub fn reports(&self) -> impl Iterator<Item = &CheckReport> {
        self.checks.iter().flat_map(|c| c.reports.iter().map(|e| &e.report))
    }

    /// The reports of one check block.
    pub fn check(&self, block: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.block == block)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

impl CheckOutcome {
    pub fn report(&self, name: &str) -> Option<&CheckReport> {
        self.reports.iter().map(|e| &e.report).find(|r| r.name == name)
    }
}

/// Reads a scenario from a file path, falling back to the builtin of that name.
pub fn load(arg: &str) -> CliResult<Scenario> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        return parse_scenario(&text);
    }
    match builtin::source(arg) {
        Some(text) => parse_scenario(text),
        None => Err(CliError::UnknownScenario(arg.to_string())),
    }
}

/// Integrated curves keyed by name; failures are kept as messages.
pub fn integrate_all(model: &Model) -> BTreeMap<String, Result<Curve, String>> {
    model
        .curves
        .par_iter()
        .map(|spec| (spec.name.clone(), model.integrate(spec).map_err(|e| e.to_string())))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

fn expectation(block: &CheckBlock, literal: bool) -> Option<&Expect> {
    if literal {
        block.expect_literal.as_ref().or(block.expect.as_ref())
    } else {
        block.expect.as_ref()
    }
}

fn judge(report: CheckReport, expect: Option<&Expect>) -> Entry {
    let wanted = match expect {
        Some(Expect::All(o)) => Some(*o),
        Some(Expect::PerReport(m)) => m.get(&report.name).copied(),
        None => None,
    };
    let verdict = report.verdict;
    let (expected, met) = match wanted {
        _ if report.error.is_some() => (wanted.map(|o| o.as_str()).unwrap_or("pass"), false),
        Some(o) => (o.as_str(), verdict.as_str() == o.as_str()),
        // without an expectation a gated report does not count against the run
        None => ("pass or hypothesis-not-met", verdict != Verdict::Fail),
    };
    Entry { expected: expected.to_string(), met, report }
}

/// Runs every check of a scenario. Input errors abort; numeric errors stay inside their check.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> CliResult<(RunReport, BTreeMap<String, Result<Curve, String>>)> {
    let model = Model::build(scenario, opts)?;
    let curves = integrate_all(&model);
    let cx = Context { model: &model, curves: &curves };
    let literal = model.nonconformant;

    for block in &scenario.checks {
        if let Some(Expect::PerReport(m)) = expectation(block, literal) {
            if m.is_empty() {
                return Err(CliError::Invalid(format!("check '{}': empty expectation table", block.name)));
            }
        }
    }

    let checks: Vec<CheckOutcome> = scenario
        .checks
        .par_iter()
        .map(|block| {
            let tol = block.tol.unwrap_or(model.tolerance);
            let reports = match run_check(&cx, block, tol) {
                Ok(r) => r,
                Err(e) => vec![CheckReport::failed(block.name.clone(), "scenario input", e.to_string())],
            };
            let expect = expectation(block, literal);
            let reports: Vec<Entry> = reports.into_iter().map(|r| judge(r, expect)).collect();
            let met = reports.iter().all(|e| e.met);
            Ok(CheckOutcome { block: block.name.clone(), kind: block.kind, tolerance: tol, met, reports })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let geodesics = model
        .curves
        .iter()
        .map(|spec| match &curves[&spec.name] {
            Ok(c) => CurveSummary { name: spec.name.clone(), samples: c.trace.len(), invariant_drift: c.drift, error: None },
            Err(e) => CurveSummary { name: spec.name.clone(), samples: 0, invariant_drift: None, error: Some(e.clone()) },
        })
        .collect();
    let unmet = checks.iter().flat_map(|c| &c.reports).filter(|e| !e.met).count();
    let summary = Summary { checks: checks.len(), reports: checks.iter().map(|c| c.reports.len()).sum(), unmet };
    let report = RunReport {
        scenario: scenario.name.clone(),
        description: scenario.description.clone(),
        seed: model.seed,
        tolerance: model.tolerance,
        nonconformant: model.nonconformant,
        notes: model.notes.clone(),
        geodesics,
        checks,
        summary,
    };
    Ok((report, curves))
}

/// CSV with columns `t, point..., velocity..., omega, invariant`.
pub fn trace_csv(curve: &Curve, coords: &[String]) -> String {
    let mut out = String::from("t");
    for c in coords {
        let _ = write!(out, ",{c}");
    }
    for c in coords {
        let _ = write!(out, ",v_{c}");
    }
    out.push_str(",omega,invariant\n");
    let t = &curve.trace;
    for i in 0..t.len() {
        let _ = write!(out, "{}", t.times[i]);
        for x in &t.points[i] {
            let _ = write!(out, ",{x}");
        }
        for v in t.velocities[i].iter() {
            let _ = write!(out, ",{v}");
        }
        match t.omega.get(i) {
            Some(w) => {
                let _ = write!(out, ",{w}");
            }
            None => out.push(','),
        }
        match t.invariant.get(i) {
            Some(c) => {
                let _ = write!(out, ",{c}");
            }
            None => out.push(','),
        }
        out.push('\n');
    }
    out
}

/// Writes `report.json` and `traces/<name>.csv` under `dir`.
pub fn write_outputs(dir: &Path, report: &RunReport, model_curves: &BTreeMap<String, Result<Curve, String>>, scenario: &Scenario) -> CliResult<Vec<PathBuf>> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    let traces = dir.join("traces");
    std::fs::create_dir_all(&traces).map_err(io(&traces))?;
    let mut written = Vec::new();
    let json = dir.join("report.json");
    std::fs::write(&json, report.to_json()).map_err(io(&json))?;
    written.push(json);
    let coords: BTreeMap<&str, Vec<String>> = scenario.manifolds.iter().map(|m| (m.name.as_str(), m.coords.clone())).collect();
    for (name, curve) in model_curves {
        if let Ok(c) = curve {
            let path = traces.join(format!("{name}.csv"));
            std::fs::write(&path, trace_csv(c, &coords[c.spec.manifold.as_str()])).map_err(io(&path))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// CSV for one named geodesic of a scenario.
pub fn trace_scenario(scenario: &Scenario, name: &str, opts: &RunOptions) -> CliResult<String> {
    let model = Model::build(scenario, opts)?;
    let spec = model.curves.iter().find(|c| c.name == name).ok_or_else(|| CliError::reference("geodesic", name, "trace command"))?;
    let curve = model.integrate(spec)?;
    Ok(trace_csv(&curve, model.manifold(&spec.manifold, "trace command")?.coords()))
}
