//! Verdict reports shared by every check.

use std::collections::BTreeMap;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    HypothesisNotMet,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::HypothesisNotMet => "hypothesis-not-met",
        }
    }
}

/// Summary of one residual over a sample set.
#[derive(Debug, Clone, Serialize)]
pub struct Residual {
    pub name: String,
    pub max: f64,
    pub mean: f64,
    pub count: usize,
    pub tol: f64,
    pub pass: bool,
}

impl Residual {
    pub fn from_samples(name: impl Into<String>, samples: &[f64], tol: f64) -> Self {
        let count = samples.len();
        let (max, mean) = if count == 0 {
            (0.0, 0.0)
        } else {
            let abs = samples.iter().map(|v| v.abs());
            let max = abs.clone().fold(0.0f64, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) });
            (max, abs.sum::<f64>() / count as f64)
        };
        Self { name: name.into(), max, mean, count, tol, pass: max < tol }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub anchor: String,
    pub verdict: Verdict,
    pub residuals: Vec<Residual>,
    pub values: BTreeMap<String, f64>,
    pub labels: BTreeMap<String, String>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, anchor: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            verdict: Verdict::Fail,
            residuals: Vec::new(),
            values: BTreeMap::new(),
            labels: BTreeMap::new(),
            notes: Vec::new(),
            error: None,
        }
    }

    pub fn residual(&mut self, name: impl Into<String>, samples: &[f64], tol: f64) -> &Residual {
        self.residuals.push(Residual::from_samples(name, samples, tol));
        self.residuals.last().unwrap()
    }

    pub fn value(&mut self, key: impl Into<String>, v: f64) {
        self.values.insert(key.into(), v);
    }

    pub fn label(&mut self, key: impl Into<String>, v: impl Into<String>) {
        self.labels.insert(key.into(), v.into());
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn get(&self, name: &str) -> Option<&Residual> {
        self.residuals.iter().find(|r| r.name == name)
    }

    /// Pass iff every residual is below its tolerance.
    pub fn finish(mut self) -> Self {
        self.verdict = if self.residuals.iter().all(|r| r.pass) { Verdict::Pass } else { Verdict::Fail };
        self
    }

    pub fn finish_with(mut self, pass: bool) -> Self {
        self.verdict = if pass { Verdict::Pass } else { Verdict::Fail };
        self
    }

    pub fn hypothesis_not_met(mut self, reason: impl Into<String>) -> Self {
        self.verdict = Verdict::HypothesisNotMet;
        self.notes.push(reason.into());
        self
    }

    pub fn failed(name: impl Into<String>, anchor: impl Into<String>, error: impl Into<String>) -> Self {
        let mut r = Self::new(name, anchor);
        r.error = Some(error.into());
        r
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Whether every residual recorded so far is below tolerance.
    pub fn passed_residuals(&self) -> bool {
        self.residuals.iter().all(|r| r.pass)
    }
}
