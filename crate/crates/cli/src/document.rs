use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Exploratory,
}

impl Verdict {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Fail => 1,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedVerdict {
    pub name: String,
    pub pass: bool,
}

/// Result of one experiment before it is wrapped into a document.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub verdict: Verdict,
    pub checks: Vec<NamedVerdict>,
    pub payload: Value,
    /// (file name, CSV bytes) written under `--out`.
    pub csv: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    pub fn exploratory(payload: Value) -> Self {
        Self { verdict: Verdict::Exploratory, checks: vec![], payload, csv: vec![] }
    }

    /// Verdict is pass iff every named check passes.
    pub fn checked(checks: Vec<NamedVerdict>, payload: Value) -> Self {
        let verdict = Verdict::from_pass(checks.iter().all(|c| c.pass));
        Self { verdict, checks, payload, csv: vec![] }
    }

    pub fn with_csv(mut self, name: impl Into<String>, bytes: Vec<u8>) -> Self {
        self.csv.push((name.into(), bytes));
        self
    }
}

pub fn check(name: impl Into<String>, pass: bool) -> NamedVerdict {
    NamedVerdict { name: name.into(), pass }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: String,
    pub verdict: Verdict,
    pub verdicts: Vec<NamedVerdict>,
    pub config: Value,
    pub payload: Value,
    pub files: Vec<String>,
    /// Wall-clock seconds; the only field that varies between identical runs.
    pub elapsed_seconds: f64,
}

impl ReportDocument {
    pub fn new(experiment: &str, config: Value, outcome: &Outcome, files: Vec<String>, elapsed_seconds: f64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            experiment: experiment.into(),
            verdict: outcome.verdict,
            verdicts: outcome.checks.clone(),
            config,
            payload: outcome.payload.clone(),
            files,
            elapsed_seconds,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
