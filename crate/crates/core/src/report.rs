//! Verification outcomes.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl Verdict {
    /// Worst of two verdicts, `Fail` dominating `Inconclusive` dominating `Pass`.
    pub fn and(self, other: Verdict) -> Verdict {
        self.max(other)
    }

    pub fn all<I: IntoIterator<Item = Verdict>>(it: I) -> Verdict {
        it.into_iter().fold(Verdict::Pass, Verdict::and)
    }

    /// Verdict for an estimate at distance `deviation` from its target, with
    /// confidence half-width `half_width` and tolerance `tol`.
    pub fn from_deviation(deviation: f64, half_width: f64, tol: f64) -> Verdict {
        if !deviation.is_finite() {
            return Verdict::Fail;
        }
        if deviation > tol + half_width {
            Verdict::Fail
        } else if deviation <= tol && half_width <= tol {
            Verdict::Pass
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn from_bool(ok: bool) -> Verdict {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// Exit code contribution: 0 pass, 1 fail, 2 inconclusive.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 2,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Value(f64),
    Law(String),
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Value(v) => write!(f, "{v:.6}"),
            Quantity::Law(s) => f.write_str(s),
        }
    }
}

/// Non-finite floats travel through JSON as `null`.
mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// How a row enters the overall verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    /// Counts towards the verdict.
    #[default]
    Scored,
    /// Reported only.
    Diagnostic,
    /// Deliberately perturbed comparison that must fail.
    Twin,
}

impl fmt::Display for RowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowKind::Scored => "scored",
            RowKind::Diagnostic => "diagnostic",
            RowKind::Twin => "twin",
        })
    }
}

/// One line of raw numbers behind a report, also the plot-data CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    #[serde(with = "nullable")]
    pub x: f64,
    #[serde(with = "nullable")]
    pub estimate: f64,
    #[serde(with = "nullable")]
    pub target: f64,
    #[serde(with = "nullable")]
    pub ci_lo: f64,
    #[serde(with = "nullable")]
    pub ci_hi: f64,
    pub verdict: Verdict,
    #[serde(default)]
    pub kind: RowKind,
}

impl ReportRow {
    pub fn new(label: impl Into<String>, x: f64, estimate: f64, target: f64) -> Self {
        Self {
            label: label.into(),
            x,
            estimate,
            target,
            ci_lo: f64::NAN,
            ci_hi: f64::NAN,
            verdict: Verdict::Pass,
            kind: RowKind::Scored,
        }
    }

    pub fn diagnostic(mut self) -> Self {
        self.kind = RowKind::Diagnostic;
        self
    }

    pub fn twin(mut self) -> Self {
        self.kind = RowKind::Twin;
        self
    }

    pub fn ci(mut self, lo: f64, hi: f64) -> Self {
        self.ci_lo = lo;
        self.ci_hi = hi;
        self
    }

    pub fn verdict(mut self, v: Verdict) -> Self {
        self.verdict = v;
        self
    }

    pub const CSV_HEADER: &'static str = "label,x,estimate,target,ci_lo,ci_hi,verdict,kind";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.label, self.x, self.estimate, self.target, self.ci_lo, self.ci_hi, self.verdict, self.kind
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub target: Quantity,
    pub estimate: Quantity,
    /// Standard error, or half-width of the reported interval.
    #[serde(with = "nullable")]
    pub uncertainty: f64,
    pub n_used: u64,
    pub verdict: Verdict,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
}

impl TestReport {
    pub fn new(name: impl Into<String>, seed: u64) -> Self {
        Self {
            name: name.into(),
            target: Quantity::Law(String::new()),
            estimate: Quantity::Law(String::new()),
            uncertainty: f64::NAN,
            n_used: 0,
            verdict: Verdict::Inconclusive,
            seed,
            rows: Vec::new(),
            notes: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// Combined verdict of the scored rows.
    pub fn rows_verdict(&self) -> Verdict {
        Verdict::all(self.rows.iter().filter(|r| r.kind == RowKind::Scored).map(|r| r.verdict))
    }

    /// Scored verdict, turned into `Fail` when a perturbed twin did not fail.
    pub fn finalize(&mut self) {
        let mut v = self.rows_verdict();
        for r in self.rows.iter().filter(|r| r.kind == RowKind::Twin) {
            if r.verdict != Verdict::Fail {
                self.warnings
                    .push(format!("perturbed twin '{}' did not fail ({})", r.label, r.verdict));
                v = Verdict::Fail;
            }
        }
        self.verdict = v;
    }

    pub fn twins_failed(&self) -> bool {
        self.rows
            .iter()
            .filter(|r| r.kind == RowKind::Twin)
            .all(|r| r.verdict == Verdict::Fail)
    }

    pub fn row(&self, label: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{:<12} {} target={} estimate={} ±{:.3e} n={}",
            self.verdict, self.name, self.target, self.estimate, self.uncertainty, self.n_used
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}
