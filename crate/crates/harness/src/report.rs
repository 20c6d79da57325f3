//! Run reports: one record per loop step plus a verdict, as versioned text.
//!
//! ```text
//! c2f-report 1
//! scenario <name>
//! seed <u64>
//! records <n>
//! <step> <time> <mode> <visibility> <known> <eps_p> <eps_o> <remaining> <min_static> <min_dynamic> <chain> <tracking> <goal_error> <status> <rounds> <solve_ms> <failed>
//! verdict <pass|fail>
//! reason <text>          # zero or more
//! ```
//!
//! Missing values are written as `-`.

use crate::HarnessError;

pub const REPORT_TAG: &str = "c2f-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub mode: String,
    /// Normalized visibility score at the start of the step.
    pub visibility: Option<f64>,
    pub target_known: bool,
    pub eps_position: f64,
    pub eps_orientation: f64,
    pub remaining: Option<f64>,
    /// Ground-truth clearance over the executed motion of this step.
    pub min_static: f64,
    pub min_dynamic: f64,
    pub chain_residual: f64,
    /// Object position of the executed state against the reference.
    pub tracking_error: f64,
    /// Object position against the goal being planned for.
    pub goal_error: f64,
    pub status: Option<String>,
    pub verify_rounds: usize,
    pub solve_ms: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub passed: bool,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub records: Vec<StepRecord>,
    pub verdict: Verdict,
}

fn opt(v: Option<f64>) -> String {
    v.map_or("-".into(), num)
}

fn num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.9e}")
    }
}

fn parse_num(s: &str) -> Result<f64, HarnessError> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| HarnessError::Parse(format!("bad number {s:?}"))),
    }
}

fn parse_opt(s: &str) -> Result<Option<f64>, HarnessError> {
    if s == "-" { Ok(None) } else { parse_num(s).map(Some) }
}

impl RunReport {
    pub fn min_static(&self) -> f64 {
        self.records.iter().map(|r| r.min_static).fold(f64::INFINITY, f64::min)
    }

    pub fn min_dynamic(&self) -> f64 {
        self.records.iter().map(|r| r.min_dynamic).fold(f64::INFINITY, f64::min)
    }

    pub fn max_chain_residual(&self) -> f64 {
        self.records.iter().map(|r| r.chain_residual).fold(0.0, f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{REPORT_TAG} {REPORT_VERSION}\nscenario {}\nseed {}\nrecords {}\n",
            self.scenario,
            self.seed,
            self.records.len()
        );
        for r in &self.records {
            let fields = [
                r.step.to_string(),
                num(r.time),
                r.mode.clone(),
                opt(r.visibility),
                u8::from(r.target_known).to_string(),
                num(r.eps_position),
                num(r.eps_orientation),
                opt(r.remaining),
                num(r.min_static),
                num(r.min_dynamic),
                num(r.chain_residual),
                num(r.tracking_error),
                num(r.goal_error),
                r.status.clone().unwrap_or_else(|| "-".into()),
                r.verify_rounds.to_string(),
                format!("{:.3}", r.solve_ms),
                u8::from(r.failed).to_string(),
            ];
            out.push_str(&fields.join(" "));
            out.push('\n');
        }
        out.push_str(if self.verdict.passed { "verdict pass\n" } else { "verdict fail\n" });
        for reason in &self.verdict.reasons {
            out.push_str(&format!("reason {reason}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, HarnessError> {
        let bad = |m: String| HarnessError::Parse(m);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut header = |key: &str| -> Result<String, HarnessError> {
            let line = lines.next().ok_or_else(|| bad(format!("missing {key} line")))?;
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| bad(format!("expected {key} line, got {line:?}")))
        };
        if header(REPORT_TAG)? != REPORT_VERSION.to_string() {
            return Err(bad("unsupported report version".into()));
        }
        let scenario = header("scenario")?;
        let seed = header("seed")?.parse().map_err(|_| bad("bad seed".into()))?;
        let n: usize = header("records")?.parse().map_err(|_| bad("bad record count".into()))?;
        let mut records = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| bad("missing record".into()))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 17 {
                return Err(bad(format!("record has {} fields, expected 17", f.len())));
            }
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad integer {s:?}")));
            records.push(StepRecord {
                step: int(f[0])?,
                time: parse_num(f[1])?,
                mode: f[2].to_string(),
                visibility: parse_opt(f[3])?,
                target_known: int(f[4])? != 0,
                eps_position: parse_num(f[5])?,
                eps_orientation: parse_num(f[6])?,
                remaining: parse_opt(f[7])?,
                min_static: parse_num(f[8])?,
                min_dynamic: parse_num(f[9])?,
                chain_residual: parse_num(f[10])?,
                tracking_error: parse_num(f[11])?,
                goal_error: parse_num(f[12])?,
                status: (f[13] != "-").then(|| f[13].to_string()),
                verify_rounds: int(f[14])?,
                solve_ms: parse_num(f[15])?,
                failed: int(f[16])? != 0,
            });
        }
        let passed = match lines.next() {
            Some("verdict pass") => true,
            Some("verdict fail") => false,
            other => return Err(bad(format!("expected verdict line, got {other:?}"))),
        };
        let mut reasons = Vec::new();
        for line in lines {
            let r = line.strip_prefix("reason ").ok_or_else(|| bad(format!("unexpected line {line:?}")))?;
            reasons.push(r.to_string());
        }
        Ok(RunReport { scenario, seed, records, verdict: Verdict { passed, reasons } })
    }
}
