//! Check records and their serialization.

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub family: String,
    pub inputs_digest: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
    /// An engineered violation; the suite is healthy only if it fails.
    pub negative_control: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
    pub negative_controls: usize,
    pub controls_detected: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub suite: String,
    pub scenario: String,
    pub seed: u64,
    pub records: Vec<CheckRecord>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(suite: &str, scenario: &str, seed: u64) -> Self {
        Self {
            suite: suite.into(),
            scenario: scenario.into(),
            seed,
            records: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, record: CheckRecord) {
        self.records.push(record);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn extend(&mut self, other: Report) {
        self.records.extend(other.records);
        self.notes.extend(other.notes);
    }

    pub fn summary(&self) -> Summary {
        let mut s = Summary::default();
        for r in &self.records {
            if r.negative_control {
                s.negative_controls += 1;
                if !r.pass {
                    s.controls_detected += 1;
                }
            } else {
                s.checks += 1;
                if r.pass {
                    s.passed += 1;
                } else {
                    s.failed += 1;
                }
            }
        }
        s
    }

    /// Every regular check passed and every negative control failed.
    pub fn ok(&self) -> bool {
        let s = self.summary();
        s.failed == 0 && s.controls_detected == s.negative_controls
    }

    /// Records that disagree with their expectation.
    pub fn unexpected(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| r.pass == r.negative_control)
    }

    pub fn get(&self, name: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            #[serde(flatten)]
            report: &'a Report,
            summary: Summary,
            ok: bool,
        }
        let out = Out {
            report: self,
            summary: self.summary(),
            ok: self.ok(),
        };
        serde_json::to_string_pretty(&out).expect("report serializes") + "\n"
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("# schema=1\n");
        s.push_str("name,family,inputs_digest,measured,bound,pass,negative_control,detail\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{},{},{:e},{:e},{},{},\"{}\"\n",
                r.name,
                r.family,
                r.inputs_digest,
                r.measured,
                r.bound,
                r.pass,
                r.negative_control,
                r.detail.replace('"', "'")
            ));
        }
        s
    }

    /// One line per record, for terminals.
    pub fn lines(&self) -> Vec<String> {
        self.records
            .iter()
            .map(|r| {
                let verdict = match (r.pass, r.negative_control) {
                    (true, false) => "PASS",
                    (false, false) => "FAIL",
                    (false, true) => "DETECTED",
                    (true, true) => "MISSED",
                };
                format!(
                    "{verdict:<8} {:<14} {:<34} measured {:.3e} bound {:.3e}  {}",
                    r.family, r.name, r.measured, r.bound, r.detail
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(pass: bool, negative_control: bool) -> CheckRecord {
        CheckRecord {
            name: "x".into(),
            family: "f".into(),
            inputs_digest: String::new(),
            measured: 0.0,
            bound: 1.0,
            pass,
            negative_control,
            detail: String::new(),
        }
    }

    #[test]
    fn ok_requires_detected_controls() {
        let mut r = Report::new("s", "t", 1);
        r.push(rec(true, false));
        r.push(rec(false, true));
        assert!(r.ok());
        r.push(rec(true, true));
        assert!(!r.ok());
        assert_eq!(r.unexpected().count(), 1);
    }

    #[test]
    fn csv_has_schema_line() {
        let mut r = Report::new("s", "t", 1);
        r.push(rec(true, false));
        assert!(r.to_csv().starts_with("# schema=1\n"));
        assert!(r.to_json().contains("\"ok\": true"));
    }
}
