use serde::{Deserialize, Serialize};

use super::config::SCHEMA;

/// One verified inequality. `slack >= 0` means it holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub inequality: String,
    pub slack: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(id: &str, inequality: &str, slack: f64) -> Self {
        Self {
            id: id.into(),
            inequality: inequality.into(),
            slack,
            pass: slack >= 0.0,
        }
    }

    /// A check whose pass flag is decided by the caller; `slack` is informational.
    pub fn flag(id: &str, inequality: &str, slack: f64, pass: bool) -> Self {
        Self {
            id: id.into(),
            inequality: inequality.into(),
            slack,
            pass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    CheckFailure,
    NonConvergence,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::CheckFailure => 1,
            Outcome::NonConvergence => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

/// Everything one subcommand produced.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub command: String,
    pub files: Vec<OutputFile>,
    pub checks: Vec<Check>,
    /// Evaluation points dropped because quadrature hit its refinement cap.
    pub nonconverged: usize,
}

impl CommandOutput {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            files: Vec::new(),
            checks: Vec::new(),
            nonconverged: 0,
        }
    }

    pub fn outcome(&self) -> Outcome {
        if self.nonconverged > 0 {
            Outcome::NonConvergence
        } else if self.checks.iter().all(|c| c.pass) {
            Outcome::Pass
        } else {
            Outcome::CheckFailure
        }
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn push_file(&mut self, name: &str, contents: String) {
        self.files.push(OutputFile {
            name: name.into(),
            contents,
        });
    }

    /// Adds `<command>.json`: the report body plus the check list.
    pub fn push_report<T: Serialize>(&mut self, body: &T) {
        #[derive(Serialize)]
        struct Envelope<'a, T> {
            schema: &'static str,
            command: &'a str,
            outcome: Outcome,
            nonconverged: usize,
            checks: &'a [Check],
            report: &'a T,
        }
        let env = Envelope {
            schema: SCHEMA,
            command: &self.command,
            outcome: self.outcome(),
            nonconverged: self.nonconverged,
            checks: &self.checks,
            report: body,
        };
        let mut text = serde_json::to_string_pretty(&env).expect("report serializes");
        text.push('\n');
        let name = format!("{}.json", self.command.replace('-', "_"));
        self.push_file(&name, text);
    }

    pub fn merge(&mut self, other: CommandOutput) {
        self.files.extend(other.files);
        self.checks.extend(other.checks);
        self.nonconverged += other.nonconverged;
    }
}

/// CSV with a header row; floats carry 17 significant digits.
#[derive(Debug, Clone, Default)]
pub struct Csv {
    text: String,
}

pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        let parts: Vec<String> = cells
            .into_iter()
            .map(|c| match c {
                Cell::F(v) => format!("{v:.16e}"),
                Cell::I(v) => v.to_string(),
                Cell::S(s) if s.contains(',') || s.contains('"') => format!("\"{}\"", s.replace('"', "\"\"")),
                Cell::S(s) => s,
            })
            .collect();
        self.text.push_str(&parts.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_formats_seventeen_digits() {
        let mut c = Csv::new(&["a", "b", "c"]);
        c.row(vec![0.1.into(), 3usize.into(), "x,y".into()]);
        assert_eq!(c.finish(), "a,b,c\n1.0000000000000001e-1,3,\"x,y\"\n");
    }

    #[test]
    fn outcome_precedence() {
        let mut o = CommandOutput::new("x");
        assert_eq!(o.outcome(), Outcome::Pass);
        o.checks.push(Check::new("a", "a >= 0", -1.0));
        assert_eq!(o.outcome().exit_code(), 1);
        o.nonconverged = 1;
        assert_eq!(o.outcome().exit_code(), 3);
    }
}
