//! Structured check reports.
//!
//! Validators never fail with an error; they return a [`Report`] listing every
//! violated clause so callers can see all problems at once.

use std::fmt;

/// One violated clause, tagged with a short machine-readable code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub code: String,
    pub message: String,
}

/// Outcome of a structural check: a list of violations, empty iff the check passed.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub violations: Vec<Violation>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn push(&mut self, code: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            code: code.into(),
            message: message.into(),
        });
    }

    pub fn merge(&mut self, other: Report) {
        self.violations.extend(other.violations);
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    /// True if some violation carries the given code.
    pub fn has_code(&self, code: &str) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "[{}] {}", v.code, v.message)?;
        }
        Ok(())
    }
}
