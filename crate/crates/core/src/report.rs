use serde::Serialize;

/// Outcome of a single numerical check: the measured value, the bound it was
/// held against, and whether it passed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    /// Passes iff `value <= threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value <= threshold, value, threshold)
    }

    /// Passes iff `value >= threshold`.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value >= threshold, value, threshold)
    }

    /// Passes iff `value < threshold` (equality fails).
    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value < threshold, value, threshold)
    }

    pub fn flag(name: impl Into<String>, passed: bool) -> Self {
        Self::new(name, passed, if passed { 1.0 } else { 0.0 }, 1.0)
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    fn new(name: impl Into<String>, passed: bool, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            // NaN never passes.
            passed: passed && !value.is_nan(),
            value,
            threshold,
            detail: String::new(),
        }
    }
}

/// Named collection of checks.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}
