//! Check records and deterministic JSON emission.
//!
//! Floats are written with 17 significant digits in scientific notation so that
//! two runs with the same seed produce byte-identical files.

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use std::io;

/// One named residual-versus-tolerance comparison.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub trials: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, trials: usize, max_residual: f64, tolerance: f64) -> Self {
        let pass = max_residual.is_finite() && max_residual <= tolerance;
        Check {
            name: name.into(),
            trials,
            max_residual,
            tolerance,
            pass,
        }
    }

    /// An exact predicate (ranks, dimensions) recorded as residual 0 or 1.
    pub fn exact(name: impl Into<String>, trials: usize, ok: bool) -> Self {
        Check::new(name, trials, if ok { 0.0 } else { 1.0 }, 0.0)
    }

    pub fn scaled(mut self, tol_scale: f64) -> Self {
        self.tolerance *= tol_scale;
        self.pass = self.max_residual.is_finite() && self.max_residual <= self.tolerance;
        self
    }
}

/// Running maximum of residuals; NaN poisons the maximum.
#[derive(Clone, Copy, Debug, Default)]
pub struct MaxResidual {
    value: f64,
    count: usize,
}

impl MaxResidual {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: f64) {
        self.count += 1;
        if r.is_nan() || self.value.is_nan() {
            self.value = f64::NAN;
        } else if r > self.value {
            self.value = r;
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn check(&self, name: impl Into<String>, tolerance: f64) -> Check {
        Check::new(name, self.count, self.value, tolerance)
    }
}

/// Row of a rank table: named linear map and its numeric rank against the expected one.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RankRow {
    pub map: String,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub expected: usize,
}

/// Result of one verification suite.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub trials: usize,
    pub max_residual: f64,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rank_table: Vec<RankRow>,
    pub pass: bool,
}

impl SuiteReport {
    pub fn new(suite: impl Into<String>, trials: usize, mut checks: Vec<Check>, rank_table: Vec<RankRow>) -> Self {
        checks.sort_by(|a, b| a.name.cmp(&b.name));
        let pass = checks.iter().all(|c| c.pass) && rank_table.iter().all(|r| r.rank == r.expected);
        let max_residual = checks
            .iter()
            .filter(|c| c.tolerance > 0.0)
            .map(|c| c.max_residual)
            .fold(0.0_f64, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) });
        SuiteReport {
            suite: suite.into(),
            trials,
            max_residual,
            checks,
            rank_table,
            pass,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failing(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn scaled(mut self, tol_scale: f64) -> Self {
        let checks = std::mem::take(&mut self.checks)
            .into_iter()
            .map(|c| c.scaled(tol_scale))
            .collect();
        SuiteReport::new(self.suite, self.trials, checks, self.rank_table)
    }
}

/// Pretty JSON formatter that prints every float as `{:.16e}`.
struct FixedDigits<'a> {
    inner: PrettyFormatter<'a>,
}

impl Formatter for FixedDigits<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            write!(w, "\"{value}\"")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Serialize to pretty JSON with fixed 17-significant-digit floats.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let fmt = FixedDigits {
        inner: PrettyFormatter::with_indent(b"  "),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value
        .serialize(&mut ser)
        .expect("report values serialize infallibly");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits utf-8")
}

/// Format one float for CSV output with the same digits as the JSON reports.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_use_seventeen_digits() {
        let s = to_json(&vec![0.1_f64, 1.0, -0.5]);
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("1.0000000000000000e0"));
        assert!(s.contains("-5.0000000000000000e-1"));
    }

    #[test]
    fn nan_residual_fails() {
        let mut m = MaxResidual::new();
        m.push(1e-15);
        m.push(f64::NAN);
        m.push(0.0);
        assert!(!m.check("x", 1.0).pass);
    }

    #[test]
    fn checks_sorted_by_name() {
        let r = SuiteReport::new(
            "s",
            1,
            vec![Check::new("b", 1, 0.0, 1.0), Check::new("a", 1, 2.0, 1.0)],
            vec![],
        );
        assert_eq!(r.checks[0].name, "a");
        assert!(!r.pass);
        assert_eq!(r.max_residual, 2.0);
    }
}
