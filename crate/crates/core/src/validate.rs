//! Configuration validation with aggregated errors.
//!
//! Validators collect every violated constraint instead of stopping at
//! the first, so a caller fixing a config file sees the whole list at
//! once.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// One violated constraint: which field, and what was wrong with it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// The full list of constraint violations found in one validation pass.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationErrors(pub Vec<ValidationError>);

impl ValidationErrors {
    pub fn new() -> Self {
        ValidationErrors(Vec::new())
    }

    pub fn push(&mut self, field: &'static str, message: String) {
        self.0.push(ValidationError { field, message });
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Ok when no constraint was violated, otherwise self as the error.
    pub fn into_result(self) -> Result<(), ValidationErrors> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(self)
        }
    }
}

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: ")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl core::error::Error for ValidationErrors {}

/// Checks that `v` is a probability, finite and inside [0, 1].
pub fn check_probability(errs: &mut ValidationErrors, field: &'static str, v: f64) {
    if !v.is_finite() || !(0.0..=1.0).contains(&v) {
        errs.push(field, alloc::format!("must be a probability in [0, 1], got {v}"));
    }
}

/// Checks that `v` is finite and strictly positive.
pub fn check_positive(errs: &mut ValidationErrors, field: &'static str, v: f64) {
    if !v.is_finite() || v <= 0.0 {
        errs.push(field, alloc::format!("must be finite and > 0, got {v}"));
    }
}

/// Checks that `v` is finite and not negative.
pub fn check_non_negative(errs: &mut ValidationErrors, field: &'static str, v: f64) {
    if !v.is_finite() || v < 0.0 {
        errs.push(field, alloc::format!("must be finite and >= 0, got {v}"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregates_all_violations() {
        let mut errs = ValidationErrors::new();
        check_probability(&mut errs, "a", 1.5);
        check_positive(&mut errs, "b", 0.0);
        check_non_negative(&mut errs, "c", -1.0);
        check_probability(&mut errs, "d", 0.5);
        let err = errs.into_result().unwrap_err();
        assert_eq!(err.0.len(), 3, "expected 3 violations, got {}", err.0.len());
        assert_eq!(err.0[0].field, "a");
        assert_eq!(err.0[2].field, "c");
    }

    #[test]
    fn nan_is_rejected_everywhere() {
        let mut errs = ValidationErrors::new();
        check_probability(&mut errs, "p", f64::NAN);
        check_positive(&mut errs, "q", f64::NAN);
        check_non_negative(&mut errs, "r", f64::NAN);
        assert_eq!(errs.0.len(), 3);
    }
}
