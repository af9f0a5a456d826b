use serde::{Deserialize, Serialize};

/// A nonnegative quantity carried by its natural logarithm.
///
/// Runtime bounds grow like `R^(n/2)`, which leaves the `f64` range long
/// before `n = 500`; every n-scaled quantity is kept in log space and only
/// materialized on demand.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogValue(f64);

impl LogValue {
    pub const ZERO: LogValue = LogValue(f64::NEG_INFINITY);
    pub const ONE: LogValue = LogValue(0.0);

    pub fn from_ln(ln: f64) -> Self {
        LogValue(ln)
    }

    /// Panics in debug builds when `value` is negative.
    pub fn from_value(value: f64) -> Self {
        debug_assert!(value >= 0.0, "LogValue of negative number {value}");
        LogValue(value.ln())
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn log10(self) -> f64 {
        self.0 / std::f64::consts::LN_10
    }

    /// Linear value, saturating at `f64::MAX` instead of overflowing to infinity.
    pub fn value(self) -> f64 {
        let v = self.0.exp();
        if v.is_infinite() {
            f64::MAX
        } else {
            v
        }
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

impl std::ops::Mul for LogValue {
    type Output = LogValue;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: LogValue) -> LogValue {
        LogValue(self.0 + rhs.0)
    }
}

impl std::ops::Div for LogValue {
    type Output = LogValue;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: LogValue) -> LogValue {
        LogValue(self.0 - rhs.0)
    }
}
