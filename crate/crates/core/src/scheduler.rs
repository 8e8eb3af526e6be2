//! PA/VLA arbitration mathematics.
//!
//! A DSP hands control to its fault-monitoring agent (VLA) once the urgency
//! of monitoring, an adjusted sigmoid of the staleness `F`, reaches the
//! buffer watermark `w`. Otherwise the physics application (PA) keeps
//! draining the buffer.

use log::warn;

/// Which task controls a DSP for the current tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    /// Physics application: drains the crossing buffer.
    Pa,
    /// Very lightweight agent: performs farmlet checks on peers.
    Vla,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Pa => "PA",
            Task::Vla => "VLA",
        }
    }
}

/// Documented regime for the sigmoid steepness.
pub const D_RANGE: (f64, f64) = (1e-4, 3.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerParams {
    /// Sigmoid steepness.
    pub d: f64,
    /// Weight of monitoring in the diagnostic utility value.
    pub c: f64,
    /// Denominator clamp for the utility value.
    pub epsilon: f64,
}

impl Default for SchedulerParams {
    fn default() -> Self {
        Self {
            d: 0.5,
            c: 1.0,
            epsilon: 1e-9,
        }
    }
}

impl SchedulerParams {
    /// Returns a description of the first violated constraint, keyed by field.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.d.is_finite() && self.d > 0.0) {
            return Err(("d", format!("must be a finite real > 0, got {}", self.d)));
        }
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(("c", format!("must be a finite real >= 0, got {}", self.c)));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err((
                "epsilon",
                format!("must be a finite real > 0, got {}", self.epsilon),
            ));
        }
        if self.d < D_RANGE.0 || self.d > D_RANGE.1 {
            warn!(
                "d = {} lies outside the documented range [{}, {}]",
                self.d, D_RANGE.0, D_RANGE.1
            );
        }
        Ok(())
    }
}

/// Worst-case interval accounting: in every interval of `interval` ticks the
/// application and the kernel use `pa` and `os` ticks respectively.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetParams {
    pub interval: u64,
    pub pa: u64,
    pub os: u64,
}

impl Default for BudgetParams {
    fn default() -> Self {
        Self {
            interval: 100,
            pa: 80,
            os: 10,
        }
    }
}

/// `2 * (logistic(d*F) - 0.5)`, equal to `tanh(d*F/2)`.
///
/// Zero at `F = 0`, increasing in both arguments, and saturating at 1.0 once
/// `exp(-d*F)` vanishes against 1 in double precision.
#[inline]
pub fn adjusted_sigmoid(staleness: f64, d: f64) -> f64 {
    2.0 * (1.0 / (1.0 + (-d * staleness).exp()) - 0.5)
}

/// `D / w + c / F` with both denominators clamped at `epsilon`.
pub fn utility_value(
    expected_data: f64,
    watermark: f64,
    staleness: f64,
    c: f64,
    epsilon: f64,
) -> f64 {
    expected_data / watermark.max(epsilon) + c / staleness.max(epsilon)
}

/// PA keeps control only while the watermark strictly exceeds the adjusted
/// sigmoid of the staleness; ties go to the VLA.
#[inline]
pub fn choose_task(watermark: f64, staleness: f64, params: &SchedulerParams) -> Task {
    if watermark > adjusted_sigmoid(staleness, params.d) {
        Task::Pa
    } else {
        Task::Vla
    }
}

/// Ticks per interval left over for the VLA: `max(0, T - T_pa - T_os)`.
pub fn vla_time_budget(b: &BudgetParams) -> u64 {
    let used = b.pa.saturating_add(b.os);
    if used > b.interval {
        warn!(
            "infeasible budget: pa {} + os {} exceeds interval {}",
            b.pa, b.os, b.interval
        );
    }
    b.interval.saturating_sub(used)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // tanh(1) and tanh(0.5) to 16 significant digits.
    const TANH_1: f64 = 0.761_594_155_955_764_9;
    const TANH_HALF: f64 = 0.462_117_157_260_009_8;

    #[test]
    fn sigmoid_is_zero_at_origin() {
        for d in [1e-4, 0.5, 3.0, 17.0] {
            assert_eq!(adjusted_sigmoid(0.0, d), 0.0);
        }
    }

    #[test]
    fn sigmoid_reference_values() {
        assert!((adjusted_sigmoid(1.0, 2.0) - TANH_1).abs() < 1e-12);
        assert!((adjusted_sigmoid(100.0, 0.01) - TANH_HALF).abs() < 1e-12);
        assert!((adjusted_sigmoid(10_000.0, 0.0001) - TANH_HALF).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_saturates_without_overflow() {
        let s = adjusted_sigmoid(1e6, 3.0);
        assert!(s <= 1.0 && s > 0.999_999);
    }

    #[test]
    fn utility_examples() {
        assert!((utility_value(10.0, 0.5, 100.0, 5.0, 1e-9) - 20.05).abs() < 1e-12);
        assert_eq!(utility_value(1.0, 1.0, 42.0, 0.0, 1e-9), 1.0);
        let u = utility_value(10.0, 0.0, 10.0, 1.0, 1e-9);
        assert_eq!(u, 1e10 + 0.1);
    }

    #[test]
    fn choose_task_examples() {
        let p = SchedulerParams {
            d: 2.0,
            ..Default::default()
        };
        // F chosen so that the sigmoid is 0.15
        let f = 2.0 * 0.15f64.atanh() / p.d;
        assert!((adjusted_sigmoid(f, p.d) - 0.15).abs() < 1e-12);
        assert_eq!(choose_task(0.5, f, &p), Task::Pa);
        assert_eq!(choose_task(0.0, 0.0, &p), Task::Vla);
        assert_eq!(choose_task(1.0, 1.0, &p), Task::Pa);
        assert_eq!(choose_task(0.3, 1.0, &p), Task::Vla);
    }

    #[test]
    fn exact_tie_goes_to_vla() {
        let p = SchedulerParams::default();
        let s = adjusted_sigmoid(7.0, p.d);
        assert_eq!(choose_task(s, 7.0, &p), Task::Vla);
        assert_eq!(choose_task(f64::from_bits(s.to_bits() + 1), 7.0, &p), Task::Pa);
    }

    #[test]
    fn budget_examples() {
        let b = |pa, os| BudgetParams {
            interval: 100,
            pa,
            os,
        };
        assert_eq!(vla_time_budget(&b(70, 10)), 20);
        assert_eq!(vla_time_budget(&b(100, 0)), 0);
        assert_eq!(vla_time_budget(&b(90, 20)), 0);
    }

    #[test]
    fn params_validation() {
        assert!(SchedulerParams::default().validate().is_ok());
        let bad = SchedulerParams {
            d: 0.0,
            ..Default::default()
        };
        assert_eq!(bad.validate().unwrap_err().0, "d");
        let bad = SchedulerParams {
            epsilon: -1.0,
            ..Default::default()
        };
        assert_eq!(bad.validate().unwrap_err().0, "epsilon");
    }

    proptest! {
        #[test]
        fn sigmoid_in_unit_interval(f in 0.0f64..1e6, d in 1e-6f64..10.0) {
            let s = adjusted_sigmoid(f, d);
            prop_assert!((0.0..=1.0).contains(&s));
            if d * f < 30.0 {
                prop_assert!(s < 1.0);
            }
        }

        #[test]
        fn sigmoid_monotone_in_staleness(f in 0.0f64..1e4, df in 1e-3f64..10.0, d in 1e-4f64..3.0) {
            let a = adjusted_sigmoid(f, d);
            let b = adjusted_sigmoid(f + df, d);
            prop_assert!(a <= b);
            if d * (f + df) < 30.0 && d * df > 1e-9 {
                prop_assert!(a < b);
            }
        }

        #[test]
        fn pa_iff_watermark_is_unique_max(w in 0.0f64..=1.0, f in 0.0f64..1e4, d in 1e-4f64..3.0) {
            let p = SchedulerParams { d, ..Default::default() };
            let s = adjusted_sigmoid(f, d);
            let unique_max_is_w = w.max(s) == w && w != s;
            prop_assert_eq!(choose_task(w, f, &p) == Task::Pa, unique_max_is_w);
        }

        #[test]
        fn utility_decreasing(w in 0.01f64..0.99, f in 1.0f64..1e4, dw in 1e-3f64..0.01, dfs in 0.5f64..10.0) {
            let u = utility_value(10.0, w, f, 2.0, 1e-9);
            prop_assert!(utility_value(10.0, w + dw, f, 2.0, 1e-9) < u);
            prop_assert!(utility_value(10.0, w, f + dfs, 2.0, 1e-9) < u);
        }
    }
}
