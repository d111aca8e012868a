use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr_max: f64,
    pub lr_min: f64,
    pub period_iters: u64,
    /// Jump back to `lr_max` at the start of every period instead of
    /// holding `lr_min` after the first one.
    pub restart: bool,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            lr_max: 5e-5,
            lr_min: 1e-11,
            period_iters: 1,
            restart: true,
        }
    }
}

/// `lr_min + ½(lr_max − lr_min)(1 + cos πu)` with `u` the position in the
/// current period.
pub fn cosine_lr(iter: u64, sched: &LrSchedule) -> f64 {
    let period = sched.period_iters.max(1);
    let u = if sched.restart {
        (iter % period) as f64 / period as f64
    } else {
        (iter as f64 / period as f64).min(1.0)
    };
    let lr = sched.lr_min + 0.5 * (sched.lr_max - sched.lr_min) * (1.0 + (PI * u).cos());
    lr.clamp(sched.lr_min, sched.lr_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sched(period: u64, restart: bool) -> LrSchedule {
        LrSchedule {
            period_iters: period,
            restart,
            ..LrSchedule::default()
        }
    }

    #[test]
    fn key_points() {
        let s = sched(1000, true);
        assert_eq!(cosine_lr(0, &s), 5e-5);
        assert_eq!(cosine_lr(1000, &s), 5e-5);
        assert!((cosine_lr(500, &s) - (1e-11 + 0.5 * (5e-5 - 1e-11))).abs() < 1e-18);
        assert!(cosine_lr(999, &s) - 1e-11 < 2e-10);
        let once = sched(1000, false);
        assert_eq!(cosine_lr(1000, &once), 1e-11);
        assert_eq!(cosine_lr(5000, &once), 1e-11);
    }

    proptest! {
        #[test]
        fn bounded_and_monotone(period in 1u64..5000, iter in 0u64..100_000, restart: bool) {
            let s = sched(period, restart);
            let lr = cosine_lr(iter, &s);
            prop_assert!((s.lr_min..=s.lr_max).contains(&lr));
            if restart {
                prop_assert_eq!(cosine_lr(iter - iter % period, &s), s.lr_max);
            }
            let next = iter + 1;
            if !restart || next % period != 0 {
                prop_assert!(cosine_lr(next, &s) <= lr);
            }
        }
    }
}
