//! Warmup-constant-cosine learning rate schedule.

/// Linear 0 -> peak over `warmup` iters, constant until `total - decay`,
/// cosine peak -> 0 over the final `decay` iters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub peak: f64,
    pub warmup: u64,
    pub total: u64,
    pub decay: u64,
}

impl LrSchedule {
    /// Arithmetic-task preset: batch 1024, 1e-3, 20000 iters, 2000 warmup,
    /// 5000 decay.
    pub fn arithmetic() -> Self {
        LrSchedule {
            peak: 1e-3,
            warmup: 2000,
            total: 20000,
            decay: 5000,
        }
    }

    /// String-task preset: 5000 iters, 500 warmup, 1000 decay.
    pub fn strings() -> Self {
        LrSchedule {
            peak: 1e-3,
            warmup: 500,
            total: 5000,
            decay: 1000,
        }
    }

    /// Maze-task preset: 20000 iters, 2000 warmup, 5000 decay.
    pub fn mazes() -> Self {
        LrSchedule {
            peak: 1e-3,
            warmup: 2000,
            total: 20000,
            decay: 5000,
        }
    }

    pub fn validate(&self) -> bool {
        self.total > 0 && self.warmup + self.decay <= self.total && self.peak > 0.0
    }
}

pub fn lr_at(iter: u64, s: &LrSchedule) -> f64 {
    debug_assert!(iter < s.total);
    if iter < s.warmup {
        return s.peak * iter as f64 / s.warmup as f64;
    }
    let decay_start = s.total - s.decay;
    if iter < decay_start {
        return s.peak;
    }
    let frac = (iter - decay_start) as f64 / s.decay as f64;
    s.peak * 0.5 * (1.0 + crate::numeric::f64x::cos(core::f64::consts::PI * frac))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_preset_hits_published_values() {
        let s = LrSchedule::arithmetic();
        assert_eq!(lr_at(0, &s), 0.0);
        assert_eq!(lr_at(2000, &s), 1e-3);
        assert_eq!(lr_at(10000, &s), 1e-3);
        assert!(lr_at(19999, &s) < 1e-9);
    }

    #[test]
    fn cosine_midpoint_is_half_peak() {
        let s = LrSchedule::arithmetic();
        // total - decay/2 = 17500
        let lr = lr_at(17500, &s);
        assert!((lr - 5e-4).abs() < 1e-15);
    }

    #[test]
    fn warmup_is_linear() {
        let s = LrSchedule::arithmetic();
        assert!((lr_at(1000, &s) - 5e-4).abs() < 1e-15);
        assert!((lr_at(500, &s) - 2.5e-4).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(LrSchedule::strings().validate());
        let bad = LrSchedule {
            peak: 1e-3,
            warmup: 600,
            total: 1000,
            decay: 500,
        };
        assert!(!bad.validate());
    }
}
