//! Triangular cyclic learning-rate schedule with an optional linear decay
//! envelope, plus the per-epoch weight-decay interpolation.

use crate::error::{Error, Result};

/// Triangular wave between `lr_min` and `lr_max`: ascends for `step_size`
/// iterations, descends for `step_size`, repeats. With decay enabled, a
/// linear envelope scales the whole waveform so the peak shrinks from
/// `lr_max` at iteration 0 to `final_lr` at the last iteration.
///
/// The cycle fraction is computed from the integer position inside the
/// cycle with a single division, so a trace produced here is bit-identical
/// to a directly tabulated triangle wave over the same grid.
#[derive(Clone, Debug)]
pub struct ClrSchedule {
    lr_min: f64,
    lr_max: f64,
    step_size: usize,
    /// (final peak value, total iterations in the run)
    decay: Option<(f64, usize)>,
}

impl ClrSchedule {
    pub fn new(lr_min: f64, lr_max: f64, step_size: usize) -> Result<Self> {
        if !(lr_min > 0.0 && lr_max > 0.0 && lr_min.is_finite() && lr_max.is_finite()) {
            return Err(Error::Config(format!(
                "learning rates must be positive and finite (got min {lr_min}, max {lr_max})"
            )));
        }
        if lr_min >= lr_max {
            return Err(Error::Config(format!(
                "cyclic schedule needs lr_min < lr_max (got min {lr_min}, max {lr_max})"
            )));
        }
        if step_size == 0 {
            return Err(Error::Config("cyclic step size must be at least 1".into()));
        }
        Ok(ClrSchedule { lr_min, lr_max, step_size, decay: None })
    }

    /// Enable the linear envelope: by the last of `total_iterations` the
    /// waveform is scaled by `final_lr / lr_max`.
    pub fn with_decay(mut self, final_lr: f64, total_iterations: usize) -> Result<Self> {
        if !(final_lr > 0.0 && final_lr.is_finite()) || final_lr > self.lr_max {
            return Err(Error::Config(format!(
                "decay target must lie in (0, lr_max] (got {final_lr}, lr_max {})",
                self.lr_max
            )));
        }
        self.decay = Some((final_lr, total_iterations));
        Ok(self)
    }

    /// Position inside the current cycle mapped to [0, 1]: 0 at the floor,
    /// 1 at the peak.
    fn cycle_fraction(&self, iteration: usize) -> f64 {
        let pos = iteration % (2 * self.step_size);
        let rising = pos.min(2 * self.step_size - pos);
        rising as f64 / self.step_size as f64
    }

    fn envelope(&self, iteration: usize) -> f64 {
        match self.decay {
            None => 1.0,
            Some((final_lr, total)) => {
                let last = total.saturating_sub(1).max(1) as f64;
                let t = (iteration as f64 / last).min(1.0);
                let end = final_lr / self.lr_max;
                1.0 + (end - 1.0) * t
            }
        }
    }

    pub fn lr(&self, iteration: usize) -> f64 {
        self.envelope(iteration) * (self.lr_min + (self.lr_max - self.lr_min) * self.cycle_fraction(iteration))
    }

    /// The first `n` learning rates.
    pub fn trace(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.lr(i)).collect()
    }
}

/// Weight decay interpolated linearly per epoch from `start` (epoch 0) to
/// `end` (last epoch). A single-epoch run uses `start`.
pub fn weight_decay_for_epoch(start: f64, end: f64, epoch: usize, total_epochs: usize) -> f64 {
    if total_epochs <= 1 {
        return start;
    }
    if epoch >= total_epochs - 1 {
        // Exact at the endpoint: start + (end - start) rounds off by an ulp.
        return end;
    }
    let t = epoch as f64 / (total_epochs - 1) as f64;
    start + (end - start) * t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_schedule() -> ClrSchedule {
        ClrSchedule::new(6e-5, 1e-3, 100).unwrap()
    }

    #[test]
    fn floor_peak_floor() {
        let s = paper_schedule();
        assert_eq!(s.lr(0), 6e-5);
        assert_eq!(s.lr(100), 1e-3);
        assert_eq!(s.lr(200), 6e-5);
    }

    #[test]
    fn periodic_without_decay() {
        let s = paper_schedule();
        for i in 0..400 {
            assert_eq!(s.lr(i), s.lr(i + 200));
        }
    }

    #[test]
    fn matches_absolute_value_formulation_closely() {
        // The schedule is computed from the integer cycle position; the
        // classic |x mod 2 - 1| float formulation must agree to rounding.
        let s = paper_schedule();
        for i in 0..1000 {
            let x: f64 = i as f64 / 100.0;
            let tri = 1.0 - (x.rem_euclid(2.0) - 1.0).abs();
            let reference = 6e-5 + (1e-3 - 6e-5) * tri;
            assert!((s.lr(i) - reference).abs() <= 1e-15, "iter {i}");
        }
    }

    #[test]
    fn decay_scales_the_whole_waveform() {
        let total = 801;
        let s = paper_schedule().with_decay(6e-6, total).unwrap();
        // Envelope bounds hold everywhere.
        let plain = paper_schedule();
        for i in 0..total {
            let e = s.lr(i) / plain.lr(i);
            assert!(e <= 1.0 + 1e-12 && e >= 6e-6 / 1e-3 - 1e-12, "iter {i}: envelope {e}");
        }
        // Last iteration is fully decayed: scaled by final_lr / lr_max.
        let want = (6e-6 / 1e-3) * plain.lr(total - 1);
        assert!((s.lr(total - 1) - want).abs() < 1e-18);
        assert_eq!(s.lr(0), 6e-5);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(ClrSchedule::new(1e-3, 6e-5, 100).is_err());
        assert!(ClrSchedule::new(1e-3, 1e-3, 100).is_err());
        assert!(ClrSchedule::new(6e-5, 1e-3, 0).is_err());
        assert!(ClrSchedule::new(-1.0, 1e-3, 10).is_err());
        assert!(paper_schedule().with_decay(2e-3, 100).is_err());
    }

    #[test]
    fn weight_decay_interpolates_per_epoch() {
        assert_eq!(weight_decay_for_epoch(1e-5, 1e-6, 0, 10), 1e-5);
        let last = weight_decay_for_epoch(1e-5, 1e-6, 9, 10);
        assert!((last - 1e-6).abs() < 1e-20, "{last}");
        let mid = weight_decay_for_epoch(1e-5, 1e-6, 5, 11);
        assert!((mid - 5.5e-6).abs() < 1e-18);
        assert_eq!(weight_decay_for_epoch(1e-5, 1e-6, 0, 1), 1e-5);
    }
}
