use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSchedule {
    pub initial_lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub eta_min: f64,
}

impl Default for TrainingSchedule {
    fn default() -> Self {
        Self {
            initial_lr: 6e-5,
            weight_decay: 1e-5,
            epochs: 40,
            batch_size: 4,
            eta_min: 0.0,
        }
    }
}

impl TrainingSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_min >= 0.0 && self.initial_lr > self.eta_min && self.initial_lr.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "learning rates need initial_lr > eta_min >= 0, got {} and {}",
                self.initial_lr, self.eta_min
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::OutOfRange("epochs and batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Cosine annealing: `eta_min + ½(lr0 - eta_min)(1 + cos(π t / T))`.
/// Returns the endpoints exactly.
pub fn cosine_lr(step: usize, total_steps: usize, schedule: &TrainingSchedule) -> Result<f64> {
    schedule.validate()?;
    if total_steps == 0 || step > total_steps {
        return Err(Error::OutOfRange(format!("step {step} of {total_steps}")));
    }
    if step == 0 {
        return Ok(schedule.initial_lr);
    }
    if step == total_steps {
        return Ok(schedule.eta_min);
    }
    let phase = std::f64::consts::PI * step as f64 / total_steps as f64;
    let lr = schedule.eta_min + 0.5 * (schedule.initial_lr - schedule.eta_min) * (1.0 + phase.cos());
    Ok(lr.clamp(schedule.eta_min, schedule.initial_lr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_and_midpoint() {
        let s = TrainingSchedule::default();
        assert_eq!(cosine_lr(0, 40, &s).unwrap(), 6e-5);
        assert_eq!(cosine_lr(40, 40, &s).unwrap(), 0.0);
        assert!((cosine_lr(20, 40, &s).unwrap() - 3e-5).abs() < 1e-18);
        assert!(cosine_lr(41, 40, &s).is_err());
        assert!(cosine_lr(0, 0, &s).is_err());
    }

    #[test]
    fn validation() {
        let bad = TrainingSchedule {
            eta_min: 1e-4,
            ..TrainingSchedule::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainingSchedule {
            epochs: 0,
            ..TrainingSchedule::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn bounded_and_non_increasing(total in 1usize..500, eta in 0.0f64..5e-5) {
            let s = TrainingSchedule { eta_min: eta, ..TrainingSchedule::default() };
            let mut prev = f64::INFINITY;
            for t in 0..=total {
                let lr = cosine_lr(t, total, &s).unwrap();
                prop_assert!(lr >= eta && lr <= s.initial_lr);
                prop_assert!(lr <= prev);
                prev = lr;
            }
        }
    }
}
