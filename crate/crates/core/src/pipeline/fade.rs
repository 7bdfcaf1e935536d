//! Cross-station discrimination between rain and transponder gain steps.
//!
//! Rain is local; a change of the satellite transponder gain hits every
//! receiver at the same time. A station counts as "dropped" when its
//! tracker difference ε rose through `step_depth` within the last `window`
//! samples. When at least `station_fraction` of the reporting stations
//! dropped together the fade is classified as global.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalFadePolicy {
    pub window: u32,
    pub station_fraction: f64,
    pub step_depth: f64,
}

impl Default for GlobalFadePolicy {
    fn default() -> Self {
        Self {
            window: 3,
            station_fraction: 0.8,
            step_depth: 0.3,
        }
    }
}

impl GlobalFadePolicy {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::invalid("fade_window", "must be >= 1"));
        }
        if !(self.station_fraction > 0.5 && self.station_fraction <= 1.0) {
            return Err(Error::invalid("fade_station_fraction", "must lie in (0.5, 1]"));
        }
        if !(self.step_depth.is_finite() && self.step_depth > 0.0) {
            return Err(Error::invalid("fade_step_db", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FadeClass {
    Local,
    Global,
}

/// True when `recent_eps` (oldest first, current last) crosses upward
/// through the step depth within the last `window` samples.
pub fn dropped_within_window(recent_eps: &[f64], policy: &GlobalFadePolicy) -> bool {
    let n = recent_eps.len();
    let from = n.saturating_sub(policy.window as usize).max(1);
    (from..n).any(|i| recent_eps[i - 1] < policy.step_depth && recent_eps[i] >= policy.step_depth)
}

/// Classification from counts. Fewer than two reporting stations is always
/// local: a lone receiver cannot tell rain from a gain step.
pub fn classify(dropped: usize, reporting: usize, policy: &GlobalFadePolicy) -> FadeClass {
    if reporting < 2 {
        return FadeClass::Local;
    }
    if dropped as f64 >= policy.station_fraction * reporting as f64 - 1e-9 {
        FadeClass::Global
    } else {
        FadeClass::Local
    }
}

/// Classifies a time-aligned snapshot: one recent ε series per reporting
/// station, each oldest first and ending at the current sample.
pub fn global_fade_check(recent: &[Vec<f64>], policy: &GlobalFadePolicy) -> FadeClass {
    let dropped = recent
        .iter()
        .filter(|eps| dropped_within_window(eps, policy))
        .count();
    classify(dropped, recent.len(), policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snapshot(n: usize, dropping: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                if i < dropping {
                    vec![0.0, 0.02, 1.0]
                } else {
                    vec![0.01, -0.02, 0.03]
                }
            })
            .collect()
    }

    #[test]
    fn classification_examples() {
        let p = GlobalFadePolicy::default();
        assert_eq!(global_fade_check(&snapshot(10, 10), &p), FadeClass::Global);
        assert_eq!(global_fade_check(&snapshot(10, 1), &p), FadeClass::Local);
        assert_eq!(global_fade_check(&snapshot(10, 8), &p), FadeClass::Global);
        assert_eq!(global_fade_check(&snapshot(10, 7), &p), FadeClass::Local);
        assert_eq!(global_fade_check(&snapshot(1, 1), &p), FadeClass::Local);
        assert_eq!(global_fade_check(&[], &p), FadeClass::Local);
    }

    #[test]
    fn crossing_must_be_recent() {
        let p = GlobalFadePolicy::default();
        assert!(dropped_within_window(&[0.0, 0.5, 0.6, 0.7], &p));
        assert!(!dropped_within_window(&[0.0, 0.5, 0.6, 0.7, 0.8], &p));
        // already above the depth for the whole window: no fresh drop
        assert!(!dropped_within_window(&[0.9, 0.9, 0.9, 0.9], &p));
        assert!(!dropped_within_window(&[0.5], &p));
    }

    #[test]
    fn policy_validation() {
        assert!(GlobalFadePolicy::default().validate().is_ok());
        for bad in [
            GlobalFadePolicy { window: 0, ..Default::default() },
            GlobalFadePolicy { station_fraction: 0.5, ..Default::default() },
            GlobalFadePolicy { station_fraction: 1.01, ..Default::default() },
            GlobalFadePolicy { step_depth: 0.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
