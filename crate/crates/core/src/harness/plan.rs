use serde::{Deserialize, Serialize};

use super::{invalid, make_target_set, make_tracking_plan, HarnessError, TargetSpec, TargetingOptions, TrackingPlan};
use crate::controller::Condition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Targeting,
    Tracking,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Targeting, Task::Tracking];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Targeting => "targeting",
            Task::Tracking => "tracking",
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TargetingPlanConfig {
    pub training_trials: usize,
    pub test_trials: usize,
    /// px
    pub amplitudes: Vec<f64>,
    /// px
    pub widths: Vec<f64>,
    pub options: TargetingOptions,
}

impl Default for TargetingPlanConfig {
    fn default() -> Self {
        Self {
            training_trials: 30,
            test_trials: 60,
            amplitudes: vec![120.0, 240.0, 480.0],
            widths: vec![20.0, 40.0, 80.0],
            options: TargetingOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackingPlanConfig {
    /// px, low then high
    pub amplitudes: [f64; 2],
    /// Hz
    pub frequencies: [f64; 2],
    /// Run the 16 training segments before the 4 test segments.
    pub include_training: bool,
}

impl Default for TrackingPlanConfig {
    fn default() -> Self {
        Self {
            amplitudes: [150.0, 400.0],
            frequencies: [0.3, 1.0],
            include_training: true,
        }
    }
}

/// Everything one participant does, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub participant_id: u32,
    pub condition_order: Vec<Condition>,
    #[serde(default)]
    pub targeting: TargetingPlanConfig,
    #[serde(default)]
    pub tracking: TrackingPlanConfig,
    /// Pause between targeting trials, ms.
    #[serde(default = "default_gap")]
    pub inter_trial_ms: u64,
    pub seed: u64,
}

fn default_gap() -> u64 {
    500
}

impl SessionPlan {
    /// Even ids start with the handheld device, odd ids with the knob.
    pub fn for_participant(participant_id: u32, seed: u64) -> Self {
        let condition_order = if participant_id % 2 == 0 {
            vec![Condition::Handheld, Condition::Knob]
        } else {
            vec![Condition::Knob, Condition::Handheld]
        };
        Self {
            participant_id,
            condition_order,
            targeting: TargetingPlanConfig::default(),
            tracking: TrackingPlanConfig::default(),
            inter_trial_ms: default_gap(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut sorted = self.condition_order.clone();
        sorted.sort();
        if sorted != Condition::ALL {
            return invalid(format!(
                "condition order must list handheld and knob once each, got {:?}",
                self.condition_order
            ));
        }
        if self.targeting.test_trials == 0 {
            return invalid("targeting needs at least one test trial");
        }
        if self.targeting.options.timeout_ms <= self.targeting.options.dwell_ms {
            return invalid("targeting timeout must exceed the dwell");
        }
        make_tracking_plan(self.tracking.amplitudes, self.tracking.frequencies, 0)?;
        Ok(())
    }

    /// Task blocks in the order they are run: targeting under both
    /// conditions, then tracking under both.
    pub fn stages(&self) -> Vec<(Task, Condition)> {
        Task::ALL
            .iter()
            .flat_map(|&task| self.condition_order.iter().map(move |&c| (task, c)))
            .collect()
    }

    /// Training and test targets for one condition.
    pub fn targets(&self, condition: Condition, screen_width: f64) -> Result<(Vec<TargetSpec>, Vec<TargetSpec>), HarnessError> {
        let t = &self.targeting;
        let training = make_target_set(
            &t.amplitudes,
            &t.widths,
            t.training_trials,
            screen_width,
            derive_seed(self.seed, &["targeting-training", condition.as_str()]),
        )?;
        let test = make_target_set(
            &t.amplitudes,
            &t.widths,
            t.test_trials,
            screen_width,
            derive_seed(self.seed, &["targeting-test", condition.as_str()]),
        )?;
        Ok((training, test))
    }

    pub fn tracking_plan(&self, condition: Condition) -> Result<TrackingPlan, HarnessError> {
        let mut plan = make_tracking_plan(
            self.tracking.amplitudes,
            self.tracking.frequencies,
            derive_seed(self.seed, &["tracking", condition.as_str()]),
        )?;
        if !self.tracking.include_training {
            plan.training.clear();
        }
        Ok(plan)
    }
}

/// Independent stream seed for a labelled purpose.
pub fn derive_seed(seed: u64, labels: &[&str]) -> u64 {
    // FNV-1a over the labels, folded into the seed with a splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for label in labels {
        for b in label.bytes().chain(std::iter::once(0)) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_alternates_with_id() {
        assert_eq!(SessionPlan::for_participant(0, 1).condition_order, vec![Condition::Handheld, Condition::Knob]);
        assert_eq!(SessionPlan::for_participant(1, 1).condition_order, vec![Condition::Knob, Condition::Handheld]);
    }

    #[test]
    fn stage_order() {
        let p = SessionPlan::for_participant(1, 0);
        assert_eq!(
            p.stages(),
            vec![
                (Task::Targeting, Condition::Knob),
                (Task::Targeting, Condition::Handheld),
                (Task::Tracking, Condition::Knob),
                (Task::Tracking, Condition::Handheld),
            ]
        );
    }

    #[test]
    fn trial_counts() {
        let p = SessionPlan::for_participant(0, 9);
        let (train, test) = p.targets(Condition::Handheld, 1920.0).unwrap();
        assert_eq!((train.len(), test.len()), (30, 60));
        let tr = p.tracking_plan(Condition::Knob).unwrap();
        assert_eq!((tr.training.len(), tr.test.len()), (16, 4));
    }

    #[test]
    fn rejects_duplicate_conditions() {
        let mut p = SessionPlan::for_participant(0, 0);
        p.condition_order = vec![Condition::Knob, Condition::Knob];
        assert!(p.validate().is_err());
    }

    #[test]
    fn seeds_differ_by_label() {
        assert_ne!(derive_seed(1, &["a"]), derive_seed(1, &["b"]));
        assert_ne!(derive_seed(1, &["a", "b"]), derive_seed(1, &["ab"]));
        assert_eq!(derive_seed(7, &["x"]), derive_seed(7, &["x"]));
    }
}
