use super::{SwarmError, SwarmState};
use crate::NodeId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub type TargetId = u32;
pub type Assignment = BTreeMap<NodeId, TargetId>;

/// Gives each target to one available slave drone, lowest id to lowest target.
pub fn assign_targets(state: &SwarmState, targets: &[TargetId]) -> Result<Assignment, SwarmError> {
    let sds: Vec<NodeId> = state.available_sds().map(|d| d.id).collect();
    if sds.is_empty() {
        return Err(SwarmError::EmptySwarm);
    }
    if targets.len() > sds.len() {
        return Err(SwarmError::TooManyTargets {
            targets: targets.len(),
            sds: sds.len(),
        });
    }
    let mut sorted = targets.to_vec();
    sorted.sort_unstable();
    Ok(sds.into_iter().zip(sorted).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseClass {
    Healthy,
    Suspicious,
    Infected,
    Emergency,
}

impl CaseClass {
    pub fn escalates(self) -> bool {
        matches!(self, CaseClass::Infected | CaseClass::Emergency)
    }
}

/// Maps a uniform draw in `[0, 1)` to a case class. Escalating classes take
/// `infection_rate` of the mass, split evenly; the rest is 90% healthy.
pub fn classify_case(draw: f64, infection_rate: f64) -> Result<CaseClass, SwarmError> {
    if !(0.0..=1.0).contains(&infection_rate) {
        return Err(SwarmError::InfectionRate(infection_rate));
    }
    let u = draw.clamp(0.0, 1.0 - f64::EPSILON);
    if u < infection_rate {
        return Ok(if u < infection_rate / 2.0 {
            CaseClass::Infected
        } else {
            CaseClass::Emergency
        });
    }
    let v = (u - infection_rate) / (1.0 - infection_rate);
    Ok(if v < 0.9 { CaseClass::Healthy } else { CaseClass::Suspicious })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::swarm::{init_swarm, MissionPlan};

    #[test]
    fn assignment_examples() {
        let s = init_swarm(MissionPlan::default(), 10, NodeId(1)).unwrap();
        let all: Vec<TargetId> = (0..10).collect();
        let a = assign_targets(&s, &all).unwrap();
        assert_eq!(a.len(), 10);
        let a = assign_targets(&s, &[7, 2, 5]).unwrap();
        assert_eq!(a.keys().copied().collect::<Vec<_>>(), vec![NodeId(1), NodeId(2), NodeId(3)]);
        assert_eq!(a[&NodeId(1)], 2);
        let small = init_swarm(MissionPlan::default(), 2, NodeId(1)).unwrap();
        assert!(matches!(
            assign_targets(&small, &[0, 1, 2]),
            Err(SwarmError::TooManyTargets { targets: 3, sds: 2 })
        ));
    }

    #[test]
    fn classification_extremes() {
        for i in 0..100 {
            let u = i as f64 / 100.0;
            assert!(!classify_case(u, 0.0).unwrap().escalates());
            assert!(classify_case(u, 1.0).unwrap().escalates());
        }
        assert!(classify_case(0.5, 1.5).is_err());
        assert_eq!(classify_case(0.0, 0.025).unwrap(), CaseClass::Infected);
        assert_eq!(classify_case(0.02, 0.025).unwrap(), CaseClass::Emergency);
        assert_eq!(classify_case(0.999, 0.025).unwrap(), CaseClass::Suspicious);
    }
}
