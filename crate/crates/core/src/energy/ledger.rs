use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseEnergy {
    pub rotor_wh: f64,
    pub compute_wh: f64,
    pub airborne_s: f64,
    pub powered_s: f64,
}

impl PhaseEnergy {
    pub fn total_wh(&self) -> f64 {
        self.rotor_wh + self.compute_wh
    }
}

/// Energy drawn by one drone, keyed by the phase it was drawn in.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EnergyLedger {
    pub entries: BTreeMap<String, PhaseEnergy>,
}

impl EnergyLedger {
    pub fn add(&mut self, phase: &str, delta: PhaseEnergy) {
        let e = self.entries.entry(phase.to_string()).or_default();
        e.rotor_wh += delta.rotor_wh;
        e.compute_wh += delta.compute_wh;
        e.airborne_s += delta.airborne_s;
        e.powered_s += delta.powered_s;
    }

    pub fn rotor_wh(&self) -> f64 {
        self.entries.values().map(|e| e.rotor_wh).sum()
    }

    pub fn compute_wh(&self) -> f64 {
        self.entries.values().map(|e| e.compute_wh).sum()
    }

    pub fn total_wh(&self) -> f64 {
        self.entries.values().map(PhaseEnergy::total_wh).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ledger_is_additive() {
        let mut l = EnergyLedger::default();
        let d = PhaseEnergy {
            rotor_wh: 1.0,
            compute_wh: 0.25,
            airborne_s: 60.0,
            powered_s: 60.0,
        };
        l.add("Transit", d);
        l.add("Transit", d);
        l.add("Collecting", PhaseEnergy { compute_wh: 0.5, powered_s: 10.0, ..Default::default() });
        assert_eq!(l.entries.len(), 2);
        assert_eq!(l.rotor_wh(), 2.0);
        assert_eq!(l.total_wh(), 3.0);
    }
}
