use super::SwarmError;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhaseState {
    PoweredUp,
    Connected,
    Configured,
    Launching,
    InFormation,
    Transit,
    Deploying,
    Collecting,
    Reporting,
    Returning,
    Landed,
    Failed,
    Isolated,
}

impl PhaseState {
    pub fn is_airborne(self) -> bool {
        matches!(
            self,
            PhaseState::Launching
                | PhaseState::InFormation
                | PhaseState::Transit
                | PhaseState::Deploying
                | PhaseState::Returning
        )
    }

    /// Powered and able to take part in the mission.
    pub fn is_active(self) -> bool {
        !matches!(self, PhaseState::Landed | PhaseState::Failed | PhaseState::Isolated)
    }

    pub fn name(self) -> &'static str {
        match self {
            PhaseState::PoweredUp => "PoweredUp",
            PhaseState::Connected => "Connected",
            PhaseState::Configured => "Configured",
            PhaseState::Launching => "Launching",
            PhaseState::InFormation => "InFormation",
            PhaseState::Transit => "Transit",
            PhaseState::Deploying => "Deploying",
            PhaseState::Collecting => "Collecting",
            PhaseState::Reporting => "Reporting",
            PhaseState::Returning => "Returning",
            PhaseState::Landed => "Landed",
            PhaseState::Failed => "Failed",
            PhaseState::Isolated => "Isolated",
        }
    }
}

impl fmt::Display for PhaseState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseEvent {
    ConnectionEstablished,
    MissionUploaded,
    LaunchCommand,
    AltitudeReached,
    FormationAchieved,
    TargetAreaReached,
    /// Touched down at the assigned target or standby spot.
    TargetReached,
    /// A new target was handed over during a session.
    Reassigned,
    SessionComplete,
    RepositionCommand,
    DataSufficientConfirmation,
    ReturnToBase,
    Touchdown,
    Failure,
    Isolate,
}

/// Applies one edge of the phase machine.
pub fn transition_phase(phase: PhaseState, event: PhaseEvent) -> Result<PhaseState, SwarmError> {
    use PhaseEvent as E;
    use PhaseState as S;
    let next = match (phase, event) {
        (S::PoweredUp, E::ConnectionEstablished) => S::Connected,
        (S::Connected, E::MissionUploaded) => S::Configured,
        (S::Configured, E::LaunchCommand) => S::Launching,
        (S::Launching, E::AltitudeReached) => S::InFormation,
        (S::InFormation, E::FormationAchieved) => S::Transit,
        (S::Transit, E::TargetAreaReached) => S::Deploying,
        (S::Deploying, E::TargetReached) => S::Collecting,
        (S::Collecting, E::Reassigned) => S::Deploying,
        (S::Collecting, E::SessionComplete) => S::Reporting,
        (S::Reporting, E::RepositionCommand) => S::Deploying,
        (S::Collecting | S::Reporting, E::DataSufficientConfirmation) => S::Returning,
        (
            S::Launching | S::InFormation | S::Transit | S::Deploying | S::Collecting | S::Reporting,
            E::ReturnToBase,
        ) => S::Returning,
        (S::Returning, E::Touchdown) => S::Landed,
        (s, E::Failure) if s.is_active() || s == S::Landed => S::Failed,
        (S::Failed, E::Isolate) => S::Isolated,
        (phase, event) => return Err(SwarmError::IllegalTransition { phase, event }),
    };
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(
            transition_phase(PhaseState::Configured, PhaseEvent::LaunchCommand),
            Ok(PhaseState::Launching)
        );
        assert_eq!(
            transition_phase(PhaseState::Collecting, PhaseEvent::DataSufficientConfirmation),
            Ok(PhaseState::Returning)
        );
        assert_eq!(
            transition_phase(PhaseState::Landed, PhaseEvent::DataSufficientConfirmation),
            Err(SwarmError::IllegalTransition {
                phase: PhaseState::Landed,
                event: PhaseEvent::DataSufficientConfirmation
            })
        );
    }

    #[test]
    fn isolated_is_terminal() {
        assert!(transition_phase(PhaseState::Isolated, PhaseEvent::Failure).is_err());
        assert!(transition_phase(PhaseState::Isolated, PhaseEvent::Isolate).is_err());
    }
}
