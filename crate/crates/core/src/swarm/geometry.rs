use super::{SwarmError, SwarmState};
use crate::Micros;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// Point on the operating plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pos {
    pub x: f64,
    pub y: f64,
}

impl Pos {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, o: Pos) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    pub fn add(self, dx: f64, dy: f64) -> Pos {
        Pos::new(self.x + dx, self.y + dy)
    }

    pub fn clamp_to(self, area: Pos) -> Pos {
        Pos::new(self.x.clamp(0.0, area.x), self.y.clamp(0.0, area.y))
    }

    /// Moves at most `max_step` meters toward `target`.
    pub fn step_toward(self, target: Pos, max_step: f64) -> Pos {
        let d = self.dist(target);
        if d <= max_step || d == 0.0 {
            return target;
        }
        let k = max_step / d;
        Pos::new(self.x + (target.x - self.x) * k, self.y + (target.y - self.y) * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formation {
    #[default]
    Linear,
    Grid,
}

impl FromStr for Formation {
    type Err = SwarmError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Formation::Linear),
            "grid" | "matrix" => Ok(Formation::Grid),
            other => Err(SwarmError::UnknownFormation(other.to_string())),
        }
    }
}

/// Formation slots of `n` slave drones around a leader at `leader` flying
/// along `heading` (radians).
///
/// Linear puts the SDs abreast of the leader at ±spacing, ±2·spacing, …
/// (a single SD trails the leader). Grid uses ⌈√n⌉ columns centered on the
/// leader's track, rows stacked behind it.
pub fn formation_positions(
    formation: Formation,
    n: usize,
    spacing: f64,
    leader: Pos,
    heading: f64,
) -> Result<Vec<Pos>, SwarmError> {
    if n == 0 {
        return Err(SwarmError::EmptySwarm);
    }
    if spacing.is_nan() || spacing <= 0.0 {
        return Err(SwarmError::NonPositive("spacing"));
    }
    let (hx, hy) = (heading.cos(), heading.sin());
    let (px, py) = (-hy, hx);
    let at = |back: f64, side: f64| leader.add(-hx * back + px * side, -hy * back + py * side);
    let slots = match formation {
        Formation::Linear if n == 1 => vec![at(spacing, 0.0)],
        Formation::Linear => (0..n)
            .map(|k| {
                let rank = (k / 2 + 1) as f64;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                at(0.0, sign * rank * spacing)
            })
            .collect(),
        Formation::Grid => {
            let cols = (n as f64).sqrt().ceil() as usize;
            let mid = (cols - 1) as f64 / 2.0;
            (0..n)
                .map(|k| {
                    let (r, c) = (k / cols, k % cols);
                    at(spacing * (r + 1) as f64, spacing * (c as f64 - mid))
                })
                .collect()
        }
    };
    Ok(slots)
}

/// Moves every airborne drone up to `speed · dt` toward its waypoint.
pub fn advance_kinematics(mut state: SwarmState, dt: Micros) -> Result<SwarmState, SwarmError> {
    state.advance(dt)?;
    Ok(state)
}

impl SwarmState {
    pub fn advance(&mut self, dt: Micros) -> Result<(), SwarmError> {
        if dt == 0 {
            return Err(SwarmError::ZeroStep);
        }
        let step = self.plan.speed_mps() * crate::micros_to_secs(dt);
        let area = self.plan.area;
        for d in self.drones.iter_mut() {
            if !d.alive || !d.phase.is_airborne() {
                continue;
            }
            if let Some(wp) = d.waypoint {
                d.position = d.position.step_toward(wp.clamp_to(area), step).clamp_to(area);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn min_pairwise(p: &[Pos]) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                m = m.min(p[i].dist(p[j]));
            }
        }
        m
    }

    #[test]
    fn linear_pair() {
        let p = formation_positions(Formation::Linear, 2, 12.0, Pos::new(100.0, 100.0), 0.0).unwrap();
        assert!((p[0].y - 112.0).abs() < 1e-9 && (p[0].x - 100.0).abs() < 1e-9);
        assert!((p[1].y - 88.0).abs() < 1e-9);
    }

    #[test]
    fn grid_four() {
        let p = formation_positions(Formation::Grid, 4, 12.0, Pos::new(100.0, 100.0), 0.0).unwrap();
        assert!((min_pairwise(&p) - 12.0).abs() < 1e-9);
    }

    #[test]
    fn single_trails() {
        for f in [Formation::Linear, Formation::Grid] {
            let p = formation_positions(f, 1, 12.0, Pos::new(50.0, 50.0), 0.0).unwrap();
            assert!((p[0].x - 38.0).abs() < 1e-9 && (p[0].y - 50.0).abs() < 1e-9);
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(formation_positions(Formation::Grid, 0, 12.0, Pos::default(), 0.0).is_err());
        assert!(formation_positions(Formation::Grid, 3, 0.0, Pos::default(), 0.0).is_err());
        assert!("hexagon".parse::<Formation>().is_err());
    }
}
