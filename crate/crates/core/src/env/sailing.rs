//! Sailing on a lake of waypoints under a drifting wind.
//!
//! A state is `(waypoint, wind direction, tack)`. The eight actions are legs
//! to the neighbouring waypoints. Each leg is classified by the angle between
//! its heading and the direction the wind blows from, and its features are
//! the class indicator scaled by leg length plus a delay indicator for tack
//! changes. Legs off the lake leave the boat in place and count as sailing
//! into the wind. The goal waypoint is absorbing with zero features.

use serde::{Deserialize, Serialize};

use super::{Environment, GroundTruth};
use crate::error::{Error, Result};
use crate::mdp::{SolverConfig, TabularMdp, VectorQTable};

/// Weights for `(away, down, cross, up, into, delay)`.
pub const SAILING_THETA_STAR: [f64; 6] = [-1.0, -2.0, -3.0, -4.0, -100_000.0, -3.0];

pub const N_HEADINGS: usize = 8;
pub const N_FEATURES: usize = 6;
const DELAY: usize = 5;

/// Compass offsets `(dx, dy)` for N, NE, E, SE, S, SW, W, NW.
const HEADINGS: [(isize, isize); N_HEADINGS] =
    [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleClass {
    Away,
    Down,
    Cross,
    Up,
    Into,
}

impl AngleClass {
    pub fn feature_index(self) -> usize {
        match self {
            AngleClass::Away => 0,
            AngleClass::Down => 1,
            AngleClass::Cross => 2,
            AngleClass::Up => 3,
            AngleClass::Into => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tack {
    Port = 0,
    Starboard = 1,
}

impl Tack {
    fn from_index(i: usize) -> Tack {
        if i == 0 {
            Tack::Port
        } else {
            Tack::Starboard
        }
    }
}

/// Signed angle from the wind-from direction to the heading, in 45° steps,
/// in `-3..=4`.
fn relative_angle(heading: usize, wind: usize) -> isize {
    let rel = (heading + N_HEADINGS - wind) % N_HEADINGS;
    if rel > 4 {
        rel as isize - 8
    } else {
        rel as isize
    }
}

/// Angle class of a leg and the tack it puts the boat on (`None` when the
/// wind is dead ahead or dead astern).
pub fn classify_leg(heading: usize, wind: usize) -> (AngleClass, Option<Tack>) {
    let rel = relative_angle(heading, wind);
    let class = match rel.abs() {
        0 => AngleClass::Into,
        1 => AngleClass::Up,
        2 => AngleClass::Cross,
        3 => AngleClass::Down,
        _ => AngleClass::Away,
    };
    let tack = match rel {
        0 | 4 => None,
        r if r > 0 => Some(Tack::Port),
        _ => Some(Tack::Starboard),
    };
    (class, tack)
}

/// Feature vector of a leg sailed from `tack`, and the tack afterwards.
pub fn leg_features(heading: usize, wind: usize, tack: Tack) -> ([f64; N_FEATURES], Tack) {
    let (class, new_tack) = classify_leg(heading, wind);
    let length = if heading % 2 == 1 { std::f64::consts::SQRT_2 } else { 1.0 };
    let mut phi = [0.0; N_FEATURES];
    phi[class.feature_index()] = length;
    let after = new_tack.unwrap_or(tack);
    if after != tack {
        phi[DELAY] = 1.0;
    }
    (phi, after)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SailingSpec {
    pub size: usize,
    /// Probability that the wind keeps its direction for one step; otherwise
    /// it veers or backs by 45° with equal probability.
    pub p_stay: f64,
    pub gamma: f64,
    /// `(column, row)` with row 0 at the south shore.
    pub start: (usize, usize),
    pub goal: (usize, usize),
    /// The lake itself is deterministic; the seed is carried for bookkeeping
    /// by callers that derive expert data from it.
    pub seed: u64,
}

impl Default for SailingSpec {
    fn default() -> Self {
        SailingSpec { size: 4, p_stay: 0.4, gamma: 0.99, start: (0, 0), goal: (3, 3), seed: 0 }
    }
}

impl SailingSpec {
    /// Default lake of side `size` with start and goal at opposite corners.
    pub fn with_size(size: usize) -> Self {
        SailingSpec { size, goal: (size.saturating_sub(1), size.saturating_sub(1)), ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        let n = self.size;
        if n < 2 {
            return Err(Error::Config(format!("lake size must be at least 2, got {n}")));
        }
        if !(self.p_stay > 0.0 && self.p_stay < 1.0) {
            return Err(Error::Config(format!("p_stay must lie in (0, 1), got {}", self.p_stay)));
        }
        let inside = |(c, r): (usize, usize)| c < n && r < n;
        if !inside(self.start) || !inside(self.goal) {
            return Err(Error::Config("start and goal must lie on the lake".into()));
        }
        if self.start == self.goal {
            return Err(Error::Config("start and goal must differ".into()));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.size * self.size * N_HEADINGS * 2
    }

    pub fn state_index(&self, waypoint: (usize, usize), wind: usize, tack: Tack) -> usize {
        let w = waypoint.1 * self.size + waypoint.0;
        (w * N_HEADINGS + wind) * 2 + tack as usize
    }

    pub fn decode_state(&self, state: usize) -> ((usize, usize), usize, Tack) {
        let tack = Tack::from_index(state % 2);
        let wind = (state / 2) % N_HEADINGS;
        let w = state / (2 * N_HEADINGS);
        ((w % self.size, w / self.size), wind, tack)
    }

    fn neighbour(&self, (c, r): (usize, usize), heading: usize) -> Option<(usize, usize)> {
        let (dx, dy) = HEADINGS[heading];
        let (nc, nr) = (c as isize + dx, r as isize + dy);
        let n = self.size as isize;
        (nc >= 0 && nc < n && nr >= 0 && nr < n).then_some((nc as usize, nr as usize))
    }
}

pub fn make_sailing(spec: &SailingSpec) -> Result<Environment> {
    spec.validate()?;
    let ns = spec.n_states();
    let drift = (1.0 - spec.p_stay) / 2.0;
    let mut rows = Vec::with_capacity(ns * N_HEADINGS);
    let mut features = VectorQTable::zeros(ns, N_HEADINGS, N_FEATURES);
    let mut terminal = vec![false; ns];

    for x in 0..ns {
        let (wp, wind, tack) = spec.decode_state(x);
        if wp == spec.goal {
            terminal[x] = true;
            for _ in 0..N_HEADINGS {
                rows.push(vec![(x, 1.0)]);
            }
            continue;
        }
        let winds = [
            (wind, spec.p_stay),
            ((wind + 1) % N_HEADINGS, drift),
            ((wind + N_HEADINGS - 1) % N_HEADINGS, drift),
        ];
        for heading in 0..N_HEADINGS {
            let (next_wp, next_tack) = match spec.neighbour(wp, heading) {
                Some(next) => {
                    let (phi, after) = leg_features(heading, wind, tack);
                    features.get_mut(x, heading).copy_from_slice(&phi);
                    (next, after)
                }
                None => {
                    let length = if heading % 2 == 1 { std::f64::consts::SQRT_2 } else { 1.0 };
                    features.get_mut(x, heading)[AngleClass::Into.feature_index()] = length;
                    (wp, tack)
                }
            };
            rows.push(winds.iter().map(|&(w, p)| (spec.state_index(next_wp, w, next_tack), p)).collect());
        }
    }

    let mut init = vec![0.0; ns];
    let per = 1.0 / (2 * N_HEADINGS) as f64;
    for wind in 0..N_HEADINGS {
        for tack in [Tack::Port, Tack::Starboard] {
            init[spec.state_index(spec.start, wind, tack)] = per;
        }
    }
    let mdp = TabularMdp::new(ns, N_HEADINGS, spec.gamma, rows, init)?;
    let truth = GroundTruth::solve(&mdp, &features, SAILING_THETA_STAR.to_vec(), &SolverConfig::default())?;
    Ok(Environment { mdp, features, truth, terminal })
}
