// Copyright 2026 The USP Authors
// SPDX-License-Identifier: Apache-2.0

//! Training and test point sets: a grid on the Bloch sphere for one qubit and
//! a phased grid on the four-dimensional unit hypersphere for two qubits.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{QuantumState, C64};

const TRAIN_THETA_STEPS: usize = 4; // theta = k pi/4
const TRAIN_PHI_STEPS: usize = 10; // phi = k pi/5
const THETA_INSERTS: usize = 2;
const PHI_INSERTS: usize = 4;

/// Polar and azimuthal angle of a single-qubit state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochPoint {
    pub theta: f64,
    pub phi: f64,
}

impl BlochPoint {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::InvalidParameter {
                name: "theta",
                value: theta,
                reason: "polar angle must lie in [0, pi]",
            });
        }
        if !(0.0..TAU).contains(&phi) {
            return Err(Error::InvalidParameter {
                name: "phi",
                value: phi,
                reason: "azimuthal angle must lie in [0, 2 pi)",
            });
        }
        Ok(Self { theta, phi })
    }

    pub fn to_state(&self) -> Result<QuantumState> {
        Self::new(self.theta, self.phi)?;
        let (half_s, half_c) = (self.theta / 2.0).sin_cos();
        QuantumState::new(vec![
            C64::new(half_c, 0.0),
            C64::from_polar(half_s, self.phi),
        ])
    }
}

/// Point on the unit 3-sphere with a quarter-turn phase on every amplitude.
///
/// Amplitude `j` is `i^phases[j] * c_j` with
/// `c = (cos t1, sin t1 cos t2, sin t1 sin t2 cos t3, sin t1 sin t2 sin t3)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperspherePoint {
    pub theta: [f64; 3],
    pub phases: [u8; 4],
}

impl HyperspherePoint {
    pub fn new(theta: [f64; 3], phases: [u8; 4]) -> Result<Self> {
        for &t in &theta {
            if !t.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "theta",
                    value: t,
                    reason: "hypersphere angle must be finite",
                });
            }
        }
        if let Some(&p) = phases.iter().find(|&&p| p > 3) {
            return Err(Error::InvalidParameter {
                name: "phase",
                value: p as f64,
                reason: "phase index must be 0..=3 (1, i, -1, -i)",
            });
        }
        Ok(Self { theta, phases })
    }

    pub fn magnitudes(&self) -> [f64; 4] {
        let [t1, t2, t3] = self.theta;
        let (s1, c1) = t1.sin_cos();
        let (s2, c2) = t2.sin_cos();
        let (s3, c3) = t3.sin_cos();
        [c1, s1 * c2, s1 * s2 * c3, s1 * s2 * s3]
    }

    pub fn to_state(&self) -> Result<QuantumState> {
        Self::new(self.theta, self.phases)?;
        let amps = self
            .magnitudes()
            .iter()
            .zip(self.phases)
            .map(|(&c, p)| phase_factor(p) * c)
            .collect();
        QuantumState::new(amps)
    }
}

/// `i^k` for `k` in 0..4, exact.
pub fn phase_factor(k: u8) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TaskPoint {
    Bloch(BlochPoint),
    Hypersphere(HyperspherePoint),
}

impl TaskPoint {
    pub fn to_state(&self) -> Result<QuantumState> {
        match self {
            TaskPoint::Bloch(p) => p.to_state(),
            TaskPoint::Hypersphere(p) => p.to_state(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TaskPoint::Bloch(_) => 2,
            TaskPoint::Hypersphere(_) => 4,
        }
    }
}

impl fmt::Display for TaskPoint {
    /// One-line text form, lossless for `f64`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskPoint::Bloch(p) => write!(f, "bloch {:?} {:?}", p.theta, p.phi),
            TaskPoint::Hypersphere(p) => write!(
                f,
                "hyper {:?} {:?} {:?} {} {} {} {}",
                p.theta[0], p.theta[1], p.theta[2], p.phases[0], p.phases[1], p.phases[2], p.phases[3]
            ),
        }
    }
}

impl FromStr for TaskPoint {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let mut fields = line.split_whitespace();
        let kind = fields.next().ok_or_else(|| Error::Parse("empty line".into()))?;
        let rest: Vec<&str> = fields.collect();
        let float = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad angle `{s}`: {e}")))
        };
        match (kind, rest.len()) {
            ("bloch", 2) => Ok(TaskPoint::Bloch(BlochPoint::new(
                float(rest[0])?,
                float(rest[1])?,
            )?)),
            ("hyper", 7) => {
                let theta = [float(rest[0])?, float(rest[1])?, float(rest[2])?];
                let mut phases = [0u8; 4];
                for (slot, s) in phases.iter_mut().zip(&rest[3..]) {
                    *slot = s
                        .parse()
                        .map_err(|e| Error::Parse(format!("bad phase index `{s}`: {e}")))?;
                }
                Ok(TaskPoint::Hypersphere(HyperspherePoint::new(theta, phases)?))
            }
            _ => Err(Error::Parse(format!("unrecognised task line `{line}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetRole {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSet {
    pub role: SetRole,
    pub points: Vec<TaskPoint>,
}

impl TaskSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn states(&self) -> Result<Vec<QuantumState>> {
        self.points.iter().map(TaskPoint::to_state).collect()
    }

    /// One point per line.
    pub fn to_lines(&self) -> String {
        self.points.iter().map(|p| format!("{p}\n")).collect()
    }

    pub fn from_lines(role: SetRole, text: &str) -> Result<Self> {
        let points = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::parse)
            .collect::<Result<_>>()?;
        Ok(Self { role, points })
    }
}

/// Manifest written next to an exported task set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSetManifest {
    pub seed: Option<u64>,
    pub train_count: usize,
    pub test_count: usize,
}

fn train_thetas() -> Vec<f64> {
    (0..=TRAIN_THETA_STEPS)
        .map(|k| k as f64 * PI / TRAIN_THETA_STEPS as f64)
        .collect()
}

fn train_phis() -> Vec<f64> {
    (0..TRAIN_PHI_STEPS)
        .map(|k| k as f64 * TAU / TRAIN_PHI_STEPS as f64)
        .collect()
}

/// The 32-point single-qubit training grid; the poles appear once each.
pub fn single_qubit_train_grid() -> TaskSet {
    let mut points = Vec::new();
    for theta in train_thetas() {
        let at_pole = theta == 0.0 || theta == PI;
        for phi in train_phis() {
            if at_pole && phi != 0.0 {
                continue;
            }
            points.push(TaskPoint::Bloch(BlochPoint { theta, phi }));
        }
    }
    TaskSet {
        role: SetRole::Train,
        points,
    }
}

/// Values strictly inside each interval of a uniform grid with `steps`
/// intervals over `[0, span]`, `inserts` per interval, equally spaced.
fn inserted(span: f64, steps: usize, inserts: usize) -> Vec<f64> {
    let fine = steps * (inserts + 1);
    (0..fine)
        .filter(|m| m % (inserts + 1) != 0)
        .map(|m| m as f64 * span / fine as f64)
        .collect()
}

/// The 320-point single-qubit test grid: two polar angles inserted into
/// every training interval crossed with four azimuths inserted into every
/// training interval.
pub fn single_qubit_test_grid() -> TaskSet {
    let thetas = inserted(PI, TRAIN_THETA_STEPS, THETA_INSERTS);
    let phis = inserted(TAU, TRAIN_PHI_STEPS, PHI_INSERTS);
    let points = thetas
        .iter()
        .flat_map(|&theta| {
            phis.iter()
                .map(move |&phi| TaskPoint::Bloch(BlochPoint { theta, phi }))
        })
        .collect();
    TaskSet {
        role: SetRole::Test,
        points,
    }
}

/// All 6912 two-qubit points: 27 hypersphere angles times 256 phase patterns.
pub fn two_qubit_point_set() -> Vec<TaskPoint> {
    let angles = [PI / 8.0, PI / 4.0, 3.0 * PI / 8.0];
    let mut points = Vec::with_capacity(27 * 256);
    for &t1 in &angles {
        for &t2 in &angles {
            for &t3 in &angles {
                for code in 0..256u16 {
                    let phases = [
                        (code >> 6) as u8 & 3,
                        (code >> 4) as u8 & 3,
                        (code >> 2) as u8 & 3,
                        code as u8 & 3,
                    ];
                    points.push(TaskPoint::Hypersphere(HyperspherePoint {
                        theta: [t1, t2, t3],
                        phases,
                    }));
                }
            }
        }
    }
    points
}

/// Uniform random split without replacement. Both halves keep the input
/// order.
pub fn split_train_test(points: &[TaskPoint], n_train: usize, seed: u64) -> Result<(TaskSet, TaskSet)> {
    if n_train > points.len() {
        return Err(Error::InvalidParameter {
            name: "n_train",
            value: n_train as f64,
            reason: "cannot exceed the number of points",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; points.len()];
    for i in index::sample(&mut rng, points.len(), n_train) {
        chosen[i] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (p, pick) in points.iter().zip(chosen) {
        if pick {
            train.push(*p);
        } else {
            test.push(*p);
        }
    }
    Ok((
        TaskSet {
            role: SetRole::Train,
            points: train,
        },
        TaskSet {
            role: SetRole::Test,
            points: test,
        },
    ))
}

/// `n` points of `set` drawn without replacement, kept in set order. The
/// whole set is returned when it has at most `n` points.
pub fn subsample(set: &TaskSet, n: usize, seed: u64) -> Result<TaskSet> {
    if n >= set.len() {
        return Ok(set.clone());
    }
    let (picked, _) = split_train_test(&set.points, n, seed)?;
    Ok(TaskSet {
        role: set.role,
        points: picked.points,
    })
}

pub fn point_to_state(p: &TaskPoint) -> Result<QuantumState> {
    p.to_state()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::fidelity;

    fn bloch(theta: f64, phi: f64) -> TaskPoint {
        TaskPoint::Bloch(BlochPoint { theta, phi })
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn train_grid_has_32_points_with_single_poles() {
        let grid = single_qubit_train_grid();
        assert_eq!(grid.len(), 32);
        let north = grid
            .points
            .iter()
            .filter(|p| matches!(p, TaskPoint::Bloch(b) if b.theta == 0.0))
            .count();
        let south = grid
            .points
            .iter()
            .filter(|p| matches!(p, TaskPoint::Bloch(b) if b.theta == PI))
            .count();
        assert_eq!((north, south), (1, 1));
        assert!(grid.points.iter().any(|p| matches!(p,
            TaskPoint::Bloch(b) if close(b.theta, PI / 2.0) && close(b.phi, PI))));
    }

    #[test]
    fn test_grid_has_320_points_off_the_training_latitudes() {
        let grid = single_qubit_test_grid();
        assert_eq!(grid.len(), 320);
        let train_thetas = train_thetas();
        for p in &grid.points {
            let TaskPoint::Bloch(b) = p else { panic!() };
            assert!(train_thetas.iter().all(|t| !close(*t, b.theta)));
            assert!(b.theta > 0.0 && b.theta < PI);
        }
        assert!(grid.points.iter().any(|p| matches!(p,
            TaskPoint::Bloch(b) if close(b.theta, 5.0 * PI / 6.0) && close(b.phi, 39.0 * PI / 25.0))));
        let train = single_qubit_train_grid();
        assert!(grid.points.iter().all(|p| !train.points.contains(p)));
    }

    #[test]
    fn two_qubit_set_has_6912_unit_states() {
        let points = two_qubit_point_set();
        assert_eq!(points.len(), 6912);
        for p in &points {
            assert!((p.to_state().unwrap().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hypersphere_reference_point() {
        let p = HyperspherePoint::new([PI / 4.0; 3], [0; 4]).unwrap();
        let s = p.to_state().unwrap();
        let h = std::f64::consts::SQRT_2;
        let expected = [h / 2.0, 0.5, h / 4.0, h / 4.0];
        for (a, e) in s.amplitudes().iter().zip(expected) {
            assert!(close(a.re, e) && a.im == 0.0);
        }
        let total: f64 = expected.iter().map(|x| x * x).sum();
        assert!(close(total, 1.0));
    }

    #[test]
    fn split_counts_and_determinism() {
        let points = two_qubit_point_set();
        let (train, test) = split_train_test(&points, 126, 7).unwrap();
        assert_eq!((train.len(), test.len()), (126, 6786));
        let (train2, test2) = split_train_test(&points, 126, 7).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);
        assert!(train.points.iter().all(|p| !test.points.contains(p)));

        let (train, test) = split_train_test(&points[..10], 0, 1).unwrap();
        assert!(train.is_empty());
        assert_eq!(test.len(), 10);
        assert!(split_train_test(&points[..10], 11, 1).is_err());
    }

    #[test]
    fn point_to_state_examples() {
        let s = point_to_state(&bloch(0.0, 1.234)).unwrap();
        assert_eq!(s.amplitudes(), &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);

        let s = point_to_state(&bloch(PI / 2.0, 0.0)).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(s.amplitudes()[0].re, r) && close(s.amplitudes()[1].re, r));

        let s = point_to_state(&bloch(PI, PI / 5.0)).unwrap();
        let one = QuantumState::basis(2, 1).unwrap();
        assert!(close(fidelity(&s, &one).unwrap(), 1.0));

        assert!(BlochPoint::new(-0.1, 0.0).is_err());
        assert!(BlochPoint::new(0.1, TAU).is_err());
        assert!(point_to_state(&bloch(4.0, 0.0)).is_err());
        assert!(HyperspherePoint::new([0.1; 3], [0, 1, 2, 4]).is_err());
    }

    #[test]
    fn text_export_round_trips() {
        let mut points = single_qubit_test_grid().points;
        points.extend(two_qubit_point_set().into_iter().step_by(97));
        let set = TaskSet {
            role: SetRole::Test,
            points,
        };
        let back = TaskSet::from_lines(SetRole::Test, &set.to_lines()).unwrap();
        assert_eq!(back, set);
        assert!(TaskSet::from_lines(SetRole::Test, "bloch 1.0").is_err());
    }
}
