// Copyright 2026 The USP Authors
// SPDX-License-Identifier: Apache-2.0

//! Exact simulation of singlet-triplet qubits driven by piecewise-constant
//! exchange pulses.
//!
//! Single qubit basis: `{|S>, |T0>}` (written `|0>`, `|1>`).
//! Two qubit basis: `{|SS>, |ST0>, |T0S>, |T0T0>}`.
//!
//! Units have `hbar = 1`; the Zeeman spacing is fixed at `h = 1` unless a
//! noise model perturbs it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Zeeman spacing used throughout.
pub const ZEEMAN: f64 = 1.0;

const NORM_TOL: f64 = 1e-9;
const HERMITIAN_TOL: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Unit-norm pure state of one (dim 2) or two (dim 4) singlet-triplet qubits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct QuantumState {
    amps: Vec<C64>,
}

impl QuantumState {
    /// Validates dimension and normalization (within 1e-9).
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        check_dim(amps.len())?;
        let norm = l2_norm(&amps);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { amps })
    }

    /// Rescales `amps` to unit norm.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        check_dim(amps.len())?;
        let norm = l2_norm(&amps);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self {
            amps: amps.into_iter().map(|a| a / norm).collect(),
        })
    }

    /// Computational basis state `|k>`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        check_dim(dim)?;
        if k >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: k,
            });
        }
        let mut amps = vec![ZERO; dim];
        amps[k] = ONE;
        Ok(Self { amps })
    }

    /// `(|00> + |11>)/sqrt(2)` in the two-qubit basis.
    pub fn bell() -> Self {
        let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self {
            amps: vec![a, ZERO, ZERO, a],
        }
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.amps)
    }

    pub(crate) fn from_raw(amps: Vec<C64>) -> Self {
        Self { amps }
    }
}

impl TryFrom<Vec<(f64, f64)>> for QuantumState {
    type Error = Error;

    fn try_from(pairs: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(pairs.into_iter().map(|(re, im)| C64::new(re, im)).collect())
    }
}

impl From<QuantumState> for Vec<(f64, f64)> {
    fn from(s: QuantumState) -> Self {
        s.amps.into_iter().map(|a| (a.re, a.im)).collect()
    }
}

fn check_dim(dim: usize) -> Result<()> {
    match dim {
        2 | 4 => Ok(()),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

fn l2_norm(amps: &[C64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Exchange coupling of a single qubit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleQubitParams {
    pub j: f64,
    pub h: f64,
}

impl SingleQubitParams {
    pub fn new(j: f64) -> Result<Self> {
        if !j.is_finite() || j < 0.0 {
            return Err(Error::InvalidParameter {
                name: "J",
                value: j,
                reason: "exchange coupling must be finite and non-negative",
            });
        }
        Ok(Self { j, h: ZEEMAN })
    }
}

/// Exchange couplings of two capacitively coupled qubits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitParams {
    pub j1: f64,
    pub j2: f64,
    pub h1: f64,
    pub h2: f64,
    pub j12: f64,
}

impl TwoQubitParams {
    /// `J12` is fixed to `J1 * J2 / 2`.
    pub fn new(j1: f64, j2: f64) -> Result<Self> {
        for (name, value) in [("J1", j1), ("J2", j2)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "exchange coupling must be finite and positive",
                });
            }
        }
        Ok(Self {
            j1,
            j2,
            h1: ZEEMAN,
            h2: ZEEMAN,
            j12: j1 * j2 / 2.0,
        })
    }
}

/// `J sigma_z + h sigma_x`, with no sign restriction on `j`.
pub fn h1_matrix(j: f64, h: f64) -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[C64::new(j, 0.0), C64::new(h, 0.0), C64::new(h, 0.0), C64::new(-j, 0.0)],
    )
}

/// Two-qubit Hamiltonian from raw couplings, including the overall 1/2.
pub fn h2_matrix(j1: f64, j2: f64, h1: f64, h2: f64, j12: f64) -> CMatrix {
    let r = |x: f64| C64::new(0.5 * x, 0.0);
    #[rustfmt::skip]
    let entries = [
        r(j1 + j2), r(h2),      r(h1),      ZERO,
        r(h2),      r(j1 - j2), ZERO,       r(h1),
        r(h1),      ZERO,       r(j2 - j1), r(h2),
        ZERO,       r(h1),      r(h2),      r(-j1 - j2 + 2.0 * j12),
    ];
    CMatrix::from_row_slice(4, 4, &entries)
}

pub fn build_h1(p: &SingleQubitParams) -> Result<CMatrix> {
    SingleQubitParams::new(p.j)?;
    Ok(h1_matrix(p.j, p.h))
}

pub fn build_h2(p: &TwoQubitParams) -> Result<CMatrix> {
    TwoQubitParams::new(p.j1, p.j2)?;
    Ok(h2_matrix(p.j1, p.j2, p.h1, p.h2, p.j12))
}

fn check_duration(dt: f64) -> Result<()> {
    if !dt.is_finite() || dt < 0.0 {
        return Err(Error::InvalidParameter {
            name: "dt",
            value: dt,
            reason: "duration must be finite and non-negative",
        });
    }
    Ok(())
}

/// Closed-form `exp(-i (j sigma_z + h sigma_x) dt)`.
pub fn su2_propagator(j: f64, h: f64, dt: f64) -> CMatrix {
    let omega = j.hypot(h);
    if omega == 0.0 {
        return CMatrix::identity(2, 2);
    }
    let (s, c) = (omega * dt).sin_cos();
    let k = s / omega;
    let diag = C64::new(c, -k * j);
    let off = C64::new(0.0, -k * h);
    CMatrix::from_row_slice(2, 2, &[diag, off, off, diag.conj()])
}

pub fn propagator_su2(p: &SingleQubitParams, dt: f64) -> Result<CMatrix> {
    SingleQubitParams::new(p.j)?;
    check_duration(dt)?;
    Ok(su2_propagator(p.j, p.h, dt))
}

/// Largest elementwise deviation `|H - H^dagger|`.
pub fn hermiticity_error(h: &CMatrix) -> f64 {
    let n = h.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            worst = worst.max((h[(r, c)] - h[(c, r)].conj()).norm());
        }
    }
    worst
}

/// `exp(-i H dt)` through the spectral decomposition of a Hermitian `H`.
pub fn propagator_eig(h: &CMatrix, dt: f64) -> Result<CMatrix> {
    if !h.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "Hamiltonian must be square, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    check_dim(h.nrows())?;
    check_duration(dt)?;
    let err = hermiticity_error(h);
    if err > HERMITIAN_TOL {
        return Err(Error::NotHermitian(err));
    }
    Ok(spectral_propagator(h, dt))
}

pub(crate) fn spectral_propagator(h: &CMatrix, dt: f64) -> CMatrix {
    let eig = SymmetricEigen::new(h.clone());
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| (-I * l * dt).exp()),
    );
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (mut col, &ph) in scaled.column_iter_mut().zip(phases.iter()) {
        col *= ph;
    }
    scaled * v.adjoint()
}

/// Largest elementwise deviation `|U^dagger U - I|`.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    let n = u.nrows();
    let prod = u.adjoint() * u;
    (prod - CMatrix::identity(n, n))
        .iter()
        .fold(0.0f64, |m, z| m.max(z.norm()))
}

pub fn evolve_step(s: &QuantumState, u: &CMatrix) -> Result<QuantumState> {
    if u.nrows() != s.dim() || u.ncols() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: u.nrows(),
        });
    }
    Ok(QuantumState::from_raw(apply(u, &s.amps)))
}

pub(crate) fn apply(u: &CMatrix, v: &[C64]) -> Vec<C64> {
    let n = v.len();
    (0..n)
        .map(|r| (0..n).map(|c| u[(r, c)] * v[c]).sum())
        .collect()
}

pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `|<a|b>|^2`.
pub fn fidelity(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(inner(&a.amps, &b.amps).norm_sqr().min(1.0))
}

/// Pauli expectations `(<sigma_x>, <sigma_y>, <sigma_z>)` of a single qubit.
pub fn state_to_bloch(s: &QuantumState) -> Result<[f64; 3]> {
    if s.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: s.dim(),
        });
    }
    let (a, b) = (s.amps[0], s.amps[1]);
    let coherence = a.conj() * b;
    Ok([
        2.0 * coherence.re,
        2.0 * coherence.im,
        a.norm_sqr() - b.norm_sqr(),
    ])
}
