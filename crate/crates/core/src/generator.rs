//! Affine generators on Bloch space, their propagators, and complete-positivity checks.

use nalgebra::{Complex, Matrix2, Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{AtomOperator, AtomState, Tangent, C64};

/// Time-independent Bloch equation `ṡ = drift·s + drive`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochGenerator {
    pub drift: Matrix3<f64>,
    pub drive: Vector3<f64>,
}

impl BlochGenerator {
    /// Reconstructs the affine map from any trace-preserving superoperator by
    /// sampling it at the origin and at the three unit vectors.
    pub fn from_superoperator<F>(f: F) -> Self
    where
        F: Fn(&AtomState) -> Tangent,
    {
        let drive = f(&AtomState::MAXIMALLY_MIXED);
        let cols = [
            f(&AtomState::new(1.0, 0.0, 0.0)) - drive,
            f(&AtomState::new(0.0, 1.0, 0.0)) - drive,
            f(&AtomState::new(0.0, 0.0, 1.0)) - drive,
        ];
        BlochGenerator {
            drift: Matrix3::from_columns(&cols),
            drive,
        }
    }

    pub fn apply(&self, s: &AtomState) -> Tangent {
        self.drift * s.as_vector() + self.drive
    }

    /// 4×4 generator acting on `(1, x, y, z)`; the first row vanishes (trace preservation).
    pub fn augmented(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        for r in 0..3 {
            m[(r + 1, 0)] = self.drive[r];
            for c in 0..3 {
                m[(r + 1, c + 1)] = self.drift[(r, c)];
            }
        }
        m
    }

    /// `exp(augmented·t)`, the Bloch-space propagator over time `t`.
    pub fn propagator(&self, t: f64) -> Matrix4<f64> {
        (self.augmented() * t).exp()
    }

    pub fn drift_eigenvalues(&self) -> [Complex<f64>; 3] {
        let ev = self.drift.complex_eigenvalues();
        [ev[0], ev[1], ev[2]]
    }

    /// Steady state by solving `drift·s = −drive`.
    pub fn fixed_point(&self) -> Result<AtomState> {
        let lu = self.drift.lu();
        lu.solve(&(-self.drive))
            .map(|v| AtomState::from_vector(&v))
            .ok_or_else(|| Error::Estimation("singular drift matrix".into()))
    }
}

/// Applies a 4×4 Bloch-space map to `(1, x, y, z)`.
pub fn apply_map(map: &Matrix4<f64>, s: &AtomState) -> AtomState {
    let v = map * nalgebra::Vector4::new(1.0, s.x, s.y, s.z);
    AtomState::new(v[1], v[2], v[3])
}

/// Choi matrix `Σᵢⱼ |i><j| ⊗ Φ(|i><j|)` of the linear extension of a Bloch-space map.
pub fn choi_matrix(map: &Matrix4<f64>) -> Matrix4<C64> {
    let mut choi = Matrix4::<C64>::zeros();
    for i in 0..2 {
        for j in 0..2 {
            let mut unit = Matrix2::<C64>::zeros();
            unit[(i, j)] = C64::new(1.0, 0.0);
            let op = AtomOperator::from_matrix(&unit);
            // coefficient vector (2a0, 2ax, 2ay, 2az) transforms like (1, x, y, z)
            let coeffs = [op.a0 * 2.0, op.ax * 2.0, op.ay * 2.0, op.az * 2.0];
            let mut out = [C64::new(0.0, 0.0); 4];
            for (r, o) in out.iter_mut().enumerate() {
                for (c, v) in coeffs.iter().enumerate() {
                    *o += *v * map[(r, c)];
                }
            }
            let image = AtomOperator::new(out[0] * 0.5, out[1] * 0.5, out[2] * 0.5, out[3] * 0.5)
                .to_matrix();
            for a in 0..2 {
                for b in 0..2 {
                    choi[(2 * i + a, 2 * j + b)] = image[(a, b)];
                }
            }
        }
    }
    choi
}

/// Smallest eigenvalue of the (Hermitian) Choi matrix; nonnegative iff the map is completely positive.
pub fn min_choi_eigenvalue(map: &Matrix4<f64>) -> f64 {
    let choi = choi_matrix(map);
    let herm = (choi + choi.adjoint()) * C64::new(0.5, 0.0);
    herm.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Decay rates of the Bloch equations `ẋ = −γx x`, `ẏ = −γy y`, `ż = −γz z − C`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub gamma_z: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

impl RateSet {
    /// `z_ss = −C/γz`.
    pub fn steady_z(&self) -> Result<f64> {
        if !(self.gamma_z > 0.0) {
            return Err(crate::error::domain(
                "gamma_z",
                self.gamma_z,
                "must be positive for a steady state to exist",
            ));
        }
        Ok(-self.c / self.gamma_z)
    }

    pub fn steady_state(&self) -> Result<AtomState> {
        Ok(AtomState::new(0.0, 0.0, self.steady_z()?))
    }

    /// Closed-form solution of the decoupled Bloch equations.
    pub fn evolve(&self, s0: &AtomState, t: f64) -> AtomState {
        let z_ss = -self.c / self.gamma_z;
        AtomState::new(
            s0.x * (-self.gamma_x * t).exp(),
            s0.y * (-self.gamma_y * t).exp(),
            (s0.z - z_ss) * (-self.gamma_z * t).exp() + z_ss,
        )
    }

    /// The Bloch generator with these rates.
    pub fn generator(&self) -> BlochGenerator {
        BlochGenerator {
            drift: Matrix3::from_diagonal(&Vector3::new(-self.gamma_x, -self.gamma_y, -self.gamma_z)),
            drive: Vector3::new(0.0, 0.0, -self.c),
        }
    }
}

/// Common surface of the two atomic master equations.
pub trait AtomModel {
    fn rates(&self) -> RateSet;
    /// Bloch generator assembled from the superoperators of the master equation.
    fn bloch(&self) -> BlochGenerator;
    /// Fraction of the atom's emission coupled to the driving beam.
    fn mode_matching(&self) -> f64;

    fn steady_state(&self) -> Result<AtomState> {
        self.rates().steady_state()
    }

    fn evolve(&self, s0: &AtomState, t: f64) -> AtomState {
        self.rates().evolve(s0, t)
    }
}
