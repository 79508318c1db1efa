//! Single two-level system algebra.
//!
//! Conventions: `|e> = (1, 0)ᵀ`, `|g> = (0, 1)ᵀ`, the lowering operator is
//! `σ = |g><e|`, `σx = σ + σ†`, `σy = i(σ − σ†)` (the usual matrix
//! `[[0, −i], [i, 0]]`) and `σz = |e><e| − |g><g|`. Equivalently
//! `σ = ½(σx − iσy)`. With this choice `H[σ]` conditions the x quadrature,
//! which is the one read out by the homodyne current `√(ηε)·Tr[ρσx]`, and
//! feedback enters through `σy`.
//!
//! States are stored as Bloch vectors `(x, y, z)`, i.e. `ρ = ½(I + xσx + yσy + zσz)`.
//! Superoperators return the Bloch-space image of `dρ` (a "tangent").
//! Operator products are evaluated with the Pauli product rule
//! `σᵢσⱼ = δᵢⱼ I + i εᵢⱼₖ σₖ`, never with explicit 2×2 matrices.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub type C64 = Complex64;

/// Bloch-space image of a trace-free Hermitian increment, `(dx, dy, dz)`.
pub type Tangent = Vector3<f64>;

/// Purity tolerance for exact (deterministic) propagation.
pub const EXACT_TOL: f64 = 1e-9;
/// Purity tolerance along stochastic trajectories.
pub const STOCHASTIC_TOL: f64 = 1e-6;

/// Density matrix of a two-level atom in Bloch coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl AtomState {
    pub const GROUND: AtomState = AtomState { x: 0.0, y: 0.0, z: -1.0 };
    pub const EXCITED: AtomState = AtomState { x: 0.0, y: 0.0, z: 1.0 };
    pub const MAXIMALLY_MIXED: AtomState = AtomState { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        AtomState { x, y, z }
    }

    /// Builds a state and checks the purity bound `x² + y² + z² ≤ 1 + tol`.
    pub fn checked(x: f64, y: f64, z: f64, tol: f64) -> Result<Self> {
        let s = AtomState { x, y, z };
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(domain("bloch vector", f64::NAN, "components must be finite"));
        }
        if !s.is_physical(tol) {
            return Err(domain(
                "bloch length squared",
                s.norm_sqr(),
                "must not exceed 1 (state would not be positive)",
            ));
        }
        Ok(s)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        self.norm_sqr() <= 1.0 + tol
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        AtomState { x: v[0], y: v[1], z: v[2] }
    }

    /// `s + dt·v`, without any physicality check.
    pub fn displaced(&self, v: &Tangent, dt: f64) -> Self {
        AtomState {
            x: self.x + dt * v[0],
            y: self.y + dt * v[1],
            z: self.z + dt * v[2],
        }
    }

    /// ρ as a Pauli-coefficient operator.
    pub fn to_operator(&self) -> AtomOperator {
        AtomOperator::new(
            C64::new(0.5, 0.0),
            C64::new(0.5 * self.x, 0.0),
            C64::new(0.5 * self.y, 0.0),
            C64::new(0.5 * self.z, 0.0),
        )
    }

    pub fn to_matrix(&self) -> Matrix2<C64> {
        bloch_to_matrix(self)
    }

    /// Excited-state population `<σ†σ> = ½(1 + z)`.
    pub fn excited_population(&self) -> f64 {
        0.5 * (1.0 + self.z)
    }
}

/// `ρ = ½(I + xσx + yσy + zσz)` as a 2×2 matrix in the `(|e>, |g>)` basis.
pub fn bloch_to_matrix(s: &AtomState) -> Matrix2<C64> {
    Matrix2::new(
        C64::new(0.5 * (1.0 + s.z), 0.0),
        C64::new(0.5 * s.x, -0.5 * s.y),
        C64::new(0.5 * s.x, 0.5 * s.y),
        C64::new(0.5 * (1.0 - s.z), 0.0),
    )
}

/// Operator `a0·I + ax·σx + ay·σy + az·σz` with complex coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomOperator {
    pub a0: C64,
    pub ax: C64,
    pub ay: C64,
    pub az: C64,
}

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const HALF: C64 = C64::new(0.5, 0.0);

impl AtomOperator {
    pub const fn new(a0: C64, ax: C64, ay: C64, az: C64) -> Self {
        AtomOperator { a0, ax, ay, az }
    }

    pub const fn zero() -> Self {
        AtomOperator::new(ZERO, ZERO, ZERO, ZERO)
    }

    pub const fn identity() -> Self {
        AtomOperator::new(ONE, ZERO, ZERO, ZERO)
    }

    pub const fn sigma_x() -> Self {
        AtomOperator::new(ZERO, ONE, ZERO, ZERO)
    }

    pub const fn sigma_y() -> Self {
        AtomOperator::new(ZERO, ZERO, ONE, ZERO)
    }

    pub const fn sigma_z() -> Self {
        AtomOperator::new(ZERO, ZERO, ZERO, ONE)
    }

    /// Lowering operator `σ = |g><e| = ½(σx − iσy)`.
    pub const fn lowering() -> Self {
        AtomOperator::new(ZERO, HALF, C64::new(0.0, -0.5), ZERO)
    }

    /// Raising operator `σ† = ½(σx + iσy)`.
    pub const fn raising() -> Self {
        AtomOperator::new(ZERO, HALF, C64::new(0.0, 0.5), ZERO)
    }

    pub fn adjoint(&self) -> Self {
        AtomOperator::new(self.a0.conj(), self.ax.conj(), self.ay.conj(), self.az.conj())
    }

    pub fn trace(&self) -> C64 {
        self.a0 * 2.0
    }

    pub fn scale(&self, c: C64) -> Self {
        AtomOperator::new(self.a0 * c, self.ax * c, self.ay * c, self.az * c)
    }

    /// Largest imaginary part among the Pauli coefficients; zero for Hermitian operators.
    pub fn hermiticity_residue(&self) -> f64 {
        [self.a0, self.ax, self.ay, self.az]
            .iter()
            .map(|c| c.im.abs())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residue() <= tol
    }

    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    pub fn to_matrix(&self) -> Matrix2<C64> {
        let i = C64::i();
        Matrix2::new(
            self.a0 + self.az,
            self.ax - i * self.ay,
            self.ax + i * self.ay,
            self.a0 - self.az,
        )
    }

    /// Decomposes an arbitrary 2×2 matrix in the Pauli basis, `a_k = Tr[σ_k M]/2`.
    pub fn from_matrix(m: &Matrix2<C64>) -> Self {
        let i = C64::i();
        AtomOperator::new(
            (m[(0, 0)] + m[(1, 1)]) * 0.5,
            (m[(0, 1)] + m[(1, 0)]) * 0.5,
            (i * m[(0, 1)] - i * m[(1, 0)]) * 0.5,
            (m[(0, 0)] - m[(1, 1)]) * 0.5,
        )
    }

    /// Bloch-space image `(2 Re ax, 2 Re ay, 2 Re az)` of a Hermitian, trace-free increment.
    pub fn to_tangent(&self) -> Tangent {
        Vector3::new(2.0 * self.ax.re, 2.0 * self.ay.re, 2.0 * self.az.re)
    }
}

impl Add for AtomOperator {
    type Output = AtomOperator;
    fn add(self, o: Self) -> Self {
        AtomOperator::new(self.a0 + o.a0, self.ax + o.ax, self.ay + o.ay, self.az + o.az)
    }
}

impl Sub for AtomOperator {
    type Output = AtomOperator;
    fn sub(self, o: Self) -> Self {
        AtomOperator::new(self.a0 - o.a0, self.ax - o.ax, self.ay - o.ay, self.az - o.az)
    }
}

impl Neg for AtomOperator {
    type Output = AtomOperator;
    fn neg(self) -> Self {
        self.scale(-ONE)
    }
}

impl Mul<f64> for AtomOperator {
    type Output = AtomOperator;
    fn mul(self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }
}

impl Mul<C64> for AtomOperator {
    type Output = AtomOperator;
    fn mul(self, c: C64) -> Self {
        self.scale(c)
    }
}

/// Pauli product rule: `(a0 + a·σ)(b0 + b·σ) = a0b0 + a·b + (a0 b + b0 a + i a×b)·σ`.
impl Mul for AtomOperator {
    type Output = AtomOperator;
    fn mul(self, o: Self) -> Self {
        let i = C64::i();
        let dot = self.ax * o.ax + self.ay * o.ay + self.az * o.az;
        let cx = self.ay * o.az - self.az * o.ay;
        let cy = self.az * o.ax - self.ax * o.az;
        let cz = self.ax * o.ay - self.ay * o.ax;
        AtomOperator::new(
            self.a0 * o.a0 + dot,
            self.a0 * o.ax + o.a0 * self.ax + i * cx,
            self.a0 * o.ay + o.a0 * self.ay + i * cy,
            self.a0 * o.az + o.a0 * self.az + i * cz,
        )
    }
}

/// `D[A]ρ = AρA† − ½A†Aρ − ½ρA†A`, returned in Bloch form.
pub fn dissipator(a: &AtomOperator, s: &AtomState) -> Tangent {
    let rho = s.to_operator();
    let ad = a.adjoint();
    let ada = ad * *a;
    let out = *a * rho * ad - (ada * rho + rho * ada) * 0.5;
    out.to_tangent()
}

/// `H[A]ρ = Aρ + ρA† − Tr[Aρ + ρA†]ρ`, returned in Bloch form. Nonlinear in ρ.
pub fn measurement_superop(a: &AtomOperator, s: &AtomState) -> Tangent {
    let rho = s.to_operator();
    let b = *a * rho + rho * a.adjoint();
    let out = b - rho * b.trace();
    out.to_tangent()
}

/// Hamiltonian flow `−i[H, ρ]` in Bloch form. Rejects non-Hermitian `H`.
pub fn hamiltonian_flow(h: &AtomOperator, s: &AtomState) -> Result<Tangent> {
    let residue = h.hermiticity_residue();
    let scale = [h.a0, h.ax, h.ay, h.az].iter().map(|c| c.norm()).fold(1.0, f64::max);
    if residue > 1e-12 * scale {
        return Err(Error::NotHermitian { residue });
    }
    Ok(hamiltonian_flow_unchecked(h, s))
}

/// Same as [`hamiltonian_flow`] without the Hermiticity check; hot-loop use only.
#[inline]
pub fn hamiltonian_flow_unchecked(h: &AtomOperator, s: &AtomState) -> Tangent {
    // −i[h·σ, ½(I + s·σ)] = (h × s)·σ, so ṡ = 2 h × s
    let hx = h.ax.re;
    let hy = h.ay.re;
    let hz = h.az.re;
    Vector3::new(
        2.0 * (hy * s.z - hz * s.y),
        2.0 * (hz * s.x - hx * s.z),
        2.0 * (hx * s.y - hy * s.x),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Tangent, b: [f64; 3], tol: f64) -> bool {
        (0..3).all(|k| (a[k] - b[k]).abs() <= tol)
    }

    #[test]
    fn bloch_poles_and_equator() {
        let g = bloch_to_matrix(&AtomState::GROUND);
        assert_eq!(g[(0, 0)], C64::new(0.0, 0.0));
        assert_eq!(g[(1, 1)], C64::new(1.0, 0.0));
        let e = bloch_to_matrix(&AtomState::EXCITED);
        assert_eq!(e[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(e[(1, 1)], C64::new(0.0, 0.0));
        let p = bloch_to_matrix(&AtomState::new(1.0, 0.0, 0.0));
        for k in 0..4 {
            assert_eq!(p[k], C64::new(0.5, 0.0));
        }
    }

    #[test]
    fn lowering_operator_convention() {
        let m = AtomOperator::lowering().to_matrix();
        // σ|e> = |g>
        assert_eq!(m[(1, 0)], C64::new(1.0, 0.0));
        assert_eq!(m[(0, 1)], C64::new(0.0, 0.0));
        let sy = AtomOperator::sigma_y().to_matrix();
        assert_eq!(sy[(0, 1)], C64::new(0.0, -1.0));
        assert_eq!(sy[(1, 0)], C64::new(0.0, 1.0));
    }

    #[test]
    fn from_matrix_inverts_to_matrix() {
        let a = AtomOperator::new(
            C64::new(0.3, -0.1),
            C64::new(1.2, 0.7),
            C64::new(-0.4, 0.25),
            C64::new(0.05, -2.0),
        );
        let b = AtomOperator::from_matrix(&a.to_matrix());
        for (u, v) in [(a.a0, b.a0), (a.ax, b.ax), (a.ay, b.ay), (a.az, b.az)] {
            assert!((u - v).norm() < 1e-15);
        }
    }

    #[test]
    fn damping_examples() {
        let sigma = AtomOperator::lowering();
        assert!(close(&dissipator(&sigma, &AtomState::GROUND), [0.0, 0.0, 0.0], 0.0));
        let s = AtomState::new(0.3, -0.2, 0.4);
        assert!(close(&dissipator(&sigma, &s), [-0.15, 0.1, -1.4], 1e-15));
        let half_sy = AtomOperator::sigma_y() * 0.5;
        assert!(close(&dissipator(&half_sy, &s), [-0.15, 0.0, -0.2], 1e-15));
    }

    #[test]
    fn conditioning_examples() {
        let sigma = AtomOperator::lowering();
        let s = AtomState::new(0.3, -0.2, 0.4);
        let (x, y, z) = (0.3, -0.2, 0.4);
        assert!(close(
            &measurement_superop(&sigma, &s),
            [1.0 + z - x * x, -x * y, -x * (1.0 + z)],
            1e-15
        ));
        assert!(close(&measurement_superop(&sigma, &AtomState::GROUND), [0.0; 3], 0.0));
        assert!(close(
            &measurement_superop(&sigma, &AtomState::new(1.0, 0.0, 0.0)),
            [0.0, 0.0, -1.0],
            1e-15
        ));
    }

    #[test]
    fn rotation_examples() {
        let c = 0.7;
        let h = AtomOperator::sigma_y() * (c / 2.0);
        let s = AtomState::new(0.3, -0.2, 0.4);
        assert!(close(&hamiltonian_flow(&h, &s).unwrap(), [c * 0.4, 0.0, -c * 0.3], 1e-15));
        let id = AtomOperator::identity();
        assert!(close(&hamiltonian_flow(&id, &s).unwrap(), [0.0; 3], 0.0));
        let on_axis = AtomState::new(0.0, 1.0, 0.0);
        assert!(close(&hamiltonian_flow(&h, &on_axis).unwrap(), [0.0; 3], 0.0));
    }

    #[test]
    fn rejects_non_hermitian_hamiltonian() {
        let err = hamiltonian_flow(&AtomOperator::lowering(), &AtomState::GROUND).unwrap_err();
        assert!(matches!(err, Error::NotHermitian { .. }));
    }

    #[test]
    fn checked_state_enforces_purity_bound() {
        assert!(AtomState::checked(1.0, 0.0, 0.0, EXACT_TOL).is_ok());
        assert!(AtomState::checked(1.0, 0.1, 0.0, EXACT_TOL).is_err());
        assert!(AtomState::checked(f64::NAN, 0.0, 0.0, EXACT_TOL).is_err());
    }
}
