//! Superoperators acting on Bloch vectors, checked against 2×2 matrices.

use inloop_atom::pauli::{dissipator, hamiltonian_flow, measurement_superop};
use inloop_atom::{AtomOperator, AtomState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sigma = AtomOperator::lowering();
    let half_sy = AtomOperator::sigma_y() * 0.5;
    let s = AtomState::new(0.6, -0.2, 0.3);

    println!("state            {s:?}");
    println!("D[sigma] s       {:?}", dissipator(&sigma, &s));
    println!("D[sigma_y/2] s   {:?}", dissipator(&half_sy, &s));
    println!("H[sigma] s       {:?}", measurement_superop(&sigma, &s));
    println!("-i[sigma_y/2, .] {:?}", hamiltonian_flow(&half_sy, &s)?);

    // the same superoperator applied to the density matrix
    let rho = s.to_matrix();
    let (a, ad) = (sigma.to_matrix(), sigma.adjoint().to_matrix());
    let d = a * rho * ad - (ad * a * rho + rho * ad * a).scale(0.5);
    let via_matrix = AtomOperator::from_matrix(&d).to_tangent();
    println!("matrix route     {via_matrix:?}");

    // Hamiltonians must be Hermitian
    println!("sigma as Hamiltonian: {}", hamiltonian_flow(&sigma, &s).unwrap_err());
    Ok(())
}
