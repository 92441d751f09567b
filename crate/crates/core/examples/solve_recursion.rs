//! Fundamental matrix, the Lagrange identity and Wronskian constancy.
use sympl_ext::c;
use sympl_ext::random;
use sympl_ext::solver::{fundamental, solve_ivp, verify_lagrange, verify_wronskian};
use sympl_ext::CMatrix;
use rand::SeedableRng;

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let sys = random::system(2, 30, 0.4, &mut rng);
    let lam = c(0.7, -0.3);

    let phi = fundamental(&sys, lam, None).unwrap();
    println!("Phi_0 = I, |Phi_31| = {:.4e}", phi.phi.get(31).unwrap().norm());

    let z = solve_ivp(&sys, lam, 0, &CMatrix::identity(4, 4), None, None).unwrap();
    let u = solve_ivp(&sys, lam.conj(), 0, &CMatrix::identity(4, 4), None, None).unwrap();
    println!("Wronskian drift: {:.3e}", verify_wronskian(&sys, lam, &z, &u).unwrap());

    let nu = c(-1.0, 2.0);
    let u = solve_ivp(&sys, nu, 0, &CMatrix::identity(4, 4), None, None).unwrap();
    let r = verify_lagrange(&sys, lam, nu, &z, &u, None, None, 3, 20).unwrap();
    println!("Lagrange identity on [3, 20]: {:.3e}", r);
}
