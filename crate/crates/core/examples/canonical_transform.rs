//! Transform a solution to canonical form and compare weighted norms.
use rand::SeedableRng;
use sympl_ext::primitives::semi_inner;
use sympl_ext::random;
use sympl_ext::solver::{canonical_transform, solve_ivp};

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let n_upper = 12;
    let sys = random::system(1, n_upper, 0.5, &mut rng);
    let z0 = random::complex_matrix(2, 1, 1.0, &mut rng);
    let z = solve_ivp(&sys, sympl_ext::c(0.0, 0.0), 0, &z0, None, None).unwrap();

    let ct = canonical_transform(&sys, None).unwrap();
    let y = ct.apply(&z).unwrap();
    println!("transformed recursion residual: {:.3e}", ct.residual(&y, None).unwrap());
    let before = semi_inner(&z, &z, sys.psi_seq(), n_upper).unwrap().re;
    let after = semi_inner(&y, &y, &ct.psi_hat, n_upper).unwrap().re;
    println!("weighted norm {:.12} -> {:.12}", before, after);
}
