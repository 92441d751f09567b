//! Eigenvalues and eigenfunctions of a finite-interval problem.
use sympl_ext::extensions::BoundaryPair;
use sympl_ext::spectral::eigenvalues;
use sympl_ext::system::{from_sturm_liouville, SturmLiouvilleData};

fn main() {
    let n = 6;
    let data = SturmLiouvilleData::finite(vec![-1.0; n + 2], vec![0.0; n + 1], vec![1.0; n + 1]).unwrap();
    let sys = from_sturm_liouville(&data).unwrap();

    for (name, pair) in [("dirichlet", BoundaryPair::dirichlet(1)), ("periodic", BoundaryPair::periodic(1))] {
        let spec = eigenvalues(&sys, &pair).unwrap();
        println!("{name}: degree {}, orthogonality defect {:.2e}", spec.char_poly.degree(), spec.orthogonality_defect);
        for e in &spec.eigenpairs {
            println!("  {:>10.6} (x{}) residual {:.1e}", e.lambda.re, e.multiplicity, e.boundary_residual.max(e.recursion_residual));
        }
    }
    let closed: Vec<String> = (1..=n).map(|j| format!("{:.6}", -2.0 + 2.0 * (j as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())).collect();
    println!("closed form (dirichlet): {}", closed.join(" "));
}
