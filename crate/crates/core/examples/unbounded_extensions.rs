//! Boundary conditions beyond the scalar finite case: the Omega matrix and limit point data.
use sympl_ext::classify::DEFAULT_GROWTH_THRESHOLD;
use sympl_ext::extensions::{build_omega, validate_extension, BoundaryPair, ExtensionSetting};
use sympl_ext::linalg::from_real_rows;
use sympl_ext::system::{from_sturm_liouville, SturmLiouvilleData};
use sympl_ext::{c, CMatrix};

fn main() {
    let data = SturmLiouvilleData::finite(vec![-1.0; 6], vec![0.5; 5], vec![1.0; 5]).unwrap();
    let sys = from_sturm_liouville(&data).unwrap();
    let omega = build_omega(&sys, c(0.0, 1.0), None, DEFAULT_GROWTH_THRESHOLD).unwrap();
    println!("finite interval: q+ = {}, q- = {}, rank Omega = {}", omega.q_plus, omega.q_minus, omega.rank_omega);
    // Omega_2 = A^* J A for the endpoint values A of the lambda_0 solutions, so M = A^*, L = I works
    let a = omega.basis_end.columns(0, 2).into_owned();
    let pair = BoundaryPair::new(a.adjoint(), CMatrix::identity(2, 2)).unwrap();
    let v = validate_extension(&sys, &pair, ExtensionSetting::General(&omega)).unwrap();
    println!("  (A^*, I): self-adjoint {}, residual {:.3e}", v.self_adjoint, v.residual);
    let pair = BoundaryPair::new(a.adjoint(), CMatrix::identity(2, 2) * c(2.0, 0.0)).unwrap();
    let v = validate_extension(&sys, &pair, ExtensionSetting::General(&omega)).unwrap();
    println!("  (A^*, 2I): self-adjoint {}, residual {:.3e}", v.self_adjoint, v.residual);

    let sys = from_sturm_liouville(&SturmLiouvilleData::inverse_square_weight()).unwrap();
    match build_omega(&sys, c(0.0, 1.0), Some(2000), DEFAULT_GROWTH_THRESHOLD) {
        Ok(o) => println!("unbounded: rank Omega = {}", o.rank_omega),
        Err(e) => println!("unbounded: {}", e),
    }
    for (name, row) in [("x_0 = 0", [1.0, 0.0]), ("u_0 = 0", [0.0, 1.0]), ("x_0 = u_0", [1.0, -1.0])] {
        let pair = BoundaryPair::new(from_real_rows(1, 2, &row), CMatrix::zeros(1, 0)).unwrap();
        let v = validate_extension(&sys, &pair, ExtensionSetting::LimitPoint).unwrap();
        println!("  limit point condition {name}: self-adjoint {}, residual {:.3e}", v.self_adjoint, v.residual);
    }
}
