//! Build systems three ways and check the structural hypotheses.
use sympl_ext::linalg::from_real_rows;
use sympl_ext::system::{from_sturm_liouville, validate_hypothesis, SturmLiouvilleData, SymplecticSystem};

fn report(label: &str, sys: &SymplecticSystem) {
    let r = validate_hypothesis(sys, None).unwrap();
    println!("{label}: passed = {}", r.passed());
    for c in &r.checks {
        println!("  {:<18} {:<24} worst {:.3e}", c.name, c.condition, c.worst);
    }
}

fn main() {
    let sl = SturmLiouvilleData::finite(vec![-1.0, -2.0, -1.5, -1.0], vec![0.3, 0.0, -0.2], vec![1.0, 0.5, 2.0]).unwrap();
    report("Sturm-Liouville", &from_sturm_liouville(&sl).unwrap());

    let shear = from_real_rows(2, 2, &[1.0, -1.0, 0.0, 1.0]);
    let psi = from_real_rows(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    report("shear", &SymplecticSystem::from_matrices(vec![shear; 3], vec![psi.clone(); 3]).unwrap());

    let broken = from_real_rows(2, 2, &[1.0, 0.5, 0.0, 1.5]);
    let sys = SymplecticSystem::from_matrices(vec![broken; 2], vec![psi; 2]).unwrap();
    report("corrupted", &sys);
}
