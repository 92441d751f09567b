//! Self-adjoint boundary conditions: validation, canonical forms, unitary parameters, equivalence.
use rand::SeedableRng;
use sympl_ext::extensions::{
    canonicalize_scalar, equivalent, from_unitary, validate_extension, BoundaryPair, ExtensionForm, ExtensionSetting,
};
use sympl_ext::random;
use sympl_ext::system::{from_sturm_liouville, SturmLiouvilleData};
use sympl_ext::{c, CMatrix};

fn describe(form: &ExtensionForm) -> String {
    match form {
        ExtensionForm::Separated { alpha0, alpha_n1 } => format!("separated ({:.4}, {:.4})", alpha0, alpha_n1),
        ExtensionForm::Coupled { r, beta } => {
            let r: Vec<f64> = r.transpose().iter().map(|z| z.re).collect();
            format!("coupled R = {:?}, beta = {:.4}", r, beta)
        }
        other => format!("{:?}", other),
    }
}

fn main() {
    let data = SturmLiouvilleData::finite(vec![-1.0; 5], vec![0.0; 4], vec![1.0; 4]).unwrap();
    let sys = from_sturm_liouville(&data).unwrap();

    let named = [
        ("dirichlet", BoundaryPair::dirichlet(1)),
        ("neumann", BoundaryPair::neumann(1)),
        ("periodic", BoundaryPair::periodic(1)),
        ("antiperiodic", BoundaryPair::antiperiodic(1)),
        ("M = I, L = 2I", BoundaryPair::new(CMatrix::identity(2, 2), CMatrix::identity(2, 2) * c(2.0, 0.0)).unwrap()),
    ];
    for (name, pair) in &named {
        let v = validate_extension(&sys, pair, ExtensionSetting::Finite).unwrap();
        let form = canonicalize_scalar(&sys, pair).map(|f| describe(&f)).unwrap_or_else(|e| e.to_string());
        println!("{:<14} self-adjoint {:<5} residual {:.3e}  {}", name, v.self_adjoint, v.residual, form);
    }

    let sep = ExtensionForm::Separated { alpha0: 0.4, alpha_n1: 2.0 }.to_pair().unwrap();
    let scaled = BoundaryPair::new(&sep.m * c(0.0, 3.0), &sep.l * c(0.0, 3.0)).unwrap();
    println!("scaled pair equivalent: {}", equivalent(&sep, &scaled).unwrap().equivalent);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let v = random::unitary(2, &mut rng);
    let u = from_unitary(&v).unwrap();
    let check = validate_extension(&sys, &u.pair, ExtensionSetting::Finite).unwrap();
    println!("random unitary: round trip {:.2e}, self-adjoint {}", u.roundtrip_residual, check.self_adjoint);
}
