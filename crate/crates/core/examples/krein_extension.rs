//! The Krein-von Neumann extension of a shear system.
use sympl_ext::extensions::{krein_von_neumann, ExtensionForm};
use sympl_ext::linalg::from_real_rows;
use sympl_ext::system::SymplecticSystem;

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
    for b in [1.0, 0.5] {
        let s = from_real_rows(2, 2, &[1.0, -b, 0.0, 1.0]);
        let psi = from_real_rows(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let sys = SymplecticSystem::from_matrices(vec![s; 4], vec![psi; 4]).unwrap();
        let k = krein_von_neumann(&sys).unwrap();
        println!("b = {b}: G = {:?}", k.g.transpose().iter().map(|z| z.re).collect::<Vec<_>>());
        println!("  {}", describe(&k.form));
        if let Some(p) = &k.positivity {
            println!("  sampled positivity ratio {:.4} over {} samples", p.min_ratio, p.samples);
        }
    }
}
