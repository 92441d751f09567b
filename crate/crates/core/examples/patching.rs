//! Find an Atkinson interval and patch prescribed endpoint values together.
use sympl_ext::classify::find_atkinson_interval;
use sympl_ext::linalg::from_real_rows;
use sympl_ext::solver::{patching_bvp, recursion_residual};
use sympl_ext::system::{from_sturm_liouville, SturmLiouvilleData};

fn main() {
    let data = SturmLiouvilleData::finite(vec![-1.0; 12], vec![0.0; 11], vec![1.0; 11]).unwrap();
    let sys = from_sturm_liouville(&data).unwrap();
    let atk = find_atkinson_interval(&sys, 10).unwrap().expect("definite somewhere");
    let (cc, d) = atk.interval;
    println!("Atkinson interval [{cc}, {d}], min Gram eigenvalue {:.4e}", atk.min_eigenvalue);

    let alpha = from_real_rows(2, 1, &[1.0, 0.0]);
    let beta = from_real_rows(2, 1, &[0.0, 1.0]);
    let p = patching_bvp(&sys, cc, d, &alpha, &beta).unwrap();
    println!("z_{cc} = {:?}", p.z.get(cc).unwrap().as_slice());
    println!("z_{} = {:?}", d + 1, p.z.get(d + 1).unwrap().as_slice());
    let r = recursion_residual(&sys, sympl_ext::c(0.0, 0.0), &p.z, Some(&p.f), cc, d + 1).unwrap();
    println!("recursion residual {:.3e}, Gram condition {:.3e}", r, p.gram_cond);
}
