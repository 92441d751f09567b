//! Limit point or limit circle: square summable counts and sufficient criteria.
use sympl_ext::classify::{classify, corollary_lpc, hinton_lewis, DEFAULT_GROWTH_THRESHOLD};
use sympl_ext::system::{from_sturm_liouville, SturmLiouvilleData};
use sympl_ext::RealSeq;

fn main() {
    let data = SturmLiouvilleData::inverse_square_weight();
    let sys = from_sturm_liouville(&data).unwrap();

    let r = classify(&sys, 5000, DEFAULT_GROWTH_THRESHOLD).unwrap();
    println!("q(i) = {}, q(-i) = {}: {}", r.q_plus.q_estimate, r.q_minus.q_estimate, r.verdict);

    let hl = hinton_lewis(&data, 100_000).unwrap();
    println!("Hinton-Lewis partial sum {:.8} ({})", hl.partial_sum, if hl.divergent { "divergent" } else { "bounded" });

    let crit = corollary_lpc(&data, &RealSeq::constant(1.0), 0.0, 10_000).unwrap();
    for c in &crit.conditions {
        println!("  {:<12} passed {} margin {:.3e}", c.name, c.passed, c.margin);
    }
    println!("criterion: {:?}, series {:.4}", crit.verdict, crit.series.partial_sum);

    let unit = SturmLiouvilleData::unbounded(|_| -1.0, |_| 0.0, |_| 1.0);
    let hl = hinton_lewis(&unit, 100_000).unwrap();
    println!("unit weight: Hinton-Lewis sum {:.1}, divergent {}", hl.partial_sum, hl.divergent);
}
