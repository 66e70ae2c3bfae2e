//! Solve a random box-constrained QP through its complementarity form.
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinectl::fdat::{lcp_ppm, qp_to_lcp, BoxedQP, PpmOptions};

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let qp = BoxedQP {
        h: a.tr_mul(&a) + DMatrix::identity(n, n) * 0.1,
        f: DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0)),
        lower: DVector::zeros(n),
        upper: DVector::from_element(n, 1.0),
    };
    let (lcp, rec) = qp_to_lcp(&qp).unwrap();
    let sol = lcp_ppm(&lcp, &PpmOptions::for_dim(lcp.dim())).unwrap();
    let x = rec.recover(&sol.z);
    println!("n = {n}, LCP size {}, pivots {}", lcp.dim(), sol.pivots);
    println!("complementarity residual {:.2e}", lcp.residual(&sol.z));
    println!("objective {:.6}", qp.objective(&x));
    println!("solution {:.4?}", x.as_slice());
}
