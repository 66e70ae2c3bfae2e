//! Dantzig-Cottle principal pivoting on a dense tableau.
//!
//! The tableau expresses every basic variable as an affine function of the
//! nonbasic ones, `basic = qbar + T * nonbasic`. Variables `0..m` are the `w`,
//! `m..2m` the `z`. A major cycle picks a negative basic variable (the
//! distinguished one) and raises its complement until the distinguished
//! variable reaches zero; blocking basic variables are exchanged along the way
//! (minor cycles), keeping the basis almost complementary.

use nalgebra::{DMatrix, DVector};

use super::FdatError;

/// `w = M z + q`, `z >= 0`, `w >= 0`, `z'w = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LcpProblem {
    pub m: DMatrix<f64>,
    pub q: DVector<f64>,
}

impl LcpProblem {
    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// Largest violation of feasibility or complementarity at `z`.
    pub fn residual(&self, z: &DVector<f64>) -> f64 {
        let w = &self.m * z + &self.q;
        z.iter()
            .zip(w.iter())
            .map(|(&zi, &wi)| (-zi).max(-wi).max(zi.min(wi)).max(0.0))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcpSolution {
    pub z: DVector<f64>,
    pub w: DVector<f64>,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpmOptions {
    pub max_pivots: usize,
    pub tol: f64,
    pub pivot_floor: f64,
}

impl PpmOptions {
    /// `10 * 2^min(m, 16)` pivots, tolerance `1e-10`, pivot floor `1e-12`.
    pub fn for_dim(m: usize) -> Self {
        Self {
            max_pivots: 10 << m.min(16),
            tol: 1e-10,
            pivot_floor: 1e-12,
        }
    }
}

struct Tableau {
    t: DMatrix<f64>,
    qbar: DVector<f64>,
    /// Variable id of each row's basic variable.
    row_var: Vec<usize>,
    /// Variable id of each column's nonbasic variable.
    col_var: Vec<usize>,
}

impl Tableau {
    fn new(p: &LcpProblem) -> Self {
        let m = p.dim();
        Self {
            t: p.m.clone(),
            qbar: p.q.clone(),
            row_var: (0..m).collect(),
            col_var: (m..2 * m).collect(),
        }
    }

    fn column_of(&self, var: usize) -> usize {
        self.col_var.iter().position(|&v| v == var).expect("nonbasic variable")
    }

    /// Exchange the basic variable of row `r` with the nonbasic of column `c`.
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[(r, c)];
        let n = self.t.ncols();
        let row: Vec<f64> = (0..n).map(|j| self.t[(r, j)]).collect();
        let qr = self.qbar[r];
        for i in 0..self.t.nrows() {
            if i == r {
                continue;
            }
            let tic = self.t[(i, c)];
            if tic == 0.0 {
                continue;
            }
            let g = tic / p;
            for j in 0..n {
                if j != c {
                    self.t[(i, j)] -= g * row[j];
                }
            }
            self.t[(i, c)] = g;
            self.qbar[i] -= g * qr;
        }
        for j in 0..n {
            self.t[(r, j)] = if j == c { 1.0 / p } else { -row[j] / p };
        }
        self.qbar[r] = -qr / p;
        std::mem::swap(&mut self.row_var[r], &mut self.col_var[c]);
    }

    fn z(&self, m: usize) -> DVector<f64> {
        let mut z = DVector::zeros(m);
        for (r, &v) in self.row_var.iter().enumerate() {
            if v >= m {
                z[v - m] = self.qbar[r];
            }
        }
        z
    }
}

/// Re-solve the final basis from the original data, which removes the error
/// accumulated through the pivots.
fn polish(p: &LcpProblem, z: &DVector<f64>) -> Option<DVector<f64>> {
    let basic: Vec<usize> = (0..p.dim()).filter(|&i| z[i] > 0.0).collect();
    if basic.is_empty() {
        return None;
    }
    let k = basic.len();
    let mbb = DMatrix::from_fn(k, k, |i, j| p.m[(basic[i], basic[j])]);
    let qb = DVector::from_fn(k, |i, _| -p.q[basic[i]]);
    let sol = mbb.lu().solve(&qb)?;
    let mut out = DVector::zeros(p.dim());
    for (i, &b) in basic.iter().enumerate() {
        out[b] = sol[i];
    }
    Some(out)
}

pub fn lcp_ppm(problem: &LcpProblem, opts: &PpmOptions) -> Result<LcpSolution, FdatError> {
    let m = problem.dim();
    if problem.m.shape() != (m, m) {
        return Err(FdatError::DimensionMismatch {
            what: "M",
            expected: m,
            got: problem.m.nrows(),
        });
    }
    let comp = |v: usize| (v + m) % (2 * m);
    let pair = |v: usize| v % m;
    let mut tab = Tableau::new(problem);
    let mut pivots = 0;

    // major cycles
    while let Some(dist_row) = (0..m)
        .filter(|&r| tab.qbar[r] < -opts.tol)
        .min_by_key(|&r| pair(tab.row_var[r]))
    {
        let dist = tab.row_var[dist_row];
        let mut driver = comp(dist);
        loop {
            let c = tab.column_of(driver);
            // (ratio, is distinguished, pair index, row)
            let mut best: Option<(f64, bool, usize, usize)> = None;
            let mut tiny = false;
            for r in 0..m {
                let coef = tab.t[(r, c)];
                let is_dist = tab.row_var[r] == dist;
                let blocks = if is_dist { coef > 0.0 } else { coef < 0.0 };
                if !blocks {
                    continue;
                }
                if coef.abs() < opts.pivot_floor {
                    tiny = true;
                    continue;
                }
                let ratio = if is_dist { -tab.qbar[r] / coef } else { tab.qbar[r].max(0.0) / -coef };
                let key = (ratio, is_dist, pair(tab.row_var[r]), r);
                best = match best {
                    None => Some(key),
                    Some(b) => {
                        let better = key.0 < b.0
                            || (key.0 == b.0 && (key.1 && !b.1 || key.1 == b.1 && key.2 < b.2));
                        Some(if better { key } else { b })
                    }
                };
            }
            let Some((_, _, _, row)) = best else {
                return Err(if tiny {
                    FdatError::Degenerate { pivots }
                } else {
                    FdatError::Infeasible
                });
            };
            if pivots >= opts.max_pivots {
                return Err(FdatError::PivotLimit {
                    limit: opts.max_pivots,
                    best: tab.z(m).iter().map(|v| v.max(0.0)).collect(),
                });
            }
            let leaving = tab.row_var[row];
            tab.pivot(row, c);
            pivots += 1;
            if leaving == dist {
                break;
            }
            driver = comp(leaving);
        }
    }

    let mut z = tab.z(m).map(|v| v.max(0.0));
    if let Some(clean) = polish(problem, &z) {
        if problem.residual(&clean) <= problem.residual(&z) {
            z = clean;
        }
    }
    let residual = problem.residual(&z);
    if residual > opts.tol {
        return Err(FdatError::Certificate { residual });
    }
    let w = &problem.m * &z + &problem.q;
    Ok(LcpSolution { z, w, pivots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdat::qp::{qp_to_lcp, BoxedQP};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        a.tr_mul(&a) + DMatrix::identity(n, n) * 0.1
    }

    /// Projected gradient on `min 1/2 z'Mz + q'z, z >= 0` (symmetric PD M),
    /// run until the projected step is below `1e-12`.
    fn projected_gradient(m: &DMatrix<f64>, q: &DVector<f64>) -> DVector<f64> {
        let l = m.symmetric_eigenvalues().max();
        let mut z = DVector::zeros(q.len());
        for _ in 0..2_000_000 {
            let next = (&z - (m * &z + q) / l).map(|v| v.max(0.0));
            let stat = (&next - &z).amax();
            z = next;
            if stat <= 1e-12 {
                break;
            }
        }
        z
    }

    #[test]
    fn nonnegative_q_needs_no_pivots() {
        let p = LcpProblem {
            m: DMatrix::identity(3, 3),
            q: DVector::from_vec(vec![1.0, 0.0, 2.0]),
        };
        let s = lcp_ppm(&p, &PpmOptions::for_dim(3)).unwrap();
        assert_eq!(s.pivots, 0);
        assert_eq!(s.z, DVector::zeros(3));
        assert_eq!(s.w, p.q);
    }

    #[test]
    fn scalar_single_pivot() {
        let p = LcpProblem {
            m: DMatrix::from_element(1, 1, 1.0),
            q: DVector::from_element(1, -2.0),
        };
        let s = lcp_ppm(&p, &PpmOptions::for_dim(1)).unwrap();
        assert_eq!(s.pivots, 1);
        assert_eq!(s.z[0], 2.0);
        assert_eq!(s.w[0], 0.0);
    }

    #[test]
    fn infeasible_problem_reported() {
        let p = LcpProblem {
            m: DMatrix::from_element(1, 1, 0.0),
            q: DVector::from_element(1, -1.0),
        };
        assert_eq!(lcp_ppm(&p, &PpmOptions::for_dim(1)).unwrap_err(), FdatError::Infeasible);
    }

    #[test]
    fn pivot_limit_reports_best_iterate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = LcpProblem {
            m: random_pd(&mut rng, 6),
            q: DVector::from_element(6, -1.0),
        };
        let opts = PpmOptions { max_pivots: 1, ..PpmOptions::for_dim(6) };
        match lcp_ppm(&p, &opts) {
            Err(FdatError::PivotLimit { limit, best }) => {
                assert_eq!(limit, 1);
                assert_eq!(best.len(), 6);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn random_pd_lcps_match_oracle_within_pivot_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.random_range(1..=16);
            let m = random_pd(&mut rng, n);
            let q = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let p = LcpProblem { m: m.clone(), q: q.clone() };
            let s = lcp_ppm(&p, &PpmOptions::for_dim(n)).unwrap();
            assert!(s.pivots < 1 << n, "{} pivots for n = {n}", s.pivots);
            assert!(p.residual(&s.z) <= 1e-10);
            let oracle = projected_gradient(&m, &q);
            assert!((&s.z - &oracle).amax() <= 1e-6);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn box_qp_round_trip_is_stationary(seed in any::<u64>(), n in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let qp = BoxedQP {
                h: random_pd(&mut rng, n),
                f: DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0)),
                lower: DVector::zeros(n),
                upper: DVector::from_element(n, 1.0),
            };
            let (lcp, rec) = qp_to_lcp(&qp).unwrap();
            let s = lcp_ppm(&lcp, &PpmOptions::for_dim(lcp.dim())).unwrap();
            let a = rec.recover(&s.z);
            // projected-gradient fixed point
            let g = &qp.h * &a + &qp.f;
            for i in 0..n {
                let moved = (a[i] - g[i]).clamp(0.0, 1.0);
                prop_assert!((moved - a[i]).abs() <= 1e-9);
            }
        }
    }
}
