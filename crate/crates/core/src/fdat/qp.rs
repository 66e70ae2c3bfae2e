use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lcp::LcpProblem;
use super::FdatError;

/// Weights of the tracking cost
/// `w_u/(2 dt) |u* - u|^2 + w_d/2 |a - a_prev|^2 + w_r/2 |a|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub w_u: f64,
    pub w_d: f64,
    pub w_r: f64,
    /// Expected time to reach the target, s.
    pub delta_t: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            w_u: 1.0,
            w_d: 0.001,
            w_r: 0.01,
            delta_t: 0.1,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<(), FdatError> {
        let bad = |m: &str| Err(FdatError::InvalidWeights(m.to_string()));
        if [self.w_u, self.w_d, self.w_r, self.delta_t].iter().any(|v| !v.is_finite()) {
            return bad("weights must be finite");
        }
        if self.w_u < 0.0 || self.w_d < 0.0 {
            return bad("w_u and w_d must be nonnegative");
        }
        if !(self.w_r > 0.0) {
            return bad("w_r must be positive");
        }
        if !(self.delta_t > 0.0) {
            return bad("delta_t must be positive");
        }
        Ok(())
    }

    pub fn phi_u(&self, u: &DVector<f64>, target: &DVector<f64>) -> f64 {
        (u - target).norm_squared() / (2.0 * self.delta_t)
    }

    pub fn phi_d(a: &[f64], a_prev: &[f64]) -> f64 {
        0.5 * a.iter().zip(a_prev).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
    }

    pub fn phi_r(a: &[f64]) -> f64 {
        0.5 * a.iter().map(|x| x * x).sum::<f64>()
    }

    /// Weighted total cost.
    pub fn total(&self, u: &DVector<f64>, target: &DVector<f64>, a: &[f64], a_prev: &[f64]) -> f64 {
        self.w_u * self.phi_u(u, target) + self.w_d * Self::phi_d(a, a_prev) + self.w_r * Self::phi_r(a)
    }
}

/// `min 1/2 a'Ha + f'a` subject to `lower <= a <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxedQP {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl BoxedQP {
    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn objective(&self, a: &DVector<f64>) -> f64 {
        0.5 * a.dot(&(&self.h * a)) + self.f.dot(a)
    }

    pub fn validate(&self) -> Result<(), FdatError> {
        let n = self.dim();
        for (what, got) in [("H rows", self.h.nrows()), ("H cols", self.h.ncols()), ("lower", self.lower.len()), ("upper", self.upper.len())] {
            if got != n {
                return Err(FdatError::DimensionMismatch { what, expected: n, got });
            }
        }
        if let Some(i) = (0..n).find(|&i| !(self.lower[i] <= self.upper[i])) {
            return Err(FdatError::InvalidBounds(i));
        }
        Ok(())
    }
}

/// Box QP of the tracking cost under the affine model `u(a) = u0 + lambda a`.
/// Its objective differs from the weighted cost by a constant.
pub fn assemble_qp(
    lambda: &DMatrix<f64>,
    u0: &DVector<f64>,
    target: &DVector<f64>,
    a_prev: &[f64],
    weights: &CostWeights,
) -> Result<BoxedQP, FdatError> {
    weights.validate()?;
    let (k, n) = lambda.shape();
    if u0.len() != k {
        return Err(FdatError::DimensionMismatch { what: "u0", expected: k, got: u0.len() });
    }
    if target.len() != k {
        return Err(FdatError::DimensionMismatch { what: "target", expected: k, got: target.len() });
    }
    if a_prev.len() != n {
        return Err(FdatError::DimensionMismatch { what: "a_prev", expected: n, got: a_prev.len() });
    }
    let c = weights.w_u / weights.delta_t;
    let mut h = lambda.tr_mul(lambda) * c;
    for i in 0..n {
        h[(i, i)] += weights.w_d + weights.w_r;
    }
    // exact symmetry
    let h = (&h + h.transpose()) * 0.5;
    let f = lambda.tr_mul(&(u0 - target)) * c - DVector::from_column_slice(a_prev) * weights.w_d;
    Ok(BoxedQP {
        h,
        f,
        lower: DVector::zeros(n),
        upper: DVector::from_element(n, 1.0),
    })
}

/// Maps an LCP solution back to the box QP variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl Recovery {
    /// `a = lower + x`, where `x` is the first half of `z`.
    pub fn recover(&self, z: &DVector<f64>) -> DVector<f64> {
        let n = self.lower.len();
        DVector::from_iterator(
            n,
            (0..n).map(|i| (self.lower[i] + z[i]).clamp(self.lower[i], self.upper[i])),
        )
    }
}

/// KKT system of the box QP as an LCP. With `x = a - lower` and `mu` the
/// multipliers of `x <= upper - lower`:
///
/// ```text
/// w1 = H x + (f + H lower) + mu  >= 0  _|_  x  >= 0
/// w2 = (upper - lower) - x       >= 0  _|_  mu >= 0
/// ```
pub fn qp_to_lcp(qp: &BoxedQP) -> Result<(LcpProblem, Recovery), FdatError> {
    qp.validate()?;
    if Cholesky::new(qp.h.clone()).is_none() {
        return Err(FdatError::NotPositiveDefinite);
    }
    let n = qp.dim();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&qp.h);
    for i in 0..n {
        m[(i, n + i)] = 1.0;
        m[(n + i, i)] = -1.0;
    }
    let mut q = DVector::zeros(2 * n);
    q.rows_mut(0, n).copy_from(&(&qp.f + &qp.h * &qp.lower));
    q.rows_mut(n, n).copy_from(&(&qp.upper - &qp.lower));
    Ok((
        LcpProblem { m, q },
        Recovery {
            lower: qp.lower.clone(),
            upper: qp.upper.clone(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdat::lcp::{lcp_ppm, PpmOptions};
    use approx::assert_relative_eq;

    fn solve_1d(h: f64, f: f64) -> f64 {
        let qp = BoxedQP {
            h: DMatrix::from_element(1, 1, h),
            f: DVector::from_element(1, f),
            lower: DVector::zeros(1),
            upper: DVector::from_element(1, 1.0),
        };
        let (lcp, rec) = qp_to_lcp(&qp).unwrap();
        let sol = lcp_ppm(&lcp, &PpmOptions::for_dim(2)).unwrap();
        rec.recover(&sol.z)[0]
    }

    #[test]
    fn one_dimensional_cases() {
        assert_relative_eq!(solve_1d(1.0, -0.5), 0.5, epsilon = 1e-14);
        assert_eq!(solve_1d(1.0, 0.5), 0.0);
        // 1/2 (a - 2)^2 = 1/2 a^2 - 2a + const
        assert_eq!(solve_1d(1.0, -2.0), 1.0);
    }

    fn minimizer_unconstrained(qp: &BoxedQP) -> DVector<f64> {
        qp.h.clone().cholesky().unwrap().solve(&(-&qp.f))
    }

    #[test]
    fn pure_regularization() {
        let lambda = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.5, -1.0, 3.0]);
        let u0 = DVector::from_vec(vec![0.3, -0.2]);
        let target = DVector::from_vec(vec![1.0, 1.0]);
        let w = CostWeights { w_u: 0.0, ..CostWeights::default() };
        let qp = assemble_qp(&lambda, &u0, &target, &[0.0; 3], &w).unwrap();
        assert_eq!(minimizer_unconstrained(&qp), DVector::zeros(3));

        let p = [0.2, 0.9, 0.4];
        let qp = assemble_qp(&lambda, &u0, &target, &p, &w).unwrap();
        let a = minimizer_unconstrained(&qp);
        let ratio = w.w_d / (w.w_d + w.w_r);
        for i in 0..3 {
            assert_relative_eq!(a[i], ratio * p[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn at_target_minimizer_is_zero() {
        let lambda = DMatrix::from_row_slice(2, 2, &[1.0, -0.3, 0.2, 0.7]);
        let u0 = DVector::from_vec(vec![0.3, -0.2]);
        let qp = assemble_qp(&lambda, &u0, &u0, &[0.0; 2], &CostWeights::default()).unwrap();
        assert_eq!(qp.f, DVector::zeros(2));
    }

    #[test]
    fn qp_objective_matches_weighted_cost_up_to_constant() {
        let lambda = DMatrix::from_row_slice(3, 2, &[0.4, -0.3, 0.2, 0.7, 1.1, 0.05]);
        let u0 = DVector::from_vec(vec![0.3, -0.2, 0.5]);
        let target = DVector::from_vec(vec![0.1, 0.4, 0.2]);
        let prev = [0.25, 0.6];
        let w = CostWeights::default();
        let qp = assemble_qp(&lambda, &u0, &target, &prev, &w).unwrap();
        let cost = |a: &DVector<f64>| w.total(&(&u0 + &lambda * a), &target, a.as_slice(), &prev);
        let origin = DVector::zeros(2);
        for a in [[0.1, 0.2], [0.9, 0.0], [0.5, 0.5]] {
            let a = DVector::from_column_slice(&a);
            assert_relative_eq!(
                cost(&a) - cost(&origin),
                qp.objective(&a) - qp.objective(&origin),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let lambda = DMatrix::zeros(2, 2);
        let u = DVector::zeros(2);
        assert!(matches!(
            assemble_qp(&lambda, &u, &DVector::zeros(3), &[0.0; 2], &CostWeights::default()),
            Err(FdatError::DimensionMismatch { .. })
        ));
        let w = CostWeights { w_r: 0.0, ..CostWeights::default() };
        assert!(matches!(assemble_qp(&lambda, &u, &u, &[0.0; 2], &w), Err(FdatError::InvalidWeights(_))));
        let indefinite = BoxedQP {
            h: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            f: DVector::zeros(2),
            lower: DVector::zeros(2),
            upper: DVector::from_element(2, 1.0),
        };
        assert_eq!(qp_to_lcp(&indefinite).unwrap_err(), FdatError::NotPositiveDefinite);
    }
}
