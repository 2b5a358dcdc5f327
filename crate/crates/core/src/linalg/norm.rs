//! Matrix-free estimate of the largest singular value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{vec_ops, LinalgError};

/// A linear map exposed only through its action and the action of its adjoint.
pub trait LinearOperator {
    type Error: From<LinalgError>;

    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, Self::Error>;
    fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>, Self::Error>;
}

/// Adapts a pair of closures to [`LinearOperator`].
pub struct FnOperator<F, G> {
    dim_in: usize,
    dim_out: usize,
    forward: F,
    adjoint: G,
}

impl<F, G> FnOperator<F, G> {
    pub fn new(dim_in: usize, dim_out: usize, forward: F, adjoint: G) -> Self {
        Self {
            dim_in,
            dim_out,
            forward,
            adjoint,
        }
    }
}

impl<F, G, E> LinearOperator for FnOperator<F, G>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, E>,
    G: Fn(&[f64]) -> Result<Vec<f64>, E>,
    E: From<LinalgError>,
{
    type Error = E;

    fn dim_in(&self) -> usize {
        self.dim_in
    }
    fn dim_out(&self) -> usize {
        self.dim_out
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, E> {
        (self.forward)(x)
    }
    fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>, E> {
        (self.adjoint)(y)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PowerIterationOptions {
    /// Relative tolerance on the extrapolated remaining change.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Verify `<Av, w> = <v, Aᵀw>` on one random pair before iterating.
    pub check_adjoint: bool,
}

impl Default for PowerIterationOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 10_000,
            seed: 0x5eed_1234,
            check_adjoint: true,
        }
    }
}

const ADJOINT_RTOL: f64 = 1e-10;

/// Largest singular value of `op` by power iteration on `AᵀA`.
///
/// Each step estimates `sigma_k = sqrt(|AᵀA x_k|)` for unit `x_k`, a monotone
/// lower bound on the true value. Iteration stops once the geometric
/// extrapolation of the remaining increase, `d_k * rho / (1 - rho)` with
/// `rho = d_k / d_{k-1}`, drops below `tol * sigma_k`.
pub fn largest_singular_value<O: LinearOperator>(op: &O, opts: &PowerIterationOptions) -> Result<f64, O::Error> {
    let (n, m) = (op.dim_in(), op.dim_out());
    if n == 0 || m == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut random_vec = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect() };

    if opts.check_adjoint {
        let v = random_vec(n);
        let w = random_vec(m);
        let av = op.apply(&v)?;
        let atw = op.apply_adjoint(&w)?;
        check_len("apply", av.len(), m)?;
        check_len("apply_adjoint", atw.len(), n)?;
        let lhs = vec_ops::dot(&av, &w);
        let rhs = vec_ops::dot(&v, &atw);
        let scale = vec_ops::norm2(&av) * vec_ops::norm2(&w) + vec_ops::norm2(&v) * vec_ops::norm2(&atw);
        let tolerance = ADJOINT_RTOL * scale;
        let gap = (lhs - rhs).abs();
        if gap > tolerance {
            return Err(LinalgError::AdjointMismatch { gap, tolerance }.into());
        }
    }

    let mut x = random_vec(n);
    let nx = vec_ops::norm2(&x);
    vec_ops::scale(1.0 / nx, &mut x);

    let mut sigma_prev = 0.0f64;
    let mut delta_prev: Option<f64> = None;
    let mut last_est = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let y = op.apply(&x)?;
        let mut z = op.apply_adjoint(&y)?;
        let zn = vec_ops::norm2(&z);
        if zn == 0.0 {
            // x lies in the null space: only possible for the zero operator
            // with a generic start vector.
            return Ok(vec_ops::norm2(&y));
        }
        let sigma = zn.sqrt();
        vec_ops::scale(1.0 / zn, &mut z);
        x = z;

        if it >= 2 {
            let delta = sigma - sigma_prev;
            last_est = match delta_prev {
                Some(dp) if dp > 0.0 && delta >= 0.0 && delta < dp => {
                    let rho = delta / dp;
                    delta * rho / (1.0 - rho)
                }
                _ => delta.abs(),
            };
            if last_est <= opts.tol * sigma {
                return Ok(sigma);
            }
            delta_prev = Some(delta);
        }
        sigma_prev = sigma;
    }
    Err(LinalgError::NoConvergence {
        method: "power iteration",
        iterations: opts.max_iter,
        residual: last_est / sigma_prev.max(f64::MIN_POSITIVE),
    }
    .into())
}

fn check_len(what: &'static str, got: usize, want: usize) -> Result<(), LinalgError> {
    if got == want {
        Ok(())
    } else {
        Err(LinalgError::Shape {
            op: what,
            detail: format!("operator returned length {got}, expected {want}"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{thin_svd, DenseMatrix};

    fn dense_op(a: &DenseMatrix) -> impl LinearOperator<Error = LinalgError> + '_ {
        FnOperator::new(
            a.cols(),
            a.rows(),
            move |x: &[f64]| Ok::<_, LinalgError>(a.matvec(x)),
            move |y: &[f64]| Ok::<_, LinalgError>(a.tr_matvec(y)),
        )
    }

    #[test]
    fn identity_is_one() {
        let a = DenseMatrix::identity(5);
        let s = largest_singular_value(&dense_op(&a), &Default::default()).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal() {
        let a = DenseMatrix::from_diag(&[3.0, 2.0, 1.0]);
        let s = largest_singular_value(&dense_op(&a), &Default::default()).unwrap();
        assert!((s - 3.0).abs() < 3e-8);
    }

    #[test]
    fn matches_svd_on_rectangular() {
        let a = DenseMatrix::from_fn(7, 4, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0);
        let s = largest_singular_value(&dense_op(&a), &Default::default()).unwrap();
        let exact = thin_svd(&a).unwrap().sigma[0];
        assert!(((s - exact) / exact).abs() < 1e-8);
    }

    #[test]
    fn zero_operator() {
        let a = DenseMatrix::zeros(3, 3);
        assert_eq!(largest_singular_value(&dense_op(&a), &Default::default()).unwrap(), 0.0);
    }

    #[test]
    fn wrong_adjoint_detected() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        let op = FnOperator::new(
            2,
            2,
            |x: &[f64]| Ok::<_, LinalgError>(a.matvec(x)),
            |y: &[f64]| Ok::<_, LinalgError>(a.matvec(y)),
        );
        assert!(matches!(
            largest_singular_value(&op, &Default::default()),
            Err(LinalgError::AdjointMismatch { .. })
        ));
    }

    #[test]
    fn iteration_cap_reported() {
        let a = DenseMatrix::from_diag(&[1.0, 0.999_999]);
        let opts = PowerIterationOptions {
            max_iter: 3,
            tol: 1e-15,
            ..Default::default()
        };
        assert!(matches!(
            largest_singular_value(&dense_op(&a), &opts),
            Err(LinalgError::NoConvergence { .. })
        ));
    }
}
