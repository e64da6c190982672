//! Matrix-free LSMR for `min |A z - b|_2` (optionally damped).
//!
//! Implements the Golub-Kahan bidiagonalization recurrence of LSMR over a
//! [`LinearOperator`], storing O(rows + cols) state. The estimate of
//! `|A' r|` is non-increasing by construction, so the final iterate is the
//! minimum-`|A' r|` iterate.

use crate::error::{Error, Result};
use crate::linop::LinearOperator;

/// Solver tolerances and limits.
#[derive(Debug, Clone)]
pub struct LsmrOptions {
    /// Relative tolerance on `|A' r| / (|A| |r|)`.
    pub atol: f64,
    /// Relative tolerance on `|r| / |b|`.
    pub btol: f64,
    /// Stop when the condition estimate exceeds this.
    pub conlim: f64,
    /// Iteration cap; `None` means `4 * cols`.
    pub max_iters: Option<usize>,
    /// Tikhonov damping: solves `min |A z - b|^2 + damp^2 |z|^2`.
    pub damp: f64,
    /// Record per-iteration residual and normal-equation norms.
    pub record_history: bool,
}

impl Default for LsmrOptions {
    fn default() -> Self {
        Self {
            atol: 1e-6,
            btol: 1e-6,
            conlim: 1e8,
            max_iters: None,
            damp: 0.0,
            record_history: false,
        }
    }
}

/// Why the solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// `|r|` small relative to `|b|` plus `|A| |z|` (residual test).
    ConvergedResidual,
    /// `|A' r|` small relative to `|A| |r|` (normal-equation test).
    ConvergedNormalEq,
    /// Iteration cap reached.
    MaxIters,
    /// Condition estimate exceeded `conlim`.
    ConditionLimit,
    /// The right-hand side was identically zero.
    ZeroRhs,
}

/// Per-iteration diagnostics, recorded when `record_history` is set.
#[derive(Debug, Clone, Default)]
pub struct LsmrHistory {
    pub residual_norms: Vec<f64>,
    pub normal_eq_norms: Vec<f64>,
}

/// Solve outcome.
#[derive(Debug, Clone)]
pub struct LsmrResult {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// Estimate of `|b - A z|` at the solution.
    pub residual_norm: f64,
    /// Estimate of `|A' (b - A z)|` at the solution.
    pub normal_eq_norm: f64,
    /// Running estimate of cond(A).
    pub condition_estimate: f64,
    pub history: Option<LsmrHistory>,
}

/// Stable Givens rotation: returns (c, s, r) with c*a + s*b = r,
/// -s*a + c*b = 0.
fn sym_ortho(a: f64, b: f64) -> (f64, f64, f64) {
    if b == 0.0 {
        (if a < 0.0 { -1.0 } else { 1.0 }, 0.0, a.abs())
    } else if a == 0.0 {
        (0.0, if b < 0.0 { -1.0 } else { 1.0 }, b.abs())
    } else if b.abs() > a.abs() {
        let tau = a / b;
        let s = b.signum() / (1.0 + tau * tau).sqrt();
        let c = s * tau;
        (c, s, b / s)
    } else {
        let tau = b / a;
        let c = a.signum() / (1.0 + tau * tau).sqrt();
        let s = c * tau;
        (c, s, a / c)
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_finite(v: &[f64], context: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "non-finite value in {context} output"
        )))
    }
}

/// Run LSMR on `min |A z - b|` with the given operator pair.
///
/// Calls the operator at most `2 * (iterations + 1)` times (one forward
/// and one adjoint per iteration, plus one adjoint during setup).
pub fn lsmr_solve(
    op: &dyn LinearOperator,
    b: &[f64],
    opts: &LsmrOptions,
) -> Result<LsmrResult> {
    let m = op.rows();
    let n = op.cols();
    if b.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "rhs length {} != operator rows {m}",
            b.len()
        )));
    }
    let max_iters = opts.max_iters.unwrap_or(4 * n).max(1);
    let mut history = opts.record_history.then(LsmrHistory::default);

    let normb = norm2(b);
    if normb == 0.0 {
        return Ok(LsmrResult {
            solution: vec![0.0; n],
            iterations: 0,
            stop_reason: StopReason::ZeroRhs,
            residual_norm: 0.0,
            normal_eq_norm: 0.0,
            condition_estimate: 1.0,
            history,
        });
    }

    let damp = opts.damp;
    let ctol = if opts.conlim > 0.0 {
        1.0 / opts.conlim
    } else {
        0.0
    };

    // Golub-Kahan setup: beta_1 u_1 = b, alpha_1 v_1 = A' u_1.
    let mut beta = normb;
    let mut u: Vec<f64> = b.iter().map(|x| x / beta).collect();
    let mut v = op.adjoint(&u);
    check_finite(&v, "adjoint")?;
    let mut alpha = norm2(&v);
    if alpha > 0.0 {
        v.iter_mut().for_each(|x| *x /= alpha);
    } else {
        // A'b = 0: z = 0 already satisfies the normal equations
        return Ok(LsmrResult {
            solution: vec![0.0; n],
            iterations: 0,
            stop_reason: StopReason::ConvergedNormalEq,
            residual_norm: normb,
            normal_eq_norm: 0.0,
            condition_estimate: 1.0,
            history,
        });
    }

    let mut x = vec![0.0; n];
    let mut h = v.clone();
    let mut hbar = vec![0.0; n];

    // rotation state
    let mut zetabar = alpha * beta;
    let mut alphabar = alpha;
    let mut rho = 1.0;
    let mut rhobar = 1.0;
    let mut cbar = 1.0;
    let mut sbar = 0.0;

    // |r| estimation state
    let mut betadd = beta;
    let mut betad = 0.0;
    let mut rhodold = 1.0;
    let mut tautildeold = 0.0;
    let mut thetatilde = 0.0;
    let mut zeta = 0.0;
    let mut d = 0.0;

    // |A| and cond(A) estimation state
    let mut norm_a2 = alpha * alpha;
    let mut maxrbar = 0.0f64;
    let mut minrbar = 1e100f64;

    let mut normr;
    let mut normar;
    let mut cond_a;

    let mut iterations = 0;
    let stop_reason = loop {
        iterations += 1;

        // next bidiagonalization step
        let av = op.forward(&v);
        check_finite(&av, "forward")?;
        for (ui, avi) in u.iter_mut().zip(&av) {
            *ui = avi - alpha * *ui;
        }
        beta = norm2(&u);
        if beta > 0.0 {
            u.iter_mut().for_each(|x| *x /= beta);
            let atu = op.adjoint(&u);
            check_finite(&atu, "adjoint")?;
            for (vi, atui) in v.iter_mut().zip(&atu) {
                *vi = atui - beta * *vi;
            }
            alpha = norm2(&v);
            if alpha > 0.0 {
                v.iter_mut().for_each(|x| *x /= alpha);
            }
        }

        // fold the damping into the bidiagonal factor
        let (chat, shat, alphahat) = sym_ortho(alphabar, damp);

        // rotation eliminating the subdiagonal
        let rhoold = rho;
        let (c, s, rho_new) = sym_ortho(alphahat, beta);
        rho = rho_new;
        let thetanew = s * alpha;
        alphabar = c * alpha;

        // second rotation, acting on the transposed factor
        let rhobarold = rhobar;
        let zetaold = zeta;
        let thetabar = sbar * rho;
        let rhotemp = cbar * rho;
        let (cbar_new, sbar_new, rhobar_new) = sym_ortho(cbar * rho, thetanew);
        cbar = cbar_new;
        sbar = sbar_new;
        rhobar = rhobar_new;
        zeta = cbar * zetabar;
        zetabar *= -sbar;

        // solution update
        let hbar_coef = thetabar * rho / (rhoold * rhobarold);
        for (hb, hv) in hbar.iter_mut().zip(&h) {
            *hb = hv - hbar_coef * *hb;
        }
        let x_coef = zeta / (rho * rhobar);
        for (xi, hb) in x.iter_mut().zip(&hbar) {
            *xi += x_coef * hb;
        }
        let h_coef = thetanew / rho;
        for (hv, vi) in h.iter_mut().zip(&v) {
            *hv = vi - h_coef * *hv;
        }

        // |r| estimate
        let betaacute = chat * betadd;
        let betacheck = -shat * betadd;
        let betahat = c * betaacute;
        betadd = -s * betaacute;
        let thetatildeold = thetatilde;
        let (ctildeold, stildeold, rhotildeold) = sym_ortho(rhodold, thetabar);
        thetatilde = stildeold * rhobar;
        rhodold = ctildeold * rhobar;
        betad = -stildeold * betad + ctildeold * betahat;
        tautildeold = (zetaold - thetatildeold * tautildeold) / rhotildeold;
        let taud = (zeta - thetatilde * tautildeold) / rhodold;
        d += betacheck * betacheck;
        normr = (d + (betad - taud) * (betad - taud) + betadd * betadd).sqrt();

        // |A| and cond(A) estimates
        norm_a2 += beta * beta;
        let norm_a = norm_a2.sqrt();
        norm_a2 += alpha * alpha;
        maxrbar = maxrbar.max(rhobarold);
        if iterations > 1 {
            minrbar = minrbar.min(rhobarold);
        }
        cond_a = maxrbar.max(rhotemp) / minrbar.min(rhotemp);

        normar = zetabar.abs();
        let normx = norm2(&x);

        if let Some(hist) = history.as_mut() {
            hist.residual_norms.push(normr);
            hist.normal_eq_norms.push(normar);
        }

        // stopping rules, in the published order of precedence
        let test1 = normr / normb;
        let test2 = if norm_a * normr != 0.0 {
            normar / (norm_a * normr)
        } else {
            f64::INFINITY
        };
        let test3 = 1.0 / cond_a;
        let t1 = test1 / (1.0 + norm_a * normx / normb);
        let rtol = opts.btol + opts.atol * norm_a * normx / normb;

        if test1 <= rtol {
            break StopReason::ConvergedResidual;
        }
        if test2 <= opts.atol {
            break StopReason::ConvergedNormalEq;
        }
        if ctol > 0.0 && test3 <= ctol {
            break StopReason::ConditionLimit;
        }
        if 1.0 + t1 <= 1.0 {
            break StopReason::ConvergedResidual;
        }
        if 1.0 + test2 <= 1.0 {
            break StopReason::ConvergedNormalEq;
        }
        if 1.0 + test3 <= 1.0 {
            break StopReason::ConditionLimit;
        }
        if iterations >= max_iters {
            break StopReason::MaxIters;
        }
    };

    Ok(LsmrResult {
        solution: x,
        iterations,
        stop_reason,
        residual_norm: normr,
        normal_eq_norm: normar,
        condition_estimate: cond_a,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Dense row-major matrix as a LinearOperator, for oracles.
    pub(crate) struct DenseOp {
        pub rows: usize,
        pub cols: usize,
        pub a: Vec<f64>, // row-major rows x cols
    }

    impl LinearOperator for DenseOp {
        fn rows(&self) -> usize {
            self.rows
        }
        fn cols(&self) -> usize {
            self.cols
        }
        fn forward(&self, x: &[f64]) -> Vec<f64> {
            (0..self.rows)
                .map(|i| {
                    (0..self.cols)
                        .map(|j| self.a[i * self.cols + j] * x[j])
                        .sum()
                })
                .collect()
        }
        fn adjoint(&self, y: &[f64]) -> Vec<f64> {
            (0..self.cols)
                .map(|j| {
                    (0..self.rows)
                        .map(|i| self.a[i * self.cols + j] * y[i])
                        .sum()
                })
                .collect()
        }
    }

    /// Gaussian elimination with partial pivoting, for the dense oracle.
    pub(crate) fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Vec<f64> {
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| {
                    a[i * n + col]
                        .abs()
                        .partial_cmp(&a[j * n + col].abs())
                        .unwrap()
                })
                .unwrap();
            if pivot != col {
                for k in 0..n {
                    a.swap(col * n + k, pivot * n + k);
                }
                b.swap(col, pivot);
            }
            let p = a[col * n + col];
            for row in col + 1..n {
                let f = a[row * n + col] / p;
                for k in col..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let mut acc = b[row];
            for k in row + 1..n {
                acc -= a[row * n + k] * x[k];
            }
            x[row] = acc / a[row * n + row];
        }
        x
    }

    fn normal_equations_solution(op: &DenseOp, b: &[f64], damp: f64) -> Vec<f64> {
        let n = op.cols;
        let mut ata = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for r in 0..op.rows {
                    acc += op.a[r * n + i] * op.a[r * n + j];
                }
                if i == j {
                    acc += damp * damp;
                }
                ata[i * n + j] = acc;
            }
        }
        let atb = op.adjoint(b);
        solve_dense(ata, atb, n)
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let den: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        num / den.max(1e-300)
    }

    fn random_dense(rng: &mut crate::signal::Rng, rows: usize, cols: usize) -> DenseOp {
        DenseOp {
            rows,
            cols,
            a: rng.normal_vec(rows * cols),
        }
    }

    #[test]
    fn test_identity_system() {
        let op = DenseOp {
            rows: 3,
            cols: 3,
            a: vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        };
        let r = lsmr_solve(&op, &[3.0, -1.0, 2.0], &LsmrOptions::default()).unwrap();
        assert!(r.iterations <= 2, "took {} iterations", r.iterations);
        for (got, want) in r.solution.iter().zip(&[3.0, -1.0, 2.0]) {
            assert_relative_eq!(got, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn test_diagonal_system() {
        let op = DenseOp {
            rows: 3,
            cols: 3,
            a: vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 4.0],
        };
        let r = lsmr_solve(&op, &[1.0, 4.0, 16.0], &LsmrOptions::default()).unwrap();
        for (got, want) in r.solution.iter().zip(&[1.0, 2.0, 4.0]) {
            assert!((got - want).abs() < 1e-8);
        }
    }

    #[test]
    fn test_matches_normal_equations_oracle() {
        let mut rng = crate::signal::Rng::new(31);
        let op = random_dense(&mut rng, 40, 20);
        let b = rng.normal_vec(40);
        let opts = LsmrOptions {
            atol: 1e-10,
            btol: 1e-10,
            ..Default::default()
        };
        let r = lsmr_solve(&op, &b, &opts).unwrap();
        let oracle = normal_equations_solution(&op, &b, 0.0);
        assert!(
            rel_err(&r.solution, &oracle) < 1e-6,
            "err {}",
            rel_err(&r.solution, &oracle)
        );
    }

    #[test]
    fn test_damped_matches_damped_normal_equations() {
        let mut rng = crate::signal::Rng::new(37);
        let op = random_dense(&mut rng, 40, 20);
        let b = rng.normal_vec(40);
        let damp = 0.7;
        let opts = LsmrOptions {
            atol: 1e-12,
            btol: 1e-12,
            damp,
            ..Default::default()
        };
        let r = lsmr_solve(&op, &b, &opts).unwrap();
        let oracle = normal_equations_solution(&op, &b, damp);
        assert!(
            rel_err(&r.solution, &oracle) < 1e-6,
            "err {}",
            rel_err(&r.solution, &oracle)
        );
    }

    #[test]
    fn test_consistent_system_recovery() {
        for seed in [1u64, 2, 3, 4, 5] {
            let mut rng = crate::signal::Rng::new(seed);
            let op = random_dense(&mut rng, 60, 25);
            let z_true = rng.normal_vec(25);
            let b = op.forward(&z_true);
            let r = lsmr_solve(&op, &b, &LsmrOptions::default()).unwrap();
            assert!(
                rel_err(&r.solution, &z_true) <= 1e-5,
                "seed {seed}: err {}",
                rel_err(&r.solution, &z_true)
            );
        }
    }

    #[test]
    fn test_normal_eq_norm_monotone() {
        let mut rng = crate::signal::Rng::new(41);
        let op = random_dense(&mut rng, 50, 30);
        let b = rng.normal_vec(50);
        let opts = LsmrOptions {
            record_history: true,
            atol: 1e-14,
            btol: 1e-14,
            ..Default::default()
        };
        let r = lsmr_solve(&op, &b, &opts).unwrap();
        let hist = r.history.unwrap();
        for w in hist.normal_eq_norms.windows(2) {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-12),
                "normal-equation norm increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn test_operator_call_budget() {
        struct Counting<'a> {
            inner: &'a DenseOp,
            forwards: AtomicUsize,
            adjoints: AtomicUsize,
        }
        impl LinearOperator for Counting<'_> {
            fn rows(&self) -> usize {
                self.inner.rows
            }
            fn cols(&self) -> usize {
                self.inner.cols
            }
            fn forward(&self, x: &[f64]) -> Vec<f64> {
                self.forwards.fetch_add(1, Ordering::Relaxed);
                self.inner.forward(x)
            }
            fn adjoint(&self, y: &[f64]) -> Vec<f64> {
                self.adjoints.fetch_add(1, Ordering::Relaxed);
                self.inner.adjoint(y)
            }
        }
        let mut rng = crate::signal::Rng::new(43);
        let op = random_dense(&mut rng, 30, 12);
        let counting = Counting {
            inner: &op,
            forwards: AtomicUsize::new(0),
            adjoints: AtomicUsize::new(0),
        };
        let b = rng.normal_vec(30);
        let r = lsmr_solve(&counting, &b, &LsmrOptions::default()).unwrap();
        let calls =
            counting.forwards.load(Ordering::Relaxed) + counting.adjoints.load(Ordering::Relaxed);
        assert!(
            calls <= 2 * (r.iterations + 1),
            "{calls} calls for {} iterations",
            r.iterations
        );
    }

    #[test]
    fn test_zero_rhs() {
        let op = DenseOp {
            rows: 4,
            cols: 2,
            a: vec![1.0; 8],
        };
        let r = lsmr_solve(&op, &[0.0; 4], &LsmrOptions::default()).unwrap();
        assert_eq!(r.stop_reason, StopReason::ZeroRhs);
        assert!(r.solution.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn test_non_finite_operator_output() {
        struct BadOp;
        impl LinearOperator for BadOp {
            fn rows(&self) -> usize {
                2
            }
            fn cols(&self) -> usize {
                2
            }
            fn forward(&self, _x: &[f64]) -> Vec<f64> {
                vec![f64::NAN, 0.0]
            }
            fn adjoint(&self, y: &[f64]) -> Vec<f64> {
                y.to_vec()
            }
        }
        assert!(lsmr_solve(&BadOp, &[1.0, 1.0], &LsmrOptions::default()).is_err());
    }

    #[test]
    fn test_max_iters_stop() {
        let mut rng = crate::signal::Rng::new(47);
        let op = random_dense(&mut rng, 50, 30);
        let b = rng.normal_vec(50);
        let opts = LsmrOptions {
            max_iters: Some(3),
            atol: 1e-16,
            btol: 1e-16,
            ..Default::default()
        };
        let r = lsmr_solve(&op, &b, &opts).unwrap();
        assert_eq!(r.stop_reason, StopReason::MaxIters);
        assert_eq!(r.iterations, 3);
    }
}
