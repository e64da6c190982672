//! Shared oracles for the acceptance suite: dense composed-matrix
//! construction straight from the transform definitions, a dense
//! least-squares solve, and an operator-splitting solver for the l1
//! regression that is independent of the production IRLS/LSMR path.

use rustfft::num_complex::Complex64;

use anyrir::operators::StftConfig;

/// Dense complex matrix `diag(w) S X`, column-major: `cols[j]` holds the
/// response of RIR tap `j`. Built from the Toeplitz and DFT definitions,
/// not from the matrix-free operators.
pub struct DenseComposed {
    pub n_bins: usize,
    pub cols: Vec<Vec<Complex64>>,
}

pub fn dense_composed(
    x: &[f64],
    rir_len: usize,
    stft: StftConfig,
    out_len: usize,
    weights: Option<&[f64]>,
) -> DenseComposed {
    let n_dft = stft.n_dft();
    let fft_len = stft.fft_len();
    let frames = stft.frames_for(out_len);
    let padded = frames * n_dft;
    let n_bins = frames * fft_len;
    let scale = stft.scale();
    let mut cols = Vec::with_capacity(rir_len);
    for j in 0..rir_len {
        let mut t = vec![0.0; padded];
        for (i, &xv) in x.iter().enumerate() {
            if i + j < out_len {
                t[i + j] = xv;
            }
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n_bins];
        for f in 0..frames {
            for k in 0..fft_len {
                let mut acc = Complex64::new(0.0, 0.0);
                for tt in 0..n_dft {
                    let ang = -std::f64::consts::TAU * (k * tt) as f64 / fft_len as f64;
                    acc += Complex64::new(ang.cos(), ang.sin()) * t[f * n_dft + tt];
                }
                let w = weights.map_or(1.0, |w| w[f * fft_len + k]);
                col[f * fft_len + k] = acc * scale * w;
            }
        }
        cols.push(col);
    }
    DenseComposed { n_bins, cols }
}

impl DenseComposed {
    pub fn apply(&self, h: &[f64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_bins];
        for (col, &hv) in self.cols.iter().zip(h) {
            for (o, c) in out.iter_mut().zip(col) {
                *o += c * hv;
            }
        }
        out
    }

    /// `Re(C^H v)`, the gradient direction for a real unknown.
    pub fn adjoint_real(&self, v: &[Complex64]) -> Vec<f64> {
        self.cols
            .iter()
            .map(|col| col.iter().zip(v).map(|(c, vv)| (c.conj() * vv).re).sum())
            .collect()
    }

    /// Gram matrix `Re(C^H C)`, row-major.
    pub fn gram(&self) -> Vec<f64> {
        let n = self.cols.len();
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                g[i * n + j] = self.cols[i]
                    .iter()
                    .zip(&self.cols[j])
                    .map(|(a, b)| (a.conj() * b).re)
                    .sum();
            }
        }
        g
    }
}

/// Gaussian elimination with partial pivoting on a row-major matrix.
pub fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Vec<f64> {
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

/// Least-squares solution of the dense weighted system via the real
/// normal equations over stacked real/imaginary parts.
pub fn dense_least_squares(c: &DenseComposed, b: &[Complex64]) -> Vec<f64> {
    let n = c.cols.len();
    let gram = c.gram();
    let rhs = c.adjoint_real(b);
    solve_dense(gram, rhs, n)
}

pub struct AdmmResult {
    pub h: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Operator-splitting (alternating direction) solver for
/// `min_h sum_j |b_j - (C h)_j|` with real `h`: exact small least-squares
/// step plus complex soft thresholding. Independent of IRLS and LSMR.
pub fn admm_l1(c: &DenseComposed, b: &[Complex64], max_iters: usize) -> AdmmResult {
    let n = c.cols.len();
    let m = c.n_bins;
    let gram = c.gram();
    let b_norm = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let mut mags: Vec<f64> = b.iter().map(|v| v.norm()).filter(|&v| v > 0.0).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rho = if mags.is_empty() {
        1.0
    } else {
        1.0 / mags[mags.len() / 2]
    };

    let mut z = vec![Complex64::new(0.0, 0.0); m];
    let mut u = vec![Complex64::new(0.0, 0.0); m];
    let mut h = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..max_iters {
        iterations = it + 1;
        let target: Vec<Complex64> = b
            .iter()
            .zip(&z)
            .zip(&u)
            .map(|((bv, zv), uv)| bv - zv + uv)
            .collect();
        h = solve_dense(gram.clone(), c.adjoint_real(&target), n);
        let ch = c.apply(&h);
        let mut dual_sq = 0.0;
        let mut prim_sq = 0.0;
        let mut z_delta = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..m {
            let v = b[j] - ch[j] + u[j];
            let mag = v.norm();
            let shrink = (1.0 - 1.0 / (rho * mag.max(1e-300))).max(0.0);
            let z_new = v * shrink;
            z_delta[j] = z_new - z[j];
            z[j] = z_new;
            let r = b[j] - ch[j] - z[j];
            u[j] += r;
            prim_sq += r.norm_sqr();
        }
        let dual_vec = c.adjoint_real(&z_delta);
        for d in &dual_vec {
            dual_sq += d * d;
        }
        if prim_sq.sqrt() <= 1e-10 * b_norm.max(1.0) && rho * dual_sq.sqrt() <= 1e-10 {
            converged = true;
            break;
        }
    }
    let ch = c.apply(&h);
    let objective = b.iter().zip(&ch).map(|(bv, cv)| (bv - cv).norm()).sum();
    AdmmResult {
        h,
        objective,
        iterations,
        converged,
    }
}

pub fn rel_err_db(est: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = est
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let den: f64 = reference.iter().map(|v| v * v).sum();
    10.0 * (num / den).log10()
}
