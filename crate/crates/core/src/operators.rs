//! Matrix-free forward and adjoint operators.
//!
//! Three pieces compose the regression operator used by the estimator:
//!
//! * [`ConvOperator`] — FFT convolution by a fixed excitation and its
//!   adjoint (correlation with the time-reversed excitation), never
//!   forming the Toeplitz matrix.
//! * The boxcar, no-overlap, zero-padded STFT ([`stft_forward`] /
//!   [`stft_adjoint`]), scaled so the transform is an exact isometry and
//!   the inverse acts as the adjoint.
//! * [`WeightedTfOperator`] — the weighted composition mapping an RIR
//!   candidate `h` to the stacked real/imaginary parts of
//!   `w .* S(X h)`, which is what the least-squares solver consumes.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::Fft;

use crate::error::{Error, Result};
use crate::linop::LinearOperator;

/// Short-time transform configuration: frame length `n_dft`, transform
/// length `2 * n_dft` (zero-padded), scale `1/sqrt(fft_len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    n_dft: usize,
}

impl StftConfig {
    pub fn new(n_dft: usize) -> Result<Self> {
        if n_dft == 0 {
            return Err(Error::InvalidArgument("n_dft must be > 0".into()));
        }
        Ok(Self { n_dft })
    }

    pub fn n_dft(&self) -> usize {
        self.n_dft
    }

    /// Zero-padded transform length (two times the frame length).
    pub fn fft_len(&self) -> usize {
        2 * self.n_dft
    }

    /// Isometry scale applied to the unnormalized DFT.
    pub fn scale(&self) -> f64 {
        1.0 / (self.fft_len() as f64).sqrt()
    }

    /// Number of frames covering `source_len` samples.
    pub fn frames_for(&self, source_len: usize) -> usize {
        source_len.div_ceil(self.n_dft)
    }

    /// Length after padding to a whole number of frames.
    pub fn padded_len(&self, source_len: usize) -> usize {
        self.frames_for(source_len) * self.n_dft
    }
}

impl Default for StftConfig {
    /// The production default frame length of 256 samples.
    fn default() -> Self {
        Self { n_dft: 256 }
    }
}

/// Complex time-frequency matrix, `frames x fft_len`, two-sided spectrum.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    bins: Vec<Complex64>,
    config: StftConfig,
    source_len: usize,
}

impl Spectrogram {
    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn frames(&self) -> usize {
        self.config.frames_for(self.source_len)
    }

    pub fn fft_len(&self) -> usize {
        self.config.fft_len()
    }

    /// Pre-padding length of the originating signal.
    pub fn source_len(&self) -> usize {
        self.source_len
    }

    /// Row-major bins, `frames x fft_len`.
    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn bin(&self, frame: usize, k: usize) -> Complex64 {
        self.bins[frame * self.config.fft_len() + k]
    }

    /// Elementwise magnitudes in the same row-major layout.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.bins.iter().map(|c| c.norm()).collect()
    }

    /// Largest bin magnitude (0 for an empty spectrogram).
    pub fn max_magnitude(&self) -> f64 {
        self.bins.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Squared Frobenius norm.
    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Smallest 5-smooth (2^a 3^b 5^c) integer >= `n`; fast FFT sizes.
pub fn next_fast_len(n: usize) -> usize {
    if n <= 1 {
        return 1;
    }
    let mut best = usize::MAX;
    let mut p5 = 1usize;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            // smallest power of two lifting p35 to >= n
            let mut candidate = p35;
            while candidate < n {
                match candidate.checked_mul(2) {
                    Some(c) => candidate = c,
                    None => break,
                }
            }
            if candidate >= n && candidate < best {
                best = candidate;
            }
            match p35.checked_mul(3) {
                Some(next) => p35 = next,
                None => break,
            }
        }
        match p5.checked_mul(5) {
            Some(next) => p5 = next,
            None => break,
        }
    }
    best
}

fn plan_pair(len: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let mut planner = rustfft::FftPlanner::new();
    (
        planner.plan_fft_forward(len),
        planner.plan_fft_inverse(len),
    )
}

// ---------------------------------------------------------------------------
// FFT convolution
// ---------------------------------------------------------------------------

/// First `out_len` samples of the full linear convolution `x * h`.
///
/// The FFT length is the smallest fast size covering the full convolution,
/// so circular wrap never contaminates the result.
pub fn fft_convolve(x: &[f64], h: &[f64], out_len: usize) -> Result<Vec<f64>> {
    let full = full_conv_len(x.len(), h.len());
    if out_len > full {
        return Err(Error::InvalidArgument(format!(
            "out_len {out_len} exceeds full convolution length {full}"
        )));
    }
    if x.is_empty() || h.is_empty() {
        return Ok(vec![0.0; out_len]);
    }
    let m_fft = next_fast_len(full);
    let (fwd, inv) = plan_pair(m_fft);
    let sx = spectrum_of(x, m_fft, fwd.as_ref());
    let sh = spectrum_of(h, m_fft, fwd.as_ref());
    let mut prod: Vec<Complex64> = sx.iter().zip(&sh).map(|(a, b)| a * b).collect();
    inv.process(&mut prod);
    let scale = 1.0 / m_fft as f64;
    Ok(prod[..out_len].iter().map(|c| c.re * scale).collect())
}

/// Adjoint of convolution by `x`: correlation of `y` with `x`, truncated
/// to `out_len` lags. Exactly the transpose of [`fft_convolve`] under the
/// standard inner product.
pub fn fft_convolve_adjoint(x: &[f64], y: &[f64], out_len: usize) -> Result<Vec<f64>> {
    if x.is_empty() || y.is_empty() {
        return Ok(vec![0.0; out_len]);
    }
    let full = full_conv_len(x.len(), out_len);
    let m_fft = next_fast_len(full.max(y.len()));
    let (fwd, inv) = plan_pair(m_fft);
    let sx = spectrum_of(x, m_fft, fwd.as_ref());
    let sy = spectrum_of(y, m_fft, fwd.as_ref());
    let mut prod: Vec<Complex64> = sx.iter().zip(&sy).map(|(a, b)| a.conj() * b).collect();
    inv.process(&mut prod);
    let scale = 1.0 / m_fft as f64;
    Ok(prod[..out_len].iter().map(|c| c.re * scale).collect())
}

fn full_conv_len(a: usize, b: usize) -> usize {
    if a == 0 || b == 0 {
        0
    } else {
        a + b - 1
    }
}

fn spectrum_of(x: &[f64], m_fft: usize, fwd: &dyn Fft<f64>) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); m_fft];
    for (b, &v) in buf.iter_mut().zip(x) {
        b.re = v;
    }
    fwd.process(&mut buf);
    buf
}

/// Matrix-free convolution by a fixed excitation: `h -> x * h` truncated
/// or zero-padded to a fixed output length, plus the exact adjoint.
///
/// The adjoint multiplies by the conjugate excitation spectrum, which is
/// the spectrum of the circularly time-reversed excitation.
pub struct ConvOperator {
    excitation_len: usize,
    rir_len: usize,
    out_len: usize,
    full_len: usize,
    m_fft: usize,
    spectrum: Vec<Complex64>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl ConvOperator {
    /// `out_len` defaults to the full convolution length `L + N - 1` and
    /// may be larger (the result is zero-padded), never smaller.
    pub fn new(excitation: &[f64], rir_len: usize, out_len: Option<usize>) -> Result<Self> {
        if excitation.is_empty() || rir_len == 0 {
            return Err(Error::InvalidArgument(
                "excitation and rir_len must be non-empty".into(),
            ));
        }
        if !excitation.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteInput {
                context: "ConvOperator excitation".into(),
            });
        }
        let full_len = excitation.len() + rir_len - 1;
        let out_len = out_len.unwrap_or(full_len);
        if out_len < full_len {
            return Err(Error::InvalidArgument(format!(
                "out_len {out_len} below full convolution length {full_len}"
            )));
        }
        let m_fft = next_fast_len(full_len);
        let (fft_fwd, fft_inv) = plan_pair(m_fft);
        let spectrum = spectrum_of(excitation, m_fft, fft_fwd.as_ref());
        Ok(Self {
            excitation_len: excitation.len(),
            rir_len,
            out_len,
            full_len,
            m_fft,
            spectrum,
            fft_fwd,
            fft_inv,
        })
    }

    pub fn excitation_len(&self) -> usize {
        self.excitation_len
    }

    pub fn rir_len(&self) -> usize {
        self.rir_len
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }
}

impl LinearOperator for ConvOperator {
    fn rows(&self) -> usize {
        self.out_len
    }

    fn cols(&self) -> usize {
        self.rir_len
    }

    fn forward(&self, h: &[f64]) -> Vec<f64> {
        assert_eq!(h.len(), self.rir_len, "RIR length mismatch");
        let mut buf = vec![Complex64::new(0.0, 0.0); self.m_fft];
        for (b, &v) in buf.iter_mut().zip(h) {
            b.re = v;
        }
        self.fft_fwd.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.fft_inv.process(&mut buf);
        let scale = 1.0 / self.m_fft as f64;
        let mut out = vec![0.0; self.out_len];
        for (o, c) in out.iter_mut().zip(&buf[..self.full_len]) {
            *o = c.re * scale;
        }
        out
    }

    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.out_len, "recording length mismatch");
        let mut buf = vec![Complex64::new(0.0, 0.0); self.m_fft];
        // samples beyond the full convolution length lie outside the
        // operator's range and contribute nothing
        for (b, &v) in buf.iter_mut().zip(&y[..self.full_len.min(y.len())]) {
            b.re = v;
        }
        self.fft_fwd.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b = s.conj() * *b;
        }
        self.fft_inv.process(&mut buf);
        let scale = 1.0 / self.m_fft as f64;
        buf[..self.rir_len].iter().map(|c| c.re * scale).collect()
    }
}

// ---------------------------------------------------------------------------
// STFT
// ---------------------------------------------------------------------------

/// Boxcar, no-overlap, zero-padded STFT scaled to be an isometry.
pub fn stft_forward(samples: &[f64], config: StftConfig) -> Spectrogram {
    let (fwd, _) = plan_pair(config.fft_len());
    let bins = stft_bins(samples, config, fwd.as_ref());
    Spectrogram {
        bins,
        config,
        source_len: samples.len(),
    }
}

fn stft_bins(samples: &[f64], config: StftConfig, fwd: &dyn Fft<f64>) -> Vec<Complex64> {
    let n_dft = config.n_dft();
    let fft_len = config.fft_len();
    let frames = config.frames_for(samples.len());
    let scale = config.scale();
    let mut bins = vec![Complex64::new(0.0, 0.0); frames * fft_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
    for f in 0..frames {
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        let start = f * n_dft;
        let end = (start + n_dft).min(samples.len());
        for (b, &v) in buf.iter_mut().zip(&samples[start..end]) {
            b.re = v;
        }
        fwd.process(&mut buf);
        for (out, c) in bins[f * fft_len..(f + 1) * fft_len].iter_mut().zip(&buf) {
            *out = c * scale;
        }
    }
    bins
}

/// Adjoint of [`stft_forward`]: real part of the scaled inverse transform,
/// truncated to `n_dft` samples per frame. Length `frames * n_dft`.
///
/// Because the forward transform is an isometry, this is also a perfect
/// reconstruction of the zero-padded input.
pub fn stft_adjoint(spec: &Spectrogram) -> Vec<f64> {
    let (_, inv) = plan_pair(spec.fft_len());
    stft_adjoint_bins(spec.bins(), spec.config, spec.frames(), inv.as_ref())
}

fn stft_adjoint_bins(
    bins: &[Complex64],
    config: StftConfig,
    frames: usize,
    inv: &dyn Fft<f64>,
) -> Vec<f64> {
    let n_dft = config.n_dft();
    let fft_len = config.fft_len();
    assert_eq!(bins.len(), frames * fft_len, "spectrogram shape mismatch");
    let scale = config.scale();
    let mut out = vec![0.0; frames * n_dft];
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
    for f in 0..frames {
        buf.copy_from_slice(&bins[f * fft_len..(f + 1) * fft_len]);
        inv.process(&mut buf);
        for (o, c) in out[f * n_dft..(f + 1) * n_dft].iter_mut().zip(&buf) {
            *o = c.re * scale;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Weighted composed operator
// ---------------------------------------------------------------------------

/// The weighted regression operator `h -> stack(Re, Im)(w .* S(X h))`.
///
/// Maps a real RIR candidate of length N to a real vector of length
/// `2 * frames * fft_len` (real parts of all bins, then imaginary parts).
pub struct WeightedTfOperator {
    conv: ConvOperator,
    stft: StftConfig,
    weights: Vec<f64>,
    frames: usize,
    stft_fwd: Arc<dyn Fft<f64>>,
    stft_inv: Arc<dyn Fft<f64>>,
}

impl WeightedTfOperator {
    /// `weights` must be `frames x fft_len` row-major, nonnegative and
    /// finite; `None` means uniform weight 1.
    pub fn new(conv: ConvOperator, stft: StftConfig, weights: Option<Vec<f64>>) -> Result<Self> {
        let frames = stft.frames_for(conv.out_len());
        let n_bins = frames * stft.fft_len();
        let weights = weights.unwrap_or_else(|| vec![1.0; n_bins]);
        if weights.len() != n_bins {
            return Err(Error::DimensionMismatch(format!(
                "weights length {} != frames*fft_len {}",
                weights.len(),
                n_bins
            )));
        }
        if !weights.iter().all(|w| w.is_finite() && *w >= 0.0) {
            return Err(Error::InvalidArgument(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let (stft_fwd, stft_inv) = plan_pair(stft.fft_len());
        Ok(Self {
            conv,
            stft,
            weights,
            frames,
            stft_fwd,
            stft_inv,
        })
    }

    pub fn conv(&self) -> &ConvOperator {
        &self.conv
    }

    pub fn stft(&self) -> StftConfig {
        self.stft
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn n_bins(&self) -> usize {
        self.frames * self.stft.fft_len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Swap in a new weight matrix of the same shape.
    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.n_bins() {
            return Err(Error::DimensionMismatch(format!(
                "weights length {} != {}",
                weights.len(),
                self.n_bins()
            )));
        }
        if !weights.iter().all(|w| w.is_finite() && *w >= 0.0) {
            return Err(Error::InvalidArgument(
                "weights must be finite and nonnegative".into(),
            ));
        }
        self.weights = weights;
        Ok(())
    }

    /// Complex bins of `S(applied to samples)` using this operator's plan;
    /// samples are zero-padded to this operator's frame count.
    pub fn spectrogram_of(&self, samples: &[f64]) -> Spectrogram {
        assert!(samples.len() <= self.conv.out_len());
        let mut padded;
        let view = if samples.len() == self.conv.out_len() {
            samples
        } else {
            padded = samples.to_vec();
            padded.resize(self.conv.out_len(), 0.0);
            &padded[..]
        };
        Spectrogram {
            bins: stft_bins(view, self.stft, self.stft_fwd.as_ref()),
            config: self.stft,
            source_len: self.conv.out_len(),
        }
    }

    /// Stacked weighted bins `stack(Re, Im)(w .* Z)` for a spectrogram of
    /// matching shape. This is the right-hand side builder for the
    /// least-squares subproblem when applied to `S y`.
    pub fn stack_weighted(&self, spec: &Spectrogram) -> Vec<f64> {
        let n = self.n_bins();
        assert_eq!(spec.bins().len(), n, "spectrogram shape mismatch");
        let mut out = vec![0.0; 2 * n];
        for (j, (c, w)) in spec.bins().iter().zip(&self.weights).enumerate() {
            out[j] = w * c.re;
            out[n + j] = w * c.im;
        }
        out
    }
}

impl LinearOperator for WeightedTfOperator {
    fn rows(&self) -> usize {
        2 * self.n_bins()
    }

    fn cols(&self) -> usize {
        self.conv.rir_len()
    }

    fn forward(&self, h: &[f64]) -> Vec<f64> {
        let y = self.conv.forward(h);
        let bins = stft_bins(&y, self.stft, self.stft_fwd.as_ref());
        let n = self.n_bins();
        let mut out = vec![0.0; 2 * n];
        for (j, (c, w)) in bins.iter().zip(&self.weights).enumerate() {
            out[j] = w * c.re;
            out[n + j] = w * c.im;
        }
        out
    }

    fn adjoint(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n_bins();
        assert_eq!(u.len(), 2 * n, "stacked vector length mismatch");
        let weighted: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new(self.weights[j] * u[j], self.weights[j] * u[n + j]))
            .collect();
        let padded = stft_adjoint_bins(&weighted, self.stft, self.frames, self.stft_inv.as_ref());
        self.conv.adjoint(&padded[..self.conv.out_len()])
    }
}
