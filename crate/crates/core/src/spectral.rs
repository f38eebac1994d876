//! Fourier-side calculus on the periodic unit cell.
//!
//! Coefficients are normalized so that `f(x) = Σ_k f̂(k) e^{i k·x}` with
//! `k = 2π m`, which makes Parseval read `∫ f² = Σ |f̂|²`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::field::{GridSpec, ScalarField, VelocityField};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Complex Fourier coefficients on the `n × n` mode lattice, same layout as
/// the physical grid (index `i * n + j` holds integer frequency
/// `(freq(i), freq(j))`).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    data: Vec<Complex64>,
}

impl SpectralField {
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// `Σ |f̂|² w(m)` over all modes.
    fn weighted_energy(&self, weight: impl Fn(usize) -> f64) -> f64 {
        self.data
            .iter()
            .enumerate()
            .map(|(p, c)| c.norm_sqr() * weight(p))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    L2,
    L4,
    Linf,
    H1,
    H2,
    H3,
}

/// FFT plans plus wavenumber tables for one grid. Immutable after
/// construction; the plans are shared `Arc<dyn Fft>` and safe to use from
/// several threads at once.
#[derive(Clone)]
pub struct Spectral {
    grid: GridSpec,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    /// signed integer frequency for each 1D index
    freq: Vec<i64>,
    dealias_enabled: bool,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("n", &self.grid.n())
            .field("dealias_enabled", &self.dealias_enabled)
            .finish()
    }
}

impl Spectral {
    pub fn new(grid: GridSpec) -> Self {
        let n = grid.n();
        let mut planner = FftPlanner::new();
        let freq = (0..n)
            .map(|j| if j <= n / 2 { j as i64 } else { j as i64 - n as i64 })
            .collect();
        Self {
            grid,
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
            freq,
            dealias_enabled: true,
        }
    }

    /// Toggles the 2/3-rule truncation applied by [`Spectral::stage`] and
    /// [`Spectral::product`]. [`Spectral::dealias`] itself always truncates.
    pub fn with_dealias(mut self, enabled: bool) -> Self {
        self.dealias_enabled = enabled;
        self
    }

    pub fn dealias_enabled(&self) -> bool {
        self.dealias_enabled
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Signed integer frequencies `(m₁, m₂)` of mode index `p`.
    pub fn mode(&self, p: usize) -> (i64, i64) {
        let n = self.grid.n();
        (self.freq[p / n], self.freq[p % n])
    }

    /// Physical wavenumbers `k = 2π m` of mode index `p`.
    pub fn wavenumber(&self, p: usize) -> (f64, f64) {
        let (m1, m2) = self.mode(p);
        (TWO_PI * m1 as f64, TWO_PI * m2 as f64)
    }

    /// Wavenumber used for odd-order derivatives: the Nyquist row/column has
    /// no real-valued odd derivative and is mapped to zero.
    fn odd_wavenumber(&self, m: i64) -> f64 {
        if 2 * m.unsigned_abs() as usize == self.grid.n() {
            0.0
        } else {
            TWO_PI * m as f64
        }
    }

    fn k_sq(&self, p: usize) -> f64 {
        let (k1, k2) = self.wavenumber(p);
        k1 * k1 + k2 * k2
    }

    fn transform_2d(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n();
        // rows (along x₂), then columns (along x₁) via transpose
        plan.process(data);
        transpose_in_place(data, n);
        plan.process(data);
        transpose_in_place(data, n);
    }

    pub fn forward(&self, f: &ScalarField) -> SpectralField {
        debug_assert_eq!(f.grid(), self.grid);
        let scale = 1.0 / self.grid.len() as f64;
        let mut data: Vec<Complex64> = f
            .as_slice()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        self.transform_2d(&mut data, &self.fft);
        for c in &mut data {
            *c *= scale;
        }
        SpectralField {
            grid: self.grid,
            data,
        }
    }

    /// Inverse transform; the (roundoff-level) imaginary part is discarded.
    pub fn inverse(&self, s: &SpectralField) -> ScalarField {
        let mut data = s.data.clone();
        self.transform_2d(&mut data, &self.ifft);
        ScalarField::from_vec(self.grid, data.into_iter().map(|c| c.re).collect())
    }

    /// Multiplier `(i k₁)^α₁ (i k₂)^α₂` applied in place.
    pub fn differentiate_in_place(&self, s: &mut SpectralField, alpha: (u32, u32)) {
        if alpha == (0, 0) {
            return;
        }
        let n = self.grid.n();
        let wn = |m: i64, order: u32| {
            if order % 2 == 1 {
                self.odd_wavenumber(m)
            } else {
                TWO_PI * m as f64
            }
        };
        let i_pow = Complex64::i().powu(alpha.0 + alpha.1);
        for (p, c) in s.data.iter_mut().enumerate() {
            let (m1, m2) = (self.freq[p / n], self.freq[p % n]);
            let mult = wn(m1, alpha.0).powi(alpha.0 as i32) * wn(m2, alpha.1).powi(alpha.1 as i32);
            *c *= i_pow * mult;
        }
    }

    pub fn differentiate(&self, s: &SpectralField, alpha: (u32, u32)) -> SpectralField {
        let mut out = s.clone();
        self.differentiate_in_place(&mut out, alpha);
        out
    }

    /// `∂^α f` for `α₁ + α₂ ≤ 3`.
    pub fn derivative(&self, f: &ScalarField, alpha: (u32, u32)) -> ScalarField {
        assert!(alpha.0 + alpha.1 <= 3, "derivative order above 3");
        let s = self.differentiate(&self.forward(f), alpha);
        self.inverse(&s)
    }

    pub fn gradient(&self, f: &ScalarField) -> [ScalarField; 2] {
        let s = self.forward(f);
        [
            self.inverse(&self.differentiate(&s, (1, 0))),
            self.inverse(&self.differentiate(&s, (0, 1))),
        ]
    }

    pub fn laplacian(&self, f: &ScalarField) -> ScalarField {
        let mut s = self.forward(f);
        for (p, c) in s.data.iter_mut().enumerate() {
            *c *= -self.k_sq(p);
        }
        self.inverse(&s)
    }

    /// `∂₁ v₁ + ∂₂ v₂` on the spectral side.
    pub fn divergence_spectral(&self, v1: &SpectralField, v2: &SpectralField) -> SpectralField {
        let mut out = self.differentiate(v1, (1, 0));
        let d2 = self.differentiate(v2, (0, 1));
        for (a, b) in out.data.iter_mut().zip(&d2.data) {
            *a += b;
        }
        out
    }

    pub fn divergence(&self, v: &VelocityField) -> ScalarField {
        let d = self.divergence_spectral(&self.forward(&v.u1), &self.forward(&v.u2));
        self.inverse(&d)
    }

    /// `max_k |k·v̂(k)|`, the spectral divergence defect.
    pub fn max_divergence_mode(&self, v: &VelocityField) -> f64 {
        let d = self.divergence_spectral(&self.forward(&v.u1), &self.forward(&v.u2));
        d.data.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Splits `(v̂₁, v̂₂)` in place into its solenoidal part and returns the
    /// gradient part. The mean mode is left in the solenoidal part.
    pub fn leray_project_spectral(
        &self,
        v1: &mut SpectralField,
        v2: &mut SpectralField,
    ) -> (SpectralField, SpectralField) {
        let n = self.grid.n();
        let mut g1 = SpectralField::zeros(self.grid);
        let mut g2 = SpectralField::zeros(self.grid);
        for p in 0..self.grid.len() {
            let k1 = self.odd_wavenumber(self.freq[p / n]);
            let k2 = self.odd_wavenumber(self.freq[p % n]);
            let kk = k1 * k1 + k2 * k2;
            if kk == 0.0 {
                continue;
            }
            let proj = (v1.data[p] * k1 + v2.data[p] * k2) / kk;
            g1.data[p] = proj * k1;
            g2.data[p] = proj * k2;
            v1.data[p] -= g1.data[p];
            v2.data[p] -= g2.data[p];
        }
        (g1, g2)
    }

    /// Returns `(P v, v − P v)` with `P` the Leray projector.
    pub fn leray_project(&self, v: &VelocityField) -> (VelocityField, VelocityField) {
        let mut s1 = self.forward(&v.u1);
        let mut s2 = self.forward(&v.u2);
        let (g1, g2) = self.leray_project_spectral(&mut s1, &mut s2);
        (
            VelocityField::new(self.inverse(&s1), self.inverse(&s2)),
            VelocityField::new(self.inverse(&g1), self.inverse(&g2)),
        )
    }

    /// `(−Δ + I)⁻¹ f`
    pub fn helmholtz_inverse(&self, f: &ScalarField) -> ScalarField {
        let mut s = self.forward(f);
        for (p, c) in s.data.iter_mut().enumerate() {
            *c /= 1.0 + self.k_sq(p);
        }
        self.inverse(&s)
    }

    /// `(−Δ + I) f`
    pub fn helmholtz(&self, f: &ScalarField) -> ScalarField {
        let mut s = self.forward(f);
        for (p, c) in s.data.iter_mut().enumerate() {
            *c *= 1.0 + self.k_sq(p);
        }
        self.inverse(&s)
    }

    fn is_retained(&self, p: usize) -> bool {
        let (m1, m2) = self.mode(p);
        let cut = self.grid.n() as u64;
        // max(|m₁|, |m₂|) ≤ n/3
        3 * m1.unsigned_abs().max(m2.unsigned_abs()) <= cut
    }

    pub fn dealias_spectral(&self, s: &mut SpectralField) {
        for (p, c) in s.data.iter_mut().enumerate() {
            if !self.is_retained(p) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Zeroes every mode with `max(|m₁|, |m₂|) > n/3`.
    pub fn dealias(&self, f: &ScalarField) -> ScalarField {
        let mut s = self.forward(f);
        self.dealias_spectral(&mut s);
        self.inverse(&s)
    }

    /// Closes one multiplication stage: dealiases if enabled, otherwise
    /// passes the field through untouched.
    pub fn stage(&self, f: ScalarField) -> ScalarField {
        if self.dealias_enabled {
            self.dealias(&f)
        } else {
            f
        }
    }

    /// Pointwise product followed by [`Spectral::stage`].
    pub fn product(&self, a: &ScalarField, b: &ScalarField) -> ScalarField {
        self.stage(a * b)
    }

    /// `Σ_{|α| ≤ m} ‖∂^α f‖²` with unordered multi-indices `α = (α₁, α₂)`.
    pub fn sobolev_sq(&self, f: &ScalarField, order: u32) -> f64 {
        self.sobolev_sq_spectral(&self.forward(f), order)
    }

    pub fn sobolev_sq_spectral(&self, s: &SpectralField, order: u32) -> f64 {
        s.weighted_energy(|p| {
            let (k1, k2) = self.wavenumber(p);
            let (a, b) = (k1 * k1, k2 * k2);
            let mut w = 0.0;
            for l in 0..=order {
                for a1 in 0..=l {
                    w += a.powi(a1 as i32) * b.powi((l - a1) as i32);
                }
            }
            w
        })
    }

    /// `Σ |k|^{2s} |f̂|²`, i.e. `‖(−Δ)^{s/2} f‖²`.
    pub fn homogeneous_sq_spectral(&self, s: &SpectralField, power: u32) -> f64 {
        s.weighted_energy(|p| self.k_sq(p).powi(power as i32))
    }

    pub fn norm(&self, f: &ScalarField, kind: NormKind) -> f64 {
        match kind {
            NormKind::L2 => self.sobolev_sq(f, 0).sqrt(),
            NormKind::H1 => self.sobolev_sq(f, 1).sqrt(),
            NormKind::H2 => self.sobolev_sq(f, 2).sqrt(),
            NormKind::H3 => self.sobolev_sq(f, 3).sqrt(),
            NormKind::L4 => f.map(|v| v.powi(4)).integral().powf(0.25),
            NormKind::Linf => f.max_abs(),
        }
    }

    /// Multiplies mode `p` by `mult(|k|²)`.
    pub fn apply_radial_multiplier(&self, s: &mut SpectralField, mult: impl Fn(f64) -> f64) {
        for (p, c) in s.data.iter_mut().enumerate() {
            *c *= mult(self.k_sq(p));
        }
    }
}

fn transpose_in_place(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}
