//! Grid geometry, field containers, material coefficients and seeded
//! initial data on the unit periodic cell `[0,1)²`.
//!
//! Fields are stored row-major: the value at `(x₁, x₂) = (i/n, j/n)` lives at
//! index `i * n + j`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("grid resolution {0} must be a power of two and at least 8")]
    BadResolution(usize),
    #[error("grid point ({0}, {1}) outside a {2}x{2} grid")]
    OutOfRange(usize, usize, usize),
    #[error("target L-infinity norm must be positive, got {0}")]
    NonPositiveTarget(f64),
    #[error("max_mode {max_mode} must be below n/3 = {limit}")]
    ModeTooHigh { max_mode: usize, limit: usize },
    #[error("grid mismatch: {0} vs {1}")]
    GridMismatch(usize, usize),
}

/// Uniform `n × n` grid on the unit periodic cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
}

impl GridSpec {
    pub fn new(n: usize) -> Result<Self, FieldError> {
        if n < 8 || !n.is_power_of_two() {
            return Err(FieldError::BadResolution(n));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn index(&self, i: usize, j: usize) -> Result<usize, FieldError> {
        if i >= self.n || j >= self.n {
            return Err(FieldError::OutOfRange(i, j, self.n));
        }
        Ok(i * self.n + j)
    }

    /// Midpoint-free rectangle rule; exact for trigonometric polynomials of
    /// degree below `n`. The cell has measure 1, so this is also the mean.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<(), FieldError> {
        if self.n != other.n {
            return Err(FieldError::GridMismatch(self.n, other.n));
        }
        Ok(())
    }
}

/// Real scalar field sampled on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            data: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            data: vec![value; grid.len()],
        }
    }

    /// Samples `f(x₁, x₂)` at the grid nodes.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut data = Vec::with_capacity(grid.len());
        for i in 0..n {
            let x1 = grid.coord(i);
            for j in 0..n {
                data.push(f(x1, grid.coord(j)));
            }
        }
        Self { grid, data }
    }

    pub fn from_vec(grid: GridSpec, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), grid.len(), "field length does not match grid");
        Self { grid, data }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.grid.n() + j]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }
}

impl Add<&ScalarField> for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub<&ScalarField> for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

/// Pointwise product (no dealiasing; see `Spectral::product`).
impl Mul<&ScalarField> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a * b)
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.map(|a| a * rhs)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.map(|a| -a)
    }
}

impl AddAssign<&ScalarField> for ScalarField {
    fn add_assign(&mut self, rhs: &ScalarField) {
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

/// Traceless symmetric order parameter `Q = [[q1, q2], [q2, -q1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTensorField {
    pub q1: ScalarField,
    pub q2: ScalarField,
}

impl QTensorField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            q1: ScalarField::zeros(grid),
            q2: ScalarField::zeros(grid),
        }
    }

    pub fn new(q1: ScalarField, q2: ScalarField) -> Self {
        assert_eq!(q1.grid(), q2.grid());
        Self { q1, q2 }
    }

    pub fn grid(&self) -> GridSpec {
        self.q1.grid()
    }

    /// The 2×2 matrix at grid point `(i, j)`.
    pub fn assemble(&self, i: usize, j: usize) -> Result<Matrix2<f64>, FieldError> {
        let p = self.grid().index(i, j)?;
        let (a, b) = (self.q1.as_slice()[p], self.q2.as_slice()[p]);
        Ok(Matrix2::new(a, b, b, -a))
    }

    /// Full four-component view, used where general tensor algebra is needed.
    pub fn to_tensor(&self) -> TensorField {
        TensorField {
            c: [
                [self.q1.clone(), self.q2.clone()],
                [self.q2.clone(), -&self.q1],
            ],
        }
    }

    /// Pointwise Frobenius norm squared, `|Q|² = 2(q1² + q2²)`.
    pub fn frobenius_sq(&self) -> ScalarField {
        self.q1.zip_map(&self.q2, |a, b| 2.0 * (a * a + b * b))
    }

    /// `max_x |Q(x)|` with the Frobenius norm.
    pub fn linf(&self) -> f64 {
        self.q1
            .as_slice()
            .iter()
            .zip(self.q2.as_slice())
            .fold(0.0_f64, |m, (a, b)| m.max((2.0 * (a * a + b * b)).sqrt()))
    }

    /// `∫|Q|²`
    pub fn l2_sq(&self) -> f64 {
        self.frobenius_sq().integral()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            q1: &self.q1 * s,
            q2: &self.q2 * s,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            q1: &self.q1 - &other.q1,
            q2: &self.q2 - &other.q2,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            q1: &self.q1 + &other.q1,
            q2: &self.q2 + &other.q2,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q1.is_finite() && self.q2.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub u1: ScalarField,
    pub u2: ScalarField,
}

impl VelocityField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            u1: ScalarField::zeros(grid),
            u2: ScalarField::zeros(grid),
        }
    }

    pub fn new(u1: ScalarField, u2: ScalarField) -> Self {
        assert_eq!(u1.grid(), u2.grid());
        Self { u1, u2 }
    }

    pub fn grid(&self) -> GridSpec {
        self.u1.grid()
    }

    pub fn components(&self) -> [&ScalarField; 2] {
        [&self.u1, &self.u2]
    }

    /// `∫|u|²`
    pub fn l2_sq(&self) -> f64 {
        self.u1
            .zip_map(&self.u2, |a, b| a * a + b * b)
            .integral()
    }

    pub fn linf(&self) -> f64 {
        self.u1
            .as_slice()
            .iter()
            .zip(self.u2.as_slice())
            .fold(0.0_f64, |m, (a, b)| m.max((a * a + b * b).sqrt()))
    }

    pub fn mean(&self) -> [f64; 2] {
        [self.u1.integral(), self.u2.integral()]
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            u1: &self.u1 + &other.u1,
            u2: &self.u2 + &other.u2,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            u1: &self.u1 - &other.u1,
            u2: &self.u2 - &other.u2,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            u1: &self.u1 * s,
            u2: &self.u2 * s,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u1.is_finite() && self.u2.is_finite()
    }
}

/// General (not necessarily symmetric) 2×2 tensor field; `c[i][j]` is the
/// `(i, j)` component.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub c: [[ScalarField; 2]; 2],
}

impl TensorField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            c: std::array::from_fn(|_| std::array::from_fn(|_| ScalarField::zeros(grid))),
        }
    }

    pub fn from_components(c: [[ScalarField; 2]; 2]) -> Self {
        Self { c }
    }

    pub fn grid(&self) -> GridSpec {
        self.c[0][0].grid()
    }

    pub fn at(&self, p: usize) -> Matrix2<f64> {
        Matrix2::new(
            self.c[0][0].as_slice()[p],
            self.c[0][1].as_slice()[p],
            self.c[1][0].as_slice()[p],
            self.c[1][1].as_slice()[p],
        )
    }

    pub fn transpose(&self) -> Self {
        Self {
            c: std::array::from_fn(|i| std::array::from_fn(|j| self.c[j][i].clone())),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            c: std::array::from_fn(|i| std::array::from_fn(|j| &self.c[i][j] + &other.c[i][j])),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            c: std::array::from_fn(|i| std::array::from_fn(|j| &self.c[i][j] - &other.c[i][j])),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            c: std::array::from_fn(|i| std::array::from_fn(|j| &self.c[i][j] * s)),
        }
    }

    pub fn trace(&self) -> ScalarField {
        &self.c[0][0] + &self.c[1][1]
    }

    /// Pointwise Frobenius product `A : B`.
    pub fn contract(&self, other: &Self) -> ScalarField {
        let mut out = ScalarField::zeros(self.grid());
        for i in 0..2 {
            for j in 0..2 {
                out += &(&self.c[i][j] * &other.c[i][j]);
            }
        }
        out
    }

    /// `∫ A : B`
    pub fn inner(&self, other: &Self) -> f64 {
        self.contract(other).integral()
    }

    /// Largest pointwise |A_ij − A_ji|.
    pub fn max_asymmetry(&self) -> f64 {
        (&self.c[0][1] - &self.c[1][0]).max_abs()
    }

    pub fn max_abs(&self) -> f64 {
        self.c
            .iter()
            .flatten()
            .fold(0.0_f64, |m, f| m.max(f.max_abs()))
    }

    /// Projection onto the traceless symmetric part, in `(q1, q2)` form.
    pub fn traceless_symmetric_part(&self) -> QTensorField {
        QTensorField {
            q1: self.c[0][0].zip_map(&self.c[1][1], |a, d| 0.5 * (a - d)),
            q2: self.c[0][1].zip_map(&self.c[1][0], |b, c| 0.5 * (b + c)),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().flatten().all(|f| f.is_finite())
    }
}

/// Material and regularization constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub nu: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub a: f64,
    /// Stored for completeness; `tr(Q³)` vanishes identically in 2D so `b`
    /// never enters the dynamics.
    pub b: f64,
    pub c: f64,
    pub xi: f64,
    pub delta: f64,
    pub k_reg: u32,
    /// Accept `L4 = 0` without flagging it.
    pub allow_isotropic: bool,
}

impl Default for Coefficients {
    fn default() -> Self {
        Self {
            nu: 1.0,
            l1: 1.0,
            l2: 0.0,
            l3: 0.0,
            l4: 1.0,
            a: -2.0 / 9.0,
            b: 0.0,
            c: 1.0,
            xi: 0.0,
            delta: 0.0,
            k_reg: 4,
            allow_isotropic: false,
        }
    }
}

impl Coefficients {
    pub fn zeta(&self) -> f64 {
        2.0 * self.l1 + self.l2 + self.l3
    }

    pub fn kappa(&self) -> f64 {
        (self.l1 + self.l2).min(self.l1 + self.l3)
    }
}

/// A named structural assumption on the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Assumption {
    /// `L4 ≠ 0`
    CubicElasticity,
    /// `κ = min{L1+L2, L1+L3} > 0`
    Coercivity,
    /// `c > 0`
    BulkBoundedBelow,
    /// `ν > 0`
    PositiveViscosity,
    /// `δ ≥ 0`, and `k` even with `k ≥ 4` whenever `δ > 0`
    Regularization,
}

impl std::fmt::Display for Assumption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Assumption::CubicElasticity => "L4 != 0",
            Assumption::Coercivity => "kappa = min(L1+L2, L1+L3) > 0",
            Assumption::BulkBoundedBelow => "c > 0",
            Assumption::PositiveViscosity => "nu > 0",
            Assumption::Regularization => "delta >= 0 with even k_reg >= 4",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("coefficient assumption violated: {0}")]
pub struct CoefficientError(pub Assumption);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub zeta: f64,
    pub kappa: f64,
    pub violations: Vec<Assumption>,
    /// `ζ ≥ 2κ`; holds identically, kept as a consistency flag.
    pub zeta_dominates_kappa: bool,
}

impl DerivedConstants {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }

    /// First violated assumption, if any.
    pub fn ensure_admissible(&self) -> Result<(), CoefficientError> {
        match self.violations.first() {
            Some(&a) => Err(CoefficientError(a)),
            None => Ok(()),
        }
    }
}

/// Computes `ζ`, `κ` and flags every violated assumption. Never fails, so
/// diagnostics can still run on inadmissible parameter sets.
pub fn validate_coefficients(c: &Coefficients) -> DerivedConstants {
    let zeta = c.zeta();
    let kappa = c.kappa();
    let mut violations = Vec::new();
    if c.l4 == 0.0 && !c.allow_isotropic {
        violations.push(Assumption::CubicElasticity);
    }
    if !(kappa > 0.0) {
        violations.push(Assumption::Coercivity);
    }
    if !(c.c > 0.0) {
        violations.push(Assumption::BulkBoundedBelow);
    }
    if !(c.nu > 0.0) {
        violations.push(Assumption::PositiveViscosity);
    }
    if !(c.delta >= 0.0) || (c.delta > 0.0 && (c.k_reg < 4 || c.k_reg % 2 != 0)) {
        violations.push(Assumption::Regularization);
    }
    DerivedConstants {
        zeta,
        kappa,
        violations,
        zeta_dominates_kappa: kappa <= 0.0 || zeta >= 2.0 * kappa,
    }
}

/// Smooth real field with random Fourier content on `|m₁|, |m₂| ≤ max_mode`.
///
/// Coefficients decay like `1/(1+|m|²)`; the zero mode is excluded.
pub fn random_band_limited(grid: GridSpec, seed: u64, max_mode: usize) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n();
    let m = max_mode as i64;
    let width = (2 * m + 1) as usize;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); width * width];
    for m1 in -m..=m {
        for m2 in -m..=m {
            let re: f64 = rng.gen_range(-1.0..1.0);
            let im: f64 = rng.gen_range(-1.0..1.0);
            if m1 == 0 && m2 == 0 {
                continue;
            }
            let decay = 1.0 / (1.0 + (m1 * m1 + m2 * m2) as f64);
            coeffs[((m1 + m) as usize) * width + (m2 + m) as usize] =
                Complex64::new(re, im) * decay;
        }
    }
    // separable evaluation: Σ_{m1} e^{2πi m1 x1} Σ_{m2} c e^{2πi m2 x2}
    let phase = |mode: i64, i: usize| {
        let theta = 2.0 * std::f64::consts::PI * (mode * i as i64).rem_euclid(n as i64) as f64
            / n as f64;
        Complex64::new(theta.cos(), theta.sin())
    };
    let mut inner = vec![Complex64::new(0.0, 0.0); width * n];
    for (r, row) in inner.chunks_mut(n).enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for m2 in -m..=m {
                acc += coeffs[r * width + (m2 + m) as usize] * phase(m2, j);
            }
            *slot = acc;
        }
    }
    let mut data = vec![0.0; grid.len()];
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for m1 in -m..=m {
                acc += phase(m1, i) * inner[((m1 + m) as usize) * n + j];
            }
            data[i * n + j] = acc.re;
        }
    }
    ScalarField::from_vec(grid, data)
}

/// Band-limited random order parameter rescaled so that `max |Q| = target_linf`.
pub fn random_initial_q(
    grid: GridSpec,
    seed: u64,
    max_mode: usize,
    target_linf: f64,
) -> Result<QTensorField, FieldError> {
    if !(target_linf > 0.0) {
        return Err(FieldError::NonPositiveTarget(target_linf));
    }
    if 3 * max_mode >= grid.n() {
        return Err(FieldError::ModeTooHigh {
            max_mode,
            limit: grid.n() / 3,
        });
    }
    let q = QTensorField::new(
        random_band_limited(grid, seed.wrapping_mul(2).wrapping_add(1), max_mode),
        random_band_limited(grid, seed.wrapping_mul(2).wrapping_add(2), max_mode),
    );
    let measured = q.linf();
    Ok(q.scale(target_linf / measured))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n).unwrap()
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(GridSpec::new(4).is_err());
        assert!(GridSpec::new(48).is_err());
        assert!(GridSpec::new(64).is_ok());
    }

    #[test]
    fn constant_integrates_to_itself() {
        let f = ScalarField::constant(grid(16), 3.25);
        assert_eq!(f.integral(), 3.25);
    }

    #[test]
    fn assemble_examples() {
        let g = grid(8);
        let q = QTensorField::new(ScalarField::constant(g, 0.3), ScalarField::zeros(g));
        assert_eq!(q.assemble(2, 3).unwrap(), Matrix2::new(0.3, 0.0, 0.0, -0.3));
        let z = QTensorField::zeros(g);
        assert_eq!(z.assemble(0, 0).unwrap(), Matrix2::zeros());
        let q = QTensorField::new(ScalarField::constant(g, 0.1), ScalarField::constant(g, 0.2));
        let m = q.assemble(7, 7).unwrap();
        assert_eq!(m.trace(), 0.0);
        assert_eq!(m, m.transpose());
        assert!((m.norm_squared() - 0.1).abs() < 1e-15);
        assert!(matches!(q.assemble(8, 0), Err(FieldError::OutOfRange(8, 0, 8))));
    }

    #[test]
    fn validate_examples() {
        let mut c = Coefficients {
            l1: 1.0,
            l2: 0.5,
            l3: 0.25,
            ..Default::default()
        };
        assert_eq!(validate_coefficients(&c).zeta, 2.75);
        c.l2 = -0.5;
        c.l3 = 0.2;
        assert_eq!(validate_coefficients(&c).kappa, 0.5);
        c.l2 = 0.0;
        c.l3 = 0.0;
        let d = validate_coefficients(&c);
        assert_eq!((d.zeta, d.kappa), (2.0, 1.0));
        assert!(d.zeta_dominates_kappa && d.is_admissible());
    }

    #[test]
    fn validate_names_failures() {
        let c = Coefficients {
            l1: 0.0,
            l2: -1.0,
            l4: 0.0,
            c: -1.0,
            ..Default::default()
        };
        let d = validate_coefficients(&c);
        assert_eq!(
            d.violations,
            vec![
                Assumption::CubicElasticity,
                Assumption::Coercivity,
                Assumption::BulkBoundedBelow
            ]
        );
        assert_eq!(
            d.ensure_admissible(),
            Err(CoefficientError(Assumption::CubicElasticity))
        );
        let iso = Coefficients {
            l4: 0.0,
            allow_isotropic: true,
            ..Default::default()
        };
        assert!(validate_coefficients(&iso).is_admissible());
        let odd = Coefficients {
            delta: 0.1,
            k_reg: 3,
            ..Default::default()
        };
        assert_eq!(validate_coefficients(&odd).violations, vec![Assumption::Regularization]);
    }

    #[test]
    fn random_q_hits_target_and_is_deterministic() {
        let g = grid(32);
        let a = random_initial_q(g, 1, 4, 0.2).unwrap();
        assert!((a.linf() - 0.2).abs() <= 1e-10);
        let b = random_initial_q(g, 1, 4, 0.2).unwrap();
        assert_eq!(a, b);
        let c = random_initial_q(g, 2, 4, 0.2).unwrap();
        assert_ne!(a, c);
        assert!(random_initial_q(g, 1, 4, 0.0).is_err());
        assert!(random_initial_q(g, 1, 11, 0.2).is_err());
    }

    #[test]
    fn traceless_structure_is_exact() {
        let g = grid(16);
        let q = random_initial_q(g, 5, 3, 0.7).unwrap();
        let f2 = q.frobenius_sq();
        for i in 0..16 {
            for j in 0..16 {
                let m = q.assemble(i, j).unwrap();
                assert_eq!(m.trace(), 0.0);
                assert_eq!(m[(0, 1)] - m[(1, 0)], 0.0);
                assert!((m.norm_squared() - f2.at(i, j)).abs() <= 1e-14);
            }
        }
    }
}
