//! Measurable forms of the analytic statements: smallness thresholds,
//! algebraic identities, energy-law residuals, the maximum-principle monitor,
//! the continuous-dependence metric and a finite-difference variational
//! oracle.

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{velocity_gradient, vorticity_and_strain, SimulationState};
use crate::energetics::{
    constrained_field, elastic_molecular_field_from_jet, free_energy_density_of_tensor,
    lagrange_multipliers, molecular_field_h, EnergyLedger, MolecularFieldBundle, TensorJet,
};
use crate::field::{
    random_band_limited, random_initial_q, validate_coefficients, Assumption, CoefficientError,
    Coefficients, FieldError, GridSpec, QTensorField, ScalarField, TensorField, VelocityField,
};
use crate::spectral::{NormKind, Spectral};
use crate::stress::{divergence_of, sigma_a, sigma_s};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticError {
    #[error(transparent)]
    Coefficients(#[from] CoefficientError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("{0} is not symmetric")]
    Asymmetric(&'static str),
    #[error("empty series")]
    EmptySeries,
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("finite-difference step {0} outside [1e-6, 1e-3]")]
    BadStep(f64),
}

/// Constants the well-posedness threshold leaves unquantified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConstants {
    pub k1: f64,
    pub k2: f64,
    pub c_star: f64,
}

impl Default for ThresholdConstants {
    fn default() -> Self {
        Self {
            k1: 1.0 / 121.0,
            k2: 1.0 / 121.0,
            c_star: 1.0,
        }
    }
}

/// Which term of `min{K1(κ/L4)², K2(ζ/|L4|)√ν}` is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThmGate {
    Elastic,
    Viscous,
    Unconstrained,
}

/// Lower bounds `a ≥ −cη` induced by each threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkLowerBounds {
    pub thm: f64,
    pub lemma32: f64,
    pub lemma24: f64,
    pub eta2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub zeta: f64,
    pub kappa: f64,
    /// `min{K1(κ/L4)², K2(ζ/|L4|)√ν}`
    pub eta_thm: f64,
    pub thm_gate: ThmGate,
    /// `(1/9)(ζ/L4)²`, bound for `L∞` preservation.
    pub eta_lemma32: f64,
    /// `(1/121)(ζ/L4)²`
    pub eta_lemma24: f64,
    /// `min{√ν/(16C*)·ζ/|L4|, (1/64)(ζ/L4)²}`
    pub eta2: f64,
    pub a_lower: BulkLowerBounds,
    /// `L4 = 0`: every threshold is infinite.
    pub unconstrained: bool,
}

impl ThresholdReport {
    /// Whether `a ≥ −cη` holds for the given `η`.
    pub fn bulk_admissible(c: &Coefficients, eta: f64) -> bool {
        c.a >= -c.c * eta
    }
}

/// All smallness thresholds for a coefficient set. `L4 = 0` is reported as
/// unconstrained rather than rejected.
pub fn eta_thresholds(
    c: &Coefficients,
    k: ThresholdConstants,
) -> Result<ThresholdReport, DiagnosticError> {
    let derived = validate_coefficients(c);
    if let Some(&v) = derived
        .violations
        .iter()
        .find(|v| **v != Assumption::CubicElasticity)
    {
        return Err(CoefficientError(v).into());
    }
    let (zeta, kappa) = (derived.zeta, derived.kappa);
    if c.l4 == 0.0 {
        let inf = f64::INFINITY;
        return Ok(ThresholdReport {
            zeta,
            kappa,
            eta_thm: inf,
            thm_gate: ThmGate::Unconstrained,
            eta_lemma32: inf,
            eta_lemma24: inf,
            eta2: inf,
            a_lower: BulkLowerBounds {
                thm: -inf,
                lemma32: -inf,
                lemma24: -inf,
                eta2: -inf,
            },
            unconstrained: true,
        });
    }
    let l4 = c.l4.abs();
    let ratio_sq = (zeta * zeta) / (l4 * l4);
    let eta_lemma32 = ratio_sq / 9.0;
    let eta_lemma24 = ratio_sq / 121.0;
    let eta2 = (c.nu.sqrt() / (16.0 * k.c_star) * (zeta / l4)).min(ratio_sq / 64.0);
    let elastic = k.k1 * (kappa * kappa) / (l4 * l4);
    let viscous = k.k2 * (zeta / l4) * c.nu.sqrt();
    let (eta_thm, thm_gate) = if elastic <= viscous {
        (elastic, ThmGate::Elastic)
    } else {
        (viscous, ThmGate::Viscous)
    };
    let lower = |eta: f64| -c.c * eta;
    Ok(ThresholdReport {
        zeta,
        kappa,
        eta_thm,
        thm_gate,
        eta_lemma32,
        eta_lemma24,
        eta2,
        a_lower: BulkLowerBounds {
            thm: lower(eta_thm),
            lemma32: lower(eta_lemma32),
            lemma24: lower(eta_lemma24),
            eta2: lower(eta2),
        },
        unconstrained: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cancellation {
    /// `(QM − MQ) : ∇u`
    pub lhs: f64,
    /// `(Qω − ωQ) : M`
    pub rhs: f64,
    pub defect: f64,
}

fn is_symmetric(m: &Matrix2<f64>) -> bool {
    (m[(0, 1)] - m[(1, 0)]).abs() <= 1e-14 * m.norm().max(1.0)
}

fn frob(a: &Matrix2<f64>, b: &Matrix2<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// Pointwise commutator identity `(QM − MQ) : ∇u = (Qω − ωQ) : M` for
/// symmetric `Q`, `M`.
pub fn cancellation_check(
    q: &Matrix2<f64>,
    m: &Matrix2<f64>,
    grad_u: &Matrix2<f64>,
) -> Result<Cancellation, DiagnosticError> {
    if !is_symmetric(q) {
        return Err(DiagnosticError::Asymmetric("Q"));
    }
    if !is_symmetric(m) {
        return Err(DiagnosticError::Asymmetric("M"));
    }
    let omega = (grad_u - grad_u.transpose()) * 0.5;
    let lhs = frob(&(q * m - m * q), grad_u);
    let rhs = frob(&(q * omega - omega * q), m);
    Ok(Cancellation {
        lhs,
        rhs,
        defect: (lhs - rhs).abs(),
    })
}

/// Relative slack of the maximum-principle bound.
pub const MAX_PRINCIPLE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleVerdict {
    pub passed: bool,
    /// `√η (1 + tol)`
    pub bound: f64,
    pub max_value: f64,
    pub first_violation: Option<f64>,
}

/// Checks `‖Q(t)‖_∞ ≤ √η (1 + 1e−3)` over a sampled series.
pub fn max_principle_monitor(
    times: &[f64],
    q_linf: &[f64],
    eta: f64,
) -> Result<MaxPrincipleVerdict, DiagnosticError> {
    if q_linf.is_empty() {
        return Err(DiagnosticError::EmptySeries);
    }
    if times.len() != q_linf.len() {
        return Err(DiagnosticError::LengthMismatch(times.len(), q_linf.len()));
    }
    let bound = eta.sqrt() * (1.0 + MAX_PRINCIPLE_TOL);
    let first_violation = times
        .iter()
        .zip(q_linf)
        .find(|(_, &v)| !(v <= bound))
        .map(|(&t, _)| t);
    Ok(MaxPrincipleVerdict {
        passed: first_violation.is_none(),
        bound,
        max_value: q_linf.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        first_violation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    /// `rₙ = E(tₙ₊₁) − E(tₙ) + dt·D(tₙ)`
    pub per_step: Vec<f64>,
    /// `Σ rₙ`
    pub cumulative: f64,
    /// `Σ |rₙ|`
    pub abs_sum: f64,
    pub max_abs: f64,
}

/// Discrete energy-law residual from per-step totals and dissipation rates.
pub fn energy_law_residual_series(
    total: &[f64],
    dissipation: &[f64],
    dt: f64,
) -> Result<ResidualSummary, DiagnosticError> {
    if total.len() != dissipation.len() {
        return Err(DiagnosticError::LengthMismatch(total.len(), dissipation.len()));
    }
    if total.is_empty() {
        return Err(DiagnosticError::EmptySeries);
    }
    let per_step: Vec<f64> = total
        .windows(2)
        .zip(dissipation)
        .map(|(e, d)| e[1] - e[0] + dt * d)
        .collect();
    Ok(ResidualSummary {
        cumulative: per_step.iter().sum(),
        abs_sum: per_step.iter().map(|r| r.abs()).sum(),
        max_abs: per_step.iter().fold(0.0, |m: f64, r| m.max(r.abs())),
        per_step,
    })
}

/// [`energy_law_residual_series`] over a ledger sampled every step.
pub fn energy_law_residual(
    ledgers: &[EnergyLedger],
    dt: f64,
) -> Result<ResidualSummary, DiagnosticError> {
    let total: Vec<f64> = ledgers.iter().map(|l| l.total).collect();
    let diss: Vec<f64> = ledgers.iter().map(|l| l.dissipation()).collect();
    energy_law_residual_series(&total, &diss, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependenceMetric {
    /// `‖w̄‖²_{H¹} + ‖Q̄‖²_{L²}`
    pub value: f64,
    pub velocity_part: f64,
    pub q_part: f64,
}

/// `‖(−Δ + I)⁻¹(u₁ − u₂)‖²_{H¹} + ‖Q₁ − Q₂‖²_{L²}`
pub fn continuous_dependence_metric(
    s1: &SimulationState,
    s2: &SimulationState,
    sp: &Spectral,
) -> Result<DependenceMetric, DiagnosticError> {
    s1.grid().check_same(&s2.grid())?;
    sp.grid().check_same(&s1.grid())?;
    let du = s1.u.sub(&s2.u);
    let velocity_part = du
        .components()
        .iter()
        .map(|f| sp.sobolev_sq(&sp.helmholtz_inverse(f), 1))
        .sum::<f64>();
    let q_part = s1.q.sub(&s2.q).l2_sq();
    Ok(DependenceMetric {
        value: velocity_part + q_part,
        velocity_part,
        q_part,
    })
}

/// Random symmetric (not traceless) band-limited tensor with unit sup norm,
/// mean mode included.
pub fn random_symmetric_tensor(grid: GridSpec, seed: u64, max_mode: usize) -> TensorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd1ec);
    let mut comp = |k: u64| {
        let mut f = random_band_limited(grid, seed.wrapping_mul(3).wrapping_add(k), max_mode);
        let mean: f64 = rng.gen_range(-0.5..0.5);
        f.as_mut_slice().iter_mut().for_each(|v| *v += mean);
        f
    };
    let (d11, d12, d22) = (comp(101), comp(102), comp(103));
    let t = TensorField::from_components([[d11, d12.clone()], [d12, d22]]);
    let s = t.max_abs();
    t.scale(1.0 / s)
}

/// Divergence-free band-limited velocity with `max |u| = amplitude`.
pub fn random_solenoidal_velocity(
    sp: &Spectral,
    seed: u64,
    max_mode: usize,
    amplitude: f64,
) -> VelocityField {
    let g = sp.grid();
    let raw = VelocityField::new(
        random_band_limited(g, seed.wrapping_mul(2).wrapping_add(501), max_mode),
        random_band_limited(g, seed.wrapping_mul(2).wrapping_add(502), max_mode),
    );
    let (u, _) = sp.leray_project(&raw);
    let s = u.linf();
    u.scale(amplitude / s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub eps: f64,
    /// `|FD − ⟨−H, δQ⟩| / max(|⟨−H, δQ⟩|, 1e−300)` per direction.
    pub defects: Vec<f64>,
    /// Absolute differences, for order fits.
    pub abs_defects: Vec<f64>,
    pub max_relative_defect: f64,
}

/// Central difference of `E` along random symmetric directions against the
/// pairing `⟨−H, δQ⟩`.
pub fn variational_oracle(
    q: &QTensorField,
    c: &Coefficients,
    n_directions: usize,
    eps: f64,
    seed: u64,
    sp: &Spectral,
) -> Result<OracleReport, DiagnosticError> {
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(DiagnosticError::BadStep(eps));
    }
    let grid = q.grid();
    let max_mode = (grid.n() / 8).max(1);
    let neg_h = molecular_field_h(q, c, sp).scale(-1.0);
    let base = q.to_tensor();
    let mut defects = Vec::with_capacity(n_directions);
    let mut abs_defects = Vec::with_capacity(n_directions);
    for d in 0..n_directions {
        let dir = random_symmetric_tensor(grid, seed.wrapping_mul(1000).wrapping_add(d as u64), max_mode);
        // densities are differenced pointwise before integrating
        let plus = free_energy_density_of_tensor(&base.add(&dir.scale(eps)), c, sp);
        let minus = free_energy_density_of_tensor(&base.sub(&dir.scale(eps)), c, sp);
        let fd = (&plus - &minus).integral() / (2.0 * eps);
        let exact = neg_h.inner(&dir);
        let abs = (fd - exact).abs();
        abs_defects.push(abs);
        defects.push(abs / exact.abs().max(1e-300));
    }
    Ok(OracleReport {
        eps,
        max_relative_defect: defects.iter().copied().fold(0.0, f64::max),
        defects,
        abs_defects,
    })
}

/// `(‖∇f‖²_{L⁴}, 3‖f‖_∞‖Δf‖_{L²})` with `‖∇f‖⁴_{L⁴} = ∫ Σⱼ |∂ⱼf|⁴`.
pub fn interpolation_sides(f: &ScalarField, sp: &Spectral) -> (f64, f64) {
    let [d1, d2] = sp.gradient(f);
    let quartic = d1.zip_map(&d2, |a, b| a.powi(4) + b.powi(4)).integral();
    let lhs = quartic.sqrt();
    let rhs = 3.0 * sp.norm(f, NormKind::Linf) * sp.norm(&sp.laplacian(f), NormKind::L2);
    (lhs, rhs)
}

/// Outcome of one named check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Passed,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub status: CheckStatus,
    /// Worst measured defect (or ratio, for inequalities).
    pub worst: f64,
    pub tolerance: f64,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl CheckOutcome {
    pub fn measured(name: &str, worst: f64, tolerance: f64, samples: usize) -> Self {
        Self {
            name: name.to_string(),
            status: if worst <= tolerance {
                CheckStatus::Passed
            } else {
                CheckStatus::Failed
            },
            worst,
            tolerance,
            samples,
            detail: String::new(),
        }
    }

    pub fn skipped(name: &str, reason: &str) -> Self {
        Self {
            name: name.to_string(),
            status: CheckStatus::Skipped,
            worst: 0.0,
            tolerance: 0.0,
            samples: 0,
            detail: reason.to_string(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub checks: Vec<CheckOutcome>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Failed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Failed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub type SigmaSFn = fn(&QTensorField, &Coefficients, &Spectral) -> TensorField;

/// Inputs of [`identity_suite`].
#[derive(Debug, Clone, Copy)]
pub struct IdentityOptions {
    pub n: usize,
    pub seeds: usize,
    pub seed_base: u64,
    pub q_linf: f64,
    pub u_linf: f64,
    pub coefficients: Coefficients,
    /// Distortion stress under test; replaceable for mutation tests.
    pub sigma_s: SigmaSFn,
}

impl IdentityOptions {
    pub fn new(n: usize, seeds: usize, coefficients: Coefficients) -> Self {
        Self {
            n,
            seeds,
            seed_base: 0,
            q_linf: 0.5,
            u_linf: 1.0,
            coefficients,
            sigma_s,
        }
    }
}

pub const COLLAPSE_TOL: f64 = 1e-10;
pub const APPENDIX_TOL: f64 = 1e-10;
pub const DUALITY_TOL: f64 = 1e-8;
pub const PAIRING_TOL: f64 = 1e-8;
pub const GAUGE_TOL: f64 = 1e-10;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// `(L2+L3)` terms of `H + λI + μ − μᵀ` against `(L2+L3)ΔQ`, relative to
/// `max(‖(L2+L3)ΔQ‖_∞, 1)`.
pub fn collapse_defect(q: &QTensorField, c: &Coefficients, sp: &Spectral) -> f64 {
    let only = Coefficients {
        l1: 0.0,
        l4: 0.0,
        a: 0.0,
        b: 0.0,
        c: 0.0,
        ..*c
    };
    let h = molecular_field_h(q, &only, sp);
    let (lambda, mu) = lagrange_multipliers(q, &only, sp);
    let lap = q.to_tensor();
    let want: [[ScalarField; 2]; 2] =
        lap.c.map(|row| row.map(|f| &sp.laplacian(&f) * (c.l2 + c.l3)));
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for i in 0..2 {
        for j in 0..2 {
            let mut got = &h.c[i][j] + &mu.c[i][j];
            if i == j {
                got += &lambda;
            }
            worst = worst.max((&got - &want[i][j]).max_abs());
            scale = scale.max(want[i][j].max_abs());
        }
    }
    worst / scale
}

/// Pointwise `|constrained_field − (H + λI + μ − μᵀ)|`.
pub fn appendix_defect(q: &QTensorField, c: &Coefficients, sp: &Spectral) -> f64 {
    let b = MolecularFieldBundle::compute(q, c, sp);
    b.constrained.sub(&b.assembled()).max_abs()
}

/// Whether `constrained_field` is bitwise unchanged under `b → b'`.
pub fn b_independent(q: &QTensorField, c: &Coefficients, b_alt: f64, sp: &Spectral) -> bool {
    let x0 = constrained_field(q, c, sp);
    let x1 = constrained_field(q, &Coefficients { b: b_alt, ..*c }, sp);
    x0 == x1
}

/// Relative defect of `∫uᵢ∂ⱼσˢᵢⱼ = −∫H̃ : (u·∇Q)`.
pub fn duality_defect(
    q: &QTensorField,
    u: &VelocityField,
    c: &Coefficients,
    sp: &Spectral,
    sigma_s_fn: SigmaSFn,
) -> f64 {
    let div = divergence_of(&sigma_s_fn(q, c, sp), sp);
    let lhs = (&u.u1 * &div.u1).integral() + (&u.u2 * &div.u2).integral();
    let jet = TensorJet::of_q(sp, q);
    let h_el = elastic_molecular_field_from_jet(&jet, c, sp);
    let advect = |f: &ScalarField| {
        let [d1, d2] = sp.gradient(f);
        &(&u.u1 * &d1) + &(&u.u2 * &d2)
    };
    let adv = QTensorField::new(advect(&q.q1), advect(&q.q2)).to_tensor();
    let rhs = -h_el.inner(&adv);
    rel(lhs, rhs)
}

/// Relative defect of `∫σᵃ : ∇u = ∫(Qω − ωQ) : M` for symmetric `M`.
pub fn pairing_defect(
    q: &QTensorField,
    m: &TensorField,
    u: &VelocityField,
    sp: &Spectral,
) -> f64 {
    let sa = sigma_a(q, m, sp);
    let lhs = sa.inner(&velocity_gradient(u, sp));
    let (omega, _) = vorticity_and_strain(u, sp);
    let rot = crate::dynamics::rotation_commutator(q, &omega);
    rel(lhs, rot.inner(m))
}

/// `max |(λI + μ − μᵀ) : M|` over traceless symmetric `M`, relative to the
/// multiplier size.
pub fn gauge_defect(q: &QTensorField, m: &QTensorField, c: &Coefficients, sp: &Spectral) -> f64 {
    let (lambda, mu) = lagrange_multipliers(q, c, sp);
    let g = TensorField::from_components([
        [&mu.c[0][0] + &lambda, mu.c[0][1].clone()],
        [mu.c[1][0].clone(), &mu.c[1][1] + &lambda],
    ]);
    let scale = g.max_abs().max(1.0) * m.linf().max(1.0);
    g.contract(&m.to_tensor()).max_abs() / scale
}

/// Randomized identity checks on `seeds` band-limited inputs.
///
/// Check names: `collapse`, `appendix`, `b_independence`, `duality`,
/// `pairing`, `gauge`, `interpolation`, `cancellation`.
pub fn identity_suite(opts: &IdentityOptions) -> Result<IdentityReport, DiagnosticError> {
    let grid = GridSpec::new(opts.n)?;
    let sp = Spectral::new(grid);
    let c = &opts.coefficients;
    let max_mode = (opts.n / 8).max(1);
    let (mut collapse, mut appendix, mut duality, mut pairing, mut gauge, mut interp) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut b_ok = true;
    for s in 0..opts.seeds as u64 {
        let seed = opts.seed_base.wrapping_add(s);
        let q = random_initial_q(grid, seed, max_mode, opts.q_linf)?;
        let u = random_solenoidal_velocity(&sp, seed, max_mode, opts.u_linf);
        let m = random_symmetric_tensor(grid, seed, max_mode);
        let mq = random_initial_q(grid, seed.wrapping_add(7_000_000), max_mode, 1.0)?;
        collapse = collapse.max(collapse_defect(&q, c, &sp));
        appendix = appendix.max(appendix_defect(&q, c, &sp));
        b_ok &= b_independent(&q, c, c.b + 7.0, &sp);
        duality = duality.max(duality_defect(&q, &u, c, &sp, opts.sigma_s));
        pairing = pairing.max(pairing_defect(&q, &m, &u, &sp));
        gauge = gauge.max(gauge_defect(&q, &mq, c, &sp));
        let f = random_band_limited(grid, seed.wrapping_add(9_000_000), max_mode);
        let (lhs, rhs) = interpolation_sides(&f, &sp);
        interp = interp.max(lhs / rhs);
    }
    let n = opts.seeds;
    let mut checks = vec![
        CheckOutcome::measured("collapse", collapse, COLLAPSE_TOL, n),
        CheckOutcome::measured("appendix", appendix, APPENDIX_TOL, n),
        CheckOutcome::measured("b_independence", if b_ok { 0.0 } else { 1.0 }, 0.0, n),
        CheckOutcome::measured("duality", duality, DUALITY_TOL, n),
        CheckOutcome::measured("pairing", pairing, PAIRING_TOL, n),
        CheckOutcome::measured("gauge", gauge, GAUGE_TOL, n),
        CheckOutcome::measured("interpolation", interp, 1.0, n),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed_base ^ 0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (qm, mm, gu) = random_cancellation_triple(&mut rng);
        let r = cancellation_check(&qm, &mm, &gu)?;
        worst = worst.max(r.defect / r.lhs.abs().max(1.0));
    }
    checks.push(CheckOutcome::measured("cancellation", worst, 1e-12, 1000));
    Ok(IdentityReport { checks })
}

/// Threshold sanity for `verify`; skipped when `L4 = 0`.
pub fn threshold_check(c: &Coefficients, k: ThresholdConstants) -> Result<CheckOutcome, DiagnosticError> {
    let r = eta_thresholds(c, k)?;
    if r.unconstrained {
        return Ok(CheckOutcome::skipped("thresholds", "L4 = 0: no smallness threshold"));
    }
    let ordered = r.eta_lemma24 < r.eta_lemma32
        && r.eta2 <= r.eta_lemma32 * 9.0 / 64.0
        && [r.eta_thm, r.eta_lemma32, r.eta_lemma24, r.eta2]
            .iter()
            .all(|e| *e > 0.0);
    Ok(CheckOutcome::measured("thresholds", if ordered { 0.0 } else { 1.0 }, 0.0, 1))
}

/// Variational oracle as a named check over `seeds` fields.
pub fn oracle_check(
    n: usize,
    seeds: usize,
    directions: usize,
    c: &Coefficients,
) -> Result<CheckOutcome, DiagnosticError> {
    let grid = GridSpec::new(n)?;
    let sp = Spectral::new(grid);
    let mut worst: f64 = 0.0;
    for s in 0..seeds as u64 {
        let q = random_initial_q(grid, 100 + s, (n / 8).max(1), 0.5)?;
        worst = worst.max(variational_oracle(&q, c, directions, 1e-5, s, &sp)?.max_relative_defect);
    }
    Ok(CheckOutcome::measured("variational", worst, 1e-6, seeds * directions))
}

/// Random symmetric `Q`, symmetric `M` and general `∇u` with entries in
/// `[−1, 1]`.
pub fn random_cancellation_triple(
    rng: &mut impl Rng,
) -> (Matrix2<f64>, Matrix2<f64>, Matrix2<f64>) {
    let sym = |rng: &mut dyn rand::RngCore| {
        let (a, b, d): (f64, f64, f64) = (
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        Matrix2::new(a, b, b, d)
    };
    let q = sym(rng);
    let m = sym(rng);
    let g = Matrix2::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    (q, m, g)
}

/// Classical RK4 solution of the spatially constant Q equation
/// `q' = −(a + 2c(q₁² + q₂²)) q` at `t_end`.
pub fn constant_q_reference(q0: [f64; 2], c: &Coefficients, t_end: f64, steps: usize) -> [f64; 2] {
    let f = |q: [f64; 2]| {
        let r = -(c.a + 2.0 * c.c * (q[0] * q[0] + q[1] * q[1]));
        [r * q[0], r * q[1]]
    };
    let h = t_end / steps as f64;
    let mut q = q0;
    let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
    for _ in 0..steps {
        let k1 = f(q);
        let k2 = f(add(q, k1, h / 2.0));
        let k3 = f(add(q, k2, h / 2.0));
        let k4 = f(add(q, k3, h));
        for i in 0..2 {
            q[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    q
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

/// Successive-ratio orders `log(eᵢ/eᵢ₊₁) / log(pᵢ/pᵢ₊₁)`.
pub fn observed_orders(params: &[f64], errors: &[f64]) -> Vec<f64> {
    params
        .windows(2)
        .zip(errors.windows(2))
        .map(|(p, e)| (e[0] / e[1]).ln() / (p[0] / p[1]).ln())
        .collect()
}

/// Whether every entry is strictly below its predecessor.
pub fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn zeta2() -> Coefficients {
        Coefficients::default()
    }

    #[test]
    fn threshold_examples() {
        let r = eta_thresholds(&zeta2(), ThresholdConstants::default()).unwrap();
        assert_eq!(r.zeta, 2.0);
        assert!((r.eta_lemma32 - 4.0 / 9.0).abs() <= 1e-15);
        assert!((r.eta_lemma24 - 4.0 / 121.0).abs() <= 1e-15);
        assert!((r.eta2 - 0.0625).abs() <= 1e-15);
        assert!(r.eta_lemma24 < r.eta_lemma32);
        assert_eq!(r.a_lower.lemma32, -r.eta_lemma32);
        assert!(!r.unconstrained);
    }

    #[test]
    fn unconstrained_when_l4_vanishes() {
        let c = Coefficients {
            l4: 0.0,
            ..zeta2()
        };
        let r = eta_thresholds(&c, ThresholdConstants::default()).unwrap();
        assert!(r.unconstrained && r.eta_lemma32.is_infinite());
        assert_eq!(r.thm_gate, ThmGate::Unconstrained);
        let bad = Coefficients { c: -1.0, ..zeta2() };
        assert!(eta_thresholds(&bad, ThresholdConstants::default()).is_err());
    }

    #[test]
    fn threshold_reports_active_gate() {
        let r = eta_thresholds(&zeta2(), ThresholdConstants::default()).unwrap();
        // κ = 1 < ζ√ν = 2
        assert_eq!(r.thm_gate, ThmGate::Elastic);
        assert!((r.eta_thm - 1.0 / 121.0).abs() < 1e-16);
    }

    #[test]
    fn cancellation_examples() {
        let q = Matrix2::new(1.0, 0.0, 0.0, -1.0);
        let m = Matrix2::new(0.0, 1.0, 1.0, 0.0);
        let g = Matrix2::new(0.0, 1.0, 0.0, 0.0);
        let r = cancellation_check(&q, &m, &g).unwrap();
        assert!((r.lhs - 2.0).abs() < 1e-15 && (r.rhs - 2.0).abs() < 1e-15);
        let r = cancellation_check(&q, &q, &g).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        let sym = Matrix2::new(0.3, 0.7, 0.7, -0.2);
        let r = cancellation_check(&q, &m, &sym).unwrap();
        assert!(r.lhs.abs() < 1e-15 && r.rhs.abs() < 1e-15);
        let asym = Matrix2::new(0.0, 1.0, 0.0, 0.0);
        assert!(cancellation_check(&asym, &m, &g).is_err());
        assert!(cancellation_check(&q, &asym, &g).is_err());
    }

    #[test]
    fn max_principle_examples() {
        let eta: f64 = 4.0 / 9.0;
        let times: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let flat = vec![0.9 * eta.sqrt(); 11];
        assert!(max_principle_monitor(&times, &flat, eta).unwrap().passed);
        let crossing: Vec<f64> = times
            .iter()
            .map(|&t| if t >= 0.5 - 1e-12 { 1.01 * eta.sqrt() } else { 0.5 })
            .collect();
        let v = max_principle_monitor(&times, &crossing, eta).unwrap();
        assert!(!v.passed);
        assert!((v.first_violation.unwrap() - 0.5).abs() < 1e-12);
        let decay: Vec<f64> = times.iter().map(|t| eta.sqrt() * (-t).exp()).collect();
        assert!(max_principle_monitor(&times, &decay, eta).unwrap().passed);
        assert_eq!(
            max_principle_monitor(&[], &[], eta),
            Err(DiagnosticError::EmptySeries)
        );
    }

    #[test]
    fn residual_examples() {
        let r = energy_law_residual_series(&[0.0; 5], &[0.0; 5], 0.1).unwrap();
        assert!(r.per_step.iter().all(|v| *v == 0.0) && r.cumulative == 0.0);
        // E = e^{-t}, D = e^{-t}: explicit-rate defect ≈ dt²/2 per step
        let dt = 0.01;
        let e: Vec<f64> = (0..=10).map(|k| (-(k as f64) * dt).exp()).collect();
        let r = energy_law_residual_series(&e, &e, dt).unwrap();
        for (k, v) in r.per_step.iter().enumerate() {
            let want = e[k] * dt * dt / 2.0;
            assert!((v - want).abs() < want * 0.01);
        }
        assert!(matches!(
            energy_law_residual_series(&[1.0, 2.0], &[1.0], dt),
            Err(DiagnosticError::LengthMismatch(2, 1))
        ));
    }

    #[test]
    fn dependence_examples() {
        let g = GridSpec::new(32).unwrap();
        let sp = Spectral::new(g);
        let q = random_initial_q(g, 1, 3, 0.4).unwrap();
        let s = SimulationState::quiescent(g, q.clone());
        assert_eq!(continuous_dependence_metric(&s, &s, &sp).unwrap().value, 0.0);
        let u = VelocityField::new(
            ScalarField::from_fn(g, |_, y| (2.0 * PI * y).cos()),
            ScalarField::zeros(g),
        );
        let moved = SimulationState::new(0.0, u.clone(), q.clone());
        let m = continuous_dependence_metric(&moved, &s, &sp).unwrap();
        let want = 1.0 / (2.0 * (1.0 + 4.0 * PI * PI));
        assert!((m.value - want).abs() < 1e-14);

        let dq = random_initial_q(g, 2, 3, 0.1).unwrap();
        let a = SimulationState::new(0.0, u.clone(), q.add(&dq));
        let b = SimulationState::new(0.0, u.scale(3.0), q.add(&dq.scale(3.0)));
        let m1 = continuous_dependence_metric(&a, &s, &sp).unwrap().value;
        let m3 = continuous_dependence_metric(&b, &s, &sp).unwrap().value;
        assert!((m3 / m1 - 9.0).abs() < 1e-10);
        let other = SimulationState::quiescent(GridSpec::new(16).unwrap(), QTensorField::zeros(GridSpec::new(16).unwrap()));
        assert!(continuous_dependence_metric(&s, &other, &sp).is_err());
    }

    #[test]
    fn oracle_on_pure_bulk() {
        let g = GridSpec::new(16).unwrap();
        let sp = Spectral::new(g);
        let c = Coefficients {
            l1: 0.0,
            l4: 0.0,
            b: 0.7,
            ..zeta2()
        };
        let q = QTensorField::new(ScalarField::constant(g, 0.8), ScalarField::constant(g, -0.3));
        let r = variational_oracle(&q, &c, 5, 2e-6, 1, &sp).unwrap();
        assert!(r.max_relative_defect <= 1e-10, "{r:?}");
        assert!(variational_oracle(&q, &c, 1, 1e-2, 1, &sp).is_err());
    }

    #[test]
    fn oracle_on_random_field() {
        let g = GridSpec::new(32).unwrap();
        let sp = Spectral::new(g);
        let c = Coefficients {
            l2: 0.4,
            l3: 0.3,
            b: 0.5,
            ..zeta2()
        };
        let q = random_initial_q(g, 5, 4, 0.5).unwrap();
        let r = variational_oracle(&q, &c, 3, 1e-5, 2, &sp).unwrap();
        assert!(r.max_relative_defect <= 1e-6, "{r:?}");
    }

    #[test]
    fn interpolation_sine_case() {
        let g = GridSpec::new(64).unwrap();
        let sp = Spectral::new(g);
        let f = ScalarField::from_fn(g, |x, _| (2.0 * PI * x).sin());
        let (lhs, rhs) = interpolation_sides(&f, &sp);
        let want_lhs = (2.0 * PI).powi(2) * (3.0f64 / 8.0).sqrt();
        let want_rhs = 3.0 * (2.0 * PI).powi(2) / 2.0f64.sqrt();
        assert!((lhs - want_lhs).abs() / want_lhs < 1e-6);
        assert!((rhs - want_rhs).abs() / want_rhs < 1e-6);
        assert!((lhs - 24.18).abs() < 0.01 && (rhs - 83.75).abs() < 0.01);
    }

    #[test]
    fn collapse_trivial_without_l23() {
        let g = GridSpec::new(32).unwrap();
        let sp = Spectral::new(g);
        let q = QTensorField::new(
            ScalarField::from_fn(g, |x, y| (2.0 * PI * (x + 2.0 * y)).cos()),
            ScalarField::zeros(g),
        );
        assert_eq!(collapse_defect(&q, &zeta2(), &sp), 0.0);
    }

    #[test]
    fn small_identity_suite_passes() {
        let c = Coefficients {
            l2: 0.5,
            l3: 0.3,
            b: 1.5,
            ..zeta2()
        };
        let r = identity_suite(&IdentityOptions::new(32, 4, c)).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.checks.len(), 8);
    }

    #[test]
    fn orders_and_slopes() {
        let x = [1e-2, 1e-3, 1e-4];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v * v).collect();
        assert!((loglog_slope(&x, &y) - 2.0).abs() < 1e-12);
        let o = observed_orders(&[0.1, 0.05], &[0.4, 0.2]);
        assert!((o[0] - 1.0).abs() < 1e-12);
        assert!(strictly_decreasing(&[3.0, 2.0, 1.0]));
        assert!(!strictly_decreasing(&[3.0, 3.0]));
    }

    #[test]
    fn ode_reference_matches_closed_form_without_cubic() {
        let c = Coefficients { c: 0.0, a: 0.5, ..zeta2() };
        let q = constant_q_reference([0.2, -0.1], &c, 1.0, 100);
        assert!((q[0] - 0.2 * (-0.5f64).exp()).abs() < 1e-10);
    }
}
