//! First-order IMEX integration of the coupled velocity / Q-tensor system,
//! optionally with the hyperdissipation `δ(−Δ)^k u`.
//!
//! Implicit (Fourier multipliers): `νΔu`, `δ(−Δ)^k u`, `ζΔQ`.
//! Explicit: advection, corotational transport, every remaining term of the
//! constrained field, and the stress divergence. Pressure never appears; the
//! gradient component removed by the Leray projection is reported as `∇P`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energetics::{constrained_parts_from_jet, ledger_from_parts, EnergyLedger, TensorJet};
use crate::field::{
    validate_coefficients, CoefficientError, Coefficients, GridSpec, QTensorField, ScalarField,
    TensorField, VelocityField,
};
use crate::spectral::{SpectralField, Spectral};
use crate::stress::{commutator, divergence_of, sigma_s_from_jet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error(transparent)]
    Coefficients(#[from] CoefficientError),
    #[error("time step must be positive, got {0}")]
    BadTimeStep(f64),
    #[error("CFL number {cfl:.3e} exceeds guard {limit:.3e} at t = {t}")]
    Cfl { cfl: f64, limit: f64, t: f64 },
    #[error("non-finite field values after step from t = {t}")]
    BlowUp { t: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("t_end = {t_end} must exceed the initial time {t0}")]
    BadHorizon { t0: f64, t_end: f64 },
    #[error("step failed at t = {t}: {source}")]
    Step {
        t: f64,
        source: StepError,
        /// Ledger of the last state that was still finite.
        last_ledger: Option<EnergyLedger>,
        /// Samples recorded before the failure.
        partial: Vec<Sample>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Scheme {
    /// First-order implicit-explicit Euler.
    #[default]
    Imex1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub dealias_enabled: bool,
    /// Largest admissible `‖u‖_∞ dt / dx`.
    pub cfl_guard: Option<f64>,
}

impl StepperConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            scheme: Scheme::Imex1,
            dealias_enabled: true,
            cfl_guard: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub t: f64,
    pub u: VelocityField,
    pub q: QTensorField,
}

impl SimulationState {
    pub fn new(t: f64, u: VelocityField, q: QTensorField) -> Self {
        Self { t, u, q }
    }

    pub fn quiescent(grid: GridSpec, q: QTensorField) -> Self {
        Self::new(0.0, VelocityField::zeros(grid), q)
    }

    pub fn grid(&self) -> GridSpec {
        self.q.grid()
    }
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: SimulationState,
    /// Gradient part rejected by the projection (discrete `∇P`).
    pub pressure_gradient: VelocityField,
    /// Ledger of the state the step started from.
    pub ledger: EnergyLedger,
}

/// `(ω, A)` with `ω = (∇u − ∇uᵀ)/2`, `A = (∇u + ∇uᵀ)/2` and `(∇u)ᵢⱼ = ∂ⱼuᵢ`.
pub fn vorticity_and_strain(u: &VelocityField, sp: &Spectral) -> (TensorField, TensorField) {
    let g = velocity_gradient(u, sp);
    antisym_sym(&g)
}

/// `(∇u)ᵢⱼ = ∂ⱼuᵢ`
pub fn velocity_gradient(u: &VelocityField, sp: &Spectral) -> TensorField {
    let [g00, g01] = sp.gradient(&u.u1);
    let [g10, g11] = sp.gradient(&u.u2);
    TensorField::from_components([[g00, g01], [g10, g11]])
}

fn antisym_sym(g: &TensorField) -> (TensorField, TensorField) {
    let gt = g.transpose();
    (g.sub(&gt).scale(0.5), g.add(&gt).scale(0.5))
}

/// `Qω − ωQ` pointwise.
pub fn rotation_commutator(q: &QTensorField, omega: &TensorField) -> TensorField {
    commutator(&q.to_tensor(), omega)
}

/// `u·∇Q + Qω − ωQ`, each product level dealiased.
pub fn corotational_transport(u: &VelocityField, q: &QTensorField, sp: &Spectral) -> QTensorField {
    let (omega, _) = vorticity_and_strain(u, sp);
    transport_with(u, q, &omega, sp)
}

fn transport_with(
    u: &VelocityField,
    q: &QTensorField,
    omega: &TensorField,
    sp: &Spectral,
) -> QTensorField {
    let advect = |f: &ScalarField| {
        let [d1, d2] = sp.gradient(f);
        let mut a = &u.u1 * &d1;
        a += &(&u.u2 * &d2);
        sp.stage(a)
    };
    let rot = rotation_commutator(q, omega).traceless_symmetric_part();
    QTensorField::new(
        &advect(&q.q1) + &sp.stage(rot.q1),
        &advect(&q.q2) + &sp.stage(rot.q2),
    )
}

/// Shape tensor
/// `S = (ξA + ω)(Q + I/2) + (Q + I/2)(ξA − ω) − 2ξ(Q + I/2) tr(Q∇u)`,
/// arranged as `(ωQ − Qω) + ξ[…]` so that `ξ = 0` gives `ωQ − Qω` bitwise.
pub fn shape_tensor_s(grad_u: &TensorField, q: &QTensorField, xi: f64) -> TensorField {
    let (omega, strain) = antisym_sym(grad_u);
    let qt = q.to_tensor();
    let grid = q.grid();
    let rot = commutator(&omega, &qt);
    let mut out: [[Vec<f64>; 2]; 2] = Default::default();
    for p in 0..grid.len() {
        let a = strain.at(p);
        let qm = qt.at(p);
        let shifted = qm + nalgebra::Matrix2::identity() * 0.5;
        let tr = (qm * grad_u.at(p)).trace();
        let align = a * shifted + shifted * a - shifted * (2.0 * tr);
        for i in 0..2 {
            for j in 0..2 {
                out[i][j].push(rot.c[i][j].as_slice()[p] + xi * align[(i, j)]);
            }
        }
    }
    let [[a, b], [c, d]] = out;
    TensorField::from_components([
        [ScalarField::from_vec(grid, a), ScalarField::from_vec(grid, b)],
        [ScalarField::from_vec(grid, c), ScalarField::from_vec(grid, d)],
    ])
}

/// Owns the FFT plans and implicit multipliers for one parameter set.
#[derive(Debug, Clone)]
pub struct Stepper {
    sp: Spectral,
    coeffs: Coefficients,
    config: StepperConfig,
    /// `1 / (1 + dt(ν|k|² + δ|k|^{2k}))`
    u_solve: Vec<f64>,
    /// `1 / (1 + dt ζ|k|²)`
    q_solve: Vec<f64>,
}

impl Stepper {
    pub fn new(
        grid: GridSpec,
        coeffs: Coefficients,
        config: StepperConfig,
    ) -> Result<Self, StepError> {
        if !(config.dt > 0.0) {
            return Err(StepError::BadTimeStep(config.dt));
        }
        validate_coefficients(&coeffs).ensure_admissible()?;
        let sp = Spectral::new(grid).with_dealias(config.dealias_enabled);
        let dt = config.dt;
        let zeta = coeffs.zeta();
        let mut u_solve = Vec::with_capacity(grid.len());
        let mut q_solve = Vec::with_capacity(grid.len());
        for p in 0..grid.len() {
            let (k1, k2) = sp.wavenumber(p);
            let kk = k1 * k1 + k2 * k2;
            let hyper = if coeffs.delta > 0.0 {
                coeffs.delta * kk.powi(coeffs.k_reg as i32)
            } else {
                0.0
            };
            u_solve.push(1.0 / (1.0 + dt * (coeffs.nu * kk + hyper)));
            q_solve.push(1.0 / (1.0 + dt * zeta * kk));
        }
        Ok(Self {
            sp,
            coeffs,
            config,
            u_solve,
            q_solve,
        })
    }

    pub fn spectral(&self) -> &Spectral {
        &self.sp
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn config(&self) -> &StepperConfig {
        &self.config
    }

    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    pub fn ledger(&self, state: &SimulationState) -> EnergyLedger {
        crate::energetics::measure_ledger(state.t, &state.u, &state.q, &self.coeffs, &self.sp)
    }

    /// Projects and dealiases a velocity so it is an admissible initial state.
    pub fn admissible_velocity(&self, u: &VelocityField) -> VelocityField {
        let mut s1 = self.sp.forward(&u.u1);
        let mut s2 = self.sp.forward(&u.u2);
        self.sp.dealias_spectral(&mut s1);
        self.sp.dealias_spectral(&mut s2);
        self.sp.leray_project_spectral(&mut s1, &mut s2);
        VelocityField::new(self.sp.inverse(&s1), self.sp.inverse(&s2))
    }

    pub fn step(&self, state: &SimulationState) -> Result<StepOutput, StepError> {
        let sp = &self.sp;
        let c = &self.coeffs;
        let dt = self.config.dt;
        if let Some(limit) = self.config.cfl_guard {
            let cfl = state.u.linf() * dt / state.grid().dx();
            if cfl > limit {
                return Err(StepError::Cfl {
                    cfl,
                    limit,
                    t: state.t,
                });
            }
        }

        let jet = TensorJet::of_q(sp, &state.q);
        let parts = constrained_parts_from_jet(&jet, c, sp);
        let x = parts.total();
        let ledger = ledger_from_parts(state.t, &state.u, &state.q, &jet, &x, c, sp);

        // Q equation: ∂ₜQ = ζΔQ + remainder − (u·∇Q + Qω − ωQ)
        let grad_u = velocity_gradient(&state.u, sp);
        let (omega, _) = antisym_sym(&grad_u);
        let transport = transport_with(&state.u, &state.q, &omega, sp);
        let rem = parts.remainder.traceless_symmetric_part();
        let q_next = [(&state.q.q1, &rem.q1, &transport.q1), (&state.q.q2, &rem.q2, &transport.q2)]
            .map(|(q, r, tr)| {
                let mut rhs = r - tr;
                rhs = &(&rhs * dt) + q;
                let mut s = sp.forward(&rhs);
                sp.dealias_spectral(&mut s);
                for (v, m) in s.as_mut_slice().iter_mut().zip(&self.q_solve) {
                    *v *= m;
                }
                sp.inverse(&s)
            });

        // momentum: ∂ₜu = −∇·(u⊗u) + ∇·(σᵃ + σˢ) − ∇P + implicit terms
        let qt = state.q.to_tensor();
        let sa = commutator(&qt, &x).c.map(|row| row.map(|f| sp.stage(f)));
        let ss = sigma_s_from_jet(&jet, c, sp);
        let u = &state.u;
        let uu = [
            [sp.product(&u.u1, &u.u1), sp.product(&u.u1, &u.u2)],
            [sp.product(&u.u2, &u.u1), sp.product(&u.u2, &u.u2)],
        ];
        let stress = TensorField::from_components(std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let mut s = &sa[i][j] + &ss.c[i][j];
                s.axpy(-1.0, &uu[i][j]);
                s
            })
        }));
        let force = divergence_of(&stress, sp);
        let mut f1 = sp.forward(&force.u1);
        let mut f2 = sp.forward(&force.u2);
        let (g1, g2) = sp.leray_project_spectral(&mut f1, &mut f2);
        let update = |u: &ScalarField, f: &SpectralField| {
            let mut s = sp.forward(u);
            for ((v, fv), m) in s.as_mut_slice().iter_mut().zip(f.as_slice()).zip(&self.u_solve) {
                *v = (*v + fv * dt) * m;
            }
            s
        };
        let mut s1 = update(&u.u1, &f1);
        let mut s2 = update(&u.u2, &f2);
        sp.leray_project_spectral(&mut s1, &mut s2);
        let u_next = VelocityField::new(sp.inverse(&s1), sp.inverse(&s2));
        let [q1, q2] = q_next;
        let q_next = QTensorField::new(q1, q2);
        if !u_next.is_finite() || !q_next.is_finite() {
            return Err(StepError::BlowUp { t: state.t });
        }
        Ok(StepOutput {
            state: SimulationState::new(state.t + dt, u_next, q_next),
            pressure_gradient: VelocityField::new(sp.inverse(&g1), sp.inverse(&g2)),
            ledger,
        })
    }
}

/// One step with a freshly built [`Stepper`].
pub fn step(
    state: &SimulationState,
    coeffs: &Coefficients,
    config: &StepperConfig,
) -> Result<StepOutput, StepError> {
    Stepper::new(state.grid(), *coeffs, *config)?.step(state)
}

/// One observer sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub step: usize,
    pub ledger: EnergyLedger,
    /// Running `Σ rₙ` with `rₙ = [E(tₙ₊₁) − E(tₙ)] + dt·D(tₙ)`.
    pub residual: f64,
    pub q_linf: f64,
    pub u_l2: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub samples: Vec<Sample>,
    /// Ledger at every step `0..=steps`.
    pub ledgers: Vec<EnergyLedger>,
    /// `max_x |Q|` at every step `0..=steps`.
    pub q_linf: Vec<f64>,
    pub final_state: SimulationState,
    pub steps: usize,
}

fn close_residual(acc: &mut f64, prev: Option<&EnergyLedger>, next: &EnergyLedger, dt: f64) {
    if let Some(prev) = prev {
        *acc += next.total - prev.total + dt * prev.dissipation();
    }
}

/// Number of steps of size `dt` needed to reach `t_end` from `t0`.
pub fn step_count(t0: f64, t_end: f64, dt: f64) -> usize {
    ((t_end - t0) / dt - 1e-9).ceil().max(0.0) as usize
}

/// Advances `initial` to `t_end`, calling `observer` at step 0, every
/// `stride` steps, and at the final step.
pub fn run(
    initial: &SimulationState,
    stepper: &Stepper,
    t_end: f64,
    stride: usize,
    mut observer: impl FnMut(&SimulationState, &Sample),
) -> Result<RunOutput, RunError> {
    if !(t_end > initial.t) {
        return Err(RunError::BadHorizon {
            t0: initial.t,
            t_end,
        });
    }
    let stride = stride.max(1);
    let dt = stepper.dt();
    let steps = step_count(initial.t, t_end, dt);
    let mut state = initial.clone();
    let mut samples = Vec::new();
    let mut ledgers = Vec::with_capacity(steps + 1);
    let mut q_linf = Vec::with_capacity(steps + 1);
    let mut residual = 0.0;
    let t0 = initial.t;
    let make_sample = |step: usize, ledger: EnergyLedger, residual: f64, s: &SimulationState| Sample {
        step,
        ledger,
        residual,
        q_linf: s.q.linf(),
        u_l2: s.u.l2_sq().sqrt(),
    };

    for n in 0..steps {
        let out = match stepper.step(&state) {
            Ok(out) => out,
            Err(source) => {
                return Err(RunError::Step {
                    t: state.t,
                    source,
                    last_ledger: ledgers.last().copied(),
                    partial: samples,
                })
            }
        };
        let ledger = out.ledger;
        close_residual(&mut residual, ledgers.last(), &ledger, dt);
        if n % stride == 0 {
            let s = make_sample(n, ledger, residual, &state);
            observer(&state, &s);
            samples.push(s);
        }
        q_linf.push(state.q.linf());
        ledgers.push(ledger);
        state = out.state;
        state.t = t0 + (n + 1) as f64 * dt;
    }
    let last = stepper.ledger(&state);
    close_residual(&mut residual, ledgers.last(), &last, dt);
    ledgers.push(last);
    q_linf.push(state.q.linf());
    let s = make_sample(steps, last, residual, &state);
    observer(&state, &s);
    samples.push(s);
    Ok(RunOutput {
        samples,
        ledgers,
        q_linf,
        final_state: state,
        steps,
    })
}
