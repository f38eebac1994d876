//! Landau–de Gennes free energy, the molecular field `H = −δE/δQ`, the
//! Lagrange multipliers for the trace and symmetry constraints, and the
//! constrained field `H + λI + μ − μᵀ` that drives the Q-tensor equation.
//!
//! Index conventions follow the usual Einstein notation: `Q_{ij,k} = ∂ₖQᵢⱼ`.
//! Every nonlinear product is closed with [`Spectral::stage`], one stage per
//! multiplication level, so cubic terms are dealiased twice.

use serde::{Deserialize, Serialize};

use crate::field::{Coefficients, QTensorField, ScalarField, TensorField, VelocityField};
use crate::spectral::Spectral;

type M2 = [[f64; 2]; 2];

/// Values, first and second derivatives of a 2×2 tensor field.
///
/// `d1[k][i][j] = ∂ₖQᵢⱼ`, `d2[k][l][i][j] = ∂ₖ∂ₗQᵢⱼ`.
#[derive(Debug, Clone)]
pub struct TensorJet {
    pub q: [[ScalarField; 2]; 2],
    pub d1: [[[ScalarField; 2]; 2]; 2],
    pub d2: [[[[ScalarField; 2]; 2]; 2]; 2],
}

/// Jet values at a single grid point.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct LocalJet {
    pub q: M2,
    pub d1: [M2; 2],
    pub d2: [[M2; 2]; 2],
}

const SECOND_ORDER: [(usize, usize, (u32, u32)); 3] = [(0, 0, (2, 0)), (0, 1, (1, 1)), (1, 1, (0, 2))];
const FIRST_ORDER: [(usize, (u32, u32)); 2] = [(0, (1, 0)), (1, (0, 1))];

impl TensorJet {
    /// Jet of a traceless symmetric field: ten transforms, then assembled
    /// with `Q₂₂ = −Q₁₁` and `Q₂₁ = Q₁₂` exactly.
    pub fn of_q(sp: &Spectral, q: &QTensorField) -> Self {
        let comps = [sp.forward(&q.q1), sp.forward(&q.q2)];
        let first: [[ScalarField; 2]; 2] = std::array::from_fn(|c| {
            std::array::from_fn(|k| sp.inverse(&sp.differentiate(&comps[c], FIRST_ORDER[k].1)))
        });
        let mut second: [[Option<[ScalarField; 2]>; 2]; 2] = Default::default();
        for &(k, l, alpha) in &SECOND_ORDER {
            let pair: [ScalarField; 2] =
                std::array::from_fn(|c| sp.inverse(&sp.differentiate(&comps[c], alpha)));
            second[l][k] = Some(pair.clone());
            second[k][l] = Some(pair);
        }
        let assemble = |pair: &[ScalarField; 2]| -> [[ScalarField; 2]; 2] {
            [
                [pair[0].clone(), pair[1].clone()],
                [pair[1].clone(), -&pair[0]],
            ]
        };
        Self {
            q: assemble(&[q.q1.clone(), q.q2.clone()]),
            d1: std::array::from_fn(|k| assemble(&[first[0][k].clone(), first[1][k].clone()])),
            d2: std::array::from_fn(|k| {
                std::array::from_fn(|l| assemble(second[k][l].as_ref().expect("filled above")))
            }),
        }
    }

    /// Jet of an arbitrary tensor field, component by component.
    pub fn of_tensor(sp: &Spectral, t: &TensorField) -> Self {
        let spec: [[_; 2]; 2] =
            std::array::from_fn(|i| std::array::from_fn(|j| sp.forward(&t.c[i][j])));
        let deriv = |alpha: (u32, u32)| -> [[ScalarField; 2]; 2] {
            std::array::from_fn(|i| {
                std::array::from_fn(|j| sp.inverse(&sp.differentiate(&spec[i][j], alpha)))
            })
        };
        let d1 = [deriv((1, 0)), deriv((0, 1))];
        let d11 = deriv((2, 0));
        let d12 = deriv((1, 1));
        let d22 = deriv((0, 2));
        Self {
            q: t.c.clone(),
            d1,
            d2: [[d11, d12.clone()], [d12, d22]],
        }
    }

    pub fn grid(&self) -> crate::field::GridSpec {
        self.q[0][0].grid()
    }

    pub(crate) fn local(&self, p: usize) -> LocalJet {
        let mut out = LocalJet::default();
        for i in 0..2 {
            for j in 0..2 {
                out.q[i][j] = self.q[i][j].as_slice()[p];
                for k in 0..2 {
                    out.d1[k][i][j] = self.d1[k][i][j].as_slice()[p];
                    for l in 0..2 {
                        out.d2[k][l][i][j] = self.d2[k][l][i][j].as_slice()[p];
                    }
                }
            }
        }
        out
    }

    /// `ΔQ` assembled from the second derivatives.
    pub fn laplacian(&self) -> TensorField {
        TensorField::from_components(std::array::from_fn(|i| {
            std::array::from_fn(|j| &self.d2[0][0][i][j] + &self.d2[1][1][i][j])
        }))
    }
}

/// Evaluates `f` at every grid point into a scalar field.
fn pointwise(jet: &TensorJet, f: impl Fn(&LocalJet) -> f64) -> ScalarField {
    let grid = jet.grid();
    let data = (0..grid.len()).map(|p| f(&jet.local(p))).collect();
    ScalarField::from_vec(grid, data)
}

/// Evaluates a matrix-valued `f` at every grid point.
fn pointwise_tensor(jet: &TensorJet, f: impl Fn(&LocalJet) -> M2) -> TensorField {
    let grid = jet.grid();
    let mut out: [[Vec<f64>; 2]; 2] = Default::default();
    for row in out.iter_mut() {
        for v in row.iter_mut() {
            v.reserve(grid.len());
        }
    }
    for p in 0..grid.len() {
        let m = f(&jet.local(p));
        for i in 0..2 {
            for j in 0..2 {
                out[i][j].push(m[i][j]);
            }
        }
    }
    let [[a, b], [c, d]] = out;
    TensorField::from_components([
        [ScalarField::from_vec(grid, a), ScalarField::from_vec(grid, b)],
        [ScalarField::from_vec(grid, c), ScalarField::from_vec(grid, d)],
    ])
}

fn stage_tensor(sp: &Spectral, t: TensorField) -> TensorField {
    let TensorField { c: [[a, b], [c, d]] } = t;
    TensorField::from_components([[sp.stage(a), sp.stage(b)], [sp.stage(c), sp.stage(d)]])
}

fn tensor_from_fn(f: impl Fn(usize, usize) -> ScalarField) -> TensorField {
    TensorField::from_components(std::array::from_fn(|i| std::array::from_fn(|j| f(i, j))))
}

fn tr_sq(q: &M2) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            s += q[i][j] * q[j][i];
        }
    }
    s
}

fn grad_sq(l: &LocalJet) -> f64 {
    let mut s = 0.0;
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                s += l.d1[k][i][j] * l.d1[k][i][j];
            }
        }
    }
    s
}

/// `G_ab = Q_{kl,a} Q_{kl,b}`
fn gradient_gram(l: &LocalJet) -> M2 {
    let mut g = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for k in 0..2 {
                for m in 0..2 {
                    g[a][b] += l.d1[a][k][m] * l.d1[b][k][m];
                }
            }
        }
    }
    g
}

pub(crate) fn elastic_density_local(l: &LocalJet, c: &Coefficients) -> f64 {
    let d = &l.d1;
    let (mut e1, mut e2, mut e3, mut e4) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                e1 += d[k][i][j] * d[k][i][j];
                e2 += d[j][i][k] * d[k][i][j];
                e3 += d[j][i][j] * d[k][i][k];
                for m in 0..2 {
                    e4 += l.q[m][k] * d[k][i][j] * d[m][i][j];
                }
            }
        }
    }
    c.l1 * e1 + c.l2 * e2 + c.l3 * e3 + c.l4 * e4
}

/// Bulk density for a general (not necessarily traceless) symmetric matrix.
pub(crate) fn bulk_density_general(q: &M2, c: &Coefficients) -> f64 {
    let t2 = tr_sq(q);
    let mut t3 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                t3 += q[i][j] * q[j][k] * q[k][i];
            }
        }
    }
    0.5 * c.a * t2 - c.b / 3.0 * t3 + 0.25 * c.c * t2 * t2
}

/// `(a/2)tr(Q²) − (b/3)tr(Q³) + (c/4)tr²(Q²)` pointwise. In 2D `tr(Q³) = 0`
/// for traceless `Q`, so the `b` term is never evaluated.
pub fn bulk_energy_density(q: &QTensorField, c: &Coefficients) -> ScalarField {
    q.q1.zip_map(&q.q2, |x, y| {
        let s = x * x + y * y;
        c.a * s + c.c * s * s
    })
}

pub fn elastic_energy_density(q: &QTensorField, c: &Coefficients, sp: &Spectral) -> ScalarField {
    elastic_density_from_jet(&TensorJet::of_q(sp, q), c)
}

pub fn elastic_density_from_jet(jet: &TensorJet, c: &Coefficients) -> ScalarField {
    pointwise(jet, |l| elastic_density_local(l, c))
}

/// `E(Q) = ∫ F_bulk + F_elastic`
pub fn total_free_energy(q: &QTensorField, c: &Coefficients, sp: &Spectral) -> f64 {
    bulk_energy_density(q, c).integral() + elastic_energy_density(q, c, sp).integral()
}

/// Free energy of an arbitrary symmetric tensor field, trace part included.
/// This is the functional whose unconstrained derivative is `−H`.
pub fn free_energy_of_tensor(t: &TensorField, c: &Coefficients, sp: &Spectral) -> f64 {
    free_energy_density_of_tensor(t, c, sp).integral()
}

/// Pointwise integrand of [`free_energy_of_tensor`].
pub fn free_energy_density_of_tensor(
    t: &TensorField,
    c: &Coefficients,
    sp: &Spectral,
) -> ScalarField {
    let jet = TensorJet::of_tensor(sp, t);
    pointwise(&jet, |l| elastic_density_local(l, c) + bulk_density_general(&l.q, c))
}

/// Elastic part of `−δE/δQ` that is at most quadratic in `Q` (everything
/// except the bulk terms), pointwise.
fn neg_h_elastic_local(l: &LocalJet, c: &Coefficients) -> M2 {
    let g = gradient_gram(l);
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let lap = l.d2[0][0][i][j] + l.d2[1][1][i][j];
            // Q_{ik,kj}
            let div_grad = l.d2[0][j][i][0] + l.d2[1][j][i][1];
            let mut transport = 0.0;
            for m in 0..2 {
                for k in 0..2 {
                    transport += l.d1[m][i][j] * l.d1[k][m][k] + l.d2[m][k][i][j] * l.q[m][k];
                }
            }
            out[i][j] = -2.0 * c.l1 * lap - 2.0 * (c.l2 + c.l3) * div_grad
                - 2.0 * c.l4 * transport
                + c.l4 * g[i][j];
        }
    }
    out
}

/// `tr(Q²)` staged as its own multiplication level.
fn trace_sq_field(jet: &TensorJet, sp: &Spectral) -> ScalarField {
    sp.stage(pointwise(jet, |l| tr_sq(&l.q)))
}

/// `c tr(Q²) Q` with both multiplication levels staged.
fn cubic_bulk(jet: &TensorJet, c: &Coefficients, sp: &Spectral) -> TensorField {
    let t2 = trace_sq_field(jet, sp);
    stage_tensor(sp, tensor_from_fn(|i, j| &(&t2 * &jet.q[i][j]) * c.c))
}

/// `H̃ = H + aQ − bQ² + c tr(Q²)Q`, the purely elastic part of the molecular
/// field.
pub fn elastic_molecular_field_from_jet(
    jet: &TensorJet,
    c: &Coefficients,
    sp: &Spectral,
) -> TensorField {
    stage_tensor(sp, pointwise_tensor(jet, |l| neg_h_elastic_local(l, c))).scale(-1.0)
}

pub fn molecular_field_from_jet(jet: &TensorJet, c: &Coefficients, sp: &Spectral) -> TensorField {
    let elastic = elastic_molecular_field_from_jet(jet, c, sp);
    // −bQ_{jk}Q_{ki}
    let quad = stage_tensor(
        sp,
        pointwise_tensor(jet, |l| {
            let mut m = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        m[i][j] += l.q[j][k] * l.q[k][i];
                    }
                }
            }
            m
        }),
    );
    let cubic = cubic_bulk(jet, c, sp);
    tensor_from_fn(|i, j| {
        let mut h = elastic.c[i][j].clone();
        h.axpy(-c.a, &jet.q[i][j]);
        h.axpy(c.b, &quad.c[i][j]);
        h.axpy(-1.0, &cubic.c[i][j]);
        h
    })
}

/// Molecular field `H`, minus the unconstrained Fréchet derivative of `E`.
/// Not symmetric in general when `L2 + L3 ≠ 0`.
pub fn molecular_field_h(q: &QTensorField, c: &Coefficients, sp: &Spectral) -> TensorField {
    molecular_field_from_jet(&TensorJet::of_q(sp, q), c, sp)
}

pub fn lagrange_multipliers_from_jet(
    jet: &TensorJet,
    c: &Coefficients,
    sp: &Spectral,
) -> (ScalarField, TensorField) {
    let l23 = c.l2 + c.l3;
    let t2 = trace_sq_field(jet, sp);
    let g2 = sp.stage(pointwise(jet, grad_sq));
    let double_div = pointwise(jet, |l| {
        let mut s = 0.0;
        for m in 0..2 {
            for k in 0..2 {
                s += l.d2[m][k][m][k];
            }
        }
        s
    });
    let mut lambda = &t2 * (-0.5 * c.b);
    lambda.axpy(-l23, &double_div);
    lambda.axpy(0.5 * c.l4, &g2);
    let mu = pointwise_tensor(jet, |l| {
        // ∂ᵢ∂ₖQⱼₖ
        let dd = |i: usize, j: usize| l.d2[i][0][j][0] + l.d2[i][1][j][1];
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = if i == j { 0.0 } else { l23 * (dd(i, j) - dd(j, i)) };
            }
        }
        m
    });
    (lambda, mu)
}

/// `(λ, μ − μᵀ)` enforcing tracelessness and symmetry of the Q evolution.
pub fn lagrange_multipliers(
    q: &QTensorField,
    c: &Coefficients,
    sp: &Spectral,
) -> (ScalarField, TensorField) {
    lagrange_multipliers_from_jet(&TensorJet::of_q(sp, q), c, sp)
}

/// Closed form of `H + λI + μ − μᵀ`, split into the linear part `ζΔQ` and the
/// remainder.
#[derive(Debug, Clone)]
pub struct ConstrainedParts {
    pub diffusion: TensorField,
    pub remainder: TensorField,
}

impl ConstrainedParts {
    pub fn total(&self) -> TensorField {
        self.diffusion.add(&self.remainder)
    }
}

pub fn constrained_parts_from_jet(
    jet: &TensorJet,
    c: &Coefficients,
    sp: &Spectral,
) -> ConstrainedParts {
    let diffusion = jet.laplacian().scale(c.zeta());
    // 2L4 (Q_{ij,l} Q_{lk})_{,k}
    let flux: [[[ScalarField; 2]; 2]; 2] = std::array::from_fn(|k| {
        let t = pointwise_tensor(jet, |l| {
            let mut m = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for s in 0..2 {
                        m[i][j] += l.d1[s][i][j] * l.q[s][k];
                    }
                }
            }
            m
        });
        stage_tensor(sp, t).c
    });
    let transport = tensor_from_fn(|i, j| {
        let mut s = sp.forward(&flux[0][i][j]);
        sp.differentiate_in_place(&mut s, (1, 0));
        let mut s2 = sp.forward(&flux[1][i][j]);
        sp.differentiate_in_place(&mut s2, (0, 1));
        for (a, b) in s.as_mut_slice().iter_mut().zip(s2.as_slice()) {
            *a += b;
        }
        &sp.inverse(&s) * (2.0 * c.l4)
    });
    // −L4 Q_{kl,i}Q_{kl,j} + (L4/2)|∇Q|² δᵢⱼ
    let gram = stage_tensor(
        sp,
        pointwise_tensor(jet, |l| {
            let g = gradient_gram(l);
            let half = 0.5 * (g[0][0] + g[1][1]);
            [
                [c.l4 * (half - g[0][0]), -c.l4 * g[0][1]],
                [-c.l4 * g[1][0], c.l4 * (half - g[1][1])],
            ]
        }),
    );
    let cubic = cubic_bulk(jet, c, sp);
    let remainder = tensor_from_fn(|i, j| {
        let mut r = &transport.c[i][j] + &gram.c[i][j];
        r.axpy(-c.a, &jet.q[i][j]);
        r.axpy(-1.0, &cubic.c[i][j]);
        r
    });
    ConstrainedParts {
        diffusion,
        remainder,
    }
}

/// `H + λI + μ − μᵀ` from its closed form
/// `ζΔQ + 2L4(Q_{ij,l}Q_{lk})_{,k} − L4 Q_{kl,i}Q_{kl,j} + (L4/2)|∇Q|²δᵢⱼ − aQ − c tr(Q²)Q`.
/// Independent of `b`.
pub fn constrained_field(q: &QTensorField, c: &Coefficients, sp: &Spectral) -> TensorField {
    constrained_parts_from_jet(&TensorJet::of_q(sp, q), c, sp).total()
}

/// `H`, `λ`, `μ − μᵀ` and the closed-form constrained field, all from one jet.
#[derive(Debug, Clone)]
pub struct MolecularFieldBundle {
    pub h: TensorField,
    pub lambda_field: ScalarField,
    pub mu_antisym: TensorField,
    pub constrained: TensorField,
}

impl MolecularFieldBundle {
    pub fn compute(q: &QTensorField, c: &Coefficients, sp: &Spectral) -> Self {
        let jet = TensorJet::of_q(sp, q);
        let (lambda_field, mu_antisym) = lagrange_multipliers_from_jet(&jet, c, sp);
        Self {
            h: molecular_field_from_jet(&jet, c, sp),
            lambda_field,
            mu_antisym,
            constrained: constrained_parts_from_jet(&jet, c, sp).total(),
        }
    }

    /// `H + λI + (μ − μᵀ)` assembled from the separate pieces.
    pub fn assembled(&self) -> TensorField {
        tensor_from_fn(|i, j| {
            let mut v = &self.h.c[i][j] + &self.mu_antisym.c[i][j];
            if i == j {
                v += &self.lambda_field;
            }
            v
        })
    }
}

/// Energy budget of one state. Dissipation entries are rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub t: f64,
    /// `½∫|u|²`
    pub kinetic: f64,
    pub bulk: f64,
    pub elastic: f64,
    /// `E(Q) = bulk + elastic`
    pub free: f64,
    pub total: f64,
    /// `ν∫|∇u|²`
    pub viscous_diss: f64,
    /// `∫|H + λI + μ − μᵀ|²`
    pub rotational_diss: f64,
    /// `δ∫|∇ᵏu|²`
    pub reg_diss: f64,
}

impl EnergyLedger {
    pub fn dissipation(&self) -> f64 {
        self.viscous_diss + self.rotational_diss + self.reg_diss
    }

    pub fn zero(t: f64) -> Self {
        Self {
            t,
            kinetic: 0.0,
            bulk: 0.0,
            elastic: 0.0,
            free: 0.0,
            total: 0.0,
            viscous_diss: 0.0,
            rotational_diss: 0.0,
            reg_diss: 0.0,
        }
    }
}

/// Builds the ledger from precomputed pieces; `constrained` is the full
/// `H + λI + μ − μᵀ`.
pub fn ledger_from_parts(
    t: f64,
    u: &VelocityField,
    q: &QTensorField,
    jet: &TensorJet,
    constrained: &TensorField,
    c: &Coefficients,
    sp: &Spectral,
) -> EnergyLedger {
    let kinetic = 0.5 * u.l2_sq();
    let bulk = bulk_energy_density(q, c).integral();
    let elastic = elastic_density_from_jet(jet, c).integral();
    let spec = [sp.forward(&u.u1), sp.forward(&u.u2)];
    let viscous_diss = c.nu
        * spec
            .iter()
            .map(|s| sp.homogeneous_sq_spectral(s, 1))
            .sum::<f64>();
    let reg_diss = if c.delta > 0.0 {
        c.delta
            * spec
                .iter()
                .map(|s| sp.homogeneous_sq_spectral(s, c.k_reg))
                .sum::<f64>()
    } else {
        0.0
    };
    let rotational_diss = constrained.inner(constrained);
    EnergyLedger {
        t,
        kinetic,
        bulk,
        elastic,
        free: bulk + elastic,
        total: kinetic + bulk + elastic,
        viscous_diss,
        rotational_diss,
        reg_diss,
    }
}

pub fn measure_ledger(
    t: f64,
    u: &VelocityField,
    q: &QTensorField,
    c: &Coefficients,
    sp: &Spectral,
) -> EnergyLedger {
    let jet = TensorJet::of_q(sp, q);
    let x = constrained_parts_from_jet(&jet, c, sp).total();
    ledger_from_parts(t, u, q, &jet, &x, c, sp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{random_initial_q, GridSpec};
    use std::f64::consts::PI;

    fn sp(n: usize) -> Spectral {
        Spectral::new(GridSpec::new(n).unwrap())
    }

    fn constant_q(g: GridSpec, a: f64, b: f64) -> QTensorField {
        QTensorField::new(ScalarField::constant(g, a), ScalarField::constant(g, b))
    }

    #[test]
    fn bulk_examples() {
        let g = GridSpec::new(8).unwrap();
        let c = Coefficients {
            a: -0.1,
            c: 1.0,
            ..Default::default()
        };
        assert_eq!(bulk_energy_density(&QTensorField::zeros(g), &c).max_abs(), 0.0);
        let q = constant_q(g, 0.3, 0.0);
        let d = bulk_energy_density(&q, &c);
        assert!((d.at(0, 0) + 0.0009).abs() < 1e-15);
        let c7 = Coefficients { b: 10.0, ..c };
        assert_eq!(bulk_energy_density(&q, &c7), d);
    }

    #[test]
    fn elastic_examples() {
        let s = sp(32);
        let g = s.grid();
        let c = Coefficients {
            l1: 1.0,
            l4: 0.0,
            allow_isotropic: true,
            ..Default::default()
        };
        assert!(elastic_energy_density(&constant_q(g, 0.2, -0.1), &c, &s).max_abs() < 1e-20);

        let eps = 0.01;
        let q = QTensorField::new(
            ScalarField::from_fn(g, |x, _| eps * (2.0 * PI * x).sin()),
            ScalarField::zeros(g),
        );
        // |∇Q|² = 2 (∂₁q₁)², ∫ = 2 ε² (2π)² / 2
        let got = elastic_energy_density(&q, &c, &s).integral();
        let want = (2.0 * PI).powi(2) * eps * eps;
        assert!((got - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn l4_parity() {
        let s = sp(32);
        let q = random_initial_q(s.grid(), 4, 4, 0.5).unwrap();
        let quad = Coefficients {
            l1: 1.0,
            l2: 0.3,
            l3: -0.2,
            l4: 0.0,
            allow_isotropic: true,
            ..Default::default()
        };
        let cubic = Coefficients {
            l1: 0.0,
            l2: 0.0,
            l3: 0.0,
            l4: 1.0,
            ..Default::default()
        };
        let neg = q.scale(-1.0);
        let eq = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
        let e_q = elastic_energy_density(&q, &quad, &s).integral();
        assert!(eq(e_q, elastic_energy_density(&neg, &quad, &s).integral()));
        let e_c = elastic_energy_density(&q, &cubic, &s).integral();
        assert!(e_c.abs() > 1e-6);
        assert!(eq(e_c, -elastic_energy_density(&neg, &cubic, &s).integral()));
    }

    #[test]
    fn constant_q_fields() {
        let s = sp(16);
        let g = s.grid();
        let c = Coefficients {
            a: -0.1,
            b: 2.0,
            c: 1.0,
            ..Default::default()
        };
        let q = constant_q(g, 0.3, 0.1);
        let h = molecular_field_h(&q, &c, &s);
        let t2 = 2.0 * (0.09 + 0.01);
        let factor = -c.a - c.c * t2;
        // trace(H) = b tr(Q²)
        let tr = h.trace();
        assert!((tr.at(3, 3) - c.b * t2).abs() < 1e-13);
        // deviatoric part is −aQ − c tr(Q²)Q
        let dev = h.traceless_symmetric_part();
        assert!((dev.q1.at(0, 0) - factor * 0.3).abs() < 1e-13);
        assert!((dev.q2.at(0, 0) - factor * 0.1).abs() < 1e-13);

        let (lambda, mu) = lagrange_multipliers(&q, &c, &s);
        assert!((lambda.at(1, 2) + 0.5 * c.b * t2).abs() < 1e-13);
        assert!(mu.max_abs() < 1e-13);

        let x = constrained_field(&constant_q(g, 0.3, 0.0), &c, &s);
        assert!((x.c[0][0].at(0, 0) + 0.024).abs() < 1e-14);
    }

    #[test]
    fn mu_is_antisymmetric_with_zero_diagonal() {
        let s = sp(32);
        let q = random_initial_q(s.grid(), 8, 4, 0.8).unwrap();
        let c = Coefficients {
            l2: 0.7,
            l3: 0.4,
            ..Default::default()
        };
        let (_, mu) = lagrange_multipliers(&q, &c, &s);
        assert_eq!(mu.c[0][0].max_abs(), 0.0);
        assert_eq!(mu.c[1][1].max_abs(), 0.0);
        assert_eq!((&mu.c[0][1] + &mu.c[1][0]).max_abs(), 0.0);
    }

    #[test]
    fn constrained_is_traceless_symmetric_and_matches_assembly() {
        let s = sp(32);
        let q = random_initial_q(s.grid(), 3, 4, 0.6).unwrap();
        let c = Coefficients {
            l1: 0.8,
            l2: 0.5,
            l3: -0.3,
            l4: 0.7,
            a: 0.2,
            b: 3.0,
            c: 1.5,
            ..Default::default()
        };
        let bundle = MolecularFieldBundle::compute(&q, &c, &s);
        let x = &bundle.constrained;
        assert!(x.trace().max_abs() <= 1e-10);
        assert!(x.max_asymmetry() <= 1e-10);
        assert!(bundle.assembled().sub(x).max_abs() <= 1e-10);
        let c7 = Coefficients { b: 0.0, ..c };
        assert_eq!(constrained_field(&q, &c7, &s), *x);
    }

    #[test]
    fn ledger_total_is_sum() {
        let s = sp(16);
        let q = random_initial_q(s.grid(), 1, 3, 0.5).unwrap();
        let u = VelocityField::zeros(s.grid());
        let l = measure_ledger(0.0, &u, &q, &Coefficients::default(), &s);
        assert!((l.total - (l.kinetic + l.bulk + l.elastic)).abs() <= 1e-12 * l.total.abs());
        assert!(l.rotational_diss >= 0.0 && l.viscous_diss == 0.0 && l.reg_diss == 0.0);
    }
}
