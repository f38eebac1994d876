//! Elastic back-reaction on the fluid: the antisymmetric stress
//! `σᵃ = QX − XQ` (with `X = H + λI + μ − μᵀ`), the distortion stress `σˢ`,
//! and the divergence that forces the momentum equation.

use crate::energetics::TensorJet;
use crate::field::{Coefficients, QTensorField, ScalarField, TensorField, VelocityField};
use crate::spectral::Spectral;

/// Four-component stress; not symmetric in general.
pub type StressField = TensorField;

/// Commutator `QX − XQ`, closed as one multiplication stage.
pub fn sigma_a(q: &QTensorField, hfield: &TensorField, sp: &Spectral) -> StressField {
    let qt = q.to_tensor();
    let raw = commutator(&qt, hfield);
    TensorField::from_components(raw.c.map(|row| row.map(|f| sp.stage(f))))
}

/// Pointwise `AB − BA`.
pub fn commutator(a: &TensorField, b: &TensorField) -> TensorField {
    let grid = a.grid();
    let mut out: [[Vec<f64>; 2]; 2] = Default::default();
    for p in 0..grid.len() {
        let (ma, mb) = (a.at(p), b.at(p));
        let m = ma * mb - mb * ma;
        for i in 0..2 {
            for j in 0..2 {
                out[i][j].push(m[(i, j)]);
            }
        }
    }
    let [[c00, c01], [c10, c11]] = out;
    TensorField::from_components([
        [ScalarField::from_vec(grid, c00), ScalarField::from_vec(grid, c01)],
        [ScalarField::from_vec(grid, c10), ScalarField::from_vec(grid, c11)],
    ])
}

/// `σˢᵢⱼ = −2(L1 Q_{kl,i}Q_{kl,j} + L2 Q_{kj,l}Q_{kl,i} + L3 Q_{kl,l}Q_{kj,i} + L4 Q_{jm}Q_{kl,m}Q_{kl,i})`
pub fn sigma_s(q: &QTensorField, c: &Coefficients, sp: &Spectral) -> StressField {
    sigma_s_from_jet(&TensorJet::of_q(sp, q), c, sp)
}

pub fn sigma_s_from_jet(jet: &TensorJet, c: &Coefficients, sp: &Spectral) -> StressField {
    let grid = jet.grid();
    let n = grid.len();
    let mut quad: [[Vec<f64>; 2]; 2] = Default::default();
    let mut gram: [[Vec<f64>; 2]; 2] = Default::default();
    for p in 0..n {
        let l = jet.local(p);
        let d = &l.d1;
        for i in 0..2 {
            for j in 0..2 {
                let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
                for k in 0..2 {
                    for m in 0..2 {
                        s1 += d[i][k][m] * d[j][k][m];
                        s2 += d[m][k][j] * d[i][k][m];
                        s3 += d[m][k][m] * d[i][k][j];
                    }
                }
                quad[i][j].push(-2.0 * (c.l1 * s1 + c.l2 * s2 + c.l3 * s3));
                // G_ij = Q_{kl,i} Q_{kl,j}
                gram[i][j].push(s1);
            }
        }
    }
    let to_fields = |v: [[Vec<f64>; 2]; 2]| -> [[ScalarField; 2]; 2] {
        v.map(|row| row.map(|d| sp.stage(ScalarField::from_vec(grid, d))))
    };
    let quad = to_fields(quad);
    if c.l4 == 0.0 {
        return TensorField::from_components(quad);
    }
    let gram = to_fields(gram);
    // Q_{jm} G_{mi}
    let cubic: [[ScalarField; 2]; 2] = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut acc = &jet.q[j][0] * &gram[0][i];
            acc += &(&jet.q[j][1] * &gram[1][i]);
            sp.stage(acc)
        })
    });
    TensorField::from_components(std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut s = quad[i][j].clone();
            s.axpy(-2.0 * c.l4, &cubic[i][j]);
            s
        })
    }))
}

/// `(∇·σ)ᵢ = ∂ⱼσᵢⱼ` of `sa + ss`.
pub fn stress_divergence(sa: &StressField, ss: &StressField, sp: &Spectral) -> VelocityField {
    divergence_of(&sa.add(ss), sp)
}

pub fn divergence_of(s: &TensorField, sp: &Spectral) -> VelocityField {
    let row = |i: usize| {
        let mut a = sp.forward(&s.c[i][0]);
        sp.differentiate_in_place(&mut a, (1, 0));
        let mut b = sp.forward(&s.c[i][1]);
        sp.differentiate_in_place(&mut b, (0, 1));
        for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
            *x += y;
        }
        sp.dealias_spectral(&mut a);
        sp.inverse(&a)
    };
    VelocityField::new(row(0), row(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{random_band_limited, random_initial_q, GridSpec};
    use nalgebra::Matrix2;
    use std::f64::consts::PI;

    fn sp(n: usize) -> Spectral {
        Spectral::new(GridSpec::new(n).unwrap())
    }

    #[test]
    fn sigma_a_examples() {
        let s = sp(8);
        let g = s.grid();
        let q = QTensorField::new(ScalarField::constant(g, 1.0), ScalarField::zeros(g));
        let prop = q.scale(2.5).to_tensor();
        assert!(sigma_a(&q, &prop, &s).max_abs() < 1e-15);

        let h = QTensorField::new(ScalarField::zeros(g), ScalarField::constant(g, 1.0)).to_tensor();
        let sa = sigma_a(&q, &h, &s);
        let m = sa.at(5);
        assert!((m - Matrix2::new(0.0, 2.0, -2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn sigma_a_is_antisymmetric() {
        let s = sp(32);
        let q = random_initial_q(s.grid(), 2, 4, 0.7).unwrap();
        let h = random_initial_q(s.grid(), 3, 4, 1.3).unwrap().to_tensor();
        let sa = sigma_a(&q, &h, &s);
        assert!(sa.add(&sa.transpose()).max_abs() <= 1e-12);
    }

    #[test]
    fn sigma_s_examples() {
        let s = sp(32);
        let g = s.grid();
        let c = Coefficients {
            l1: 1.0,
            l2: 0.0,
            l3: 0.0,
            l4: 0.0,
            allow_isotropic: true,
            ..Default::default()
        };
        assert_eq!(sigma_s(&QTensorField::zeros(g), &Coefficients::default(), &s).max_abs(), 0.0);
        let cst = QTensorField::new(ScalarField::constant(g, 0.4), ScalarField::constant(g, -0.2));
        assert!(sigma_s(&cst, &Coefficients::default(), &s).max_abs() < 1e-12);

        let q = QTensorField::new(
            ScalarField::from_fn(g, |x, _| (2.0 * PI * x).sin()),
            ScalarField::zeros(g),
        );
        let ss = sigma_s(&q, &c, &s);
        let want = ScalarField::from_fn(g, |x, _| -4.0 * (2.0 * PI).powi(2) * (2.0 * PI * x).cos().powi(2));
        assert!((&ss.c[0][0] - &want).max_abs() <= 1e-10);
        assert!(ss.c[1][1].max_abs() <= 1e-10);
        assert!(ss.c[0][1].max_abs() <= 1e-10);
        assert!(ss.c[1][0].max_abs() <= 1e-10);
    }

    #[test]
    fn divergence_examples() {
        let s = sp(16);
        let g = s.grid();
        let cst = TensorField::from_components(std::array::from_fn(|i| {
            std::array::from_fn(|j| ScalarField::constant(g, (i + 2 * j) as f64))
        }));
        assert!(divergence_of(&cst, &s).linf() < 1e-13);

        let rand = |seed| {
            TensorField::from_components(std::array::from_fn(|i| {
                std::array::from_fn(|j| random_band_limited(g, seed + (2 * i + j) as u64, 4))
            }))
        };
        let (a, b) = (rand(10), rand(20));
        let lhs = stress_divergence(&a, &b, &s);
        let rhs = divergence_of(&a, &s).add(&divergence_of(&b, &s));
        assert!(lhs.sub(&rhs).linf() <= 1e-12 * lhs.linf().max(1.0));
        // divergence forcing never changes the mean momentum
        assert!(lhs.mean()[0].abs() < 1e-14 && lhs.mean()[1].abs() < 1e-14);
    }
}
