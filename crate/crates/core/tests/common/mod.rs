#![allow(dead_code)]

use nalgebra::{Matrix2, Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rydtomo_core::qstate::{DensityMatrix, Mat16, PartialState, DIM};
use rydtomo_core::C64;

/// Density matrix ρ = GG†/tr(GG†) with Gaussian G of the given rank.
pub fn random_density_matrix(seed: u64, rank: usize) -> DensityMatrix {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut g) };
    let cols: Vec<[C64; DIM]> = (0..rank)
        .map(|_| std::array::from_fn(|_| C64::new(normal(), normal())))
        .collect();
    let mut m = Mat16::zeros();
    for c in &cols {
        for i in 0..DIM {
            for j in 0..DIM {
                m[(i, j)] += c[i] * c[j].conj();
            }
        }
    }
    let tr = m.trace();
    DensityMatrix::from_matrix(m / tr).expect("Gram matrices are valid states")
}

/// The partial state listed in the paper's Table 1 with L_a = L_b = 0.22.
pub fn table_state() -> DensityMatrix {
    PartialState {
        p_dd: 0.06,
        p_uu: 0.09,
        p_ud: 0.23,
        p_du: 0.23,
        re_coh: 0.23,
        l_a: 0.22,
        l_b: 0.22,
    }
    .to_density_matrix()
    .unwrap()
}

/// Qubit rotation as exp(i θ/2 (cos φ σx − sin φ σy)) by Taylor series.
pub fn qubit_rotation_by_exponential(theta: f64, phi: f64) -> Matrix2<C64> {
    let i = C64::i();
    let gen = Matrix2::new(
        C64::new(0.0, 0.0),
        C64::from_polar(1.0, phi),
        C64::from_polar(1.0, -phi),
        C64::new(0.0, 0.0),
    ) * (i * theta / 2.0);
    let mut term = Matrix2::identity();
    let mut sum = Matrix2::identity();
    for k in 1..60 {
        term = term * gen / C64::new(k as f64, 0.0);
        sum += term;
    }
    sum
}

/// Fixed-step RK4 on i dψ/dt = Hψ for a real 3×3 Hamiltonian.
pub fn rk4_ladder(h: &Matrix3<f64>, psi0: [C64; 3], duration: f64, dt: f64) -> [C64; 3] {
    let hc = h.map(|x| C64::new(x, 0.0));
    let f = |psi: &Vector3<C64>| -> Vector3<C64> { hc * psi * C64::new(0.0, -1.0) };
    let n = (duration / dt).ceil().max(1.0) as usize;
    let step = duration / n as f64;
    let mut psi = Vector3::from_column_slice(&psi0);
    for _ in 0..n {
        let k1 = f(&psi);
        let k2 = f(&(psi + k1 * C64::new(step / 2.0, 0.0)));
        let k3 = f(&(psi + k2 * C64::new(step / 2.0, 0.0)));
        let k4 = f(&(psi + k3 * C64::new(step, 0.0)));
        psi += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(step / 6.0, 0.0);
    }
    [psi[0], psi[1], psi[2]]
}

pub fn max_abs_diff(a: &Mat16, b: &Mat16) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
