//! Reference implementations used to check the library. Nothing here calls
//! the library's linear algebra.

#![allow(dead_code)]

use rand::Rng;

pub type Mat = Vec<Vec<f64>>;

pub fn identity(n: usize, scale: f64) -> Mat {
    (0..n).map(|i| (0..n).map(|j| if i == j { scale } else { 0.0 }).collect()).collect()
}

/// Solve `a · x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Mat, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        assert!(a[pivot][col].abs() > 1e-300, "singular system");
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Explicit inverse, one Gaussian solve per column.
pub fn inverse(a: &Mat) -> Mat {
    let n = a.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| gauss_solve(a.clone(), (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect()))
        .collect();
    (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
}

pub fn mat_vec(a: &Mat, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

/// `(λI + Σ x xᵀ, Σ r x)`.
pub fn ridge_normal_equations(d: usize, lambda: f64, obs: &[(Vec<f64>, f64)]) -> (Mat, Vec<f64>) {
    let mut a = identity(d, lambda);
    let mut b = vec![0.0; d];
    for (x, r) in obs {
        for i in 0..d {
            for j in 0..d {
                a[i][j] += x[i] * x[j];
            }
            b[i] += r * x[i];
        }
    }
    (a, b)
}

pub fn ridge_solution(d: usize, lambda: f64, obs: &[(Vec<f64>, f64)]) -> Vec<f64> {
    let (a, b) = ridge_normal_equations(d, lambda, obs);
    gauss_solve(a, b)
}

/// Column-major `vec(x yᵀ)`.
pub fn cross(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(x.len() * y.len());
    for yj in y {
        for xi in x {
            z.push(xi * yj);
        }
    }
    z
}

/// One observation of the joint model: rows `(z in the shared block, x in block `block`)`.
#[derive(Debug, Clone)]
pub struct BlockObs {
    pub block: usize,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub r: f64,
}

/// Dense joint ridge over unknowns `(β, θ_0, …, θ_{B−1})`, `λ` on every coordinate.
/// Returns `(β̂, θ̂ per block)`.
pub fn block_ridge(d: usize, k: usize, blocks: usize, lambda: f64, obs: &[BlockObs]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = k + d * blocks;
    let mut a = identity(n, lambda);
    let mut b = vec![0.0; n];
    for o in obs {
        let mut phi = vec![0.0; n];
        phi[..k].copy_from_slice(&o.z);
        phi[k + o.block * d..k + (o.block + 1) * d].copy_from_slice(&o.x);
        for i in 0..n {
            if phi[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                a[i][j] += phi[i] * phi[j];
            }
            b[i] += o.r * phi[i];
        }
    }
    let w = gauss_solve(a, b);
    let beta = w[..k].to_vec();
    let thetas = (0..blocks).map(|bl| w[k + bl * d..k + (bl + 1) * d].to_vec()).collect();
    (beta, thetas)
}

/// A point in the unit ball (not uniformly distributed; tests only need the bound).
pub fn ball(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = dot(&v, &v).sqrt().max(1e-12);
    let radius: f64 = rng.random();
    v.iter().map(|a| a * radius / norm).collect()
}

/// Mean and standard error.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
