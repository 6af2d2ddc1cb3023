#![allow(dead_code)]

use edgecalc_core::grid::{GridFunction, SymbolGrid};
use edgecalc_core::linalg::{svd_full, Matrix, C64};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// Haar-ish random unitary from the singular vectors of a random matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    svd_full(&random_matrix(rng, n, n)).unwrap().u
}

/// Sum of Gaussian wave packets; decays far inside [−L, L) and is
/// band-limited (to double precision) inside |η| ≤ band.
#[derive(Debug, Clone)]
pub struct Packets {
    dim: usize,
    terms: Vec<(f64, f64, f64, Vec<C64>)>,
}

impl Packets {
    pub fn random(rng: &mut ChaCha8Rng, dim: usize, half_width: f64, band: f64) -> Self {
        let count = rng.gen_range(1..=4);
        let terms = (0..count)
            .map(|_| {
                let center = rng.gen_range(-half_width / 4.0..half_width / 4.0);
                let width = rng.gen_range(0.6..1.0) * half_width / 10.0;
                // keep |ξ| + 8/width below the band
                let max_freq = (band - 8.0 / width).max(0.0);
                let freq = rng.gen_range(-max_freq..=max_freq);
                let coef = (0..dim).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                (center, width, freq, coef)
            })
            .collect();
        Self { dim, terms }
    }

    pub fn eval(&self, y: f64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for (c, w, f, coef) in &self.terms {
            let env = C64::from_polar((-(y - c) * (y - c) / (2.0 * w * w)).exp(), f * y);
            for (o, a) in out.iter_mut().zip(coef) {
                *o += env * a;
            }
        }
        out
    }

    pub fn sample(&self, grid: &SymbolGrid) -> GridFunction {
        GridFunction::from_fn(*grid, self.dim, |y| self.eval(y)).unwrap()
    }
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
