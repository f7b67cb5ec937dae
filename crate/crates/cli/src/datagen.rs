//! Deterministic seeded initial data.
//!
//! The generator is a truncated random series (cosine modes plus even
//! radial polynomials) rescaled to a configurable amplitude. Smoothness at
//! the pole comes from using only even/zero-slope basis functions; the
//! Dirichlet boundary value is whatever the series takes at `r0` (boundary
//! data follows the sample automatically). A hand-rolled splitmix64 keeps
//! artifacts byte-identical across platforms, independent of any external
//! RNG crate.

use kflow_core::flow::{PolarGrid, RadialGrid};

/// splitmix64: tiny, well-distributed, stable across versions.
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-1, 1]`.
    pub fn next_symmetric(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }
}

/// Smooth random radial data on the grid, rescaled so `sup |u0| = amplitude`.
pub fn seeded_radial(grid: &RadialGrid, amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    let cos_coeffs: Vec<f64> = (0..4).map(|_| rng.next_symmetric()).collect();
    let poly_coeffs: Vec<f64> = (0..3).map(|_| rng.next_symmetric()).collect();
    let raw: Vec<f64> = grid
        .nodes()
        .map(|r| {
            let x = r / grid.r0;
            let mut v = 0.0;
            for (k, c) in cos_coeffs.iter().enumerate() {
                v += c * ((k + 1) as f64 * std::f64::consts::PI * x).cos() / (k + 1) as f64;
            }
            for (k, c) in poly_coeffs.iter().enumerate() {
                v += c * x.powi(2 * (k as i32 + 1));
            }
            v
        })
        .collect();
    rescale(raw, amplitude)
}

/// Smooth random polar data: a radial series plus low angular harmonics
/// weighted by `(r/r0)^m` so the field is smooth at the pole.
pub fn seeded_polar(grid: &PolarGrid, amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    let cos_coeffs: Vec<f64> = (0..3).map(|_| rng.next_symmetric()).collect();
    let harmonics: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.next_symmetric(), rng.next_f64() * std::f64::consts::TAU))
        .collect();
    let mut raw = vec![0.0; grid.len()];
    let value = |r: f64, th: f64| {
        let x = r / grid.r0;
        let mut v = 0.0;
        for (k, c) in cos_coeffs.iter().enumerate() {
            v += c * ((k + 1) as f64 * std::f64::consts::PI * x).cos() / (k + 1) as f64;
        }
        for (m, (c, phase)) in harmonics.iter().enumerate() {
            let mf = (m + 1) as f64;
            v += c * x.powi(m as i32 + 1) * (mf * th + phase).cos() / mf;
        }
        v
    };
    raw[0] = value(0.0, 0.0);
    for i in 1..grid.m_r {
        for j in 0..grid.m_theta {
            raw[grid.idx(i, j)] = value(grid.ring_radius(i), grid.theta(j));
        }
    }
    rescale(raw, amplitude)
}

fn rescale(raw: Vec<f64>, amplitude: f64) -> Vec<f64> {
    let sup = raw.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if sup == 0.0 {
        return raw;
    }
    let s = amplitude / sup;
    raw.into_iter().map(|v| v * s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_deterministic() {
        let grid = RadialGrid::new(1.0, 65).unwrap();
        let a = seeded_radial(&grid, 0.3, 42);
        let b = seeded_radial(&grid, 0.3, 42);
        assert_eq!(a, b);
        let c = seeded_radial(&grid, 0.3, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn amplitude_is_exact_sup() {
        let grid = RadialGrid::new(1.0, 65).unwrap();
        let u = seeded_radial(&grid, 0.25, 7);
        let sup = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!((sup - 0.25).abs() < 1e-14);
    }

    #[test]
    fn polar_data_is_single_valued_at_pole() {
        let grid = PolarGrid::new(1.0, 17, 8).unwrap();
        let u = seeded_polar(&grid, 0.5, 3);
        assert_eq!(u.len(), grid.len());
        assert!(u[0].is_finite());
    }
}
