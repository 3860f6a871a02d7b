use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{invalid, Result};

/// Three interleaved half circles lifted into a higher-dimensional space.
///
/// Class 0 lies on the upper half circle centered at (1.5, 0.4) with radius
/// 1.5; classes 1 and 2 lie on lower half unit circles centered at (0, 0) and
/// (3, 0). Angles are uniform over each half circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeMoonSpec {
    pub n_per_class: usize,
    pub ambient_dim: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for ThreeMoonSpec {
    fn default() -> Self {
        Self {
            n_per_class: 500,
            ambient_dim: 100,
            noise_sd: 0.14,
            seed: 0,
        }
    }
}

/// (center x, center y, radius, angle offset) per class.
const ARCS: [(f64, f64, f64, f64); 3] = [(1.5, 0.4, 1.5, 0.0), (0.0, 0.0, 1.0, PI), (3.0, 0.0, 1.0, PI)];

pub fn gen_three_moon(spec: &ThreeMoonSpec) -> Result<Dataset> {
    if spec.ambient_dim < 2 {
        return Err(invalid("ambient_dim must be at least 2"));
    }
    if spec.n_per_class == 0 {
        return Err(invalid("n_per_class must be positive"));
    }
    if !(spec.noise_sd >= 0.0 && spec.noise_sd.is_finite()) {
        return Err(invalid(format!("noise_sd must be finite and >= 0, got {}", spec.noise_sd)));
    }
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| invalid(e.to_string()))?;

    let n = 3 * spec.n_per_class;
    let d = spec.ambient_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x = DMatrix::zeros(d, n);
    let mut labels = Vec::with_capacity(n);

    for (class, &(cx, cy, r, offset)) in ARCS.iter().enumerate() {
        for _ in 0..spec.n_per_class {
            let j = labels.len();
            let theta = offset + PI * rng.random::<f64>();
            x[(0, j)] = cx + r * theta.cos();
            x[(1, j)] = cy + r * theta.sin();
            if spec.noise_sd > 0.0 {
                for i in 0..d {
                    x[(i, j)] += noise.sample(&mut rng);
                }
            }
            labels.push(class);
        }
    }
    Dataset::new(x, Some(labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape() {
        let ds = gen_three_moon(&ThreeMoonSpec::default()).unwrap();
        assert_eq!((ds.n(), ds.d(), ds.n_classes()), (1500, 100, 3));
    }

    #[test]
    fn noiseless_geometry() {
        let spec = ThreeMoonSpec {
            n_per_class: 200,
            noise_sd: 0.0,
            seed: 9,
            ..Default::default()
        };
        let ds = gen_three_moon(&spec).unwrap();
        let x = ds.features();
        for (j, &y) in ds.labels().unwrap().iter().enumerate() {
            let (a, b) = (x[(0, j)], x[(1, j)]);
            match y {
                0 => {
                    assert!(((a - 1.5).powi(2) + (b - 0.4).powi(2) - 2.25).abs() < 1e-12);
                    assert!(b >= 0.4 - 1e-15);
                }
                1 => {
                    assert!((a * a + b * b - 1.0).abs() < 1e-12);
                    assert!(b <= 1e-15);
                }
                _ => {
                    assert!(((a - 3.0).powi(2) + b * b - 1.0).abs() < 1e-12);
                    assert!(b <= 1e-15);
                }
            }
            assert!(x.column(j).rows(2, 98).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = ThreeMoonSpec {
            n_per_class: 50,
            seed: 4,
            ..Default::default()
        };
        let a = gen_three_moon(&spec).unwrap();
        let b = gen_three_moon(&spec).unwrap();
        assert_eq!(a, b);
        let c = gen_three_moon(&ThreeMoonSpec { seed: 5, ..spec }).unwrap();
        assert_ne!(a.features(), c.features());
    }

    #[test]
    fn rejects_bad_spec() {
        let bad = ThreeMoonSpec {
            ambient_dim: 1,
            ..Default::default()
        };
        assert!(gen_three_moon(&bad).is_err());
        let bad = ThreeMoonSpec {
            noise_sd: -1.0,
            ..Default::default()
        };
        assert!(gen_three_moon(&bad).is_err());
    }
}
