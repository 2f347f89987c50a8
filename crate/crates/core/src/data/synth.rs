use ndarray::{Array1, Array2};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

use super::Dataset;

/// Number of signal-carrying dimensions in the waveform data.
pub const WAVEFORM_INFORMATIVE: usize = 21;

const MAX_DRAWS: usize = 100;

/// Triangular base wave of height 6 centred at `center` (1-based position).
fn base_wave(i: usize, center: f64) -> f64 {
    (6.0 - (i as f64 - center).abs()).max(0.0)
}

/// Two-class waveform data: `n_per_class` samples of wave 1 (label +1,
/// mixing base waves centred at 7 and 15) followed by `n_per_class` samples
/// of wave 2 (label −1, centres 7 and 11). Each sample mixes with a uniform
/// weight u and adds unit Gaussian noise to the 21 informative positions,
/// then appends `noise_dims` pure N(0, 1) dimensions.
pub fn gen_waveform(n_per_class: usize, noise_dims: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = WAVEFORM_INFORMATIVE + noise_dims;
    let n = 2 * n_per_class;
    let mut x = Array2::zeros((n, m));
    let mut y = Array1::zeros(n);
    for s in 0..n {
        let (label, second) = if s < n_per_class { (1.0, 15.0) } else { (-1.0, 11.0) };
        let u: f64 = rng.random();
        for k in 0..m {
            let noise: f64 = rng.sample(StandardNormal);
            x[[s, k]] = if k < WAVEFORM_INFORMATIVE {
                let i = k + 1;
                u * base_wave(i, 7.0) + (1.0 - u) * base_wave(i, second) + noise
            } else {
                noise
            };
        }
        y[s] = label;
    }
    Dataset::new(x, y).expect("generated data is finite and labelled")
}

/// High-dimensional data with a small informative subset: X ~ N(0, 1) and
/// y = sign(effect_size · Σ_{k∈S} x_k + ε). Returns the dataset and the
/// sorted informative set S. Draws that produce a single class are redrawn.
pub fn gen_sparse_informative(
    n: usize,
    m: usize,
    k_informative: usize,
    effect_size: f64,
    seed: u64,
) -> Result<(Dataset, Vec<usize>)> {
    if k_informative > m {
        return Err(Error::Domain(format!(
            "{k_informative} informative features requested from {m}"
        )));
    }
    if n < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut informative = index::sample(&mut rng, m, k_informative).into_vec();
    informative.sort_unstable();

    for _ in 0..MAX_DRAWS {
        let x = Array2::from_shape_simple_fn((n, m), || rng.sample::<f64, _>(StandardNormal));
        let y = Array1::from_shape_fn(n, |i| {
            let signal: f64 = informative.iter().map(|&k| x[[i, k]]).sum();
            let eps: f64 = rng.sample(StandardNormal);
            if effect_size * signal + eps >= 0.0 { 1.0 } else { -1.0 }
        });
        let d = Dataset::new(x, y)?;
        if d.has_both_classes() {
            return Ok((d, informative));
        }
    }
    Err(Error::DegenerateModel(format!(
        "no two-class draw in {MAX_DRAWS} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use ndarray::{s, Axis};

    use super::*;

    #[test]
    fn waveform_shapes_and_determinism() {
        let d = gen_waveform(5, 0, 1);
        assert_eq!(d.num_features(), 21);
        assert_eq!(d.class_counts(), (5, 5));
        let a = gen_waveform(20, 19, 7);
        let b = gen_waveform(20, 19, 7);
        assert_eq!(a, b);
        assert_eq!(a.num_features(), 40);
        assert_ne!(a, gen_waveform(20, 19, 8));
    }

    #[test]
    fn base_waves() {
        assert_eq!(base_wave(7, 7.0), 6.0);
        assert_eq!(base_wave(1, 7.0), 0.0);
        assert_eq!(base_wave(13, 15.0), 4.0);
        assert_eq!(base_wave(21, 15.0), 0.0);
    }

    #[test]
    fn noise_dimensions_are_standard_normal() {
        let d = gen_waveform(200, 19, 11);
        let noise = d.x.slice(s![.., 21..]);
        for col in noise.axis_iter(Axis(1)) {
            let mean = col.mean().unwrap();
            let var = col.var(1.0);
            assert!((-0.25..=0.25).contains(&mean), "mean {mean}");
            assert!((0.7..=1.3).contains(&var), "variance {var}");
        }
    }

    #[test]
    fn centroid_classifier_separates_waves() {
        for seed in 0..3 {
            let d = gen_waveform(200, 19, seed);
            let info = d.x.slice(s![.., ..21]);
            let pos = info.slice(s![..200, ..]).mean_axis(Axis(0)).unwrap();
            let neg = info.slice(s![200.., ..]).mean_axis(Axis(0)).unwrap();
            let correct = info
                .outer_iter()
                .zip(&d.y)
                .filter(|(row, &label)| {
                    let dp = (&row.to_owned() - &pos).mapv(|v| v * v).sum();
                    let dn = (&row.to_owned() - &neg).mapv(|v| v * v).sum();
                    (dp < dn) == (label > 0.0)
                })
                .count();
            assert!(correct as f64 / 400.0 > 0.8, "accuracy {}", correct as f64 / 400.0);
        }
    }

    #[test]
    fn sparse_informative_set() {
        let (d, inf) = gen_sparse_informative(40, 500, 5, 1.5, 3).unwrap();
        assert_eq!(d.x.dim(), (40, 500));
        assert_eq!(inf.len(), 5);
        assert!(inf.windows(2).all(|p| p[0] < p[1]));
        assert!(d.has_both_classes());
        let (_, all) = gen_sparse_informative(10, 4, 4, 1.0, 0).unwrap();
        assert_eq!(all, vec![0, 1, 2, 3]);
        assert!(gen_sparse_informative(10, 3, 4, 1.0, 0).is_err());
        let (again, inf2) = gen_sparse_informative(40, 500, 5, 1.5, 3).unwrap();
        assert_eq!((again, inf2), (d, inf));
    }
}
