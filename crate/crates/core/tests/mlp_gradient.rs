use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use leasefair_core::models::{parameter_count, Mlp};

/// Independent forward pass over the documented parameter layout, reduced
/// to the side of every kink it meets (ReLU pre-activations and residuals).
fn forward_pattern(m: &Mlp, rows: &[Vec<f64>], labels: &[f64]) -> Vec<bool> {
    let mut pattern = Vec::new();
    for (row, y) in rows.iter().zip(labels) {
        let mut a: Vec<f64> = row.iter().zip(m.input_mean.iter().zip(&m.input_scale)).map(|(x, (mu, s))| (x - mu) / s).collect();
        let mut off = 0;
        let layers = m.sizes.len() - 1;
        for l in 0..layers {
            let (n_in, n_out) = (m.sizes[l], m.sizes[l + 1]);
            let w = &m.params[off..off + n_in * n_out];
            let b = &m.params[off + n_in * n_out..off + (n_in + 1) * n_out];
            off += (n_in + 1) * n_out;
            let pre: Vec<f64> = (0..n_out).map(|o| b[o] + (0..n_in).map(|i| w[o * n_in + i] * a[i]).sum::<f64>()).collect();
            if l + 1 < layers {
                pattern.extend(pre.iter().map(|v| *v > 0.0));
                a = pre.into_iter().map(|v| v.max(0.0)).collect();
            } else {
                let out = 1.0 / (1.0 + (-pre[0]).exp());
                pattern.push(out > *y);
            }
        }
    }
    pattern
}

fn loss(m: &Mlp, rows: &[Vec<f64>], labels: &[f64]) -> f64 {
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    m.loss(&refs, labels)
}

/// Checks `n_coords` random coordinates, skipping any whose ±h perturbation
/// crosses a kink. Returns the worst relative error and how many checked
/// coordinates had a nonzero gradient.
fn check(seed: u64, input_dim: usize, hidden: &[usize], batch: usize, n_coords: usize) -> (f64, usize) {
    const H: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Mlp::new(input_dim, hidden, &mut rng);
    for (mu, s) in m.input_mean.iter_mut().zip(m.input_scale.iter_mut()) {
        *mu = rng.random_range(-1.0..1.0);
        *s = rng.random_range(0.5..2.0);
    }
    for b in m.params.iter_mut() {
        *b += rng.random_range(-0.05..0.05);
    }
    let rows: Vec<Vec<f64>> = (0..batch).map(|_| (0..input_dim).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let labels: Vec<f64> = (0..batch).map(|_| rng.random::<f64>()).collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let (_, grad) = m.loss_and_gradient(&refs, &labels);
    let base = forward_pattern(&m, &rows, &labels);

    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut nonzero = 0;
    let mut attempts = 0;
    while checked < n_coords {
        attempts += 1;
        assert!(attempts < 100 * n_coords, "too many kinks");
        let i = rng.random_range(0..m.params.len());
        let orig = m.params[i];
        m.params[i] = orig + H;
        let (lp, pp) = (loss(&m, &rows, &labels), forward_pattern(&m, &rows, &labels));
        m.params[i] = orig - H;
        let (lm, pm) = (loss(&m, &rows, &labels), forward_pattern(&m, &rows, &labels));
        m.params[i] = orig;
        if pp != base || pm != base {
            continue;
        }
        let numeric = (lp - lm) / (2.0 * H);
        let analytic = grad[i];
        let scale = analytic.abs().max(numeric.abs());
        let rel = if scale == 0.0 { 0.0 } else { (analytic - numeric).abs() / scale };
        worst = worst.max(rel);
        nonzero += usize::from(analytic != 0.0);
        checked += 1;
    }
    (worst, nonzero)
}

#[test]
fn default_architecture_gradient() {
    assert_eq!(parameter_count(&[21, 256, 128, 64, 1]), 46_849);
    let (worst, nonzero) = check(1, 21, &[256, 128, 64], 8, 100);
    assert!(worst <= 1e-4, "worst relative error {worst}");
    assert!(nonzero > 20, "only {nonzero} nonzero gradients");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gradient_matches_central_differences(
        seed in any::<u64>(),
        input_dim in 1usize..=8,
        hidden in proptest::collection::vec(2usize..=12, 0..=3),
        batch in 1usize..=10,
    ) {
        let (worst, _) = check(seed, input_dim, &hidden, batch, 30);
        prop_assert!(worst <= 1e-4, "worst relative error {worst}");
    }
}
