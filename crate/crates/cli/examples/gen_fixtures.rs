//! Regenerates the bundled controller networks in `scenarios/`.
//!
//! Hidden layers are drawn from a seeded He-style initialization; the output
//! layer is the least-squares fit of a reference control law on a grid.
//!
//! ```text
//! cargo run -p czreach --example gen_fixtures
//! ```

use std::path::PathBuf;

use czreach_core::nnet::{FeedforwardNetwork, Layer};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_layer(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bias_scale: f64) -> Layer {
    let scale = (2.0 / cols as f64).sqrt();
    Layer {
        weights: DMatrix::from_fn(rows, cols, |_, _| scale * rng.gen_range(-1.0..=1.0)),
        bias: DVector::from_fn(rows, |_, _| bias_scale * rng.gen_range(-1.0..=1.0)),
    }
}

fn hidden_features(hidden: &[Layer], mut h: DVector<f64>) -> DVector<f64> {
    for l in hidden {
        h = (&l.weights * h + &l.bias).map(|v| v.max(0.0));
    }
    h
}

/// Fits the output layer of `hidden -> [1 x width]` to `law` on a grid of
/// `bounds`.
fn fit(hidden: Vec<Layer>, bounds: [(f64, f64); 2], law: impl Fn(f64, f64) -> f64) -> FeedforwardNetwork {
    let width = hidden.last().unwrap().weights.nrows();
    let k = 41;
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let x1 = bounds[0].0 + (bounds[0].1 - bounds[0].0) * i as f64 / (k - 1) as f64;
            let x2 = bounds[1].0 + (bounds[1].1 - bounds[1].0) * j as f64 / (k - 1) as f64;
            let h = hidden_features(&hidden, DVector::from_vec(vec![x1, x2]));
            let mut row: Vec<f64> = h.iter().copied().collect();
            row.push(1.0);
            rows.push(row);
            targets.push(law(x1, x2));
        }
    }
    let a = DMatrix::from_fn(rows.len(), width + 1, |r, c| rows[r][c]);
    let y = DVector::from_vec(targets);
    // Small ridge term keeps the readout well conditioned.
    let lambda = 1e-6;
    let normal = a.transpose() * &a + DMatrix::identity(width + 1, width + 1) * lambda;
    let coef = normal.cholesky().expect("normal equations are positive definite").solve(&(a.transpose() * y));
    let mut layers = hidden;
    layers.push(Layer {
        weights: DMatrix::from_fn(1, width, |_, c| (coef[c] * 1e6).round() / 1e6),
        bias: DVector::from_element(1, (coef[width] * 1e6).round() / 1e6),
    });
    FeedforwardNetwork::new(layers).unwrap()
}

fn rounded(mut l: Layer) -> Layer {
    l.weights.apply(|v| *v = (*v * 1e6).round() / 1e6);
    l.bias.apply(|v| *v = (*v * 1e6).round() / 1e6);
    l
}

fn main() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");

    let mut rng = ChaCha8Rng::seed_from_u64(2022);
    let hidden = vec![rounded(random_layer(&mut rng, 10, 2, 1.0)), rounded(random_layer(&mut rng, 5, 10, 0.5))];
    let di = fit(hidden, [(-1.0, 3.5), (-1.5, 1.0)], |x1, x2| (-0.5 * x1 - 1.2 * x2).clamp(-1.0, 1.0));
    std::fs::write(dir.join("double_integrator_net.json"), di.to_json_string()).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(2012);
    let mut first = random_layer(&mut rng, 16, 2, 0.0);
    // Hyperplanes through random points of the operating region.
    for r in 0..16 {
        let p = [rng.gen_range(2.3..=2.7), rng.gen_range(-0.1..=0.3)];
        first.bias[r] = -(first.weights[(r, 0)] * p[0] + first.weights[(r, 1)] * p[1]);
    }
    let hidden = vec![rounded(first)];
    let duffing = fit(hidden, [(2.0, 3.0), (-0.5, 0.5)], |x1, x2| x1.powi(3) - x1 - 2.0 * x2);
    std::fs::write(dir.join("duffing_net.json"), duffing.to_json_string()).unwrap();

    println!("wrote networks to {}", dir.display());
}
