//! Reverse-mode gradients against central finite differences.
//!
//! The oracle only ever calls the forward pass (or `batch_objective`), so it is
//! independent of the backward implementation it checks.

use dasvdd_core::dasvdd::{batch_objective, objective_gradients};
use dasvdd_core::nn::{AutoencoderParams, InitScheme};
use dasvdd_core::Tensor2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const MAX_REL_ERR: f64 = 1e-4;
/// Below this magnitude gradients are compared absolutely.
const REL_FLOOR: f64 = 1e-6;

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor2 {
    Tensor2::from_vec(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )
    .unwrap()
}

/// Non-zero biases so every parameter class is exercised away from zero.
fn random_params(rng: &mut ChaCha8Rng, sizes: &[usize], latent: usize) -> AutoencoderParams {
    let mut p =
        AutoencoderParams::init(sizes, latent, rng.random(), InitScheme::HeUniform, 0.01).unwrap();
    let mut t = p.tensors_mut();
    for buf in t.iter_mut().skip(1).step_by(2) {
        buf.iter_mut()
            .for_each(|b| *b = rng.random_range(-0.3..0.3));
    }
    drop(t);
    p
}

fn seeded_loss(p: &AutoencoderParams, x: &Tensor2, sx: &Tensor2, sz: &Tensor2) -> f64 {
    let tape = p.forward(x).unwrap();
    let dot = |a: &Tensor2, b: &Tensor2| {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(u, v)| u * v)
            .sum::<f64>()
    };
    dot(&tape.xhat, sx) + dot(&tape.z, sz)
}

fn finite_difference<F: FnMut(&AutoencoderParams) -> f64>(
    p: &AutoencoderParams,
    mut loss: F,
) -> Vec<Vec<f64>> {
    let mut work = p.clone();
    let shapes: Vec<usize> = p.tensors().iter().map(|t| t.len()).collect();
    let mut out = Vec::new();
    for (ti, &len) in shapes.iter().enumerate() {
        let mut g = vec![0.0; len];
        for (j, gj) in g.iter_mut().enumerate() {
            let orig = work.tensors_mut()[ti][j];
            work.tensors_mut()[ti][j] = orig + STEP;
            let up = loss(&work);
            work.tensors_mut()[ti][j] = orig - STEP;
            let down = loss(&work);
            work.tensors_mut()[ti][j] = orig;
            *gj = (up - down) / (2.0 * STEP);
        }
        out.push(g);
    }
    out
}

fn max_rel_err(analytic: &[&[f64]], numeric: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        for (x, y) in a.iter().zip(n) {
            let denom = x.abs().max(y.abs()).max(REL_FLOOR);
            worst = worst.max((x - y).abs() / denom);
        }
    }
    worst
}

#[test]
fn backward_matches_finite_differences_on_random_networks() {
    let architectures: [(&[usize], usize); 3] = [(&[5, 4], 3), (&[5, 6, 4], 2), (&[3, 7, 5, 4], 3)];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checks = 0;
    for (sizes, latent) in architectures {
        for _ in 0..8 {
            let p = random_params(&mut rng, sizes, latent);
            let x = random_tensor(&mut rng, 4, sizes[0]);
            let sx = random_tensor(&mut rng, 4, sizes[0]);
            let sz = random_tensor(&mut rng, 4, latent);
            let tape = p.forward(&x).unwrap();
            let grads = p.backward(&tape, &sx, &sz).unwrap();
            assert!(grads.is_congruent_with(&p));
            let numeric = finite_difference(&p, |q| seeded_loss(q, &x, &sx, &sz));
            let err = max_rel_err(&grads.tensors(), &numeric);
            assert!(err < MAX_REL_ERR, "{sizes:?} -> {latent}: rel err {err}");
            checks += 1;
        }
    }
    assert!(checks >= 20);
}

#[test]
fn objective_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for gamma in [0.0, 0.5, 3.0] {
        let p = random_params(&mut rng, &[6, 5], 3);
        let x = random_tensor(&mut rng, 5, 6);
        let c: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (obj, grads) = objective_gradients(&p, &c, gamma, &x).unwrap();
        assert!((obj.total - batch_objective(&p, &c, gamma, &x).unwrap().total).abs() < 1e-12);
        let numeric = finite_difference(&p, |q| batch_objective(q, &c, gamma, &x).unwrap().total);
        let err = max_rel_err(&grads.tensors(), &numeric);
        assert!(err < MAX_REL_ERR, "gamma {gamma}: rel err {err}");
    }
}

#[test]
fn forward_and_backward_are_bit_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let p = random_params(&mut rng, &[8, 6], 4);
        let x = random_tensor(&mut rng, 10, 8);
        let tape = p.forward(&x).unwrap();
        let g = p.backward(&tape, &x, &tape.z).unwrap();
        (tape.xhat, g)
    };
    assert_eq!(run(), run());
}
