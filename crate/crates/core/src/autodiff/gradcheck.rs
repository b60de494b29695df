//! Central finite-difference checks of tape gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Tape, Tensor, Var};

pub const FD_EPS: f64 = 1e-5;

pub fn random_tensor<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    Tensor::from_rows(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// Scalar probe `sum(f(inputs) * r)` for a fixed random `r`.
fn probe<F>(inputs: &[Tensor], f: &F, weights: &mut Option<Tensor>, seed: u64) -> (Tape, Vec<Var>, Var)
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars);
    let w = weights.get_or_insert_with(|| {
        let shape = tape.value(out);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_tensor(&mut rng, shape.rows(), shape.cols())
    });
    let weighted = tape.mul_const(out, w.clone());
    let loss = tape.sum_all(weighted);
    (tape, vars, loss)
}

/// Largest relative error, over all inputs, between the tape gradient and
/// central differences of a random projection of `f`'s output. The relative
/// error of one input is `|g - g_fd| / max(|g|, |g_fd|, 1e-8)` in the
/// Euclidean norm.
pub fn check_gradients<F>(inputs: Vec<Tensor>, f: F, seed: u64) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let mut weights = None;
    let (tape, vars, loss) = probe(&inputs, &f, &mut weights, seed);
    let grads = tape.backward(loss).expect("finite gradients");

    let mut worst: f64 = 0.0;
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[k], input);
        let mut numeric = vec![0.0; input.len()];
        for (i, slot) in numeric.iter_mut().enumerate() {
            let eval = |delta: f64| {
                let mut shifted = inputs.clone();
                shifted[k].data_mut()[i] += delta;
                let (t, _, l) = probe(&shifted, &f, &mut weights.clone(), seed);
                t.value(l).data()[0]
            };
            *slot = (eval(FD_EPS) - eval(-FD_EPS)) / (2.0 * FD_EPS);
        }
        let diff: f64 = analytic
            .data()
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n) * (a - n))
            .sum::<f64>()
            .sqrt();
        let na = analytic.norm();
        let nn = numeric.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max(diff / na.max(nn).max(1e-8));
    }
    worst
}
