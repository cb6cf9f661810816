//! Central-difference gradient verification against the tape.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::params::{Binding, ParamSet};
use crate::tape::{Tape, Var};

/// Compares tape gradients of `build` against central differences.
///
/// `build` must construct the same deterministic scalar loss every time it
/// is called for fixed parameter values. Up to `max_coords_per_param`
/// coordinates are sampled (seeded) from every parameter. Returns the
/// maximum relative error `|analytic - cd| / max(|analytic|, |cd|, 1e-8)`.
pub fn grad_check<F>(
    params: &mut ParamSet,
    build: F,
    eps: f64,
    max_coords_per_param: usize,
    seed: u64,
) -> f64
where
    F: Fn(&Tape, &Binding) -> Var,
{
    assert!(eps > 0.0, "grad_check: eps must be positive, got {eps}");

    // Analytic pass.
    let analytic: Vec<Vec<f64>> = {
        let tape = Tape::new();
        let binding = params.bind(&tape);
        let loss = build(&tape, &binding);
        let grads = tape.backward(loss);
        params
            .iter()
            .map(|(id, p)| {
                grads
                    .wrt(binding.var(id))
                    .map(|g| g.data().to_vec())
                    .unwrap_or_else(|| vec![0.0; p.value.len()])
            })
            .collect()
    };

    let eval = |params: &ParamSet| -> f64 {
        let tape = Tape::new();
        let binding = params.bind(&tape);
        let loss = build(&tape, &binding);
        tape.item(loss)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = params.iter().map(|(id, _)| id).collect();
    let mut max_rel = 0.0f64;
    for (pi, id) in ids.iter().enumerate() {
        let n = params.value(*id).len();
        let coords: Vec<usize> = if n <= max_coords_per_param {
            (0..n).collect()
        } else {
            (0..max_coords_per_param).map(|_| rng.gen_range(0..n)).collect()
        };
        for c in coords {
            let original = params.value(*id).data()[c];
            params.value_mut(*id).data_mut()[c] = original + eps;
            let f_plus = eval(params);
            params.value_mut(*id).data_mut()[c] = original - eps;
            let f_minus = eval(params);
            params.value_mut(*id).data_mut()[c] = original;

            let cd = (f_plus - f_minus) / (2.0 * eps);
            let a = analytic[pi][c];
            let rel = (a - cd).abs() / a.abs().max(cd.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
        }
    }
    max_rel
}
