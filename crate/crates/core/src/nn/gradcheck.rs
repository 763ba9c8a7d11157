//! Central finite-difference check of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::param::Parameterized;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub perturbation: f64,
    /// Upper bound on the number of trainable entries compared.
    pub samples: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            perturbation: 1e-5,
            samples: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
}

/// Compares `backward`'s gradients against `(f(θ+h) − f(θ−h)) / 2h` on a seeded
/// sample of trainable entries. `loss` must be deterministic (dropout off).
///
/// Relative error uses the denominator `max(|analytic|, |numeric|, 1e-8)`.
pub fn gradient_check<M, L, B>(model: &mut M, loss: L, mut backward: B, opts: GradCheckOptions) -> GradCheckReport
where
    M: Parameterized,
    L: Fn(&M) -> f64,
    B: FnMut(&mut M),
{
    model.zero_grads();
    backward(model);

    let mut analytic = Vec::new();
    model.visit_params(&mut |p| {
        if !p.is_frozen() {
            analytic.extend_from_slice(p.grad.data());
        }
    });
    model.zero_grads();

    let total = analytic.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut picks: Vec<usize> = if total <= opts.samples {
        (0..total).collect()
    } else {
        sample(&mut rng, total, opts.samples).into_vec()
    };
    picks.sort_unstable();

    let h = opts.perturbation;
    let mut worst: f64 = 0.0;
    for &flat in &picks {
        let original = nudge(model, flat, None);
        nudge(model, flat, Some(original + h));
        let up = loss(model);
        nudge(model, flat, Some(original - h));
        let down = loss(model);
        nudge(model, flat, Some(original));

        let numeric = (up - down) / (2.0 * h);
        let a = analytic[flat];
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    GradCheckReport {
        max_relative_error: worst,
        checked: picks.len(),
    }
}

/// Returns the `flat`-th trainable entry, overwriting it when `value` is given.
fn nudge<M: Parameterized>(model: &mut M, flat: usize, value: Option<f64>) -> f64 {
    let mut offset = 0;
    let mut previous = f64::NAN;
    model.visit_params_mut(&mut |p| {
        if p.is_frozen() || !previous.is_nan() {
            return;
        }
        let n = p.len();
        if flat < offset + n {
            let slot = &mut p.value.data_mut()[flat - offset];
            previous = *slot;
            if let Some(v) = value {
                *slot = v;
            }
        }
        offset += n;
    });
    previous
}
