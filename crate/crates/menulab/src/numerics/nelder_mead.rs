use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stopping and restart controls for the simplex search.
#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    pub diameter_tol: f64,
    /// Step used to build the initial simplex around a seed point.
    pub initial_step: f64,
    pub seed: u64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 5000,
            diameter_tol: 1e-8,
            initial_step: 0.25,
            seed: 0x6d656e75,
        }
    }
}

/// Maximizes `h` with multi-start Nelder–Mead. Restart seeds are drawn from a
/// fixed-seed generator, so results are reproducible. Non-finite objective
/// values are treated as negative infinity.
pub fn nelder_mead<F>(mut h: F, x0: &[f64], restarts: usize) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(
        x0.len() <= 8,
        "simplex search is intended for dimension <= 8"
    );
    assert!(!x0.is_empty());
    let opts = NelderMeadOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let scale = x0.iter().map(|v| v.abs()).fold(1.0f64, f64::max);

    let mut best: Option<(Vec<f64>, f64)> = None;
    for restart in 0..restarts.max(1) {
        let start: Vec<f64> = if restart == 0 {
            x0.to_vec()
        } else {
            x0.iter()
                .map(|v| v + scale * rng.gen_range(-0.5..0.5))
                .collect()
        };
        let (x, v) = nelder_mead_from(&mut h, &start, &opts);
        match &best {
            Some((_, bv)) if *bv >= v => {}
            _ => best = Some((x, v)),
        }
    }
    best.unwrap()
}

/// One Nelder–Mead run (maximization) from a single seed point.
pub fn nelder_mead_from<F>(h: &mut F, x0: &[f64], opts: &NelderMeadOptions) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = h(x);
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    };

    // Vertices stored as (point, value), kept sorted best-first.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut p = x0.to_vec();
        let step = if p[i].abs() > 1e-12 {
            opts.initial_step * p[i].abs()
        } else {
            opts.initial_step
        };
        p[i] += step;
        let v = eval(&p, &mut evals);
        simplex.push((p, v));
    }
    let sort = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    };
    sort(&mut simplex);

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    while evals < opts.max_evals {
        let diameter = simplex
            .iter()
            .skip(1)
            .map(|(p, _)| {
                p.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0f64, f64::max);
        if diameter < opts.diameter_tol {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex.iter().take(n).map(|(p, _)| p[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();

        let reflected: Vec<f64> = centroid
            .iter()
            .zip(&worst.0)
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        let v_r = eval(&reflected, &mut evals);

        if v_r > simplex[0].1 {
            // Try to expand past the reflection.
            let expanded: Vec<f64> = centroid
                .iter()
                .zip(&reflected)
                .map(|(c, r)| c + gamma * (r - c))
                .collect();
            let v_e = eval(&expanded, &mut evals);
            simplex[n] = if v_e > v_r {
                (expanded, v_e)
            } else {
                (reflected, v_r)
            };
        } else if v_r > simplex[n - 1].1 {
            simplex[n] = (reflected, v_r);
        } else {
            let contracted: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + rho * (w - c))
                .collect();
            let v_c = eval(&contracted, &mut evals);
            if v_c > worst.1 {
                simplex[n] = (contracted, v_c);
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let p: Vec<f64> = vertex
                        .0
                        .iter()
                        .zip(&best)
                        .map(|(x, b)| b + sigma * (x - b))
                        .collect();
                    let v = eval(&p, &mut evals);
                    *vertex = (p, v);
                }
            }
        }
        sort(&mut simplex);
    }
    simplex.swap_remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::maximize_scalar;
    use approx::assert_abs_diff_eq;

    #[test]
    fn recovers_quadratic_peak_in_2d() {
        let h = |x: &[f64]| -((x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2));
        let (x, v) = nelder_mead(h, &[0.0, 0.0], 4);
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(x[1], 2.0, epsilon = 1e-4);
        assert!(v > -1e-8);
    }

    #[test]
    fn one_dimensional_wrapper_matches_scalar_search() {
        let g = |p: f64| p - p.powi(3) / 2.0;
        let (xs, vs) = maximize_scalar(g, 0.0, 1.0);
        let (xv, vv) = nelder_mead(|x: &[f64]| g(x[0].clamp(0.0, 1.0)), &[0.4], 6);
        assert_abs_diff_eq!(xv[0].clamp(0.0, 1.0), xs, epsilon = 1e-5);
        assert_abs_diff_eq!(vv, vs, epsilon = 1e-6);
    }

    #[test]
    fn non_finite_objective_is_rejected_not_propagated() {
        let h = |x: &[f64]| {
            if x[0] > 0.5 {
                f64::NAN
            } else {
                -(x[0] - 0.25).powi(2)
            }
        };
        let (x, v) = nelder_mead(h, &[0.0], 3);
        assert!(v.is_finite());
        assert!(x[0] <= 0.5);
    }

    #[test]
    fn deterministic_across_invocations() {
        let h = |x: &[f64]| -(x[0].powi(2) + (x[1] - 0.3).powi(2)) + (3.0 * x[0]).sin() * 0.05;
        let a = nelder_mead(h, &[0.7, -0.2], 8);
        let b = nelder_mead(h, &[0.7, -0.2], 8);
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}
