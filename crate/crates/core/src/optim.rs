//! Gradient-free simplex minimization (Nelder-Mead).
//!
//! Used for hyperparameter fitting in log-space. Objectives may return
//! `+inf` (or NaN, treated as `+inf`) to reject infeasible points; the
//! simplex reflects away from them. The algorithm is fully deterministic
//! for a given starting point.

/// Standard Nelder-Mead coefficients with iteration and convergence limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    pub max_iters: usize,
    /// Relative spread of objective values across the simplex at which to stop.
    pub f_tol: f64,
    /// Simplex edge length at which to stop.
    pub x_tol: f64,
    /// Step added to each coordinate of the start to seed the simplex.
    pub initial_step: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { max_iters: 200, f_tol: 1e-6, x_tol: 3e-4, initial_step: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECTION: f64 = 1.0;
const EXPANSION: f64 = 2.0;
const CONTRACTION: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn sanitize(value: f64) -> f64 {
    if value.is_nan() {
        f64::INFINITY
    } else {
        value
    }
}

/// Minimizes `objective` starting from `start`.
pub fn nelder_mead(
    mut objective: impl FnMut(&[f64]) -> f64,
    start: &[f64],
    config: &NelderMeadConfig,
) -> NelderMeadResult {
    let dim = start.len();
    assert!(dim > 0, "objective must have at least one coordinate");
    let mut evaluations = 0;
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        sanitize(objective(x))
    };

    // Simplex of dim+1 vertices: the start plus one step along each axis.
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(start.to_vec());
    for i in 0..dim {
        let mut v = start.to_vec();
        v[i] += config.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evaluations)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iters {
        iterations += 1;

        // Stable sort keeps tie ordering deterministic.
        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let worst = values[dim];
        let spread = (worst - best).abs();
        let scale = best.abs().max(1.0);
        let diameter = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0_f64, f64::max);
        if (spread.is_finite() && spread <= config.f_tol * scale) || diameter <= config.x_tol {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; dim];
        for v in &simplex[..dim] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / dim as f64;
            }
        }

        let worst_vertex = simplex[dim].clone();
        let reflected: Vec<f64> = centroid
            .iter()
            .zip(&worst_vertex)
            .map(|(c, w)| c + REFLECTION * (c - w))
            .collect();
        let f_reflected = eval(&reflected, &mut evaluations);

        if f_reflected < values[0] {
            // Try to expand further along the same direction.
            let expanded: Vec<f64> = centroid
                .iter()
                .zip(&worst_vertex)
                .map(|(c, w)| c + EXPANSION * (c - w))
                .collect();
            let f_expanded = eval(&expanded, &mut evaluations);
            if f_expanded < f_reflected {
                simplex[dim] = expanded;
                values[dim] = f_expanded;
            } else {
                simplex[dim] = reflected;
                values[dim] = f_reflected;
            }
        } else if f_reflected < values[dim - 1] {
            simplex[dim] = reflected;
            values[dim] = f_reflected;
        } else {
            // Contract toward the centroid, inside or outside.
            let (anchor, f_anchor) = if f_reflected < values[dim] {
                (reflected.clone(), f_reflected)
            } else {
                (worst_vertex.clone(), values[dim])
            };
            let contracted: Vec<f64> = centroid
                .iter()
                .zip(&anchor)
                .map(|(c, a)| c + CONTRACTION * (a - c))
                .collect();
            let f_contracted = eval(&contracted, &mut evaluations);
            if f_contracted < f_anchor {
                simplex[dim] = contracted;
                values[dim] = f_contracted;
            } else {
                // Shrink everything toward the best vertex.
                let best_vertex = simplex[0].clone();
                for i in 1..=dim {
                    for (x, b) in simplex[i].iter_mut().zip(&best_vertex) {
                        *x = b + SHRINK * (*x - b);
                    }
                    values[i] = eval(&simplex[i].clone(), &mut evaluations);
                }
            }
        }
    }

    let mut best_index = 0;
    for i in 1..values.len() {
        if values[i] < values[best_index] {
            best_index = i;
        }
    }
    NelderMeadResult {
        x: simplex[best_index].clone(),
        f: values[best_index],
        iterations,
        evaluations,
        converged,
    }
}
