//! Nelder–Mead simplex minimizer used for Holt-Winters and SARIMA fitting.

/// Options for [`nelder_mead`].
#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Stop when every vertex is within this ∞-norm distance of the best one.
    pub tol: f64,
    /// Offset applied to each coordinate of the start point to build the
    /// initial simplex.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-8,
            initial_step: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn eval(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn along(from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
}

/// Minimizes `f` starting from `x0`. Non-finite objective values are treated
/// as +∞. Deterministic: ties keep vertex order.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> Minimum {
    let n = x0.len();
    if n == 0 {
        let value = eval(&mut f, x0);
        return Minimum {
            x: Vec::new(),
            value,
            iterations: 0,
            converged: true,
        };
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(&mut f, x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += opts.initial_step;
        let v = eval(&mut f, &x);
        simplex.push((x, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if size < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let (worst, worst_v) = simplex[n].clone();
        let best_v = simplex[0].1;
        let second_worst_v = simplex[n - 1].1;

        let reflected = along(&centroid, &worst, -REFLECT);
        let reflected_v = eval(&mut f, &reflected);
        if reflected_v < best_v {
            let expanded = along(&centroid, &worst, -EXPAND);
            let expanded_v = eval(&mut f, &expanded);
            simplex[n] = if expanded_v < reflected_v {
                (expanded, expanded_v)
            } else {
                (reflected, reflected_v)
            };
            continue;
        }
        if reflected_v < second_worst_v {
            simplex[n] = (reflected, reflected_v);
            continue;
        }
        let (contracted, contracted_v) = if reflected_v < worst_v {
            let c = along(&centroid, &reflected, CONTRACT);
            let v = eval(&mut f, &c);
            (c, v)
        } else {
            let c = along(&centroid, &worst, CONTRACT);
            let v = eval(&mut f, &c);
            (c, v)
        };
        if contracted_v < worst_v.min(reflected_v) {
            simplex[n] = (contracted, contracted_v);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x = along(&best, &vertex.0, SHRINK);
            let v = eval(&mut f, &x);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        iterations,
        converged,
    }
}
