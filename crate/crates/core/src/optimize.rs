//! Small derivative-free minimizers used by the trap analysis.

use nalgebra::Vector3;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of a unimodal function on `[a, b]`.
/// Returns `(argmin, min)`.
pub fn golden_section<F>(mut f: F, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub initial_step: f64,
    pub max_evals: usize,
    /// Stop once the simplex spread in function value falls below this.
    pub f_tol: f64,
    /// Stop once every vertex lies within this distance of the best one.
    pub x_tol: f64,
}

/// Downhill simplex on a 3-vector. Points where `f` returns `None` are
/// treated as +∞.
pub fn nelder_mead<F>(mut f: F, start: Vector3<f64>, opts: &NelderMeadOptions) -> (Vector3<f64>, f64)
where
    F: FnMut(&Vector3<f64>) -> Option<f64>,
{
    let mut eval = |p: &Vector3<f64>| f(p).unwrap_or(f64::INFINITY);
    let mut simplex: Vec<(Vector3<f64>, f64)> = Vec::with_capacity(4);
    simplex.push((start, eval(&start)));
    for i in 0..3 {
        let mut p = start;
        p[i] += opts.initial_step;
        simplex.push((p, eval(&p)));
    }
    let mut evals = 4;

    while evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0];
        let worst = simplex[3];
        let spread = worst.1 - best.1;
        let size = simplex[1..]
            .iter()
            .map(|(p, _)| (p - best.0).norm())
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread <= opts.f_tol) || size <= opts.x_tol {
            break;
        }

        let centroid = (simplex[0].0 + simplex[1].0 + simplex[2].0) / 3.0;
        let reflected = centroid + (centroid - worst.0);
        let fr = eval(&reflected);
        evals += 1;

        if fr < best.1 {
            let expanded = centroid + 2.0 * (centroid - worst.0);
            let fe = eval(&expanded);
            evals += 1;
            simplex[3] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (reflected, fr);
        } else {
            let contracted = if fr < worst.1 {
                centroid + 0.5 * (reflected - centroid)
            } else {
                centroid + 0.5 * (worst.0 - centroid)
            };
            let fc = eval(&contracted);
            evals += 1;
            if fc < worst.1.min(fr) {
                simplex[3] = (contracted, fc);
            } else {
                // Shrink toward the best vertex.
                for v in simplex.iter_mut().skip(1) {
                    v.0 = best.0 + 0.5 * (v.0 - best.0);
                    v.1 = eval(&v.0);
                }
                evals += 3;
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}
