//! Euclidean projection onto probability simplices and a projected-gradient
//! minimiser over products of simplices.

/// Projects `v` onto `{x : x >= 0, sum x = 1}` in place.
pub fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        css += uk;
        let t = (css - 1.0) / (k as f64 + 1.0);
        if uk - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    // Renormalise away the rounding left by the threshold.
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
}

/// Projects every consecutive block of `block` entries.
pub fn project_blocks(v: &mut [f64], block: usize) {
    for row in v.chunks_mut(block) {
        project_simplex(row);
    }
}

/// Entries above this count as "in use" for the stationarity residual.
pub const SUPPORT_EPS: f64 = 1e-9;

/// First-order stationarity residual on a product of simplices:
/// `max_i (max_{j : x_ij > SUPPORT_EPS} g_ij - min_j g_ij)`.
pub fn kkt_residual(x: &[f64], grad: &[f64], block: usize) -> f64 {
    x.chunks(block)
        .zip(grad.chunks(block))
        .map(|(xr, gr)| {
            let lo = gr.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xr
                .iter()
                .zip(gr)
                .filter(|(&xv, _)| xv > SUPPORT_EPS)
                .map(|(_, &g)| g)
                .fold(f64::NEG_INFINITY, f64::max);
            (hi - lo).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Subtracts each block's mean. Projection onto the simplex ignores
/// constant shifts within a block, and removing them keeps the large common
/// component of the gradient from amplifying rounding in `g . (y - x)`.
fn center_blocks(g: &mut [f64], block: usize) {
    for row in g.chunks_mut(block) {
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        for v in row.iter_mut() {
            *v -= mean;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpgOptions {
    pub max_iters: usize,
    pub kkt_tol: f64,
    pub armijo: f64,
    /// Length of the non-monotone acceptance window.
    pub memory: usize,
}

impl Default for SpgOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            kkt_tol: 1e-8,
            armijo: 1e-4,
            memory: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpgOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub kkt: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Spectral projected gradient (Barzilai–Borwein steps, non-monotone Armijo
/// backtracking) over a product of simplices of size `block`.
///
/// `f` must return `+inf` outside its domain; such trial points are rejected
/// by the line search, so iterates never leave the domain. `grad` writes the
/// gradient and returns false outside the domain. `x0` must be feasible.
pub fn minimize<F, G>(x0: Vec<f64>, block: usize, f: F, grad: G, opts: &SpgOptions) -> SpgOutcome
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]) -> bool,
{
    let len = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    let mut g = vec![0.0; len];
    if !fx.is_finite() || !grad(&x, &mut g) {
        return SpgOutcome {
            x,
            value: f64::INFINITY,
            kkt: f64::INFINITY,
            iterations: 0,
            converged: false,
        };
    }
    let mut history = std::collections::VecDeque::with_capacity(opts.memory.max(1));
    history.push_back(fx);
    center_blocks(&mut g, block);
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut step = if gmax > 0.0 { 1.0 / gmax } else { 1.0 };
    let mut kkt = kkt_residual(&x, &g, block);
    let mut trial = vec![0.0; len];
    let mut g_new = vec![0.0; len];
    let mut iterations = 0;

    while iterations < opts.max_iters && kkt > opts.kkt_tol {
        iterations += 1;
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let slack = 4.0 * f64::EPSILON * fx.abs().max(1.0);
        // Decreases below this are lost in the rounding of `f`.
        let noise = 64.0 * f64::EPSILON * fx.abs().max(1.0);
        let mut alpha = step;
        let mut accepted = false;
        let mut have_grad = false;
        let mut f_trial = f64::INFINITY;
        while alpha > 1e-30 {
            for k in 0..len {
                trial[k] = x[k] - alpha * g[k];
            }
            project_blocks(&mut trial, block);
            let descent: f64 = (0..len).map(|k| g[k] * (trial[k] - x[k])).sum();
            f_trial = f(&trial);
            if descent < 0.0 && f_trial.is_finite() && f_trial <= reference + opts.armijo * descent + slack {
                accepted = true;
                break;
            }
            // Near a stationary point neither the objective nor `descent` can
            // resolve progress; fall back to the stationarity residual itself.
            if f_trial.is_finite() && f_trial <= fx + noise && grad(&trial, &mut g_new) && kkt_residual(&trial, &g_new, block) < kkt {
                accepted = true;
                have_grad = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted || (!have_grad && !grad(&trial, &mut g_new)) {
            break;
        }
        center_blocks(&mut g_new, block);
        let mut ss = 0.0;
        let mut sy = 0.0;
        for k in 0..len {
            let s = trial[k] - x[k];
            ss += s * s;
            sy += s * (g_new[k] - g[k]);
        }
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_trial;
        if history.len() == opts.memory.max(1) {
            history.pop_front();
        }
        history.push_back(fx);
        step = if sy > 0.0 {
            (ss / sy).clamp(1e-12, 1e12)
        } else {
            alpha.max(1e-12) * 2.0
        };
        kkt = kkt_residual(&x, &g, block);
    }
    SpgOutcome {
        converged: kkt <= opts.kkt_tol,
        x,
        value: fx,
        kkt,
        iterations,
    }
}
