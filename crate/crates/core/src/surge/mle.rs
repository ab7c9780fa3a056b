//! Maximum-likelihood GEV fitting.

use nalgebra::Matrix3;
use serde::Serialize;

use super::gev::{log_likelihood_unchecked, GevParams};
use crate::error::{Error, Result};
use crate::stats;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// MLE with its observed-information covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GevFit {
    pub params: GevParams,
    /// Standard errors of `(μ, σ, ξ)`.
    pub standard_errors: [f64; 3],
    pub covariance: [[f64; 3]; 3],
    pub log_likelihood: f64,
    pub n: usize,
}

/// Minimizes `f` with the Nelder–Mead simplex method.
pub(crate) fn nelder_mead(
    f: &dyn Fn(&[f64; 3]) -> f64,
    start: [f64; 3],
    step: [f64; 3],
    max_iter: usize,
    tol: f64,
) -> ([f64; 3], f64, bool) {
    let eval = |x: &[f64; 3]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    simplex.push((start, eval(&start)));
    for i in 0..3 {
        let mut x = start;
        x[i] += step[i];
        simplex.push((x, eval(&x)));
    }
    let combine = |a: &[f64; 3], b: &[f64; 3], t: f64| -> [f64; 3] {
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]
    };
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[3].1);
        if best.is_finite() && (worst - best).abs() <= tol * (best.abs() + tol) {
            let spread = (0..3)
                .map(|k| (1..4).map(|j| (simplex[j].0[k] - simplex[0].0[k]).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if spread < 1e-9 * (1.0 + simplex[0].0.iter().map(|v| v.abs()).fold(0.0, f64::max)) || worst == best {
                return (simplex[0].0, best, true);
            }
        }
        let mut centroid = [0.0; 3];
        for (x, _) in &simplex[..3] {
            for k in 0..3 {
                centroid[k] += x[k] / 3.0;
            }
        }
        let worst_x = simplex[3].0;
        let reflected = combine(&centroid, &worst_x, -1.0);
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = combine(&centroid, &worst_x, -2.0);
            let fe = eval(&expanded);
            simplex[3] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr < simplex[3].1 {
                let c = combine(&centroid, &worst_x, -0.5);
                (c, eval(&c))
            } else {
                let c = combine(&centroid, &worst_x, 0.5);
                (c, eval(&c))
            };
            if fc < simplex[3].1.min(fr) {
                simplex[3] = (contracted, fc);
            } else {
                let best_x = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    let x = combine(&best_x, &entry.0, 0.5);
                    *entry = (x, eval(&x));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0, simplex[0].1, false)
}

/// Negative log-likelihood Hessian in `(μ, σ, ξ)` by central differences.
fn observed_information(maxima: &[f64], p: &GevParams) -> Matrix3<f64> {
    let x0 = p.as_array();
    let h = [1e-4 * p.scale, 1e-4 * p.scale, 1e-5];
    let nll = |x: [f64; 3]| {
        if x[1] <= 0.0 {
            return f64::INFINITY;
        }
        -log_likelihood_unchecked(maxima, &GevParams::from_array(x))
    };
    let f0 = nll(x0);
    let mut m = Matrix3::zeros();
    for i in 0..3 {
        for j in i..3 {
            let shifted = |di: f64, dj: f64| {
                let mut x = x0;
                x[i] += di * h[i];
                x[j] += dj * h[j];
                nll(x)
            };
            let v = if i == j {
                (shifted(1.0, 0.0) - 2.0 * f0 + shifted(-1.0, 0.0)) / (h[i] * h[i])
            } else {
                (shifted(1.0, 1.0) - shifted(1.0, -1.0) - shifted(-1.0, 1.0) + shifted(-1.0, -1.0)) / (4.0 * h[i] * h[j])
            };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Fit a GEV to block maxima by maximum likelihood.
///
/// The simplex search runs over `(μ, ln σ, ξ)` from a Gumbel moment estimate,
/// restarting from the incumbent optimum `restarts` times.
pub fn fit_gev_mle(maxima: &[f64], min_maxima: usize) -> Result<GevFit> {
    const RESTARTS: usize = 5;
    let n = maxima.len();
    if n < min_maxima.max(3) {
        return Err(Error::degenerate(format!(
            "GEV fit needs >= {} maxima, got {n}",
            min_maxima.max(3)
        )));
    }
    if maxima.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite block maximum".into()));
    }
    let m = stats::mean(maxima)?;
    let sd = stats::variance(maxima).sqrt();
    if !(sd > 1e-12 * m.abs().max(1.0)) {
        return Err(Error::fit("sample has no spread", format!("n = {n}, all values {m}")));
    }
    let scale0 = sd * 6f64.sqrt() / std::f64::consts::PI;
    let start = [m - EULER_GAMMA * scale0, scale0.ln(), 0.0];
    let nll = |x: &[f64; 3]| -> f64 {
        let p = GevParams {
            location: x[0],
            scale: x[1].exp(),
            shape: x[2],
        };
        -log_likelihood_unchecked(maxima, &p)
    };
    let mut best = (start, nll(&start));
    let mut converged = false;
    for restart in 0..=RESTARTS {
        let step = [0.1 * scale0, 0.1, if restart % 2 == 0 { 0.1 } else { -0.1 }];
        let (x, fx, ok) = nelder_mead(&nll, best.0, step, 5000, 1e-12);
        if fx <= best.1 {
            converged = ok;
            best = (x, fx);
        }
    }
    if !best.1.is_finite() || !converged {
        return Err(Error::fit(
            "optimizer did not converge",
            format!("best negative log-likelihood {} at {:?}", best.1, best.0),
        ));
    }
    let params = GevParams {
        location: best.0[0],
        scale: best.0[1].exp(),
        shape: best.0[2],
    };
    if !(params.scale > 1e-9 * sd) {
        return Err(Error::fit("scale collapsed to zero", format!("{params:?}")));
    }
    if let Some(x) = maxima.iter().find(|&&x| !params.in_support(x)) {
        return Err(Error::fit(
            "fit places an observation off the support",
            format!("x = {x}, {params:?}"),
        ));
    }
    let info = observed_information(maxima, &params);
    let cov = info
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::fit("observed information is not positive definite", format!("{info:?}")))?;
    let se = [cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt(), cov[(2, 2)].sqrt()];
    if se.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(Error::fit("singular observed information", format!("standard errors {se:?}")));
    }
    let mut covariance = [[0.0; 3]; 3];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = cov[(i, j)];
        }
    }
    Ok(GevFit {
        params,
        standard_errors: se,
        covariance,
        log_likelihood: -best.1,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;

    pub(crate) fn draws(p: &GevParams, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, "test-gev", 0);
        (0..n).map(|_| p.quantile(rng.random_range(1e-12..1.0)).unwrap()).collect()
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let f = |x: &[f64; 3]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2) + (x[2] - 0.5).powi(2) + 0.5 * x[0] * x[2];
        let (x, _, ok) = nelder_mead(&f, [0.0; 3], [1.0; 3], 10_000, 1e-14);
        assert!(ok);
        // stationary point of the quadratic, solved by hand
        let want = [1.75 / 1.875, -2.0, 0.5 - 0.25 * 1.75 / 1.875];
        for k in 0..3 {
            assert!((x[k] - want[k]).abs() < 1e-5, "{x:?}");
        }
    }

    #[test]
    fn recovers_table_midpoints() {
        let truth = GevParams::new(284.5, 45.2, -0.023).unwrap();
        let fit = fit_gev_mle(&draws(&truth, 5000, 1), 20).unwrap();
        for (k, t) in truth.as_array().iter().enumerate() {
            let got = fit.params.as_array()[k];
            assert!((got - t).abs() < 3.0 * fit.standard_errors[k], "param {k}: {got} vs {t}");
        }
    }

    #[test]
    fn gumbel_data_gives_small_shape() {
        let truth = GevParams::new(0.0, 1.0, 0.0).unwrap();
        let fit = fit_gev_mle(&draws(&truth, 2000, 2), 20).unwrap();
        assert!(fit.params.shape.abs() < 2.0 * fit.standard_errors[2]);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(fit_gev_mle(&[5.0; 50], 20), Err(Error::FitFailure { .. })));
        assert!(matches!(fit_gev_mle(&[1.0, 2.0, 3.0], 20), Err(Error::Degenerate(_))));
    }

    #[test]
    fn fit_is_a_local_maximum() {
        let truth = GevParams::new(2845.0, 452.0, -0.02).unwrap();
        let data = draws(&truth, 137, 4);
        let fit = fit_gev_mle(&data, 20).unwrap();
        assert!(data.iter().all(|&x| fit.params.in_support(x)));
        let mut rng = substream(4, "test-perturb", 0);
        for _ in 0..1000 {
            let mut x = fit.params.as_array();
            for (k, v) in x.iter_mut().enumerate() {
                *v += fit.standard_errors[k] * rng.random_range(-1.0..1.0);
            }
            if x[1] <= 0.0 {
                continue;
            }
            let ll = log_likelihood_unchecked(&data, &GevParams::from_array(x));
            assert!(ll <= fit.log_likelihood + 1e-9);
        }
    }
}
