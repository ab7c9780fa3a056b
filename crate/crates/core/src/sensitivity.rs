//! One-at-a-time sweeps and Sobol variance decomposition.

use rand::Rng;
use rand_distr::Open01;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::objectives::{evaluate_objectives, ModelVersion, Objective};
use crate::rng::{labels, substream};
use crate::uncertainty::{Parameter, PriorSpec, StateOfTheWorld};

/// A vector-valued function of named inputs.
pub trait Model: Sync {
    fn output_names(&self) -> Vec<String>;
    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// Wraps a closure as a [`Model`].
pub struct FnModel<F> {
    names: Vec<String>,
    f: F,
}

impl<F> FnModel<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    pub fn new(names: &[&str], f: F) -> Self {
        Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            f,
        }
    }
}

impl<F> Model for FnModel<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    fn output_names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        (self.f)(x)
    }
}

/// Named input priors, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub names: Vec<String>,
    pub priors: Vec<PriorSpec>,
}

impl Problem {
    pub fn new(inputs: Vec<(String, PriorSpec)>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::config("sensitivity problem has no inputs"));
        }
        for (name, prior) in &inputs {
            prior
                .validate()
                .map_err(|e| Error::config(format!("prior for {name}: {e}")))?;
        }
        let (names, priors) = inputs.into_iter().unzip();
        Ok(Self { names, priors })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    fn map_unit(&self, u: &[f64]) -> Result<Vec<f64>> {
        u.iter().zip(&self.priors).map(|(&u, p)| p.inverse_cdf(u)).collect()
    }
}

fn evaluate_rows(model: &impl Model, rows: &[Vec<f64>], expected_outputs: usize) -> Result<Vec<Vec<f64>>> {
    rows.par_iter()
        .map(|x| {
            let y = model.evaluate(x).map_err(|e| Error::ModelEvaluation {
                sample: x.clone(),
                source: Box::new(e),
            })?;
            if y.len() != expected_outputs || y.iter().any(|v| !v.is_finite()) {
                return Err(Error::ModelEvaluation {
                    sample: x.clone(),
                    source: Box::new(Error::Data(format!(
                        "model returned {} outputs (expected {expected_outputs}) or a non-finite value",
                        y.len()
                    ))),
                });
            }
            Ok(y)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OatParameter {
    pub name: String,
    /// Input values swept, 1st to 99th percentile.
    pub inputs: Vec<f64>,
    pub outputs: Vec<f64>,
    pub range: f64,
    /// Range divided by the largest range over parameters.
    pub share: f64,
    pub insensitive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OatReport {
    pub output: String,
    pub parameters: Vec<OatParameter>,
}

/// Vary each input over its 1st–99th percentiles with the rest at their medians.
/// Inputs whose output range is under 1% of the largest are flagged.
pub fn oat_sweep(model: &impl Model, problem: &Problem, points: usize) -> Result<Vec<OatReport>> {
    if points < 3 {
        return Err(Error::config("OAT sweep needs at least 3 points per parameter"));
    }
    let outputs = model.output_names();
    let medians = problem.map_unit(&vec![0.5; problem.dim()])?;
    let levels: Vec<f64> = (0..points).map(|j| 0.01 + 0.98 * j as f64 / (points - 1) as f64).collect();
    let mut rows = Vec::with_capacity(problem.dim() * points);
    for (i, prior) in problem.priors.iter().enumerate() {
        for &u in &levels {
            let mut x = medians.clone();
            x[i] = prior.inverse_cdf(u)?;
            rows.push(x);
        }
    }
    let ys = evaluate_rows(model, &rows, outputs.len())?;
    Ok(outputs
        .iter()
        .enumerate()
        .map(|(o, name)| {
            let mut params: Vec<OatParameter> = problem
                .names
                .iter()
                .enumerate()
                .map(|(i, pname)| {
                    let block = i * points..(i + 1) * points;
                    let out: Vec<f64> = ys[block.clone()].iter().map(|y| y[o]).collect();
                    let hi = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lo = out.iter().copied().fold(f64::INFINITY, f64::min);
                    OatParameter {
                        name: pname.clone(),
                        inputs: rows[block].iter().map(|x| x[i]).collect(),
                        outputs: out,
                        range: hi - lo,
                        share: 0.0,
                        insensitive: true,
                    }
                })
                .collect();
            let max_range = params.iter().map(|p| p.range).fold(0.0, f64::max);
            for p in &mut params {
                if max_range > 0.0 {
                    p.share = p.range / max_range;
                    p.insensitive = p.range < 0.01 * max_range;
                }
            }
            OatReport {
                output: name.clone(),
                parameters: params,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SobolIndices {
    pub output: String,
    pub names: Vec<String>,
    /// Clamped to `[0, 1]`.
    pub first: Vec<f64>,
    pub total: Vec<f64>,
    /// Upper triangle used; `second[i][j]` for `i < j`.
    pub second: Option<Vec<Vec<f64>>>,
    pub raw_first: Vec<f64>,
    pub raw_total: Vec<f64>,
    pub raw_second: Option<Vec<Vec<f64>>>,
    pub variance: f64,
    pub n_base: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexOrder {
    First,
    Total,
}

impl SobolIndices {
    /// Parameter names, descending by the chosen index, ties by name.
    pub fn rank(&self, order: IndexOrder) -> Vec<String> {
        let values = match order {
            IndexOrder::First => &self.first,
            IndexOrder::Total => &self.total,
        };
        rank_parameters(&self.names, values)
    }
}

pub fn rank_parameters(names: &[String], values: &[f64]) -> Vec<String> {
    let mut idx: Vec<usize> = (0..names.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then_with(|| names[a].cmp(&names[b])));
    idx.into_iter().map(|i| names[i].clone()).collect()
}

/// Saltelli cross-sampling with Jansen estimators.
///
/// Matrices `A` and `B` hold `n_base` independent uniform draws mapped through
/// each prior's inverse CDF; `AB_i` is `A` with column `i` from `B`, and
/// `BA_i` (second order only) is `B` with column `i` from `A`.
pub fn sobol_indices(
    model: &impl Model,
    problem: &Problem,
    n_base: usize,
    seed: u64,
    second_order: bool,
) -> Result<Vec<SobolIndices>> {
    if n_base < 64 || !n_base.is_power_of_two() {
        return Err(Error::config(format!("n_base must be a power of two >= 64, got {n_base}")));
    }
    let k = problem.dim();
    let n = n_base;
    let mut rng = substream(seed, labels::SOBOL, 0);
    let mut unit = |_: usize| -> Vec<f64> { (0..k).map(|_| rng.sample(Open01)).collect() };
    let a_u: Vec<Vec<f64>> = (0..n).map(&mut unit).collect();
    let b_u: Vec<Vec<f64>> = (0..n).map(&mut unit).collect();
    let a: Vec<Vec<f64>> = a_u.iter().map(|u| problem.map_unit(u)).collect::<Result<_>>()?;
    let b: Vec<Vec<f64>> = b_u.iter().map(|u| problem.map_unit(u)).collect::<Result<_>>()?;
    let blocks = if second_order { 2 + 2 * k } else { 2 + k };
    let mut rows = Vec::with_capacity(n * blocks);
    rows.extend(a.iter().cloned());
    rows.extend(b.iter().cloned());
    for i in 0..k {
        rows.extend(a.iter().zip(&b).map(|(ra, rb)| {
            let mut x = ra.clone();
            x[i] = rb[i];
            x
        }));
    }
    if second_order {
        for i in 0..k {
            rows.extend(a.iter().zip(&b).map(|(ra, rb)| {
                let mut x = rb.clone();
                x[i] = ra[i];
                x
            }));
        }
    }
    let outputs = model.output_names();
    let ys = evaluate_rows(model, &rows, outputs.len())?;
    let block = |j: usize, o: usize| -> Vec<f64> { ys[j * n..(j + 1) * n].iter().map(|y| y[o]).collect() };
    let nf = n as f64;
    let sq = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>() };

    Ok(outputs
        .iter()
        .enumerate()
        .map(|(o, name)| {
            let fa = block(0, o);
            let fb = block(1, o);
            let fab: Vec<Vec<f64>> = (0..k).map(|i| block(2 + i, o)).collect();
            let variance = sq(&fa, &fb) / (2.0 * nf);
            let ratio = |num: f64| if variance > 0.0 { num / (2.0 * nf * variance) } else { 0.0 };
            let raw_first: Vec<f64> = (0..k)
                .map(|i| if variance > 0.0 { 1.0 - ratio(sq(&fb, &fab[i])) } else { 0.0 })
                .collect();
            let raw_total: Vec<f64> = (0..k).map(|i| ratio(sq(&fa, &fab[i]))).collect();
            let raw_second = second_order.then(|| {
                let fba: Vec<Vec<f64>> = (0..k).map(|i| block(2 + k + i, o)).collect();
                let mut m = vec![vec![0.0; k]; k];
                for i in 0..k {
                    for j in (i + 1)..k {
                        let v = if variance > 0.0 {
                            1.0 - ratio(sq(&fba[i], &fab[j])) - raw_first[i] - raw_first[j]
                        } else {
                            0.0
                        };
                        m[i][j] = v;
                        m[j][i] = v;
                    }
                }
                m
            });
            let clamp = |v: &Vec<f64>| v.iter().map(|x| x.clamp(0.0, 1.0)).collect::<Vec<_>>();
            SobolIndices {
                output: name.clone(),
                names: problem.names.clone(),
                first: clamp(&raw_first),
                total: clamp(&raw_total),
                second: raw_second.as_ref().map(|m| m.iter().map(clamp).collect()),
                raw_first,
                raw_total,
                raw_second,
                variance,
                n_base: n,
                evaluations: rows.len(),
            }
        })
        .collect())
}

/// The flood-risk model as a function of selected parameters, returning all
/// four objectives at a fixed heightening.
pub struct ObjectiveModel {
    pub version: ModelVersion,
    pub base: StateOfTheWorld,
    pub parameters: Vec<Parameter>,
    pub height: f64,
    pub horizon: u32,
}

impl Model for ObjectiveModel {
    fn output_names(&self) -> Vec<String> {
        Objective::ALL.iter().map(|o| o.name().to_string()).collect()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut sow = self.base.clone();
        for (p, &v) in self.parameters.iter().zip(x) {
            p.apply(&mut sow, v)?;
        }
        let o = evaluate_objectives(&sow, self.height, self.version, self.horizon)?;
        Ok(Objective::ALL.iter().map(|&k| o.get(k)).collect())
    }
}
