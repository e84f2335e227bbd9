//! Finite-size free energy `F = (1/n) log Z` by exact enumeration of the
//! signal, averaged over disorder by Monte Carlo.
//!
//! `Z = sum_x P(x) exp(-|Y - sqrt(beta) phi_L(Phi^(L) x^(L-1) / sqrt(n_{L-1}))|^2 / 2)`
//! with `x^(l)` obtained by propagating `x` through the sampled layers.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, mean_and_variance, sample_replication, Branch, ForwardSample, ModelSpec};
use crate::quadrature::LogSumExp;

/// Largest number of enumerated signal configurations.
pub const STATE_CAP: u64 = 1 << 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyEstimate {
    pub n: usize,
    pub replications: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(replications)`.
    pub stderr: f64,
    pub values: Vec<f64>,
    pub seed: u64,
}

impl FreeEnergyEstimate {
    pub fn from_values(n: usize, seed: u64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Precondition("need at least two replications".into()));
        }
        let (mean, var) = mean_and_variance(&values);
        Ok(FreeEnergyEstimate {
            n,
            replications: values.len(),
            mean,
            stderr: (var / values.len() as f64).sqrt(),
            values,
            seed,
        })
    }

    /// Writes `rep,F,seed`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["rep", "F", "seed"])?;
        for (r, v) in self.values.iter().enumerate() {
            w.write_record([r.to_string(), v.to_string(), self.seed.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn deterministic_branches(model: &ModelSpec) -> Result<Vec<Branch>> {
    (1..=model.depth())
        .map(|l| {
            let act = model.activation(l);
            if act.is_deterministic() {
                Ok(act.branches()[0].0)
            } else {
                Err(Error::Unsupported(format!(
                    "layer {l} has side information; enumeration needs deterministic activations"
                )))
            }
        })
        .collect()
}

fn state_count(model: &ModelSpec, n: usize) -> Result<u64> {
    let k = model.prior.support_size() as u64;
    let mut count: u64 = 1;
    for _ in 0..n {
        count = count.saturating_mul(k);
        if count > STATE_CAP {
            return Err(Error::Precondition(format!(
                "{k}^{n} signal configurations exceed the enumeration cap 2^24"
            )));
        }
    }
    Ok(count)
}

/// `log Z` for one disorder draw. At `beta = 0` the channel term does not
/// depend on `x` and `log Z = -|Y|^2 / 2` without enumeration.
pub fn exact_log_partition(model: &ModelSpec, n: usize, disorder: &ForwardSample) -> Result<f64> {
    deterministic_branches(model)?;
    if model.beta == 0.0 {
        return Ok(-0.5 * dot(&disorder.observation, &disorder.observation));
    }
    enumerate_log_partition(model, n, disorder)
}

/// `log Z` by enumerating every signal configuration in reflected Gray-code
/// order, updating `Phi^(1) x` by one column per step.
pub fn enumerate_log_partition(model: &ModelSpec, n: usize, disorder: &ForwardSample) -> Result<f64> {
    let branches = deterministic_branches(model)?;
    state_count(model, n)?;
    if disorder.signal.len() != n {
        return Err(Error::Precondition(format!(
            "disorder drawn at n = {}, asked for n = {n}",
            disorder.signal.len()
        )));
    }
    let atoms = &model.prior.atoms;
    let k = atoms.len();
    let values: Vec<f64> = atoms.iter().map(|a| a.value).collect();
    let log_w: Vec<f64> = atoms.iter().map(|a| a.weight.ln()).collect();

    let first = &disorder.mixing[0];
    let n1 = first.rows;
    let scale = 1.0 / (n as f64).sqrt();
    // column-major copy of Phi^(1) / sqrt(n)
    let columns: Vec<f64> = (0..n)
        .flat_map(|i| (0..n1).map(move |j| first.get(j, i) * scale))
        .collect();

    let mut digits = vec![0usize; n];
    let mut up = vec![true; n];
    let mut pre = vec![0.0; n1];
    for (i, _) in digits.iter().enumerate() {
        for (p, c) in pre.iter_mut().zip(&columns[i * n1..(i + 1) * n1]) {
            *p += c * values[0];
        }
    }
    let mut log_prior = n as f64 * log_w[0];

    let gain = model.beta.sqrt();
    let y = &disorder.observation;
    let depth = model.depth();
    let mut buffers: Vec<Vec<f64>> = disorder.mixing.iter().map(|m| vec![0.0; m.rows]).collect();
    let mut acc = LogSumExp::default();

    loop {
        for (o, p) in buffers[0].iter_mut().zip(&pre) {
            *o = branches[0].eval(*p);
        }
        for l in 1..depth {
            let (done, rest) = buffers.split_at_mut(l);
            let input = &done[l - 1];
            let m = &disorder.mixing[l];
            let s = 1.0 / (m.cols as f64).sqrt();
            for (j, o) in rest[0].iter_mut().enumerate() {
                *o = branches[l].eval(dot(m.row(j), input) * s);
            }
        }
        let energy: f64 = y
            .iter()
            .zip(&buffers[depth - 1])
            .map(|(yi, xi)| {
                let d = yi - gain * xi;
                d * d
            })
            .sum();
        acc.push(log_prior - 0.5 * energy);

        // next reflected Gray-code state: lowest digit that can move
        let mut i = 0;
        while i < n {
            let can = if up[i] { digits[i] + 1 < k } else { digits[i] > 0 };
            if can {
                break;
            }
            up[i] = !up[i];
            i += 1;
        }
        if i == n {
            break;
        }
        let from = digits[i];
        let to = if up[i] { from + 1 } else { from - 1 };
        digits[i] = to;
        let delta = values[to] - values[from];
        for (p, c) in pre.iter_mut().zip(&columns[i * n1..(i + 1) * n1]) {
            *p += c * delta;
        }
        log_prior += log_w[to] - log_w[from];
    }
    let v = acc.value();
    if !v.is_finite() {
        return Err(Error::Numeric(format!("log partition function evaluated to {v}")));
    }
    Ok(v)
}

/// Monte Carlo estimate of `E F` over `replications` independent disorder
/// draws; replication `r` uses the random streams `(seed, r)`.
pub fn estimate_free_energy(
    model: &ModelSpec,
    n: usize,
    replications: usize,
    seed: u64,
) -> Result<FreeEnergyEstimate> {
    if replications < 2 {
        return Err(Error::Precondition("need at least two replications".into()));
    }
    deterministic_branches(model)?;
    if model.beta != 0.0 {
        state_count(model, n)?;
    }
    let values = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let sample = sample_replication(model, n, seed, r)?;
            Ok(exact_log_partition(model, n, &sample)? / n as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    FreeEnergyEstimate::from_values(n, seed, values)
}
