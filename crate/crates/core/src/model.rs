//! Model description and exact forward sampling of the layered signal chain.
//!
//! A model is a discrete prior on `[-1, 1]`, a stack of `L` layers each with a
//! dimension ratio `alpha_l` and a bounded activation, and a signal-to-noise
//! level `beta`. Sampling draws `X` from the prior, standard Gaussian mixing
//! matrices `Phi^(l)` of shape `n_l x n_{l-1}`, optional side information, and
//! observes `Y = sqrt(beta) X^(L) + Z`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_TOL: f64 = 1e-12;

/// One support point of a discrete distribution on `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub value: f64,
    pub weight: f64,
}

/// Law of a single signal coordinate `X_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub atoms: Vec<Atom>,
}

impl PriorSpec {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let prior = PriorSpec { atoms };
        prior.validate()?;
        Ok(prior)
    }

    /// Uniform on `{-1, +1}`.
    pub fn rademacher() -> Self {
        PriorSpec {
            atoms: vec![
                Atom { value: -1.0, weight: 0.5 },
                Atom { value: 1.0, weight: 0.5 },
            ],
        }
    }

    /// Point mass at `value`.
    pub fn dirac(value: f64) -> Result<Self> {
        PriorSpec::new(vec![Atom { value, weight: 1.0 }])
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::invalid("atoms", "prior needs at least one atom"));
        }
        for (i, atom) in self.atoms.iter().enumerate() {
            if !(atom.value.is_finite() && (-1.0..=1.0).contains(&atom.value)) {
                return Err(Error::invalid(
                    format!("atoms[{i}].value"),
                    format!("{} is outside [-1, 1]", atom.value),
                ));
            }
            if !(atom.weight.is_finite() && atom.weight > 0.0) {
                return Err(Error::invalid(
                    format!("atoms[{i}].weight"),
                    format!("{} is not strictly positive", atom.weight),
                ));
            }
        }
        let total: f64 = self.atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::invalid("atoms", format!("weights sum to {total}, not 1")));
        }
        if self.atoms.iter().all(|a| a.value == 0.0) {
            return Err(Error::invalid("atoms", "prior is the point mass at zero"));
        }
        Ok(())
    }

    pub fn second_moment(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.value * a.value).sum()
    }

    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }
}

/// The closed registry of bounded smooth activation families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationKind {
    /// `tanh(kappa z)`
    ScaledTanh,
    /// `sin(kappa z)`
    ScaledSine,
    /// `erf(kappa z)`
    ScaledErf,
}

/// One atom of the side-information law. `params` is `[gain]` or
/// `[gain, shift]`; the activation becomes `gain * f(kappa z + shift)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideInfoAtom {
    pub params: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationSpec {
    pub kind: ActivationKind,
    pub kappa: f64,
    /// Empty means a deterministic activation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub side_info: Vec<SideInfoAtom>,
}

/// An activation with its side-information parameter fixed to one atom.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Branch {
    pub kind: ActivationKind,
    pub kappa: f64,
    pub gain: f64,
    pub shift: f64,
}

impl Branch {
    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        let arg = self.kappa * z + self.shift;
        self.gain
            * match self.kind {
                ActivationKind::ScaledTanh => arg.tanh(),
                ActivationKind::ScaledSine => arg.sin(),
                ActivationKind::ScaledErf => libm::erf(arg),
            }
    }

    /// Closed-form derivative in `z`.
    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        let arg = self.kappa * z + self.shift;
        let inner = match self.kind {
            ActivationKind::ScaledTanh => {
                let c = arg.cosh();
                1.0 / (c * c)
            }
            ActivationKind::ScaledSine => arg.cos(),
            ActivationKind::ScaledErf => std::f64::consts::FRAC_2_SQRT_PI * (-arg * arg).exp(),
        };
        self.gain * self.kappa * inner
    }
}

impl ActivationSpec {
    pub fn tanh(kappa: f64) -> Self {
        ActivationSpec {
            kind: ActivationKind::ScaledTanh,
            kappa,
            side_info: Vec::new(),
        }
    }

    pub fn sine(kappa: f64) -> Self {
        ActivationSpec {
            kind: ActivationKind::ScaledSine,
            kappa,
            side_info: Vec::new(),
        }
    }

    pub fn erf(kappa: f64) -> Self {
        ActivationSpec {
            kind: ActivationKind::ScaledErf,
            kappa,
            side_info: Vec::new(),
        }
    }

    pub fn with_side_info(mut self, atoms: Vec<SideInfoAtom>) -> Self {
        self.side_info = atoms;
        self
    }

    pub fn is_deterministic(&self) -> bool {
        self.side_info.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa != 0.0) {
            return Err(Error::invalid("kappa", "must be finite and nonzero"));
        }
        if self.side_info.is_empty() {
            return Ok(());
        }
        for (i, atom) in self.side_info.iter().enumerate() {
            if atom.params.is_empty() || atom.params.len() > 2 {
                return Err(Error::invalid(
                    format!("side_info[{i}].params"),
                    "expected [gain] or [gain, shift]",
                ));
            }
            if atom.params.iter().any(|p| !p.is_finite()) {
                return Err(Error::invalid(format!("side_info[{i}].params"), "non-finite"));
            }
            if !(atom.weight.is_finite() && atom.weight > 0.0) {
                return Err(Error::invalid(
                    format!("side_info[{i}].weight"),
                    "must be strictly positive",
                ));
            }
        }
        let total: f64 = self.side_info.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::invalid("side_info", format!("weights sum to {total}, not 1")));
        }
        if self.side_info.iter().all(|a| a.params[0] == 0.0) {
            return Err(Error::invalid("side_info", "activation is identically zero"));
        }
        Ok(())
    }

    fn branch_for(&self, params: &[f64]) -> Branch {
        Branch {
            kind: self.kind,
            kappa: self.kappa,
            gain: params.first().copied().unwrap_or(1.0),
            shift: params.get(1).copied().unwrap_or(0.0),
        }
    }

    /// The realized activations together with their probabilities.
    pub fn branches(&self) -> Vec<(Branch, f64)> {
        if self.side_info.is_empty() {
            vec![(self.branch_for(&[]), 1.0)]
        } else {
            self.side_info
                .iter()
                .map(|a| (self.branch_for(&a.params), a.weight))
                .collect()
        }
    }

    /// `phi(z, a)` for an explicit parameter vector `a`.
    pub fn eval(&self, z: f64, params: &[f64]) -> f64 {
        self.branch_for(params).eval(z)
    }

    /// Upper bound on `|phi|` over all arguments and side-information atoms.
    pub fn sup_abs(&self) -> f64 {
        self.branches()
            .iter()
            .map(|(b, _)| b.gain.abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub alpha: f64,
    pub activation: ActivationSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub prior: PriorSpec,
    pub layers: Vec<LayerSpec>,
    pub beta: f64,
}

impl ModelSpec {
    pub fn new(prior: PriorSpec, layers: Vec<LayerSpec>, beta: f64) -> Result<Self> {
        let model = ModelSpec { prior, layers, beta };
        model.validate()?;
        Ok(model)
    }

    /// Number of layers `L`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `alpha_l` for `l = 0..=L`, with `alpha_0 = 1`.
    pub fn alpha(&self, l: usize) -> f64 {
        if l == 0 {
            1.0
        } else {
            self.layers[l - 1].alpha
        }
    }

    pub fn activation(&self, l: usize) -> &ActivationSpec {
        &self.layers[l - 1].activation
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        ModelSpec {
            beta,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate().map_err(|e| e.within("prior"))?;
        if self.layers.is_empty() {
            return Err(Error::invalid("layers", "at least one layer is required"));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if !(layer.alpha.is_finite() && layer.alpha > 0.0) {
                return Err(Error::invalid(
                    format!("layers[{i}].alpha"),
                    format!("{} is not a positive ratio", layer.alpha),
                ));
            }
            layer
                .activation
                .validate()
                .map_err(|e| e.within(&format!("layers[{i}].activation")))?;
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::invalid("beta", format!("{} is negative", self.beta)));
        }
        Ok(())
    }
}

/// Limiting second moments `rho_0..rho_L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoSequence {
    pub values: Vec<f64>,
}

impl RhoSequence {
    pub fn get(&self, l: usize) -> f64 {
        self.values[l]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::MIN, f64::max)
    }
}

/// Layer sizes `n_0..n_L`, with `n_l = round(alpha_l n)` (halves round up).
pub fn dims(model: &ModelSpec, n: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    let mut sizes = Vec::with_capacity(model.depth() + 1);
    sizes.push(n);
    for (i, layer) in model.layers.iter().enumerate() {
        let scaled = layer.alpha * n as f64;
        if scaled < 0.5 {
            return Err(Error::invalid(
                format!("layers[{i}].alpha"),
                format!("alpha * n = {scaled} rounds to an empty layer"),
            ));
        }
        sizes.push((scaled + 0.5).floor() as usize);
    }
    Ok(sizes)
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.cols..(j + 1) * self.cols]
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.data[j * self.cols + k]
    }

    /// `scale * self * x`
    pub fn mul_vec(&self, x: &[f64], scale: f64) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|j| scale * dot(self.row(j), x))
            .collect()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Independent random streams of one replication.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Stream {
    Prior,
    Noise,
    Mixing(usize),
    SideInfo(usize),
}

const STREAMS_PER_REPLICATION: u64 = 4096;

/// Counter-based generator for `(seed, replication, stream)`. Every stream is
/// independent of how many numbers any other stream consumed, so replications
/// can be computed in any order or in parallel.
pub(crate) fn stream_rng(seed: u64, replication: u64, stream: Stream) -> ChaCha8Rng {
    let component = match stream {
        Stream::Prior => 0,
        Stream::Noise => 1,
        Stream::Mixing(l) => 2 * l as u64,
        Stream::SideInfo(l) => 2 * l as u64 + 1,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication * STREAMS_PER_REPLICATION + component);
    rng
}

/// One full draw of the signal chain and its disorder.
#[derive(Clone, Debug)]
pub struct ForwardSample {
    /// `X = X^(0)`, length `n`.
    pub signal: Vec<f64>,
    /// Prior atom index of every signal coordinate.
    pub signal_atoms: Vec<usize>,
    /// `X^(1)..X^(L)`.
    pub layers: Vec<Vec<f64>>,
    /// `Phi^(1)..Phi^(L)`, `Phi^(l)` of shape `n_l x n_{l-1}`.
    pub mixing: Vec<Matrix>,
    /// Side-information atom index per coordinate, empty for deterministic layers.
    pub side_info: Vec<Vec<usize>>,
    pub noise: Vec<f64>,
    pub observation: Vec<f64>,
}

impl ForwardSample {
    /// `X^(l)` for `l = 0..=L`.
    pub fn layer(&self, l: usize) -> &[f64] {
        if l == 0 {
            &self.signal
        } else {
            &self.layers[l - 1]
        }
    }
}

fn sample_categorical(rng: &mut ChaCha8Rng, weights: impl Iterator<Item = f64>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Forward sample of the model at size `n` from `seed` (replication 0).
pub fn sample_forward(model: &ModelSpec, n: usize, seed: u64) -> Result<ForwardSample> {
    sample_replication(model, n, seed, 0)
}

/// Forward sample for replication `replication` of a Monte Carlo run.
pub fn sample_replication(
    model: &ModelSpec,
    n: usize,
    seed: u64,
    replication: u64,
) -> Result<ForwardSample> {
    model.validate()?;
    let sizes = dims(model, n)?;

    let mut rng = stream_rng(seed, replication, Stream::Prior);
    let signal_atoms: Vec<usize> = (0..n)
        .map(|_| sample_categorical(&mut rng, model.prior.atoms.iter().map(|a| a.weight)))
        .collect();
    let signal: Vec<f64> = signal_atoms
        .iter()
        .map(|&i| model.prior.atoms[i].value)
        .collect();

    let mut layers = Vec::with_capacity(model.depth());
    let mut mixing = Vec::with_capacity(model.depth());
    let mut side_info = Vec::with_capacity(model.depth());
    for l in 1..=model.depth() {
        let (rows, cols) = (sizes[l], sizes[l - 1]);
        let mut rng = stream_rng(seed, replication, Stream::Mixing(l));
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let phi = Matrix { rows, cols, data };

        let activation = model.activation(l);
        let branches = activation.branches();
        let atoms: Vec<usize> = if activation.is_deterministic() {
            Vec::new()
        } else {
            let mut rng = stream_rng(seed, replication, Stream::SideInfo(l));
            (0..rows)
                .map(|_| sample_categorical(&mut rng, branches.iter().map(|(_, w)| *w)))
                .collect()
        };

        let previous = if l == 1 { &signal } else { &layers[l - 2] };
        let pre = phi.mul_vec(previous, 1.0 / (cols as f64).sqrt());
        let out: Vec<f64> = pre
            .iter()
            .enumerate()
            .map(|(j, &u)| {
                let b = if atoms.is_empty() { 0 } else { atoms[j] };
                branches[b].0.eval(u)
            })
            .collect();
        layers.push(out);
        mixing.push(phi);
        side_info.push(atoms);
    }

    let n_top = sizes[model.depth()];
    let mut rng = stream_rng(seed, replication, Stream::Noise);
    let noise: Vec<f64> = (0..n_top).map(|_| StandardNormal.sample(&mut rng)).collect();
    let gain = model.beta.sqrt();
    let observation = layers[model.depth() - 1]
        .iter()
        .zip(&noise)
        .map(|(x, z)| gain * x + z)
        .collect();

    Ok(ForwardSample {
        signal,
        signal_atoms,
        layers,
        mixing,
        side_info,
        noise,
        observation,
    })
}

/// Sample statistics of `|X^(L)|^2 / n_L` over independent disorder draws.
#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalRho {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub values: Vec<f64>,
}

pub fn empirical_rho(
    model: &ModelSpec,
    n: usize,
    replications: usize,
    seed: u64,
) -> Result<EmpiricalRho> {
    if replications < 2 {
        return Err(Error::Precondition("need at least two replications".into()));
    }
    let values = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let sample = sample_replication(model, n, seed, r)?;
            let top = sample.layer(model.depth());
            Ok(dot(top, top) / top.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, variance) = mean_and_variance(&values);
    Ok(EmpiricalRho {
        n,
        mean,
        variance,
        values,
    })
}

/// Mean and unbiased variance; the variance is 0 for fewer than two values.
pub fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (count - 1.0))
}
