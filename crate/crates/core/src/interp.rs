//! Tabulated functions of one variable.

use crate::error::{Error, Result};

/// Four-point Lagrange (cubic) interpolation on strictly increasing nodes.
/// Outside the node range the end cubic is extrapolated.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicTable {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl CubicTable {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() < 4 || nodes.len() != values.len() {
            return Err(Error::Precondition(format!(
                "cubic table needs >= 4 nodes and matching values ({} nodes, {} values)",
                nodes.len(),
                values.len()
            )));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition("table nodes must increase strictly".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite table value {v}")));
        }
        Ok(CubicTable { nodes, values })
    }

    /// Tabulates `f` on `nodes`.
    pub fn from_fn(nodes: Vec<f64>, f: impl FnMut(f64) -> Result<f64>) -> Result<Self> {
        let values = nodes.iter().copied().map(f).collect::<Result<Vec<_>>>()?;
        CubicTable::new(nodes, values)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lo(&self) -> f64 {
        self.nodes[0]
    }

    pub fn hi(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        let j = self.nodes.partition_point(|&t| t <= x);
        // stencil nodes s..s+4 centred on the containing cell
        let s = j.saturating_sub(2).min(n - 4);
        let xs = &self.nodes[s..s + 4];
        let ys = &self.values[s..s + 4];
        let mut acc = 0.0;
        for i in 0..4 {
            if x == xs[i] {
                return ys[i];
            }
            let mut basis = 1.0;
            for k in 0..4 {
                if k != i {
                    basis *= (x - xs[k]) / (xs[i] - xs[k]);
                }
            }
            acc += basis * ys[i];
        }
        acc
    }
}

/// `n + 1` nodes on `[0, hi]` placed at `hi * (i / n)^2`, denser near zero.
pub fn quadratic_nodes(hi: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| {
            let u = i as f64 / n as f64;
            hi * u * u
        })
        .collect()
}

/// `n + 1` uniform nodes on `[lo, hi]`.
pub fn uniform_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    (0..=n)
        .map(|i| if i == n { hi } else { lo + i as f64 * h })
        .collect()
}
