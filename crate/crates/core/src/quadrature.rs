//! Gauss–Hermite rules normalized for the standard normal density, and
//! tensor-product expectations over up to three independent Gaussians.

use crate::error::{Error, Result};

pub const MIN_ORDER: usize = 2;
pub const MAX_ORDER: usize = 512;

/// `m`-point rule with `E f(G) ~ sum_i w_i f(x_i)` for `G ~ N(0, 1)`.
///
/// Nodes are sorted ascending and symmetric about zero. For very large orders
/// the outermost weights fall below the smallest positive `f64` and are stored
/// as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussHermiteRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermiteRule {
    pub fn new(order: usize) -> Result<Self> {
        if !(MIN_ORDER..=MAX_ORDER).contains(&order) {
            return Err(Error::Precondition(format!(
                "Gauss-Hermite order {order} outside [{MIN_ORDER}, {MAX_ORDER}]"
            )));
        }
        let (nodes, weights) = physicists_rule(order);
        let scale = std::f64::consts::SQRT_2;
        let norm = std::f64::consts::PI.sqrt();
        let mut pairs: Vec<(f64, f64)> = nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| (x * scale, w / norm))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(GaussHermiteRule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `E f(G)` without the finiteness check.
    #[inline]
    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Roots and weights for the weight `exp(-x^2)`. Roots are bracketed by
/// Sturm-sequence bisection on the Jacobi matrix, then polished by Newton on
/// the orthonormal Hermite recurrence.
fn physicists_rule(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let mf = m as f64;
    let bound = (2.0 * mf).sqrt();
    for i in 0..m.div_ceil(2) {
        // i-th largest root: exactly m - 1 - i eigenvalues lie below it
        let target = m - 1 - i;
        let (mut lo, mut hi) = (0.0f64, bound);
        while hi - lo > 4.0 * f64::EPSILON * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if count_below(m, mid) > target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut z = 0.5 * (lo + hi);
        for _ in 0..3 {
            let (p1, p2) = hermite_orthonormal(m, z);
            if p1 == 0.0 {
                break;
            }
            let dz = p1 / ((2.0 * mf).sqrt() * p2);
            if dz.abs() > hi - lo + 1e-12 * z.abs().max(1.0) {
                break;
            }
            z -= dz;
        }
        let pp = (2.0 * mf).sqrt() * hermite_orthonormal(m, z).1;
        x[i] = z;
        x[m - 1 - i] = -z;
        let wi = 2.0 / (pp * pp);
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    (x, w)
}

/// Number of eigenvalues below `t` of the Jacobi matrix of the physicists'
/// Hermite family (zero diagonal, off-diagonal `sqrt(k / 2)`).
fn count_below(m: usize, t: f64) -> usize {
    let mut count = 0;
    let mut q = -t;
    if q < 0.0 {
        count += 1;
    }
    for k in 1..m {
        let b2 = k as f64 / 2.0;
        let denom = if q == 0.0 { f64::EPSILON } else { q };
        q = -t - b2 / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Returns `(p_m(z), p_{m-1}(z))` of the orthonormal physicists' Hermite family.
fn hermite_orthonormal(m: usize, z: f64) -> (f64, f64) {
    // pi^(-1/4)
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut p1 = PIM4;
    let mut p2 = 0.0;
    for j in 1..=m {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, p2)
}

/// `E f(G_1, .., G_d)` for `d <= 3` independent standard Gaussians by the
/// tensor product of `rule`. Errors on any non-finite integrand value.
pub fn gauss_expect<F>(f: F, rule: &GaussHermiteRule, d: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if !(1..=3).contains(&d) {
        return Err(Error::Precondition(format!("dimension {d} outside 1..=3")));
    }
    let mut node = [0.0f64; 3];
    let mut total = 0.0;
    let m = rule.order();
    let count = m.pow(d as u32);
    for flat in 0..count {
        let mut rest = flat;
        let mut weight = 1.0;
        for slot in node.iter_mut().take(d) {
            let i = rest % m;
            rest /= m;
            *slot = rule.nodes[i];
            weight *= rule.weights[i];
        }
        let value = f(&node[..d]);
        if !value.is_finite() {
            return Err(Error::NonFinite {
                node: node[..d].to_vec(),
                value,
            });
        }
        total += weight * value;
    }
    Ok(total)
}

/// Streaming `log sum exp` with a running max shift.
#[derive(Clone, Copy, Debug)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }
}

impl LogSumExp {
    #[inline]
    pub fn push(&mut self, v: f64) {
        if v <= self.max {
            self.sum += (v - self.max).exp();
        } else {
            if self.max != f64::NEG_INFINITY {
                self.sum *= (self.max - v).exp();
            }
            self.sum += 1.0;
            self.max = v;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// Two-pass `log sum_i exp(v_i)`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moment(rule: &GaussHermiteRule, k: i32) -> f64 {
        rule.expect(|x| x.powi(k))
    }

    #[test]
    fn two_point_rule() {
        let r = GaussHermiteRule::new(2).unwrap();
        assert!((r.nodes()[0] + 1.0).abs() < 1e-15);
        assert!((r.nodes()[1] - 1.0).abs() < 1e-15);
        assert!((r.weights()[0] - 0.5).abs() < 1e-15);
        assert!((r.weights()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn order_bounds() {
        assert!(GaussHermiteRule::new(1).is_err());
        assert!(GaussHermiteRule::new(513).is_err());
        assert!(GaussHermiteRule::new(512).is_ok());
    }

    #[test]
    fn normalization_and_low_moments() {
        for m in [2, 3, 5, 10, 20, 40, 60, 80, 128, 200, 256, 512] {
            let r = GaussHermiteRule::new(m).unwrap();
            let total: f64 = r.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-13, "m={m} sum={total}");
            assert!(moment(&r, 1).abs() < 1e-13, "m={m}");
            assert!((moment(&r, 2) - 1.0).abs() < 1e-12, "m={m}");
            if m >= 10 {
                assert!((moment(&r, 4) - 3.0).abs() < 1e-10, "m={m}");
            }
            assert!(r.weights().iter().all(|&w| w >= 0.0));
            if m <= 200 {
                assert!(r.weights().iter().all(|&w| w > 0.0));
            }
        }
    }

    #[test]
    fn polynomial_exactness() {
        let r = GaussHermiteRule::new(20).unwrap();
        assert!((moment(&r, 6) - 15.0).abs() < 1e-9);
        // E x^38 = 37!! is exact for a 20-point rule (degree <= 39)
        let double_fact: f64 = (1..=37).step_by(2).map(|k| k as f64).product();
        assert!((moment(&r, 38) / double_fact - 1.0).abs() < 1e-11);
    }

    #[test]
    fn tanh_squared_converges_across_orders() {
        let f = |x: f64| x.tanh().powi(2);
        let a = GaussHermiteRule::new(128).unwrap().expect(f);
        let b = GaussHermiteRule::new(256).unwrap().expect(f);
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn tensor_expectations() {
        let r = GaussHermiteRule::new(12).unwrap();
        assert!((gauss_expect(|_| 2.5, &r, 3).unwrap() - 2.5).abs() < 1e-13);
        assert!(gauss_expect(|v| v[0] * v[1], &r, 2).unwrap().abs() < 1e-12);
        let sq = gauss_expect(|v| (v[0] + v[1] + v[2]).powi(2), &r, 3).unwrap();
        assert!((sq - 3.0).abs() < 1e-10);
        assert!(gauss_expect(|_| 1.0, &r, 4).is_err());
        assert!(matches!(
            gauss_expect(|v| 1.0 / v[0].abs().min(0.0), &r, 1),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn even_integrands_are_sign_flip_invariant() {
        let r = GaussHermiteRule::new(33).unwrap();
        let f = |v: &[f64]| (v[0] * v[1]).cos() + v[0].powi(2) * (0.3 * v[1]).tanh().powi(2);
        let a = gauss_expect(f, &r, 2).unwrap();
        let b = gauss_expect(|v| f(&[-v[0], v[1]]), &r, 2).unwrap();
        let c = gauss_expect(|v| f(&[v[0], -v[1]]), &r, 2).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(a.to_bits(), c.to_bits());
    }

    #[test]
    fn refinement_differences_shrink() {
        // Successive |I(m) - I(2m)| for smooth bounded registry integrands.
        let integrands: [fn(f64) -> f64; 3] = [
            |x| (0.8 * x).tanh().powi(2),
            |x| (1.5 * x).sin().powi(2),
            |x| libm::erf(x).powi(2),
        ];
        for f in integrands {
            let diffs: Vec<f64> = [32usize, 48, 64]
                .iter()
                .map(|&m| {
                    let a = GaussHermiteRule::new(m).unwrap().expect(f);
                    let b = GaussHermiteRule::new(2 * m).unwrap().expect(f);
                    (a - b).abs()
                })
                .collect();
            for pair in diffs.windows(2) {
                assert!(pair[1] <= pair[0] || pair[1] < 1e-15, "{diffs:?}");
            }
        }
    }

    #[test]
    fn streaming_log_sum_exp_matches_two_pass() {
        let values = [-1000.0, 3.0, -2.5, 700.0, 699.0, -50.0];
        let mut acc = LogSumExp::default();
        for v in values {
            acc.push(v);
        }
        assert!((acc.value() - log_sum_exp(&values)).abs() < 1e-12);
        assert_eq!(LogSumExp::default().value(), f64::NEG_INFINITY);
    }
}
