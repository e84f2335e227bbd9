//! One-dimensional search helpers: golden section, grid-seeded golden
//! section, and zooming grid search for non-concave objectives.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Result of a one-dimensional maximization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extremum {
    pub x: f64,
    pub value: f64,
}

/// Golden-section maximization of a unimodal `f` on `[a, b]`. The endpoints
/// are also compared so a monotone `f` returns the right endpoint exactly.
pub fn golden_max(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> Extremum {
    let (fa, fb) = (f(a), f(b));
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mut best = if f1 >= f2 {
        Extremum { x: x1, value: f1 }
    } else {
        Extremum { x: x2, value: f2 }
    };
    if fa >= best.value {
        best = Extremum { x: a, value: fa };
    }
    if fb > best.value {
        best = Extremum { x: b, value: fb };
    }
    best
}

pub fn golden_min(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> Extremum {
    let e = golden_max(|x| -f(x), a, b, tol);
    Extremum { x: e.x, value: -e.value }
}

/// Evaluates `f` on `cells + 1` uniform points of `[a, b]`, then refines by
/// golden section on the two cells around the best point (lowest index wins
/// ties). Suitable for unimodal `f` and for `f` whose maximum is isolated at
/// grid scale.
pub fn grid_golden_max(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    cells: usize,
    tol: f64,
) -> Extremum {
    if b <= a {
        return Extremum { x: a, value: f(a) };
    }
    let h = (b - a) / cells as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..=cells {
        let v = f(a + i as f64 * h);
        if v > best.1 {
            best = (i, v);
        }
    }
    let lo = a + best.0.saturating_sub(1) as f64 * h;
    let hi = (a + (best.0 + 1) as f64 * h).min(b);
    let refined = golden_max(&mut f, lo, hi, tol);
    if refined.value >= best.1 {
        refined
    } else {
        Extremum { x: a + best.0 as f64 * h, value: best.1 }
    }
}

pub fn grid_golden_min(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    cells: usize,
    tol: f64,
) -> Extremum {
    let e = grid_golden_max(|x| -f(x), a, b, cells, tol);
    Extremum { x: e.x, value: -e.value }
}

/// Outcome of [`zoom_max`].
#[derive(Clone, Debug, PartialEq)]
pub struct ZoomResult {
    pub best: Extremum,
    /// Largest `|f(neighbour) - f(best)|` over the grid neighbours at the
    /// final level.
    pub cell_variation: f64,
    /// Spacing of the final grid.
    pub spacing: f64,
    /// Change of the incumbent value in each refinement round.
    pub round_changes: Vec<f64>,
}

/// Grid search with `resolution` cells on `[a, b]`, then `rounds` of
/// refinement, each with `4 * resolution` cells on the two-cell box around
/// the incumbent (clipped to `[a, b]`). Lowest index wins ties.
pub fn zoom_max(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    resolution: usize,
    rounds: usize,
) -> ZoomResult {
    let mut scan = |lo: f64, hi: f64, cells: usize| {
        let h = (hi - lo) / cells as f64;
        let values: Vec<f64> = (0..=cells).map(|i| f(lo + i as f64 * h)).collect();
        let mut idx = 0;
        for (i, v) in values.iter().enumerate() {
            if *v > values[idx] {
                idx = i;
            }
        }
        let mut variation: f64 = 0.0;
        if idx > 0 {
            variation = variation.max((values[idx] - values[idx - 1]).abs());
        }
        if idx < cells {
            variation = variation.max((values[idx] - values[idx + 1]).abs());
        }
        (lo + idx as f64 * h, values[idx], h, variation)
    };
    if b <= a {
        let v = f(a);
        return ZoomResult {
            best: Extremum { x: a, value: v },
            cell_variation: 0.0,
            spacing: 0.0,
            round_changes: Vec::new(),
        };
    }
    let (mut x, mut value, mut h, mut variation) = scan(a, b, resolution);
    let mut round_changes = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let lo = (x - h).max(a);
        let hi = (x + h).min(b);
        let (nx, nv, nh, nvar) = scan(lo, hi, 4 * resolution);
        // the previous incumbent is on the new grid up to rounding; keep it
        // if the refined scan does not improve on it
        if nv >= value {
            round_changes.push(nv - value);
            x = nx;
            value = nv;
        } else {
            round_changes.push(0.0);
        }
        h = nh;
        variation = nvar;
    }
    ZoomResult {
        best: Extremum { x, value },
        cell_variation: variation,
        spacing: h,
        round_changes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_interior_and_endpoint_maxima() {
        let e = golden_max(|x| -(x - 0.3).powi(2), 0.0, 1.0, 1e-10);
        assert!((e.x - 0.3).abs() < 1e-8);
        let e = golden_max(|x| x, 0.0, 2.0, 1e-10);
        assert_eq!(e.x, 2.0);
        let e = golden_min(|x| x, -1.0, 2.0, 1e-10);
        assert_eq!(e.x, -1.0);
    }

    #[test]
    fn grid_golden_escapes_local_maximum() {
        // global maximum near 0.8, local one near 0.2
        let f = |x: f64| (-(x - 0.2).powi(2) * 200.0).exp() + 1.5 * (-(x - 0.8).powi(2) * 200.0).exp();
        let e = grid_golden_max(f, 0.0, 1.0, 20, 1e-10);
        assert!((e.x - 0.8).abs() < 1e-4, "{e:?}");
    }

    #[test]
    fn zoom_contracts_and_ties_break_low() {
        let r = zoom_max(|x| -(x - 0.123_456).abs(), 0.0, 1.0, 16, 3);
        assert!((r.best.x - 0.123_456).abs() <= r.spacing);
        assert!(r.spacing < 1e-4);
        let flat = zoom_max(|_| 1.0, 0.0, 1.0, 8, 2);
        assert_eq!(flat.best.x, 0.0);
        assert_eq!(flat.cell_variation, 0.0);
    }
}
