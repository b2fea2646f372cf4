//! Fixed-order Gauss–Legendre quadrature on piecewise cells.
//!
//! An eight-point rule integrates polynomials of degree ≤ 15 exactly, which
//! covers every product of piecewise-linear coefficients used in this crate.

/// Positive abscissae of the 8-point rule on [-1, 1]; the rule is symmetric.
const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];

const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

pub const ORDER: usize = 8;

/// Nodes and weights of the 8-point rule mapped onto `[a, b]`.
pub fn rule_on(a: f64, b: f64) -> [(f64, f64); ORDER] {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut out = [(0.0, 0.0); ORDER];
    for (i, (&x, &w)) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()).enumerate() {
        out[2 * i] = (mid - half * x, half * w);
        out[2 * i + 1] = (mid + half * x, half * w);
    }
    out
}

/// Integrate `f` over one cell with the 8-point rule.
pub fn integrate_cell<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    if b <= a {
        return 0.0;
    }
    rule_on(a, b).iter().map(|&(t, w)| w * f(t)).sum()
}

/// Integrate `f` over `[s, u]`, splitting at every knot strictly inside the
/// interval. `knots` must be sorted and include 0 and 1.
pub fn integrate_piecewise<F: FnMut(f64) -> f64>(knots: &[f64], s: f64, u: f64, mut f: F) -> f64 {
    if u <= s {
        return 0.0;
    }
    let mut total = 0.0;
    let mut left = s;
    let first = knots.partition_point(|&k| k <= s);
    for &k in &knots[first..] {
        if k >= u {
            break;
        }
        total += integrate_cell(left, k, &mut f);
        left = k;
    }
    total + integrate_cell(left, u, &mut f)
}

/// Every (node, weight) pair covering `[0, 1]` cell by cell.
pub fn nodes_on_knots(knots: &[f64]) -> Vec<(f64, f64)> {
    knots
        .windows(2)
        .filter(|w| w[1] > w[0])
        .flat_map(|w| rule_on(w[0], w[1]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Legendre P_8 and its derivative by the three-term recurrence.
    fn legendre8(x: f64) -> (f64, f64) {
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=8 {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = 8.0 * (x * p1 - p0) / (x * x - 1.0);
        (p1, dp)
    }

    #[test]
    fn nodes_are_roots_of_p8_and_weights_match_formula() {
        for (&x, &w) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
            // Newton-polish from the tabulated node; it must not move.
            let mut r = x;
            for _ in 0..20 {
                let (p, dp) = legendre8(r);
                r -= p / dp;
            }
            assert!((r - x).abs() < 1e-15, "node {x} vs root {r}");
            let (_, dp) = legendre8(r);
            let weight = 2.0 / ((1.0 - r * r) * dp * dp);
            assert!((weight - w).abs() < 1e-15, "weight {w} vs {weight}");
        }
    }

    #[test]
    fn exact_for_degree_fifteen() {
        let v = integrate_cell(0.0, 1.0, |t| t.powi(15));
        assert!((v - 1.0 / 16.0).abs() < 1e-15);
        let v = integrate_cell(-1.0, 1.0, |t| t.powi(14));
        assert!((v - 2.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn piecewise_splits_at_interior_knots() {
        let knots = [0.0, 0.5, 1.0];
        // |t - 1/2| is linear on each cell, so the split result is exact.
        let v = integrate_piecewise(&knots, 0.0, 1.0, |t| (t - 0.5).abs());
        assert!((v - 0.25).abs() < 1e-15);
        let v = integrate_piecewise(&knots, 0.25, 0.75, |t| (t - 0.5).abs());
        assert!((v - 0.0625).abs() < 1e-15);
        assert_eq!(integrate_piecewise(&knots, 0.3, 0.3, |_| 1.0), 0.0);
    }
}
