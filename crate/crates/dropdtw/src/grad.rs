//! Analytic gradients of the smoothed Drop-DTW value with respect to every
//! match cost and drop cost, computed by reverse accumulation through the
//! DP recursion.
//!
//! Each smoothed min `f(x) = x . softmax(-x / gamma)` contributes the
//! Jacobian `df/dx_k = p_k * (1 + (f - x_k) / gamma)` with
//! `p = softmax(-x / gamma)`; the log-sum-exp soft min contributes `p_k`
//! alone. Adjoints flow from the terminal cell in reverse raster order, so
//! cells unreachable from it keep zero gradient.

use crate::align::AlignError;
use crate::types::{CostMatrix, Matrix, MinOperator};

/// Smoothed alignment value together with its gradients.
#[derive(Debug, Clone)]
pub struct GradientResult {
    pub value: f64,
    pub grad_c: Matrix,
    pub grad_drop_z: Vec<f64>,
    pub grad_drop_x: Vec<f64>,
}

/// Per-candidate derivative weights of the smoothed min. Non-finite
/// candidates were excluded from the forward reduction and get weight zero.
fn min_jacobian(op: MinOperator, cands: &[f64]) -> Vec<f64> {
    let (gamma, smooth) = match op {
        MinOperator::SmoothMin(g) => (g, true),
        MinOperator::SoftMin(g) => (g, false),
        MinOperator::Hard => unreachable!("gradients run with a smooth operator"),
    };
    let m = cands.iter().copied().filter(|c| c.is_finite()).fold(f64::INFINITY, f64::min);
    let mut weights = vec![0.0; cands.len()];
    if !m.is_finite() {
        return weights;
    }
    let mut den = 0.0;
    for &x in cands {
        if x.is_finite() {
            den += (-(x - m) / gamma).exp();
        }
    }
    let value = if smooth {
        let num: f64 = cands
            .iter()
            .filter(|c| c.is_finite())
            .map(|&x| x * (-(x - m) / gamma).exp())
            .sum();
        num / den
    } else {
        0.0
    };
    for (w, &x) in weights.iter_mut().zip(cands) {
        if x.is_finite() {
            let p = (-(x - m) / gamma).exp() / den;
            *w = if smooth { p * (1.0 + (value - x) / gamma) } else { p };
        }
    }
    weights
}

/// Forward-smoothed Drop-DTW value and its gradients, under `SmoothMin`
/// with the given gamma. `two_sided` selects the recursion.
pub fn drop_dtw_smooth_grad(
    costs: &CostMatrix,
    gamma: f64,
    two_sided: bool,
) -> Result<GradientResult, AlignError> {
    drop_dtw_grad_with(costs, MinOperator::SmoothMin(gamma), two_sided)
}

/// Gradient machinery shared by the `SmoothMin` and `SoftMin` operators.
pub fn drop_dtw_grad_with(
    costs: &CostMatrix,
    min_op: MinOperator,
    two_sided: bool,
) -> Result<GradientResult, AlignError> {
    match min_op {
        MinOperator::Hard => return Err(AlignError::GradientRequiresSmoothOperator),
        MinOperator::SmoothMin(g) | MinOperator::SoftMin(g) => {
            if !(g > 0.0) || !g.is_finite() {
                return Err(AlignError::NonPositiveGamma(g));
            }
        }
    }
    if two_sided {
        grad_two_sided(costs, min_op)
    } else {
        grad_one_sided(costs, min_op)
    }
}

fn grad_one_sided(costs: &CostMatrix, op: MinOperator) -> Result<GradientResult, AlignError> {
    let tables = crate::align::drop_dtw_one_sided_tables(costs, op)?;
    let (d, dm, dd) = match &tables {
        crate::types::DpTables::OneSided { d, d_match, d_drop, .. } => (d, d_match, d_drop),
        _ => unreachable!(),
    };
    let (k, n) = (costs.k(), costs.n());
    let value = d.get(k, n);

    let mut ad = Matrix::zeros(k + 1, n + 1);
    let mut adm = Matrix::zeros(k + 1, n + 1);
    let mut add = Matrix::zeros(k + 1, n + 1);
    let mut grad_c = Matrix::zeros(k, n);
    let mut grad_dx = vec![0.0; n];
    ad.set(k, n, 1.0);

    for i in (1..=k).rev() {
        for j in (1..=n).rev() {
            // D = min{D+, D-}
            let a = ad.get(i, j);
            if a != 0.0 {
                let w = min_jacobian(op, &[dm.get(i, j), dd.get(i, j)]);
                adm.set(i, j, adm.get(i, j) + a * w[0]);
                add.set(i, j, add.get(i, j) + a * w[1]);
            }
            // D+ = C + min{D diag, D left, D+ up}
            let a = adm.get(i, j);
            if a != 0.0 {
                grad_c.set(i - 1, j - 1, grad_c.get(i - 1, j - 1) + a);
                let cands = [d.get(i - 1, j - 1), d.get(i, j - 1), dm.get(i - 1, j)];
                let w = min_jacobian(op, &cands);
                ad.set(i - 1, j - 1, ad.get(i - 1, j - 1) + a * w[0]);
                ad.set(i, j - 1, ad.get(i, j - 1) + a * w[1]);
                adm.set(i - 1, j, adm.get(i - 1, j) + a * w[2]);
            }
            // D- = d^x_j + D left
            let a = add.get(i, j);
            if a != 0.0 {
                grad_dx[j - 1] += a;
                ad.set(i, j - 1, ad.get(i, j - 1) + a);
            }
        }
    }
    // Row 0 of D holds prefix sums of d^x: cell (0, j) depends on d^x_1..j.
    let mut run = 0.0;
    for j in (1..=n).rev() {
        run += ad.get(0, j);
        grad_dx[j - 1] += run;
    }
    Ok(GradientResult { value, grad_c, grad_drop_z: vec![0.0; k], grad_drop_x: grad_dx })
}

fn grad_two_sided(costs: &CostMatrix, op: MinOperator) -> Result<GradientResult, AlignError> {
    let tables = crate::align::drop_dtw_two_sided_tables(costs, op)?;
    let value = tables.final_cost();
    let (zx, zd, dx_t, dd_t) = match &tables {
        crate::types::DpTables::TwoSided { d_zx, d_zd, d_dx, d_dd, .. } => (d_zx, d_zd, d_dx, d_dd),
        _ => unreachable!(),
    };
    let (k, n) = (costs.k(), costs.n());

    let mut azx = Matrix::zeros(k + 1, n + 1);
    let mut azd = Matrix::zeros(k + 1, n + 1);
    let mut adx = Matrix::zeros(k + 1, n + 1);
    let mut add = Matrix::zeros(k + 1, n + 1);
    let mut grad_c = Matrix::zeros(k, n);
    let mut grad_dz = vec![0.0; k];
    let mut grad_dx = vec![0.0; n];

    // Final value = min over the four tables at (K, N).
    let finals = [zx.get(k, n), zd.get(k, n), dx_t.get(k, n), dd_t.get(k, n)];
    let w = min_jacobian(op, &finals);
    azx.set(k, n, w[0]);
    azd.set(k, n, w[1]);
    adx.set(k, n, w[2]);
    add.set(k, n, w[3]);

    for i in (1..=k).rev() {
        let dz_i = costs.drop_z()[i - 1];
        for j in (1..=n).rev() {
            let dx_j = costs.drop_x()[j - 1];
            // D^zx = C + min over diag(4), left-with-z(2), top-with-x(2).
            let a = azx.get(i, j);
            if a != 0.0 {
                grad_c.set(i - 1, j - 1, grad_c.get(i - 1, j - 1) + a);
                let cands = [
                    zx.get(i - 1, j - 1),
                    zd.get(i - 1, j - 1),
                    dx_t.get(i - 1, j - 1),
                    dd_t.get(i - 1, j - 1),
                    zx.get(i, j - 1),
                    zd.get(i, j - 1),
                    zx.get(i - 1, j),
                    dx_t.get(i - 1, j),
                ];
                let w = min_jacobian(op, &cands);
                azx.set(i - 1, j - 1, azx.get(i - 1, j - 1) + a * w[0]);
                azd.set(i - 1, j - 1, azd.get(i - 1, j - 1) + a * w[1]);
                adx.set(i - 1, j - 1, adx.get(i - 1, j - 1) + a * w[2]);
                add.set(i - 1, j - 1, add.get(i - 1, j - 1) + a * w[3]);
                azx.set(i, j - 1, azx.get(i, j - 1) + a * w[4]);
                azd.set(i, j - 1, azd.get(i, j - 1) + a * w[5]);
                azx.set(i - 1, j, azx.get(i - 1, j) + a * w[6]);
                adx.set(i - 1, j, adx.get(i - 1, j) + a * w[7]);
            }
            // D^z- = d^x_j + min over left-with-z.
            let a = azd.get(i, j);
            if a != 0.0 {
                grad_dx[j - 1] += a;
                let w = min_jacobian(op, &[zx.get(i, j - 1), zd.get(i, j - 1)]);
                azx.set(i, j - 1, azx.get(i, j - 1) + a * w[0]);
                azd.set(i, j - 1, azd.get(i, j - 1) + a * w[1]);
            }
            // D^-x = d^z_i + min over top-with-x.
            let a = adx.get(i, j);
            if a != 0.0 {
                grad_dz[i - 1] += a;
                let w = min_jacobian(op, &[zx.get(i - 1, j), dx_t.get(i - 1, j)]);
                azx.set(i - 1, j, azx.get(i - 1, j) + a * w[0]);
                adx.set(i - 1, j, adx.get(i - 1, j) + a * w[1]);
            }
            // D^-- = min over {up cells + d^z_i} and {left cells + d^x_j}.
            let a = add.get(i, j);
            if a != 0.0 {
                let cands = [
                    zd.get(i - 1, j) + dz_i,
                    dd_t.get(i - 1, j) + dz_i,
                    dx_t.get(i, j - 1) + dx_j,
                    dd_t.get(i, j - 1) + dx_j,
                ];
                let w = min_jacobian(op, &cands);
                grad_dz[i - 1] += a * (w[0] + w[1]);
                grad_dx[j - 1] += a * (w[2] + w[3]);
                azd.set(i - 1, j, azd.get(i - 1, j) + a * w[0]);
                add.set(i - 1, j, add.get(i - 1, j) + a * w[1]);
                adx.set(i, j - 1, adx.get(i, j - 1) + a * w[2]);
                add.set(i, j - 1, add.get(i, j - 1) + a * w[3]);
            }
        }
    }
    // Boundary cells hold prefix sums of the drop costs.
    let mut run = 0.0;
    for j in (1..=n).rev() {
        run += azd.get(0, j) + add.get(0, j);
        grad_dx[j - 1] += run;
    }
    run = 0.0;
    for i in (1..=k).rev() {
        run += adx.get(i, 0) + add.get(i, 0);
        grad_dz[i - 1] += run;
    }
    Ok(GradientResult { value, grad_c, grad_drop_z: grad_dz, grad_drop_x: grad_dx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::DROP_FORBIDDEN;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_costs(rng: &mut ChaCha8Rng, k: usize, n: usize, one_sided: bool) -> CostMatrix {
        let mut values = Matrix::zeros(k, n);
        for i in 0..k {
            for j in 0..n {
                values.set(i, j, rng.gen::<f64>());
            }
        }
        let dz = if one_sided {
            vec![DROP_FORBIDDEN; k]
        } else {
            (0..k).map(|_| rng.gen::<f64>()).collect()
        };
        let dx = (0..n).map(|_| rng.gen::<f64>()).collect();
        CostMatrix::new(values, dz, dx).unwrap()
    }

    fn forward_value(costs: &CostMatrix, op: MinOperator, two_sided: bool) -> f64 {
        if two_sided {
            crate::align::drop_dtw_two_sided_tables(costs, op).unwrap().final_cost()
        } else {
            crate::align::drop_dtw_one_sided_tables(costs, op).unwrap().final_cost()
        }
    }

    fn perturbed(costs: &CostMatrix, cell: (usize, usize), eps: f64) -> CostMatrix {
        let mut values = costs.values().clone();
        values.set(cell.0, cell.1, values.get(cell.0, cell.1) + eps);
        CostMatrix::new(values, costs.drop_z().to_vec(), costs.drop_x().to_vec()).unwrap()
    }

    fn perturbed_drop(costs: &CostMatrix, side_z: bool, idx: usize, eps: f64) -> CostMatrix {
        let mut dz = costs.drop_z().to_vec();
        let mut dx = costs.drop_x().to_vec();
        if side_z {
            dz[idx] += eps;
        } else {
            dx[idx] += eps;
        }
        CostMatrix::new(costs.values().clone(), dz, dx).unwrap()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        let scale = a.abs().max(b.abs()).max(1e-6);
        (a - b).abs() / scale
    }

    fn check_against_finite_differences(costs: &CostMatrix, op: MinOperator, two_sided: bool) {
        let g = drop_dtw_grad_with(costs, op, two_sided).unwrap();
        let eps = 1e-4;
        for i in 0..costs.k() {
            for j in 0..costs.n() {
                let plus = forward_value(&perturbed(costs, (i, j), eps), op, two_sided);
                let minus = forward_value(&perturbed(costs, (i, j), -eps), op, two_sided);
                let fd = (plus - minus) / (2.0 * eps);
                assert!(
                    rel_err(g.grad_c.get(i, j), fd) < 1e-3,
                    "grad_c[{i}][{j}] analytic {} vs fd {fd}",
                    g.grad_c.get(i, j)
                );
            }
        }
        for j in 0..costs.n() {
            let plus = forward_value(&perturbed_drop(costs, false, j, eps), op, two_sided);
            let minus = forward_value(&perturbed_drop(costs, false, j, -eps), op, two_sided);
            let fd = (plus - minus) / (2.0 * eps);
            assert!(rel_err(g.grad_drop_x[j], fd) < 1e-3, "grad_dx[{j}]");
        }
        if two_sided {
            for i in 0..costs.k() {
                let plus = forward_value(&perturbed_drop(costs, true, i, eps), op, two_sided);
                let minus = forward_value(&perturbed_drop(costs, true, i, -eps), op, two_sided);
                let fd = (plus - minus) / (2.0 * eps);
                assert!(rel_err(g.grad_drop_z[i], fd) < 1e-3, "grad_dz[{i}]");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_one_sided() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for gamma in [0.1, 1.0, 10.0] {
            for _ in 0..5 {
                let costs = random_costs(&mut rng, 4, 5, true);
                check_against_finite_differences(&costs, MinOperator::SmoothMin(gamma), false);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_two_sided() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for gamma in [0.1, 1.0, 10.0] {
            for _ in 0..5 {
                let costs = random_costs(&mut rng, 4, 5, false);
                check_against_finite_differences(&costs, MinOperator::SmoothMin(gamma), true);
            }
        }
    }

    #[test]
    fn soft_min_shares_the_machinery() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let costs = random_costs(&mut rng, 3, 4, false);
        check_against_finite_differences(&costs, MinOperator::SoftMin(0.5), true);
    }

    #[test]
    fn single_cell_gradient_approaches_one() {
        // K = N = 1 with an expensive drop branch: value -> C and dC -> 1.
        let values = Matrix::from_rows(&[vec![0.4]]).unwrap();
        let costs = CostMatrix::new(values, vec![10.0], vec![10.0]).unwrap();
        let g = drop_dtw_smooth_grad(&costs, 0.01, true).unwrap();
        assert!((g.value - 0.4).abs() < 1e-6);
        assert!((g.grad_c.get(0, 0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn smooth_min_scale_homogeneity() {
        // smoothMin(lambda x; lambda gamma) = lambda smoothMin(x; gamma),
        // so scaling the instance and gamma scales the value exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let costs = random_costs(&mut rng, 3, 3, false);
        let lambda = 2.0;
        let mut scaled_values = costs.values().clone();
        for i in 0..3 {
            for j in 0..3 {
                scaled_values.set(i, j, lambda * scaled_values.get(i, j));
            }
        }
        let scaled = CostMatrix::new(
            scaled_values,
            costs.drop_z().iter().map(|d| d * lambda).collect(),
            costs.drop_x().iter().map(|d| d * lambda).collect(),
        )
        .unwrap();
        let v = forward_value(&costs, MinOperator::SmoothMin(0.3), true);
        let vs = forward_value(&scaled, MinOperator::SmoothMin(0.3 * lambda), true);
        assert!((vs - lambda * v).abs() < 1e-9);
    }

    #[test]
    fn hard_operator_is_rejected() {
        let costs = CostMatrix::new(Matrix::filled(1, 1, 1.0), vec![1.0], vec![1.0]).unwrap();
        assert!(matches!(
            drop_dtw_grad_with(&costs, MinOperator::Hard, true),
            Err(AlignError::GradientRequiresSmoothOperator)
        ));
        assert!(matches!(
            drop_dtw_smooth_grad(&costs, 0.0, true),
            Err(AlignError::NonPositiveGamma(_))
        ));
    }
}
