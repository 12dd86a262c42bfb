//! Transverse operator `∂²/∂x² + k²n²` on the grid.
//!
//! Order 2 is the three-point Laplacian. Order 4 uses `(δ² − δ⁴/12)/dx²`,
//! written as `δ² − δ²Θδ²/12` with `Θ` zero on the two outermost nodes so the
//! stencil never leaves the grid and the edge rows stay three-point. Both are
//! real symmetric, so Crank-Nicolson conserves the trapezoid power exactly.
//!
//! A step in `n²` inside a cell spoils the quadrature of `∫n²|E|²` at second
//! order even when `n²` is cell-averaged. With the interface at `x_i + α dx`
//! (nearest node `i`) and jump `Δ = n²_right − n²_left`, moving
//! `Δ(1/24 − α²/4)` from node `i − 1` to node `i + 1` restores fourth-order
//! eigenvalues for any `α`.

use crate::devices::DeviceLayout;
use crate::field::TransverseGrid;

/// Real symmetric band `(diag, first, second)` of the Laplacian.
pub(crate) fn laplacian(grid: &TransverseGrid, order: u8) -> [Vec<f64>; 3] {
    let n = grid.len();
    let inv = 1.0 / (grid.dx() * grid.dx());
    let mut b0 = vec![-2.0 * inv; n];
    let mut b1 = vec![inv; n.saturating_sub(1)];
    let mut b2 = vec![0.0; n.saturating_sub(2)];
    if order == 4 {
        // Accumulate -(1/12) δ² Θ δ² node by node.
        let w = [1.0, -2.0, 1.0];
        for k in 2..n.saturating_sub(2) {
            for (p, wp) in w.iter().enumerate() {
                for (q, wq) in w.iter().enumerate() {
                    let (r, c) = (k + p - 1, k + q - 1);
                    if c < r {
                        continue;
                    }
                    let v = -wp * wq * inv / 12.0;
                    match c - r {
                        0 => b0[r] += v,
                        1 => b1[r] += v,
                        _ => b2[r] += v,
                    }
                }
            }
        }
    }
    [b0, b1, b2]
}

/// Jumps `(x, n²_right − n²_left)` of the cross-section at `z`.
pub(crate) fn index_jumps(layout: &DeviceLayout, z: f64, include_delta_n: bool) -> Vec<(f64, f64)> {
    let nb2 = layout.background_index * layout.background_index;
    let mut jumps: Vec<(f64, f64)> = Vec::new();
    let mut push = |x: f64, d: f64| match jumps.last_mut() {
        Some(last) if last.0 == x => last.1 += d,
        _ => jumps.push((x, d)),
    };
    for s in layout.union_at(z, include_delta_n) {
        let v = s.index * s.index - nb2;
        push(s.left, v);
        push(s.right, -v);
    }
    jumps.retain(|j| j.1 != 0.0);
    jumps
}

/// Adds the interface moment corrections to cell-averaged `n²`.
pub(crate) fn correct_interfaces(grid: &TransverseGrid, jumps: &[(f64, f64)], n2: &mut [f64]) {
    let dx = grid.dx();
    let last = grid.len() - 1;
    for &(x, delta) in jumps {
        let t = (x - grid.x_min()) / dx;
        let i = t.round();
        if i < 1.0 || i >= last as f64 {
            continue;
        }
        let alpha = t - i;
        let s = delta * (1.0 / 24.0 - 0.25 * alpha * alpha);
        let i = i as usize;
        n2[i + 1] += s;
        n2[i - 1] -= s;
    }
}
