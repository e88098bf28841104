//! Successive approximation schemes for the first-order system F' = G F,
//! G = [[0, e^-C], [c e^C / a, 0]], whose first component is the harmonic
//! function of the diffusion operator.
//!
//! Iterates live on a composite Gauss-Legendre grid (8 nodes per cell, theta
//! snapped to a cell boundary). Each sweep applies the exact per-cell
//! polynomial antiderivative of the node interpolant, so the fixed point is
//! a collocation solution with spectral in-cell accuracy; integration runs
//! outward from theta in both directions.

use crate::continuous::quad::gauss_legendre;
use crate::continuous::{ContinuousError, DiffusionModel};

const NODES_PER_CELL: usize = 8;

/// Partial-integration weights on [-1, 1]: W[j][i] = int_{-1}^{t_j} l_i(t) dt
/// for the Lagrange basis l_i over the Gauss nodes.
fn partial_weights() -> &'static Vec<Vec<f64>> {
    use std::sync::OnceLock;
    static W: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    W.get_or_init(|| {
        let (nodes, _) = gauss_legendre(NODES_PER_CELL);
        let p = nodes.len();
        let mut w = vec![vec![0.0; p]; p];
        for i in 0..p {
            // monomial coefficients of l_i (fine for p = 8 over Gauss nodes)
            let mut coeffs = vec![0.0; p];
            coeffs[0] = 1.0;
            let mut deg = 0;
            let mut denom = 1.0;
            for k in 0..p {
                if k == i {
                    continue;
                }
                denom *= nodes[i] - nodes[k];
                // multiply by (t - nodes[k])
                for d in (0..=deg).rev() {
                    coeffs[d + 1] += coeffs[d];
                    coeffs[d] *= -nodes[k];
                }
                deg += 1;
            }
            for c in coeffs.iter_mut() {
                *c /= denom;
            }
            // antiderivative evaluated from -1 to t_j
            for j in 0..p {
                let mut val = 0.0;
                for (d, &c) in coeffs.iter().enumerate() {
                    let dd = (d + 1) as f64;
                    val += c / dd * (nodes[j].powi(d as i32 + 1) - (-1.0f64).powi(d as i32 + 1));
                }
                w[j][i] = val;
            }
        }
        w
    })
}

/// Composite grid with theta as a cell boundary.
#[derive(Clone, Debug)]
pub struct PicardGrid {
    pub cells: Vec<(f64, f64)>,
    /// all collocation nodes, ascending; cells.len() * 8 of them
    pub nodes: Vec<f64>,
    pub theta: f64,
    /// index of the first cell at or right of theta
    first_right: usize,
}

impl PicardGrid {
    pub fn build(interval: (f64, f64), theta: f64, n_cells: usize) -> Result<PicardGrid, ContinuousError> {
        let (lo, hi) = interval;
        if !(lo < hi) || theta < lo || theta > hi {
            return Err(ContinuousError::Invalid(format!(
                "interval [{lo}, {hi}] must be proper and contain theta = {theta}"
            )));
        }
        let total = hi - lo;
        let n_left = (((theta - lo) / total) * n_cells as f64).round() as usize;
        let n_left = if theta > lo { n_left.max(1) } else { 0 };
        let n_right = if hi > theta { (n_cells - n_left).max(1) } else { 0 };
        let mut cells = Vec::with_capacity(n_left + n_right);
        for k in 0..n_left {
            let a = lo + (theta - lo) * k as f64 / n_left as f64;
            let b = lo + (theta - lo) * (k + 1) as f64 / n_left as f64;
            cells.push((a, b));
        }
        let first_right = cells.len();
        for k in 0..n_right {
            let a = theta + (hi - theta) * k as f64 / n_right as f64;
            let b = theta + (hi - theta) * (k + 1) as f64 / n_right as f64;
            cells.push((a, b));
        }
        let (ref_nodes, _) = gauss_legendre(NODES_PER_CELL);
        let mut nodes = Vec::with_capacity(cells.len() * NODES_PER_CELL);
        for &(a, b) in &cells {
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            for &t in ref_nodes {
                nodes.push(mid + half * t);
            }
        }
        Ok(PicardGrid {
            cells,
            nodes,
            theta,
            first_right,
        })
    }

    /// Cumulative integral int_theta^x of the node-interpolated values, at
    /// every node.
    pub fn cumulative(&self, values: &[f64]) -> Vec<f64> {
        let p = NODES_PER_CELL;
        assert_eq!(values.len(), self.nodes.len());
        let w_partial = partial_weights();
        let (_, w_full) = gauss_legendre(p);
        let n_cells = self.cells.len();
        let mut cell_totals = vec![0.0; n_cells];
        for (ci, &(a, b)) in self.cells.iter().enumerate() {
            let half = 0.5 * (b - a);
            let vs = &values[ci * p..(ci + 1) * p];
            cell_totals[ci] = half * w_full.iter().zip(vs).map(|(&w, &v)| w * v).sum::<f64>();
        }
        let mut out = vec![0.0; values.len()];
        // rightward: base = integral from theta to the cell's left edge
        let mut base = 0.0;
        for ci in self.first_right..n_cells {
            let (a, b) = self.cells[ci];
            let half = 0.5 * (b - a);
            let vs = &values[ci * p..(ci + 1) * p];
            for j in 0..p {
                let partial: f64 = w_partial[j].iter().zip(vs).map(|(&w, &v)| w * v).sum();
                out[ci * p + j] = base + half * partial;
            }
            base += cell_totals[ci];
        }
        // leftward: int_theta^x = -(int_x^(cell right edge) + cells up to theta)
        let mut base = 0.0;
        for ci in (0..self.first_right).rev() {
            let (a, b) = self.cells[ci];
            let half = 0.5 * (b - a);
            let vs = &values[ci * p..(ci + 1) * p];
            for j in 0..p {
                let partial: f64 = w_partial[j].iter().zip(vs).map(|(&w, &v)| w * v).sum();
                // int_x^b = total - int_a^x
                out[ci * p + j] = -(base + (cell_totals[ci] - half * partial));
            }
            base += cell_totals[ci];
        }
        out
    }

    /// Interpolate node values at an arbitrary x inside the grid.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let p = NODES_PER_CELL;
        let ci = match self
            .cells
            .binary_search_by(|&(a, _)| a.partial_cmp(&x).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let (a, b) = self.cells[ci];
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let t = (x - mid) / half;
        let (ref_nodes, _) = gauss_legendre(p);
        let vs = &values[ci * p..(ci + 1) * p];
        let mut acc = 0.0;
        for i in 0..p {
            let mut l = 1.0;
            for k in 0..p {
                if k != i {
                    l *= (t - ref_nodes[k]) / (ref_nodes[i] - ref_nodes[k]);
                }
            }
            acc += l * vs[i];
        }
        acc
    }
}

/// Converged (or flagged) successive-approximation solution.
#[derive(Clone, Debug)]
pub struct PicardSolution {
    pub grid: PicardGrid,
    /// (f, e^C f') at every node
    pub f: Vec<[f64; 2]>,
    pub c_of_x: Vec<f64>,
    pub gamma: (f64, f64),
    pub iterations_used: usize,
    pub sup_norm_gap: f64,
    pub converged: bool,
    /// Some(true) when every iterate increased pointwise on x >= theta
    /// (tracked only when c, gamma >= 0)
    pub monotone_nondecreasing: Option<bool>,
}

impl PicardSolution {
    /// First component (the harmonic candidate) at x.
    pub fn h(&self, x: f64) -> f64 {
        let vals: Vec<f64> = self.f.iter().map(|v| v[0]).collect();
        self.grid.interpolate(&vals, x)
    }

    /// Sign changes of f on the grid (the criteria need h != 0 a.e.).
    pub fn sign_changes(&self) -> usize {
        let mut changes = 0;
        for w in self.f.windows(2) {
            if w[0][0] * w[1][0] < 0.0 {
                changes += 1;
            }
        }
        changes
    }

    /// Residual of the integral equation F = F(theta) + int_theta^x G F,
    /// re-applied once to the converged values.
    pub fn residual(&self, g12: &[f64], g21: &[f64]) -> f64 {
        let w1: Vec<f64> = self.f.iter().zip(g12).map(|(v, &g)| g * v[1]).collect();
        let w2: Vec<f64> = self.f.iter().zip(g21).map(|(v, &g)| g * v[0]).collect();
        let c1 = self.grid.cumulative(&w1);
        let c2 = self.grid.cumulative(&w2);
        let mut worst = 0.0f64;
        for i in 0..self.f.len() {
            let want = [self.gamma.0 + c1[i], self.gamma.1 + c2[i]];
            for k in 0..2 {
                let denom = 1.0 + want[k].abs();
                worst = worst.max((self.f[i][k] - want[k]).abs() / denom);
            }
        }
        worst
    }
}

/// Entries of G at the grid nodes, plus C itself.
pub fn g_entries(
    model: &DiffusionModel,
    grid: &PicardGrid,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), ContinuousError> {
    let drift: Vec<f64> = grid
        .nodes
        .iter()
        .map(|&x| model.b_at(x) / model.a_at(x))
        .collect();
    for (&x, &d) in grid.nodes.iter().zip(&drift) {
        if !d.is_finite() {
            return Err(ContinuousError::Hypothesis(format!(
                "b/a non-finite at x = {x}"
            )));
        }
    }
    let c_of_x = grid.cumulative(&drift);
    let g12: Vec<f64> = c_of_x.iter().map(|&c| (-c).exp()).collect();
    let g21: Vec<f64> = grid
        .nodes
        .iter()
        .zip(&c_of_x)
        .map(|(&x, &c)| model.c_at(x) * c.exp() / model.a_at(x))
        .collect();
    Ok((c_of_x, g12, g21))
}

/// Options for the iteration.
#[derive(Clone, Copy, Debug)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub n_cells: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tol: 1e-10,
            max_iter: 200,
            n_cells: 160,
        }
    }
}

/// First successive approximation scheme:
/// F^(n+1) = F(theta) + int_theta^x G F^(n), started from the constant
/// F(theta) = (gamma0, gamma1), until the sup-norm change drops below tol.
///
/// A run that hits max_iter returns `ContinuousError::NonConverged`; a
/// nonconverged iterate is never silently returned.
pub fn picard_solve(
    model: &DiffusionModel,
    gamma0: f64,
    gamma1: f64,
    interval: (f64, f64),
    opts: &PicardOptions,
) -> Result<PicardSolution, ContinuousError> {
    let grid = PicardGrid::build(interval, model.theta, opts.n_cells)?;
    let (c_of_x, g12, g21) = g_entries(model, &grid)?;
    let n = grid.nodes.len();
    let mut f: Vec<[f64; 2]> = vec![[gamma0, gamma1]; n];

    let track_monotone = gamma0 >= 0.0
        && gamma1 >= 0.0
        && grid.nodes.iter().all(|&x| model.c_at(x) >= 0.0);
    let mut monotone_ok = true;

    let mut iterations_used = 0;
    let mut gap = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let w1: Vec<f64> = f.iter().zip(&g12).map(|(v, &g)| g * v[1]).collect();
        let w2: Vec<f64> = f.iter().zip(&g21).map(|(v, &g)| g * v[0]).collect();
        let c1 = grid.cumulative(&w1);
        let c2 = grid.cumulative(&w2);
        gap = 0.0;
        for i in 0..n {
            let new = [gamma0 + c1[i], gamma1 + c2[i]];
            for k in 0..2 {
                gap = gap.max((new[k] - f[i][k]).abs() / (1.0 + new[k].abs()));
                if track_monotone && grid.nodes[i] >= grid.theta - 1e-15 {
                    let slack = 1e-12 * (1.0 + f[i][k].abs());
                    if new[k] < f[i][k] - slack {
                        monotone_ok = false;
                    }
                }
            }
            f[i] = new;
        }
        iterations_used = it;
        if gap < opts.tol {
            break;
        }
    }
    if gap >= opts.tol {
        return Err(ContinuousError::NonConverged {
            iterations: iterations_used,
            gap,
            tol: opts.tol,
        });
    }
    Ok(PicardSolution {
        grid,
        f,
        c_of_x,
        gamma: (gamma0, gamma1),
        iterations_used,
        sup_norm_gap: gap,
        converged: true,
        monotone_nondecreasing: track_monotone.then_some(monotone_ok),
    })
}

/// The n-th Picard iterate F^(n) on the given grid resolution, regardless of
/// convergence (F^(1) is the constant F(theta)). The Peano-Baker partial sums
/// equal these iterates exactly.
pub fn picard_sweeps(
    model: &DiffusionModel,
    gamma0: f64,
    gamma1: f64,
    interval: (f64, f64),
    sweeps: usize,
    n_cells: usize,
) -> Result<(PicardGrid, Vec<[f64; 2]>), ContinuousError> {
    let grid = PicardGrid::build(interval, model.theta, n_cells)?;
    let (_, g12, g21) = g_entries(model, &grid)?;
    let n = grid.nodes.len();
    let mut f: Vec<[f64; 2]> = vec![[gamma0, gamma1]; n];
    for _ in 1..sweeps {
        let w1: Vec<f64> = f.iter().zip(&g12).map(|(v, &g)| g * v[1]).collect();
        let w2: Vec<f64> = f.iter().zip(&g21).map(|(v, &g)| g * v[0]).collect();
        let c1 = grid.cumulative(&w1);
        let c2 = grid.cumulative(&w2);
        for i in 0..n {
            f[i] = [gamma0 + c1[i], gamma1 + c2[i]];
        }
    }
    Ok((grid, f))
}

/// Second scheme (Peano-Baker series): term_1 = F(theta) constant,
/// term_{k+1} = int_theta^x G term_k. Returns the first n_terms terms at the
/// grid nodes; their partial sums are exactly the Picard iterates.
pub fn peano_baker_terms(
    model: &DiffusionModel,
    gamma0: f64,
    gamma1: f64,
    interval: (f64, f64),
    n_terms: usize,
    n_cells: usize,
) -> Result<(PicardGrid, Vec<Vec<[f64; 2]>>), ContinuousError> {
    let grid = PicardGrid::build(interval, model.theta, n_cells)?;
    let (_, g12, g21) = g_entries(model, &grid)?;
    let n = grid.nodes.len();
    let mut terms: Vec<Vec<[f64; 2]>> = Vec::with_capacity(n_terms);
    terms.push(vec![[gamma0, gamma1]; n]);
    for _ in 1..n_terms {
        let prev = terms.last().unwrap();
        let w1: Vec<f64> = prev.iter().zip(&g12).map(|(v, &g)| g * v[1]).collect();
        let w2: Vec<f64> = prev.iter().zip(&g21).map(|(v, &g)| g * v[0]).collect();
        let c1 = grid.cumulative(&w1);
        let c2 = grid.cumulative(&w2);
        terms.push((0..n).map(|i| [c1[i], c2[i]]).collect());
    }
    Ok((grid, terms))
}

/// Check the comparison inequality: if fbar satisfies the integral inequality
/// F(x) >= F(theta) + int_theta^x G F on the grid (x >= theta), it must
/// dominate the minimal solution pointwise. Returns (is_supersolution,
/// dominates_everywhere).
pub fn comparison_check(
    model: &DiffusionModel,
    sol: &PicardSolution,
    fbar: impl Fn(f64) -> [f64; 2],
) -> Result<(bool, bool), ContinuousError> {
    let grid = &sol.grid;
    let (_, g12, g21) = g_entries(model, grid)?;
    let fb: Vec<[f64; 2]> = grid.nodes.iter().map(|&x| fbar(x)).collect();
    let w1: Vec<f64> = fb.iter().zip(&g12).map(|(v, &g)| g * v[1]).collect();
    let w2: Vec<f64> = fb.iter().zip(&g21).map(|(v, &g)| g * v[0]).collect();
    let c1 = grid.cumulative(&w1);
    let c2 = grid.cumulative(&w2);
    let fb_theta = fbar(grid.theta);
    let mut is_super = fb_theta[0] >= sol.gamma.0 - 1e-12 && fb_theta[1] >= sol.gamma.1 - 1e-12;
    let mut dominates = true;
    for (i, &x) in grid.nodes.iter().enumerate() {
        if x < grid.theta {
            continue;
        }
        let rhs = [fb_theta[0] + c1[i], fb_theta[1] + c2[i]];
        for k in 0..2 {
            let slack = 1e-10 * (1.0 + rhs[k].abs());
            if fb[i][k] < rhs[k] - slack {
                is_super = false;
            }
            if fb[i][k] < sol.f[i][k] - 1e-9 * (1.0 + sol.f[i][k].abs()) {
                dominates = false;
            }
        }
    }
    Ok((is_super, dominates))
}

/// Max residual of psi'' + psi'^2 + (b/a) psi' - c/a over a uniform grid,
/// with psi-derivatives by central finite differences (order 2 or 4) of step
/// equal to the grid spacing. psi must be evaluable slightly beyond the
/// interval ends.
pub fn harmonic_residual(
    model: &DiffusionModel,
    psi: impl Fn(f64) -> f64,
    interval: (f64, f64),
    grid_n: usize,
    order: usize,
) -> f64 {
    assert!(grid_n >= 100, "grid_n >= 100 for a meaningful residual scan");
    assert!(order == 2 || order == 4, "stencil order 2 or 4");
    let (lo, hi) = interval;
    let h = (hi - lo) / grid_n as f64;
    let mut worst = 0.0f64;
    for i in 0..=grid_n {
        let x = lo + i as f64 * h;
        let (d1, d2) = if order == 2 {
            (
                (psi(x + h) - psi(x - h)) / (2.0 * h),
                (psi(x + h) - 2.0 * psi(x) + psi(x - h)) / (h * h),
            )
        } else {
            let (m2, m1, p1, p2) = (psi(x - 2.0 * h), psi(x - h), psi(x + h), psi(x + 2.0 * h));
            (
                (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h),
                (-m2 + 16.0 * m1 - 30.0 * psi(x) + 16.0 * p1 - p2) / (12.0 * h * h),
            )
        };
        let a = model.a_at(x);
        let res = d2 + d1 * d1 + model.b_at(x) / a * d1 - model.c_at(x) / a;
        worst = worst.max(res.abs());
    }
    worst
}
