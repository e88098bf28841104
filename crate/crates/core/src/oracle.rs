//! Independent eigenvalue oracles: truncated symmetric tridiagonal matrices
//! for the discrete models, finite-difference discretizations for diffusions.
//!
//! For rates (a, b, c) the quadratic form sum mu_k [b_k (f_{k+1}-f_k)^2 +
//! c_k f_k^2] symmetrizes in the sqrt(mu)-scaled basis to the tridiagonal
//! with d_k = a_k + b_k + c_k and off-diagonal -sqrt(a_{k+1} b_k). Dirichlet
//! truncation (kill past N) approximates the minimal form; dropping the
//! outgoing b_{N-1} from the last diagonal gives the free (maximal-form)
//! approximation.
//!
//! Eigenvalues come from Sturm-sequence bisection: deterministic brackets,
//! no iteration-order surprises, and only the lowest few are ever needed.

use serde::Serialize;

use crate::continuous::DiffusionModel;
use crate::model::{DiscreteModel, ModelError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Boundary {
    /// minimal-form approximation: f = 0 past the truncation
    DirichletAtN,
    /// maximal-form approximation: no outgoing rate at the last state
    FreeAtN,
}

/// Symmetric tridiagonal matrix (the form matrix, so eigenvalues are >= 0
/// for killing-free-positive models).
#[derive(Clone, Debug)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    pub boundary: Boundary,
}

impl SymTridiag {
    pub fn size(&self) -> usize {
        self.diag.len()
    }
}

/// Symmetrized N x N truncation of the form matrix of a discrete model.
pub fn truncate_symmetric(
    model: &DiscreteModel,
    n: usize,
    boundary: Boundary,
) -> Result<SymTridiag, ModelError> {
    assert!(n >= 1);
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n - 1);
    for k in 0..n {
        diag.push(model.a(k)? + model.b(k)? + model.c(k)?);
        if k + 1 < n {
            off.push(-(model.a(k + 1)? * model.b(k)?).sqrt());
        }
    }
    if boundary == Boundary::FreeAtN {
        diag[n - 1] -= model.b(n - 1)?;
    }
    Ok(SymTridiag {
        diag,
        off,
        boundary,
    })
}

/// Number of eigenvalues strictly below x, by the usual LDL^T pivot count.
pub fn sturm_count(m: &SymTridiag, x: f64) -> usize {
    let n = m.size();
    let mut count = 0;
    let mut q = m.diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let guard = 1e-300_f64;
        let q_safe = if q.abs() < guard {
            if q >= 0.0 {
                guard
            } else {
                -guard
            }
        } else {
            q
        };
        q = (m.diag[i] - x) - m.off[i - 1] * m.off[i - 1] / q_safe;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin(m: &SymTridiag) -> (f64, f64) {
    let n = m.size();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let left = if i > 0 { m.off[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { m.off[i].abs() } else { 0.0 };
        lo = lo.min(m.diag[i] - left - right);
        hi = hi.max(m.diag[i] + left + right);
    }
    (lo - 1.0, hi + 1.0)
}

/// Lowest `count` eigenvalues, ascending, each bracketed to an absolute
/// width of 1e-10 * max(1, |lambda|).
pub fn low_eigs(m: &SymTridiag, count: usize) -> Vec<f64> {
    let count = count.min(m.size());
    let (glo, ghi) = gershgorin(m);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let mut lo = glo;
        let mut hi = ghi;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo < 1e-10 * mid.abs().max(1.0) {
                break;
            }
            if sturm_count(m, mid) <= k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out
}

/// lambda_0 for each truncation size; Dirichlet truncations give a
/// nonincreasing sequence in N.
pub fn lambda0_trace(
    model: &DiscreteModel,
    n_list: &[usize],
    boundary: Boundary,
) -> Result<Vec<(usize, f64)>, ModelError> {
    let mut out = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let m = truncate_symmetric(model, n, boundary)?;
        out.push((n, low_eigs(&m, 1)[0]));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct EigCountGrowth {
    pub counts: Vec<(usize, usize)>,
    /// counts identical across the largest truncations: consistent with
    /// discrete spectrum below lambda. A heuristic label, never a proof.
    pub stabilized: bool,
}

/// Number of eigenvalues below `lambda` per truncation.
pub fn eig_count_growth(
    model: &DiscreteModel,
    lambda: f64,
    n_list: &[usize],
    boundary: Boundary,
) -> Result<EigCountGrowth, ModelError> {
    assert!(lambda > 0.0);
    let mut counts = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let m = truncate_symmetric(model, n, boundary)?;
        counts.push((n, sturm_count(&m, lambda)));
    }
    let stabilized = counts.len() >= 2 && {
        let last = counts[counts.len() - 1].1;
        counts[counts.len() - 2].1 == last
    };
    Ok(EigCountGrowth { counts, stabilized })
}

/// Symmetric second-order finite-difference discretization of the form
/// int f'^2 dnu + int c f^2 dmu on a compact interval, Dirichlet boundary,
/// in the mass-normalized basis.
pub fn fd_discretize(
    model: &DiffusionModel,
    interval: (f64, f64),
    n: usize,
) -> SymTridiag {
    assert!(n >= 50, "fd_discretize needs a reasonably fine grid");
    let (x0, x1) = interval;
    let dx = (x1 - x0) / (n as f64 + 1.0);
    // C at half-grid resolution by cumulative 8-point Gauss per step
    let n_half = 2 * n + 2;
    let mut c_cum = vec![0.0f64; n_half + 1];
    for i in 1..=n_half {
        let a = x0 + (i - 1) as f64 * dx / 2.0;
        let b = x0 + i as f64 * dx / 2.0;
        c_cum[i] = c_cum[i - 1]
            + crate::continuous::quad::integrate_cell(
                &mut |y: f64| model.b_at(y) / model.a_at(y),
                a,
                b,
                8,
            );
    }
    let c_at = |half_steps: usize| c_cum[half_steps];

    // nodes at i = 1..=n (interior), midpoints at half-offsets
    let nu_w = |i: usize| (c_at(2 * i + 1)).exp(); // e^C at x_{i+1/2}, i = 0..n
    let mass = |i: usize| {
        let x = x0 + i as f64 * dx;
        (c_at(2 * i)).exp() / model.a_at(x)
    };
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n - 1);
    for i in 1..=n {
        let x = x0 + i as f64 * dx;
        let m_i = mass(i);
        let k_ii = (nu_w(i - 1) + nu_w(i)) / (dx * dx) + model.c_at(x) * m_i;
        diag.push(k_ii / m_i);
        if i < n {
            let k_next = -nu_w(i) / (dx * dx);
            off.push(k_next / (m_i * mass(i + 1)).sqrt());
        }
    }
    SymTridiag {
        diag,
        off,
        boundary: Boundary::DirichletAtN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuous::Domain;
    use crate::model::Rate;

    fn model(a: &str, b: &str, c: &str) -> DiscreteModel {
        DiscreteModel::new(
            Rate::from_expr_str("a", a).unwrap(),
            Rate::from_expr_str("b", b).unwrap(),
            Rate::from_expr_str("c", c).unwrap(),
        )
    }

    /// Plain Jacobi eigenvalue sweep over a dense symmetric matrix. Test-only
    /// reference, independent of the Sturm path.
    fn jacobi_eigs(mut m: Vec<Vec<f64>>) -> Vec<f64> {
        let n = m.len();
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    off += m[i][j] * m[i][j];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if m[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m[k][p];
                        let mkq = m[k][q];
                        m[k][p] = c * mkp - s * mkq;
                        m[k][q] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[p][k];
                        let mqk = m[q][k];
                        m[p][k] = c * mpk - s * mqk;
                        m[q][k] = s * mpk + c * mqk;
                    }
                }
            }
        }
        let mut eigs: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        eigs
    }

    fn dense_of(t: &SymTridiag) -> Vec<Vec<f64>> {
        let n = t.size();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = t.diag[i];
            if i + 1 < n {
                m[i][i + 1] = t.off[i];
                m[i + 1][i] = t.off[i];
            }
        }
        m
    }

    #[test]
    fn two_by_two_hand_solution() {
        // a = b = 1, c = 0, N = 2, Dirichlet: diag (1, 2), off (-1)
        let m = truncate_symmetric(&model("1", "1", "0"), 2, Boundary::DirichletAtN).unwrap();
        assert_eq!(m.diag, vec![1.0, 2.0]);
        assert_eq!(m.off, vec![-1.0]);
        let eigs = low_eigs(&m, 2);
        let s5 = 5f64.sqrt();
        assert!((eigs[0] - (3.0 - s5) / 2.0).abs() < 1e-10);
        assert!((eigs[1] - (3.0 + s5) / 2.0).abs() < 1e-10);
    }

    #[test]
    fn discrete_laplacian_closed_form() {
        // free chain with extra diag 2, off -1 has eigenvalues 2 - 2cos(k pi / (N+1))
        let n = 50;
        let m = SymTridiag {
            diag: vec![2.0; n],
            off: vec![-1.0; n - 1],
            boundary: Boundary::DirichletAtN,
        };
        let eigs = low_eigs(&m, n);
        for (k, &e) in eigs.iter().enumerate() {
            let want = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((e - want).abs() < 1e-9, "k = {k}: {e} vs {want}");
        }
    }

    #[test]
    fn sturm_matches_dense_jacobi_reference() {
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for trial in 0..4 {
            let n = 40 + 20 * trial;
            let t = SymTridiag {
                diag: (0..n).map(|_| 4.0 * next()).collect(),
                off: (0..n - 1).map(|_| 2.0 * next() - 1.0).collect(),
                boundary: Boundary::DirichletAtN,
            };
            let fast = low_eigs(&t, 6);
            let dense = jacobi_eigs(dense_of(&t));
            for k in 0..6 {
                assert!(
                    (fast[k] - dense[k]).abs() < 1e-9,
                    "trial {trial} k={k}: {} vs {}",
                    fast[k],
                    dense[k]
                );
            }
        }
    }

    #[test]
    fn gershgorin_nonnegative_for_killed_models() {
        // d_k - |o_k| - |o_(k-1)| >= c_k >= 0 for the linear-rate model
        let m = truncate_symmetric(
            &model("(n+1)/4", "(n+1)/4", "9*(n+1)/16"),
            100,
            Boundary::DirichletAtN,
        )
        .unwrap();
        for i in 0..100 {
            let left = if i > 0 { m.off[i - 1].abs() } else { 0.0 };
            let right = if i < 99 { m.off[i].abs() } else { 0.0 };
            assert!(m.diag[i] - left - right >= -1e-12);
        }
        // symmetric by construction: the off array IS both triangles
        assert_eq!(m.off.len(), 99);
    }

    #[test]
    fn lambda0_dirichlet_monotone_and_laplacian_limit() {
        // a = b = 1, c = 0: state 0 is reflecting (a_0 = 0), state N killed.
        // Eigenvectors cos((j + 1/2) theta) with cos((N + 1/2) theta) = 0
        // give lambda_k = 2 - 2 cos((2k+1) pi / (2N+1)).
        let m = model("1", "1", "0");
        let trace = lambda0_trace(&m, &[50, 100, 200], Boundary::DirichletAtN).unwrap();
        for w in trace.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-8);
        }
        for &(n, l0) in &trace {
            let want = 2.0 - 2.0 * (std::f64::consts::PI / (2.0 * n as f64 + 1.0)).cos();
            assert!((l0 - want).abs() < 1e-9, "N = {n}: {l0} vs {want}");
        }
    }

    #[test]
    fn linear_killing_lambda0_plateau() {
        let m = model("(n+1)/4", "(n+1)/4", "9*(n+1)/16");
        let trace = lambda0_trace(&m, &[100, 200, 400], Boundary::DirichletAtN).unwrap();
        for w in trace.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-8);
        }
        assert!(trace.last().unwrap().1 > 0.1);
    }

    #[test]
    fn eig_counts_grow_for_essential_spectrum() {
        let free = model("1", "1", "0");
        let g = eig_count_growth(&free, 1.0, &[100, 200, 400], Boundary::DirichletAtN).unwrap();
        assert!(!g.stabilized);
        assert!(g.counts[2].1 > 2 * g.counts[0].1 - 5);

        let killed = model("(n+1)/4", "(n+1)/4", "9*(n+1)/16");
        let g = eig_count_growth(&killed, 5.0, &[200, 400, 800], Boundary::DirichletAtN).unwrap();
        assert!(g.stabilized, "{:?}", g.counts);
    }

    #[test]
    fn fd_oscillator_low_eigenvalues() {
        let m = DiffusionModel::from_strs("1", "0", "x^2", Domain::WholeLine, 0.0).unwrap();
        let t = fd_discretize(&m, (-12.0, 12.0), 2000);
        let eigs = low_eigs(&t, 3);
        for (k, &e) in eigs.iter().enumerate() {
            let want = (2 * k + 1) as f64;
            assert!(
                (e - want).abs() / want < 0.01,
                "k = {k}: {e} vs {want}"
            );
        }
    }

    #[test]
    fn fd_dirichlet_laplacian_on_0_pi() {
        let m = DiffusionModel::from_strs("1", "0", "0", Domain::HalfLine, 0.0).unwrap();
        let t = fd_discretize(&m, (0.0, std::f64::consts::PI), 1500);
        let eigs = low_eigs(&t, 2);
        assert!((eigs[0] - 1.0).abs() < 1e-3, "{}", eigs[0]);
        assert!((eigs[1] - 4.0).abs() < 5e-3, "{}", eigs[1]);
    }
}
