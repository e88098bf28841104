//! Composite Gauss-Legendre quadrature: fixed-order cells, adaptive
//! bisection, and improper tails via the 1/x substitution.

use std::sync::OnceLock;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("adaptive quadrature did not converge on [{a}, {b}] (singular integrand?); local integrability required")]
    NonConvergent { a: f64, b: f64 },
    #[error("tail integral from {x0} keeps growing: integrand not integrable at infinity")]
    DivergentTail { x0: f64 },
    #[error("integrand returned a non-finite value near x = {x}")]
    NonFinite { x: f64 },
}

/// Gauss-Legendre nodes and weights on [-1, 1], computed once per order by
/// Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(order: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static TABLE8: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static TABLE16: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let cell = match order {
        8 => &TABLE8,
        16 => &TABLE16,
        _ => panic!("only orders 8 and 16 are built"),
    };
    cell.get_or_init(|| compute_gauss(order))
}

fn compute_gauss(p: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; p];
    let mut weights = vec![0.0; p];
    for i in 0..p {
        // Chebyshev-style initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (p as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (pn, dpn) = legendre_and_derivative(p, x);
            let dx = pn / dpn;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dpn) = legendre_and_derivative(p, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dpn * dpn);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre_and_derivative(p: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=p {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = p as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Fixed-order Gauss on one cell.
pub fn integrate_cell(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, order: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = 0.0;
    for (&t, &w) in nodes.iter().zip(weights) {
        sum += w * f(mid + half * t);
    }
    sum * half
}

/// Adaptive bisection with an 8-vs-16 point error estimate per cell.
///
/// `tol` is treated as a relative tolerance against the accumulated integral
/// magnitude (with an absolute floor), which suits the steep integrands here
/// (densities like e^(x^2) spanning many decades).
pub fn integrate_adaptive(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, QuadError> {
    if a == b {
        return Ok(0.0);
    }
    const MAX_CELLS: usize = 200_000;
    // Pre-split intervals spanning many decades into log-spaced cells, so
    // bisection depth stays bounded when the endpoints differ by 1e20.
    let mut stack: Vec<(f64, f64, u32)> = Vec::new();
    let same_sign = a * b > 0.0;
    let (m_lo, m_hi) = (a.abs().min(b.abs()), a.abs().max(b.abs()));
    if same_sign && m_lo > 0.0 && m_hi / m_lo > 16.0 {
        let pieces = (m_hi / m_lo).log2().ceil() as usize;
        let ratio = (m_hi / m_lo).powf(1.0 / pieces as f64);
        // edges in increasing magnitude, oriented from a toward b
        let mut mags = Vec::with_capacity(pieces + 1);
        let mut m = m_lo;
        mags.push(m);
        for _ in 0..pieces {
            m = (m * ratio).min(m_hi);
            mags.push(m);
        }
        let sign = a.signum();
        let from_small_mag = a.abs() <= b.abs();
        for w in mags.windows(2) {
            let (x1, x2) = if from_small_mag {
                (sign * w[0], sign * w[1])
            } else {
                (sign * w[1], sign * w[0])
            };
            stack.push((x1, x2, 0));
        }
    } else {
        stack.push((a, b, 0));
    }
    let mut total = 0.0f64;
    let mut total_abs = 0.0f64;
    let mut cells = 0usize;
    while let Some((lo, hi, depth)) = stack.pop() {
        cells += 1;
        if cells > MAX_CELLS || depth > 60 {
            return Err(QuadError::NonConvergent { a, b });
        }
        let coarse = integrate_cell(&mut f, lo, hi, 8);
        let fine = integrate_cell(&mut f, lo, hi, 16);
        if !fine.is_finite() {
            return Err(QuadError::NonFinite { x: 0.5 * (lo + hi) });
        }
        let err = (fine - coarse).abs();
        let scale = (total_abs + fine.abs()).max(1e-300);
        if err <= tol * scale || err <= 1e-305 {
            total += fine;
            total_abs += fine.abs();
        } else {
            let mid = 0.5 * (lo + hi);
            if mid <= lo.min(hi) || mid >= lo.max(hi) {
                // interval at floating-point resolution
                total += fine;
                total_abs += fine.abs();
                continue;
            }
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    Ok(total)
}

/// Improper integral over [x0, inf) for a positive integrand, via the
/// substitution t = 1/x on (0, 1/x0].
///
/// The transformed integrand f(1/t)/t^2 is integrated over geometric cells
/// shrinking toward t = 0 until the contributions fall below tol relative to
/// the running total; non-decaying contributions are flagged divergent.
pub fn tail_integral(
    mut f: impl FnMut(f64) -> f64,
    x0: f64,
    tol: f64,
) -> Result<f64, QuadError> {
    assert!(x0 > 0.0, "tail_integral needs a positive left endpoint");
    let t0 = 1.0 / x0;
    let mut g = |t: f64| {
        if t == 0.0 {
            0.0
        } else {
            f(1.0 / t) / (t * t)
        }
    };
    let mut total = 0.0f64;
    let mut hi = t0;
    let mut flat_or_growing = 0usize;
    let mut prev_cell = f64::INFINITY;
    let mut negligible = 0usize;
    for k in 0..2_000usize {
        let lo = hi * 0.5;
        let cell = integrate_adaptive(&mut g, lo, hi, tol.max(1e-14))?;
        if !cell.is_finite() {
            return Err(QuadError::NonFinite { x: 1.0 / lo });
        }
        total += cell;
        if cell >= prev_cell * 0.999 && cell > tol * total.abs() {
            flat_or_growing += 1;
            if flat_or_growing > 80 {
                return Err(QuadError::DivergentTail { x0 });
            }
        } else {
            flat_or_growing = 0;
        }
        if cell.abs() <= tol * total.abs().max(1e-300) {
            negligible += 1;
            if negligible >= 3 {
                return Ok(total);
            }
        } else {
            negligible = 0;
        }
        prev_cell = cell;
        hi = lo;
        let _ = k;
    }
    Err(QuadError::DivergentTail { x0 })
}
