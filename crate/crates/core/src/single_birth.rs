//! Lower-triangle ("single birth") machinery: the reference F-tilde
//! recursion, the one-step G column algorithm, and the Poisson-equation
//! solver built on it.
//!
//! The matrix has q_{i,i+1} > 0, arbitrary q_{ij} >= 0 below the diagonal,
//! and a signed diagonal term c_i (killing enters with +c_n in the row sums
//! q-tilde). The operator is
//!
//!   Omega^c f(i) = sum_{j<i} q_{ij}(f_j - f_i) + q_{i,i+1}(f_{i+1} - f_i) - c_i f_i.
//!
//! Everything here runs in plain doubles: these quantities are used at
//! moderate n and c may be signed, so log-domain tricks do not apply.
//! Overflow is detected and reported, never absorbed.

use thiserror::Error;

use crate::model::{DiscreteModel, ModelError};

#[derive(Debug, Error)]
pub enum SingleBirthError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("overflow in G table at base {base}, column {k}")]
    Overflow { base: usize, k: usize },
    #[error("Poisson residual {residual:.3e} at i = {i} exceeds 1e-9: internal inconsistency")]
    ResidualCheck { i: usize, residual: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Width of the dense row prefix; sparser far-field entries go to the
/// overflow list.
const DENSE_WIDTH: usize = 128;

struct Row {
    /// q_{i,j} for j < min(i, DENSE_WIDTH).
    dense: Vec<f64>,
    /// prefix[k] = sum_{j<k} dense[j].
    prefix: Vec<f64>,
    /// remaining (j, q_{ij}) with j >= DENSE_WIDTH, sorted by j.
    sparse: Vec<(usize, f64)>,
}

/// Lower-triangle model: up-rates q_{i,i+1}, down-rates q_{ij} (j < i),
/// signed diagonal coefficients c_i.
pub struct LowerTriModel {
    q_up: Vec<f64>,
    rows: Vec<Row>,
    c: Vec<f64>,
}

impl LowerTriModel {
    /// Build from explicit data. `q_low` holds (i, j, value) triples, j < i.
    pub fn new(
        q_up: Vec<f64>,
        q_low: &[(usize, usize, f64)],
        c: Vec<f64>,
    ) -> Result<LowerTriModel, SingleBirthError> {
        let n = q_up.len();
        if c.len() != n {
            return Err(SingleBirthError::Invalid(format!(
                "q_up has length {n} but c has length {}",
                c.len()
            )));
        }
        for (i, &q) in q_up.iter().enumerate() {
            if !(q > 0.0) || !q.is_finite() {
                return Err(SingleBirthError::Invalid(format!(
                    "q_(i,i+1) must be positive; got {q} at i = {i}"
                )));
            }
        }
        let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in q_low {
            if i >= n || j >= i {
                return Err(SingleBirthError::Index(format!(
                    "q_low entry ({i}, {j}) must satisfy j < i < {n}"
                )));
            }
            if !(v >= 0.0) || !v.is_finite() {
                return Err(SingleBirthError::Invalid(format!(
                    "q_({i},{j}) = {v} must be nonnegative"
                )));
            }
            lists[i].push((j, v));
        }
        let rows = lists
            .into_iter()
            .enumerate()
            .map(|(i, mut entries)| {
                entries.sort_by_key(|&(j, _)| j);
                let dense_len = i.min(DENSE_WIDTH);
                let mut dense = vec![0.0; dense_len];
                let mut sparse = Vec::new();
                for (j, v) in entries {
                    if j < dense_len {
                        dense[j] += v;
                    } else {
                        sparse.push((j, v));
                    }
                }
                let mut prefix = Vec::with_capacity(dense_len + 1);
                prefix.push(0.0);
                for &d in &dense {
                    prefix.push(prefix.last().unwrap() + d);
                }
                Row {
                    dense,
                    prefix,
                    sparse,
                }
            })
            .collect();
        Ok(LowerTriModel { q_up, rows, c })
    }

    /// Tridiagonal fast path: q_{n,n-1} = a_n, q_{n,n+1} = b_n, killing c_n.
    pub fn from_discrete(model: &DiscreteModel, n_max: usize) -> Result<LowerTriModel, SingleBirthError> {
        let mut q_up = Vec::with_capacity(n_max + 1);
        let mut q_low = Vec::new();
        let mut c = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            q_up.push(model.b(n)?);
            c.push(model.c(n)?);
            if n >= 1 {
                q_low.push((n, n - 1, model.a(n)?));
            }
        }
        LowerTriModel::new(q_up, &q_low, c)
    }

    pub fn len(&self) -> usize {
        self.q_up.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_up.is_empty()
    }

    pub fn q_up(&self, i: usize) -> f64 {
        self.q_up[i]
    }

    pub fn c(&self, i: usize) -> f64 {
        self.c[i]
    }

    /// q-tilde_n^(k) = sum_{j=0}^k q_{nj} + c_n, for 0 <= k < n.
    pub fn tilde_q(&self, n: usize, k: usize) -> Result<f64, SingleBirthError> {
        if !(k < n && n < self.len()) {
            return Err(SingleBirthError::Index(format!(
                "tilde_q requires 0 <= k < n < {}, got n = {n}, k = {k}",
                self.len()
            )));
        }
        let row = &self.rows[n];
        let dense_part = row.prefix[(k + 1).min(row.dense.len())];
        let sparse_part: f64 = row
            .sparse
            .iter()
            .take_while(|&&(j, _)| j <= k)
            .map(|&(_, v)| v)
            .sum();
        Ok(dense_part + sparse_part + self.c[n])
    }

    /// u_l^(i) = q-tilde_{i+l}^(i) / q_{i+l, i+l+1}, l >= 1.
    fn u(&self, i: usize, l: usize) -> Result<f64, SingleBirthError> {
        Ok(self.tilde_q(i + l, i)? / self.q_up[i + l])
    }
}

/// Reference O((n-i)^2) evaluation of F-tilde_n^(i):
/// F_i^(i) = 1, F_n^(i) = (1/q_{n,n+1}) sum_{k=i}^{n-1} q-tilde_n^(k) F_k^(i).
pub fn f_tilde_direct(model: &LowerTriModel, n: usize, i: usize) -> Result<f64, SingleBirthError> {
    if n < i || n >= model.len() {
        return Err(SingleBirthError::Index(format!(
            "f_tilde_direct requires i <= n < {}, got n = {n}, i = {i}",
            model.len()
        )));
    }
    let mut f = vec![0.0; n - i + 1];
    f[0] = 1.0;
    for m in (i + 1)..=n {
        let mut s = 0.0;
        for k in i..m {
            s += model.tilde_q(m, k)? * f[k - i];
        }
        f[m - i] = s / model.q_up[m];
    }
    Ok(f[n - i])
}

/// Streamed G columns for base index i. Only the diagonal G_{m,m} = F-tilde_{i+m}^(i)
/// survives; each column k is built from column k-1 alone.
pub struct GTable {
    pub base: usize,
    /// diag[m] = G_{m,m}^(i), m = 0..=m_max, with G_{0,0} = 1.
    pub diag: Vec<f64>,
}

/// Build the G diagonal for base i up to m_max using
/// G_{l,k} = G_{l,k-1} + u_{l-k+1}^(i+k-1) G_{k-1,k-1}, G_{l,1} = u_l^(i).
pub fn g_table(model: &LowerTriModel, i: usize, m_max: usize) -> Result<GTable, SingleBirthError> {
    if i + m_max >= model.len() {
        return Err(SingleBirthError::Index(format!(
            "g_table needs indices up to {} but model has length {}",
            i + m_max,
            model.len()
        )));
    }
    let mut diag = Vec::with_capacity(m_max + 1);
    diag.push(1.0);
    if m_max == 0 {
        return Ok(GTable { base: i, diag });
    }
    // column 1
    let mut col: Vec<f64> = (1..=m_max).map(|l| model.u(i, l)).collect::<Result<_, _>>()?;
    diag.push(col[0]);
    for k in 2..=m_max {
        let g_prev_diag = diag[k - 1];
        // entries l = k..=m_max live at col[l - k] after the shift
        let mut next = Vec::with_capacity(m_max - k + 1);
        for l in k..=m_max {
            let v = col[l - (k - 1)] + model.u(i + k - 1, l - k + 1)? * g_prev_diag;
            if !v.is_finite() {
                return Err(SingleBirthError::Overflow { base: i, k });
            }
            next.push(v);
        }
        diag.push(next[0]);
        col = next;
    }
    Ok(GTable { base: i, diag })
}

/// All G columns (k = 1..=m_max), for the cross-column identity checks.
/// O(m^2) memory; the streaming `g_table` is the production path.
pub fn g_columns(
    model: &LowerTriModel,
    i: usize,
    m_max: usize,
) -> Result<Vec<Vec<f64>>, SingleBirthError> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m_max);
    let col1: Vec<f64> = (1..=m_max).map(|l| model.u(i, l)).collect::<Result<_, _>>()?;
    cols.push(col1);
    for k in 2..=m_max {
        let g_prev_diag = cols[k - 2][0];
        let prev = &cols[k - 2];
        let mut next = Vec::with_capacity(m_max - k + 1);
        for l in k..=m_max {
            next.push(prev[l - (k - 1)] + model.u(i + k - 1, l - k + 1)? * g_prev_diag);
        }
        cols.push(next);
    }
    Ok(cols)
}

/// Solve the Poisson equation Omega^c g = f on {0..n_max-1} given g_0:
/// g_n = g_0 + sum_{j<=n-1} v_j sum_{k=0}^{n-j-1} G_{k,k}^(j),
/// v_j = (f_j + c_j g_0)/q_{j,j+1}.
///
/// The residual |Omega^c g - f| is checked on return (relative 1e-9) and a
/// failure is an internal-consistency error.
pub fn poisson_solve(
    model: &LowerTriModel,
    f: &[f64],
    g0: f64,
    n_max: usize,
) -> Result<Vec<f64>, SingleBirthError> {
    if n_max >= model.len() {
        return Err(SingleBirthError::Index(format!(
            "poisson_solve needs index {n_max} but model has length {}",
            model.len()
        )));
    }
    if f.len() < n_max {
        return Err(SingleBirthError::Invalid(format!(
            "f must cover indices 0..{n_max}, got length {}",
            f.len()
        )));
    }
    let mut g = Vec::with_capacity(n_max + 1);
    g.push(g0);
    // cum[j] tracks sum_{k=0}^{n-j-1} G_{k,k}^(j) as n grows
    let mut diags: Vec<Vec<f64>> = Vec::new();
    let mut cum: Vec<f64> = Vec::new();
    let mut v: Vec<f64> = Vec::new();
    for n in 1..=n_max {
        let j_new = n - 1;
        diags.push(g_table(model, j_new, n_max - j_new - 1)?.diag);
        cum.push(0.0);
        v.push((f[j_new] + model.c(j_new) * g0) / model.q_up(j_new));
        let mut total = 0.0;
        for j in 0..n {
            cum[j] += diags[j][n - j - 1];
            total += v[j] * cum[j];
        }
        let g_n = g0 + total;
        if !g_n.is_finite() {
            return Err(SingleBirthError::Overflow { base: 0, k: n });
        }
        g.push(g_n);
    }
    // residual check
    for i in 0..n_max {
        let mut lhs = model.q_up(i) * (g[i + 1] - g[i]) - model.c(i) * g[i];
        let mut scale = model.q_up(i) * (g[i + 1].abs() + g[i].abs()) + (model.c(i) * g[i]).abs();
        let row = &model.rows[i];
        for (j, &q) in row.dense.iter().enumerate() {
            if q != 0.0 {
                lhs += q * (g[j] - g[i]);
                scale += q * (g[j].abs() + g[i].abs());
            }
        }
        for &(j, q) in &row.sparse {
            lhs += q * (g[j] - g[i]);
            scale += q * (g[j].abs() + g[i].abs());
        }
        let residual = (lhs - f[i]).abs() / scale.max(f[i].abs()).max(1.0);
        if residual > 1e-9 {
            return Err(SingleBirthError::ResidualCheck { i, residual });
        }
    }
    Ok(g)
}

/// On-disk form:
/// `{"kind":"lower","q_up":[...] or "<expr>","q_low":[[i,j,value],...],
///   "c":[...] or "<expr>","n":<length when rates are expressions>}`.
#[derive(serde::Serialize, serde::Deserialize)]
pub struct LowerTriModelFile {
    pub kind: String,
    pub q_up: serde_json::Value,
    #[serde(default)]
    pub q_low: Vec<(usize, usize, f64)>,
    pub c: serde_json::Value,
    #[serde(default)]
    pub n: Option<usize>,
}

impl LowerTriModelFile {
    pub fn from_json(text: &str) -> Result<LowerTriModelFile, SingleBirthError> {
        serde_json::from_str(text).map_err(|e| SingleBirthError::Invalid(e.to_string()))
    }

    pub fn to_model(&self) -> Result<LowerTriModel, SingleBirthError> {
        if self.kind != "lower" {
            return Err(SingleBirthError::Invalid(format!(
                "expected kind = \"lower\", got {:?}",
                self.kind
            )));
        }
        let seq = |v: &serde_json::Value, what: &str| -> Result<Vec<f64>, SingleBirthError> {
            match v {
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|x| {
                        x.as_f64().ok_or_else(|| {
                            SingleBirthError::Invalid(format!("{what} entries must be numbers"))
                        })
                    })
                    .collect(),
                serde_json::Value::String(src) => {
                    let n = self.n.ok_or_else(|| {
                        SingleBirthError::Invalid(format!(
                            "{what} given as a formula requires the field \"n\""
                        ))
                    })?;
                    let expr = crate::expr::Expr::parse(src)
                        .map_err(|e| SingleBirthError::Invalid(format!("{what}: {e}")))?;
                    Ok((0..n).map(|k| expr.eval(k as f64)).collect())
                }
                _ => Err(SingleBirthError::Invalid(format!(
                    "{what} must be an array or an expression string"
                ))),
            }
        };
        LowerTriModel::new(seq(&self.q_up, "q_up")?, &self.q_low, seq(&self.c, "c")?)
    }
}
