//! Dense revised simplex over the multi-index transportation polytope.
//!
//! Variables are index tuples `(a_1, ..., a_n)`; constraints fix every
//! marginal. One constraint per marginal `i >= 1` is redundant, so row
//! `(i, 0)` is dropped for `i >= 1`, leaving `m = sum m_i - n + 1` rows.
//! The starting basis is a north-west staircase, which is triangular in its
//! introduction order; its inverse is then built by back substitution.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct TupleIndex {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl TupleIndex {
    pub(crate) fn new(sizes: &[usize]) -> Self {
        let mut strides = vec![1; sizes.len()];
        for i in (0..sizes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * sizes[i + 1];
        }
        TupleIndex {
            sizes: sizes.to_vec(),
            strides,
            len: sizes.iter().product(),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    pub(crate) fn decode(&self, mut t: usize) -> Vec<usize> {
        let mut idx = vec![0; self.sizes.len()];
        for (i, s) in self.strides.iter().enumerate() {
            idx[i] = t / s;
            t %= s;
        }
        idx
    }

    pub(crate) fn encode(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    /// `(tuple, mass)` for basic variables with positive mass.
    pub support: Vec<(usize, f64)>,
    pub objective: f64,
    /// Per-marginal dual potentials; dropped rows carry 0.
    pub duals: Vec<Vec<f64>>,
    /// Smallest reduced cost over nonbasic tuples (`+inf` if none).
    pub min_nonbasic_reduced_cost: f64,
}

struct Rows {
    /// `row[i][a]`, `None` for the dropped rows.
    row: Vec<Vec<Option<usize>>>,
    m: usize,
}

impl Rows {
    fn new(sizes: &[usize]) -> Self {
        let mut row = Vec::with_capacity(sizes.len());
        let mut m = 0;
        for (i, &s) in sizes.iter().enumerate() {
            let mut r = vec![None; s];
            for (a, slot) in r.iter_mut().enumerate() {
                if i == 0 || a > 0 {
                    *slot = Some(m);
                    m += 1;
                }
            }
            row.push(r);
        }
        Rows { row, m }
    }

    fn of<'a>(&'a self, idx: &'a [usize]) -> impl Iterator<Item = usize> + 'a {
        idx.iter().enumerate().filter_map(|(i, &a)| self.row[i][a])
    }
}

const REFACTOR_EVERY: usize = 100;
const PIVOT_TOL: f64 = 1e-11;

/// Minimizes `sum c_t x_t` subject to the marginal constraints.
/// `masses[i]` must each sum to the same total.
pub(crate) fn solve(
    sizes: &[usize],
    masses: &[Vec<f64>],
    cost: &[f64],
    reduced_tol: f64,
    max_pivots: usize,
) -> Result<LpSolution> {
    let index = TupleIndex::new(sizes);
    let rows = Rows::new(sizes);
    let m = rows.m;
    let n_marg = sizes.len();
    let cscale = cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
    let rtol = reduced_tol * cscale;

    let mut b = vec![0.0; m];
    for (i, ms) in masses.iter().enumerate() {
        for (a, &w) in ms.iter().enumerate() {
            if let Some(r) = rows.row[i][a] {
                b[r] = w;
            }
        }
    }

    // north-west staircase
    let mut basis: Vec<usize> = Vec::with_capacity(m);
    let mut intro: Vec<usize> = Vec::with_capacity(m);
    let mut ptr = vec![0usize; n_marg];
    let mut rem: Vec<f64> = masses.iter().map(|ms| ms[0]).collect();
    basis.push(index.encode(&ptr));
    intro.push(rows.row[0][0].expect("row (0,0) is kept"));
    loop {
        let take = rem.iter().copied().fold(f64::INFINITY, f64::min);
        rem.iter_mut().for_each(|r| *r -= take);
        let i = (0..n_marg)
            .filter(|&i| ptr[i] + 1 < sizes[i])
            .min_by(|&a, &b| rem[a].total_cmp(&rem[b]));
        let Some(i) = i else { break };
        ptr[i] += 1;
        rem[i] += masses[i][ptr[i]];
        basis.push(index.encode(&ptr));
        intro.push(rows.row[i][ptr[i]].expect("advanced rows are kept"));
    }
    debug_assert_eq!(basis.len(), m);

    let column = |t: usize| -> Vec<usize> { rows.of(&index.decode(t)).collect() };
    let mut binv = staircase_inverse(&basis.iter().map(|&t| column(t)).collect::<Vec<_>>(), &intro, m);
    let mut xb = mat_vec(&binv, &b, m);
    let mut in_basis = vec![false; index.len()];
    for &t in &basis {
        in_basis[t] = true;
    }

    let mut pivots = 0;
    let mut y = vec![0.0; m];
    loop {
        // y^T = c_B^T B^{-1}
        y.iter_mut().for_each(|v| *v = 0.0);
        for (s, &t) in basis.iter().enumerate() {
            let c = cost[t];
            if c != 0.0 {
                let row = &binv[s * m..(s + 1) * m];
                for (yr, br) in y.iter_mut().zip(row) {
                    *yr += c * br;
                }
            }
        }
        // Bland: lowest-index improving column
        let entering = (0..index.len())
            .find(|&t| !in_basis[t] && cost[t] - rows.of(&index.decode(t)).map(|r| y[r]).sum::<f64>() < -rtol);
        let Some(q) = entering else { break };
        if pivots >= max_pivots {
            return Err(Error::LpIterationLimit { iterations: pivots });
        }

        let cols = column(q);
        let alpha: Vec<f64> = (0..m).map(|s| cols.iter().map(|&r| binv[s * m + r]).sum()).collect();
        // ratio test, ties to the lowest variable index
        let mut leave: Option<(usize, f64)> = None;
        for s in 0..m {
            if alpha[s] > PIVOT_TOL {
                let ratio = xb[s].max(0.0) / alpha[s];
                leave = match leave {
                    None => Some((s, ratio)),
                    Some((ls, lr)) => {
                        if ratio < lr - 1e-15 || (ratio <= lr + 1e-15 && basis[s] < basis[ls]) {
                            Some((s, ratio))
                        } else {
                            Some((ls, lr))
                        }
                    }
                };
            }
        }
        let Some((p, theta)) = leave else {
            return Err(Error::InvalidInput("transport LP is unbounded".into()));
        };

        for s in 0..m {
            xb[s] -= theta * alpha[s];
        }
        xb[p] = theta;
        let piv = alpha[p];
        let prow: Vec<f64> = binv[p * m..(p + 1) * m].iter().map(|v| v / piv).collect();
        for s in 0..m {
            if s == p || alpha[s] == 0.0 {
                continue;
            }
            let a = alpha[s];
            let row = &mut binv[s * m..(s + 1) * m];
            for (v, pr) in row.iter_mut().zip(&prow) {
                *v -= a * pr;
            }
        }
        binv[p * m..(p + 1) * m].copy_from_slice(&prow);
        in_basis[basis[p]] = false;
        in_basis[q] = true;
        basis[p] = q;
        pivots += 1;

        if pivots % REFACTOR_EVERY == 0 {
            let cols: Vec<Vec<usize>> = basis.iter().map(|&t| column(t)).collect();
            if let Some(inv) = dense_inverse(&cols, m) {
                binv = inv;
                xb = mat_vec(&binv, &b, m);
            }
        }
    }

    if let Some(x) = xb.iter().copied().find(|&x| x < -1e-9) {
        return Err(Error::InvalidInput(format!("transport LP lost feasibility ({x:e})")));
    }
    let mut min_red = f64::INFINITY;
    for t in 0..index.len() {
        if !in_basis[t] {
            let red = cost[t] - rows.of(&index.decode(t)).map(|r| y[r]).sum::<f64>();
            min_red = min_red.min(red);
        }
    }
    let duals = rows
        .row
        .iter()
        .map(|r| r.iter().map(|slot| slot.map_or(0.0, |k| y[k])).collect())
        .collect();
    let total: f64 = b.iter().take(sizes[0]).sum();
    let floor = 1e-14 * total.max(1.0);
    let mut support: Vec<(usize, f64)> = basis
        .iter()
        .zip(&xb)
        .filter(|(_, &x)| x > floor)
        .map(|(&t, &x)| (t, x))
        .collect();
    support.sort_by_key(|(t, _)| *t);
    let objective = support.iter().map(|(t, x)| cost[*t] * x).sum();
    Ok(LpSolution {
        support,
        objective,
        duals,
        min_nonbasic_reduced_cost: min_red,
    })
}

fn mat_vec(a: &[f64], x: &[f64], m: usize) -> Vec<f64> {
    (0..m)
        .map(|s| a[s * m..(s + 1) * m].iter().zip(x).map(|(u, v)| u * v).sum())
        .collect()
}

/// Inverse of a basis whose column `s` has a 1 in row `intro[s]` and its
/// other ones only in rows introduced earlier.
fn staircase_inverse(cols: &[Vec<usize>], intro: &[usize], m: usize) -> Vec<f64> {
    // B x = e_r for all r at once: row s of B^{-1} is x_s over all r.
    // Solving from the last column back: x_s = e_{intro[s]} - sum of later
    // columns' contributions to row intro[s].
    let mut inv = vec![0.0; m * m];
    let mut acc = vec![0.0; m * m];
    for s in (0..m).rev() {
        let r = intro[s];
        let mut xs: Vec<f64> = acc[r * m..(r + 1) * m].iter().map(|v| -v).collect();
        xs[r] += 1.0;
        for &q in &cols[s] {
            if q != r {
                for (a, v) in acc[q * m..(q + 1) * m].iter_mut().zip(&xs) {
                    *a += v;
                }
            }
        }
        inv[s * m..(s + 1) * m].copy_from_slice(&xs);
    }
    inv
}

fn dense_inverse(cols: &[Vec<usize>], m: usize) -> Option<Vec<f64>> {
    let mut b = nalgebra::DMatrix::<f64>::zeros(m, m);
    for (s, col) in cols.iter().enumerate() {
        for &r in col {
            b[(r, s)] = 1.0;
        }
    }
    let inv = b.try_inverse()?;
    let mut out = vec![0.0; m * m];
    for s in 0..m {
        for r in 0..m {
            out[s * m + r] = inv[(s, r)];
        }
    }
    Some(out)
}
