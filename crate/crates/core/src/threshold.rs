//! Row/column hard thresholding `T_θ`.
//!
//! An entry is "in the top of its row" when it is among the `⌊θ·cols⌋`
//! largest magnitudes of that row (and likewise for columns with
//! `⌊θ·rows⌋`). Ties are broken by row-major linear index, lower index
//! ranking higher, so the top sets are always exactly `k` entries long.


use nalgebra::DMatrix;

use crate::model::KeepRule;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdSpec {
    theta: f64,
    pub keep_rule: KeepRule,
}

impl ThresholdSpec {
    /// `theta` is clamped to `[0, 1]`.
    pub fn new(theta: f64, keep_rule: KeepRule) -> Self {
        Self {
            theta: clamp_fraction(theta),
            keep_rule,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

fn clamp_fraction(t: f64) -> f64 {
    if t.is_nan() {
        0.0
    } else {
        t.clamp(0.0, 1.0)
    }
}

/// Number of entries kept on a line of length `len`.
pub fn top_count(theta: f64, len: usize) -> usize {
    ((clamp_fraction(theta) * len as f64).floor() as usize).min(len)
}

/// Descent-phase threshold `min(α + min(10α, 0.1), 1)`.
pub fn threshold_value(alpha: f64) -> f64 {
    clamp_fraction(alpha + (10.0 * alpha).min(0.1))
}

/// Sets `flags[idx] = 1` for the `k` largest entries of one line of
/// magnitudes, given in increasing linear-index order; ties at the cut go to
/// the earliest. Other flags are left untouched.
///
/// Magnitudes are compared through their bit patterns, which order
/// non-negative floats the same way.
fn mark_top(line: &[u64], k: usize, scratch: &mut Vec<u64>, flags: &mut [u8]) {
    if k == 0 {
        return;
    }
    if k >= line.len() {
        flags.iter_mut().for_each(|f| *f = 1);
        return;
    }
    scratch.clear();
    scratch.extend_from_slice(line);
    let (_, &mut cut, _) = scratch.select_nth_unstable_by(k - 1, |a, b| b.cmp(a));
    let mut above = 0;
    for (f, &v) in flags.iter_mut().zip(line) {
        let hit = (v > cut) as u8;
        *f |= hit;
        above += hit as usize;
    }
    let mut ties = k - above;
    for (f, &v) in flags.iter_mut().zip(line) {
        if ties == 0 {
            break;
        }
        if v == cut {
            *f = 1;
            ties -= 1;
        }
    }
}

/// Applies `T_θ` to `a`.
pub fn threshold(a: &DMatrix<f64>, spec: ThresholdSpec) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    threshold_into(a, spec, &mut out, &mut ThresholdWorkspace::default());
    out
}

/// Reusable buffers for [`threshold_into`].
#[derive(Clone, Debug, Default)]
pub struct ThresholdWorkspace {
    mags: Vec<u64>,
    by_row: Vec<u64>,
    col_flags: Vec<u8>,
    row_flags: Vec<u8>,
    scratch: Vec<u64>,
}

/// [`threshold`] writing into `out`, which must have the shape of `a`.
pub fn threshold_into(a: &DMatrix<f64>, spec: ThresholdSpec, out: &mut DMatrix<f64>, ws: &mut ThresholdWorkspace) {
    let (rows, cols) = a.shape();
    assert_eq!(out.shape(), (rows, cols), "output shape mismatch");
    let k_row = top_count(spec.theta, cols);
    let k_col = top_count(spec.theta, rows);
    if k_row == cols && k_col == rows {
        out.copy_from(a);
        return;
    }
    // storage is column-major: pos = i + j*rows; along a row or a column
    // the row-major linear index increases with position
    let data = a.as_slice();
    let ThresholdWorkspace {
        mags,
        by_row,
        col_flags,
        row_flags,
        scratch,
    } = ws;
    mags.clear();
    mags.extend(data.iter().map(|v| v.abs().to_bits()));
    by_row.clear();
    by_row.resize(rows * cols, 0);
    const BLOCK: usize = 32;
    for jb in (0..cols).step_by(BLOCK) {
        for ib in (0..rows).step_by(BLOCK) {
            for j in jb..(jb + BLOCK).min(cols) {
                for i in ib..(ib + BLOCK).min(rows) {
                    by_row[i * cols + j] = mags[i + j * rows];
                }
            }
        }
    }
    // row flags are stored row-major, column flags column-major
    row_flags.clear();
    row_flags.resize(rows * cols, 0);
    col_flags.clear();
    col_flags.resize(rows * cols, 0);
    for i in 0..rows {
        let span = i * cols..(i + 1) * cols;
        mark_top(&by_row[span.clone()], k_row, scratch, &mut row_flags[span]);
    }
    for j in 0..cols {
        let span = j * rows..(j + 1) * rows;
        mark_top(&mags[span.clone()], k_col, scratch, &mut col_flags[span]);
    }

    let both = spec.keep_rule == KeepRule::KeepIfAboveBoth;
    let out = out.as_mut_slice();
    for jb in (0..cols).step_by(BLOCK) {
        for ib in (0..rows).step_by(BLOCK) {
            for j in jb..(jb + BLOCK).min(cols) {
                for i in ib..(ib + BLOCK).min(rows) {
                    let pos = i + j * rows;
                    let (r, c) = (row_flags[i * cols + j], col_flags[pos]);
                    let keep = if both { r & c } else { r | c };
                    out[pos] = if keep != 0 { data[pos] } else { 0.0 };
                }
            }
        }
    }
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::*;

    /// Sorts every row and column in full and ranks entries explicitly.
    pub fn brute_force(a: &DMatrix<f64>, theta: f64, rule: KeepRule) -> DMatrix<f64> {
        let (rows, cols) = a.shape();
        let k_row = (theta * cols as f64).floor() as usize;
        let k_col = (theta * rows as f64).floor() as usize;
        let rank_in = |cells: Vec<(usize, usize)>| -> Vec<((usize, usize), usize)> {
            let mut sorted = cells;
            sorted.sort_by(|&(i1, j1), &(i2, j2)| {
                let (v1, v2) = (a[(i1, j1)].abs(), a[(i2, j2)].abs());
                v2.partial_cmp(&v1)
                    .unwrap()
                    .then((i1 * cols + j1).cmp(&(i2 * cols + j2)))
            });
            sorted.into_iter().enumerate().map(|(r, c)| (c, r)).collect()
        };
        let mut row_rank = vec![vec![0usize; cols]; rows];
        let mut col_rank = vec![vec![0usize; cols]; rows];
        for i in 0..rows {
            for ((ii, jj), r) in rank_in((0..cols).map(|j| (i, j)).collect()) {
                row_rank[ii][jj] = r;
            }
        }
        for j in 0..cols {
            for ((ii, jj), r) in rank_in((0..rows).map(|i| (i, j)).collect()) {
                col_rank[ii][jj] = r;
            }
        }
        DMatrix::from_fn(rows, cols, |i, j| {
            let top_r = row_rank[i][j] < k_row;
            let top_c = col_rank[i][j] < k_col;
            let keep = match rule {
                KeepRule::ZeroIfBelowBoth => top_r || top_c,
                KeepRule::KeepIfAboveBoth => top_r && top_c,
            };
            if keep {
                a[(i, j)]
            } else {
                0.0
            }
        })
    }
}
