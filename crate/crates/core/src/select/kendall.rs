//! Kendall's tau-b with an O(n log n) pair count and a normal-approximation
//! p-value using the tie-corrected variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KendallTau {
    pub tau: f64,
    pub p_value: f64,
}

/// Σ over tie groups of `f(t)` for a sorted slice.
fn tie_sums(sorted: &[f64]) -> (f64, f64, f64) {
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for g in sorted.chunk_by(|x, y| x == y) {
        let t = g.len() as f64;
        a += t * (t - 1.0) / 2.0;
        b += t * (t - 1.0) * (t - 2.0);
        c += t * (t - 1.0) * (2.0 * t + 5.0);
    }
    (a, b, c)
}

/// Counts inversions while merge-sorting `v`.
fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

fn finish(n: usize, s: f64, n0: f64, x_ties: f64, y_ties: f64, x: &[f64], y: &[f64]) -> Result<KendallTau> {
    let denom = ((n0 - x_ties) * (n0 - y_ties)).sqrt();
    if denom == 0.0 {
        return Err(Error::Degenerate("one ranking is constant".into()));
    }
    let tau = (s / denom).clamp(-1.0, 1.0);
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (_, x2, x3) = tie_sums(&xs);
    let (_, y2, y3) = tie_sums(&ys);
    let nf = n as f64;
    let mut var = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - x3 - y3) / 18.0;
    if n > 2 {
        var += x2 * y2 / (9.0 * nf * (nf - 1.0) * (nf - 2.0));
    }
    var += 2.0 * x_ties * 2.0 * y_ties / (2.0 * nf * (nf - 1.0));
    let p_value = if var > 0.0 {
        libm::erfc((s / var.sqrt()).abs() / std::f64::consts::SQRT_2).min(1.0)
    } else {
        1.0
    };
    Ok(KendallTau { tau, p_value })
}

fn check(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter("rankings differ in length".into()));
    }
    if x.len() < 2 {
        return Err(Error::InvalidParameter("kendall tau needs at least 2 items".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Tau-b between paired scores `x[i]`, `y[i]`.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<KendallTau> {
    check(x, y)?;
    let n = x.len();
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n0 = (n * (n - 1) / 2) as f64;
    let mut x_ties = 0.0;
    for g in pairs.chunk_by(|a, b| a.0 == b.0) {
        let t = g.len() as f64;
        x_ties += t * (t - 1.0) / 2.0;
    }
    let mut joint = 0.0;
    for g in pairs.chunk_by(|a, b| a == b) {
        let t = g.len() as f64;
        joint += t * (t - 1.0) / 2.0;
    }
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = merge_count(&mut ys, &mut Vec::with_capacity(n)) as f64;
    let (y_ties, _, _) = tie_sums(&ys);
    // concordant − discordant
    let s = n0 - x_ties - y_ties + joint - 2.0 * swaps;
    finish(n, s, n0, x_ties, y_ties, x, y)
}

/// O(n²) reference implementation.
pub fn kendall_tau_brute(x: &[f64], y: &[f64]) -> Result<KendallTau> {
    check(x, y)?;
    let n = x.len();
    let (mut s, mut x_ties, mut y_ties) = (0i64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let a = (x[i] - x[j]).signum() * ((x[i] != x[j]) as i32 as f64);
            let b = (y[i] - y[j]).signum() * ((y[i] != y[j]) as i32 as f64);
            s += (a * b) as i64;
            x_ties += (x[i] == x[j]) as u64;
            y_ties += (y[i] == y[j]) as u64;
        }
    }
    let n0 = (n * (n - 1) / 2) as f64;
    finish(n, s as f64, n0, x_ties as f64, y_ties as f64, x, y)
}
