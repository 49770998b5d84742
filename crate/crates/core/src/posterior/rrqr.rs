use crate::error::{Error, Result};

/// Column-pivoted Householder QR of the `n x K` matrix whose columns are
/// `cols`; returns the first `r` pivot columns in pivot order.
///
/// At each step the column with the largest residual norm (after removing
/// the span of earlier pivots) is chosen; ties go to the lower index.
/// Residual norms are recomputed rather than downdated.
pub fn rrqr_select(cols: &[Vec<f64>], r: usize) -> Result<Vec<usize>> {
    let k = cols.len();
    if r < 1 || r > k {
        return Err(Error::invalid(format!("rank {r} outside 1..={k}")));
    }
    let n = cols[0].len();
    if cols.iter().any(|c| c.len() != n) {
        return Err(Error::shape("rrqr", "snapshot columns differ in length"));
    }
    let mut a: Vec<Vec<f64>> = cols.to_vec();
    let mut order: Vec<usize> = (0..k).collect();
    for step in 0..r.min(n) {
        let norm2 = |c: &Vec<f64>| c[step..].iter().map(|v| v * v).sum::<f64>();
        let mut best = step;
        let mut best_norm = norm2(&a[step]);
        for j in step + 1..k {
            let v = norm2(&a[j]);
            if v > best_norm || (v == best_norm && order[j] < order[best]) {
                best = j;
                best_norm = v;
            }
        }
        a.swap(step, best);
        order.swap(step, best);
        // Householder reflector zeroing a[step][step+1..].
        let alpha = a[step][step];
        let norm = best_norm.sqrt();
        if norm == 0.0 {
            continue;
        }
        let beta = if alpha >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[step][step..].to_vec();
        v[0] -= beta;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        for col in a.iter_mut().skip(step) {
            let d: f64 = v.iter().zip(&col[step..]).map(|(x, y)| x * y).sum();
            let f = 2.0 * d / vv;
            for (c, x) in col[step..].iter_mut().zip(&v) {
                *c -= f * x;
            }
        }
    }
    // Past the row count every residual is zero; keep the remaining order.
    Ok(order[..r].to_vec())
}
