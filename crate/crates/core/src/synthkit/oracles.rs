//! Slow, direct transcriptions of the formulas the library computes.
//! Nothing here calls into the production modules.

use nalgebra::DMatrix;

/// Full `(m+1) x (n+1)` edit-distance table.
pub fn oracle_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in t.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        t[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = t[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            t[i][j] = sub.min(t[i - 1][j] + 1).min(t[i][j - 1] + 1);
        }
    }
    t[a.len()][b.len()]
}

/// `(slope, intercept, r2)` from the raw-sum normal equations solved by
/// Cramer's rule.
pub fn oracle_ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    // [n  sx ] [b]   [sy ]
    // [sx sxx] [a] = [sxy]
    let det = n * sxx - sx * sx;
    let intercept = (sy * sxx - sx * sxy) / det;
    let slope = (n * sxy - sx * sy) / det;
    let ybar = sy / n;
    let ss_tot: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    (slope, intercept, 1.0 - ss_res / ss_tot)
}

/// Student's t CDF for integer degrees of freedom via the closed-form
/// trigonometric series (Abramowitz & Stegun 26.7.3 / 26.7.4).
pub fn oracle_t_cdf(t: f64, df: u32) -> f64 {
    assert!(df >= 1);
    let theta = (t.abs() / f64::from(df).sqrt()).atan();
    let (s, c) = theta.sin_cos();
    let c2 = c * c;
    // a = P(|T| <= |t|)
    let a = if df % 2 == 1 {
        let mut sum = 0.0;
        if df > 1 {
            let mut term = c;
            sum = term;
            let mut k = 2;
            while k + 1 < df {
                term *= c2 * f64::from(k) / f64::from(k + 1);
                sum += term;
                k += 2;
            }
        }
        2.0 / std::f64::consts::PI * (theta + s * sum)
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1;
        while k + 1 < df {
            term *= c2 * f64::from(k) / f64::from(k + 1);
            sum += term;
            k += 2;
        }
        s * sum
    };
    if t >= 0.0 {
        0.5 + a / 2.0
    } else {
        0.5 - a / 2.0
    }
}

/// Two-sided p-value `2 * (1 - F(|t|))` from [`oracle_t_cdf`].
pub fn oracle_t_two_sided(t: f64, df: u32) -> f64 {
    2.0 * (1.0 - oracle_t_cdf(t.abs(), df))
}

/// Benjamini-Hochberg by definition: for the value at sorted rank `k`,
/// `min_{l >= k} p_(l) * m / l`, capped at 1. Quadratic time.
pub fn oracle_bh(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut sorted: Vec<(f64, usize)> = p.iter().copied().zip(0..).collect();
    // insertion sort, stable on ties
    for i in 1..m {
        let mut j = i;
        while j > 0 && sorted[j - 1].0 > sorted[j].0 {
            sorted.swap(j - 1, j);
            j -= 1;
        }
    }
    let mut q = vec![0.0; m];
    for k in 0..m {
        let mut best = f64::INFINITY;
        for (l, &(v, _)) in sorted.iter().enumerate().skip(k) {
            let scaled = v * m as f64 / (l + 1) as f64;
            if scaled < best {
                best = scaled;
            }
        }
        let capped = if best > 1.0 { 1.0 } else { best };
        // never below the raw value
        q[sorted[k].1] = if capped < sorted[k].0 { sorted[k].0 } else { capped };
    }
    q
}

/// Raw stress `sum_{i<j} (d_ij - dist_ij)^2`.
fn raw_stress(d: &DMatrix<f64>, z: &DMatrix<f64>) -> f64 {
    let n = d.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = (z.row(i) - z.row(j)).norm();
            s += (d[(i, j)] - dist).powi(2);
        }
    }
    s
}

/// SMACOF with the textbook update `X = V^+ B(Z) Z`, where `V` is built
/// from unit weights and inverted with a pseudo-inverse. Stops when the
/// relative raw-stress decrease falls below `tol`. Returns coordinates and
/// Kruskal stress-1.
pub fn oracle_smacof(d: &[Vec<f64>], start: &[Vec<f64>], tol: f64, max_iter: usize) -> (Vec<Vec<f64>>, f64) {
    let n = d.len();
    let k = start.first().map_or(0, Vec::len);
    let dm = DMatrix::from_fn(n, n, |i, j| d[i][j]);
    let mut z = DMatrix::from_fn(n, k, |i, a| start[i][a]);
    let mut v = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            v[(i, j)] = if i == j { (n - 1) as f64 } else { -1.0 };
        }
    }
    let v_plus = v.pseudo_inverse(1e-10).expect("pseudo-inverse");
    let mut stress = raw_stress(&dm, &z);
    for _ in 0..max_iter {
        let mut b = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let dist = (z.row(i) - z.row(j)).norm();
                    if dist > 0.0 {
                        b[(i, j)] = -dm[(i, j)] / dist;
                    }
                }
            }
        }
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| b[(i, j)]).sum();
            b[(i, i)] = -off;
        }
        z = &v_plus * &b * &z;
        let next = raw_stress(&dm, &z);
        let done = stress - next <= tol * next;
        stress = next;
        if done || stress == 0.0 {
            break;
        }
    }
    let mut norm = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            norm += dm[(i, j)] * dm[(i, j)];
        }
    }
    let coords = (0..n).map(|i| (0..k).map(|a| z[(i, a)]).collect()).collect();
    let stress1 = if norm == 0.0 { 0.0 } else { (stress / norm).sqrt() };
    (coords, stress1)
}

/// Mean off-diagonal similarity in each full `w x w` block centered on the
/// diagonal, skipping missing cells. `cells` is row-major `n x n`.
/// Returns `(center index, mean)` for centers with at least one cell.
pub fn oracle_window(cells: &[Option<f64>], n: usize, w: usize) -> Vec<(usize, f64)> {
    let h = w / 2;
    let mut out = Vec::new();
    for c in 0..n {
        if c < h || c + h >= n {
            continue;
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for i in (c - h)..(c + h + 1) {
            for j in (c - h)..(c + h + 1) {
                if i != j {
                    if let Some(v) = cells[i * n + j] {
                        total += v;
                        count += 1;
                    }
                }
            }
        }
        if count > 0 {
            out.push((c, total / count as f64));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_examples() {
        assert_eq!(oracle_levenshtein("kitten", "sitting"), 3);
        assert_eq!(oracle_levenshtein("", "abc"), 3);
        for df in 1..30 {
            assert!((oracle_t_cdf(0.0, df) - 0.5).abs() < 1e-15);
        }
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (a, b, r2) = oracle_ols(&x, &y);
        assert!((a - 2.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
        // df = 1 is Cauchy
        let t: f64 = 1.7;
        let cauchy = 0.5 + t.atan() / std::f64::consts::PI;
        assert!((oracle_t_cdf(t, 1) - cauchy).abs() < 1e-15);
        // df = 2 closed form
        let f2 = 0.5 + t / (2.0 * (2.0 + t * t).sqrt());
        assert!((oracle_t_cdf(t, 2) - f2).abs() < 1e-15);
        assert_eq!(oracle_bh(&[0.01, 0.02, 0.03, 0.04]), vec![0.04; 4]);
    }
}
