//! Per-neuron test statistics.

use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Standardized mean difference with the equal-n pooled SD
/// `sqrt((s_t^2 + s_n^2) / 2)`. Zero pooled SD yields 0 when the means agree
/// and a signed infinity otherwise.
pub fn cohens_d(temporal: &[f64], numerical: &[f64]) -> Result<f64> {
    if temporal.len() != numerical.len() {
        return Err(Error::structure(format!(
            "conditions have {} and {} stimuli",
            temporal.len(),
            numerical.len()
        )));
    }
    if temporal.len() < 2 {
        return Err(Error::insufficient("effect size needs n >= 2"));
    }
    let (mt, vt) = mean_var(temporal);
    let (mn, vn) = mean_var(numerical);
    let pooled = ((vt + vn) / 2.0).sqrt();
    let diff = mt - mn;
    if pooled == 0.0 {
        return Ok(if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        });
    }
    Ok(diff / pooled)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    /// Two-sided.
    pub p: f64,
    pub df: f64,
}

/// Two-sided Student's t survival probability `P(|T| >= |t|)`.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    if t == 0.0 {
        return 1.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// One-sample t-test of the paired differences against zero.
pub fn paired_t(deltas: &[f64]) -> Result<TTest> {
    let n = deltas.len();
    if n < 2 {
        return Err(Error::insufficient("paired t-test needs n >= 2"));
    }
    let (mean, var) = mean_var(deltas);
    let df = (n - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Ok(if mean == 0.0 {
            TTest { t: 0.0, p: 1.0, df }
        } else {
            TTest {
                t: f64::INFINITY.copysign(mean),
                p: 0.0,
                df,
            }
        });
    }
    let t = mean / (sd / (n as f64).sqrt());
    Ok(TTest {
        t,
        p: t_two_sided_p(t, df),
        df,
    })
}

/// Benjamini-Hochberg step-up adjustment, returned in input order.
pub fn bh_fdr(p: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::domain(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut q = vec![0.0; m];
    let mut running = f64::INFINITY;
    for (rank0, &idx) in order.iter().enumerate().rev() {
        let scaled = p[idx] * m as f64 / (rank0 + 1) as f64;
        running = running.min(scaled);
        // p * m / rank can round below p when rank == m
        q[idx] = running.min(1.0).max(p[idx]);
    }
    Ok(q)
}

/// Fraction of strictly positive differences.
pub fn consistency(deltas: &[f64]) -> f64 {
    if deltas.is_empty() {
        return 0.0;
    }
    deltas.iter().filter(|&&d| d > 0.0).count() as f64 / deltas.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cohens_d_examples() {
        let v = [0.3, 1.2, -4.0, 2.2];
        assert_eq!(cohens_d(&v, &v).unwrap(), 0.0);
        assert!((cohens_d(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cohens_d(&[5.0, 5.0], &[1.0, 1.0]).unwrap(), f64::INFINITY);
        assert_eq!(cohens_d(&[1.0, 1.0], &[5.0, 5.0]).unwrap(), f64::NEG_INFINITY);
        assert!(matches!(cohens_d(&[1.0], &[2.0]), Err(Error::InsufficientData(_))));
        assert!(cohens_d(&[1.0, 2.0], &[2.0]).is_err());
    }

    #[test]
    fn paired_t_examples() {
        let null = paired_t(&[0.0; 4]).unwrap();
        assert_eq!((null.t, null.p), (0.0, 1.0));
        let r = paired_t(&[1.0, 2.0, 3.0]).unwrap();
        assert!((r.t - 12f64.sqrt()).abs() < 1e-12);
        // df = 2 closed form: p = 1 - t / sqrt(2 + t^2)
        let expect = 1.0 - r.t / (2.0 + r.t * r.t).sqrt();
        assert!((r.p - expect).abs() < 1e-12);
        assert!((r.p - 0.0742).abs() < 5e-5);
        let flat = paired_t(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!((flat.t, flat.p), (f64::INFINITY, 0.0));
        assert!(paired_t(&[1.0]).is_err());
    }

    #[test]
    fn bh_examples() {
        assert_eq!(bh_fdr(&[0.05]).unwrap(), vec![0.05]);
        let q = bh_fdr(&[0.01, 0.02, 0.03, 0.04]).unwrap();
        for v in q {
            assert!((v - 0.04).abs() < 1e-15);
        }
        assert_eq!(bh_fdr(&[0.5, 0.5, 0.5]).unwrap(), vec![0.5, 0.5, 0.5]);
        assert!(bh_fdr(&[0.2, 1.5]).is_err());
        assert!(bh_fdr(&[]).unwrap().is_empty());
    }

    #[test]
    fn consistency_examples() {
        assert_eq!(consistency(&[1.0, 2.0, 0.1]), 1.0);
        let mut v = vec![1.0; 19];
        v.push(-1.0);
        assert_eq!(consistency(&v), 0.95);
        assert_eq!(consistency(&[0.0; 5]), 0.0);
    }

    proptest! {
        #[test]
        fn bh_is_monotone(p in proptest::collection::vec(0.0f64..=1.0, 1..200)) {
            let q = bh_fdr(&p).unwrap();
            for a in 0..p.len() {
                prop_assert!(q[a] >= p[a] && q[a] <= 1.0);
                for b in 0..p.len() {
                    if p[a] <= p[b] {
                        prop_assert!(q[a] <= q[b]);
                    }
                }
            }
        }

        #[test]
        fn stats_scale_invariant(
            pairs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..50),
            k in 0.01f64..100.0,
        ) {
            let t: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let n: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let d: Vec<f64> = t.iter().zip(&n).map(|(a, b)| a - b).collect();
            let ts: Vec<f64> = t.iter().map(|v| v * k).collect();
            let ns: Vec<f64> = n.iter().map(|v| v * k).collect();
            let ds: Vec<f64> = ts.iter().zip(&ns).map(|(a, b)| a - b).collect();
            let (d0, d1) = (cohens_d(&t, &n).unwrap(), cohens_d(&ts, &ns).unwrap());
            prop_assert!((d0 - d1).abs() <= 1e-9 * d0.abs().max(1.0));
            let (t0, t1) = (paired_t(&d).unwrap(), paired_t(&ds).unwrap());
            prop_assert!((t0.t - t1.t).abs() <= 1e-8 * t0.t.abs().max(1.0));
            prop_assert!((t0.p - t1.p).abs() <= 1e-9);
            prop_assert_eq!(consistency(&d), consistency(&ds));
        }
    }
}
