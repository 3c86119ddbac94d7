//! Shannon and Rényi entropies and escort distributions, in bits.

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-9;

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Domain("empty distribution".into()));
    }
    if let Some(bad) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Domain(format!("invalid probability {bad}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::Domain(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// `-sum p log2 p` with `0 log 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    check_distribution(p)?;
    Ok(shannon_unchecked(p))
}

pub(crate) fn shannon_unchecked(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.log2())
        .sum::<f64>()
}

/// `S_q = log2(sum p^q) / (1 - q)`. `q == 1` returns the Shannon entropy.
pub fn renyi_entropy(p: &[f64], q: f64) -> Result<f64> {
    if !(q.is_finite() && q > 0.0) {
        return Err(Error::Domain(format!("Renyi order must be > 0, got {q}")));
    }
    check_distribution(p)?;
    if q == 1.0 {
        return Ok(shannon_unchecked(p));
    }
    Ok(renyi_unchecked(p, q))
}

pub(crate) fn renyi_unchecked(p: &[f64], q: f64) -> f64 {
    let s: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| v.powf(q)).sum();
    s.log2() / (1.0 - q)
}

/// Escort (zooming) distribution `p^q / sum p^q`.
pub fn escort(p: &[f64], q: f64) -> Result<Vec<f64>> {
    if !(q.is_finite() && q > 0.0) {
        return Err(Error::Domain(format!("escort order must be > 0, got {q}")));
    }
    if let Some(bad) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Domain(format!("invalid probability {bad}")));
    }
    let powered: Vec<f64> = p
        .iter()
        .map(|&v| if v > 0.0 { v.powf(q) } else { 0.0 })
        .collect();
    let z: f64 = powered.iter().sum();
    if z == 0.0 {
        return Err(Error::Domain("escort of an all-zero vector".into()));
    }
    Ok(powered.into_iter().map(|v| v / z).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_dist(rng: &mut impl Rng, k: usize) -> Vec<f64> {
        let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    }

    #[test]
    fn shannon_examples() {
        assert_eq!(shannon_entropy(&[0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(shannon_entropy(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(shannon_entropy(&[0.25; 4]).unwrap(), 2.0);
    }

    #[test]
    fn invalid_distributions() {
        assert!(shannon_entropy(&[0.5, 0.6]).is_err());
        assert!(shannon_entropy(&[1.5, -0.5]).is_err());
        assert!(renyi_entropy(&[0.5, 0.5], 0.0).is_err());
        assert!(renyi_entropy(&[0.5, 0.5], -1.0).is_err());
        assert!(escort(&[0.0, 0.0], 0.5).is_err());
        assert!(escort(&[0.5, 0.5], 0.0).is_err());
    }

    #[test]
    fn renyi_uniform_and_coin() {
        for q in [0.3, 0.75, 2.0, 5.0] {
            let h = renyi_entropy(&[0.2; 5], q).unwrap();
            assert!((h - 5f64.log2()).abs() < 1e-12);
        }
        assert!((renyi_entropy(&[0.5, 0.5], 2.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn renyi_limit_is_shannon() {
        let mut rng = seeds::rng(4);
        for _ in 0..20 {
            let p = random_dist(&mut rng, 6);
            let h = shannon_entropy(&p).unwrap();
            for q in [1.0 - 1e-6, 1.0 + 1e-6] {
                assert!((renyi_entropy(&p, q).unwrap() - h).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn escort_examples() {
        let p = [0.2, 0.3, 0.5];
        let e = escort(&p, 1.0).unwrap();
        for (a, b) in e.iter().zip(&p) {
            assert!((a - b).abs() < 1e-15);
        }
        // sqrt(0.9) / (sqrt(0.9) + sqrt(0.1)) = 3 / 4 exactly.
        let e = escort(&[0.9, 0.1], 0.5).unwrap();
        assert!((e[0] - 0.75).abs() < 1e-12 && (e[1] - 0.25).abs() < 1e-12);
        let e = escort(&[0.25; 4], 3.0).unwrap();
        assert!(e.iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    proptest! {
        #[test]
        fn escort_group_property(
            w in prop::collection::vec(0.01f64..1.0, 2..8),
            a in 0.2f64..3.0,
            b in 0.2f64..3.0,
        ) {
            let s: f64 = w.iter().sum();
            let p: Vec<f64> = w.iter().map(|v| v / s).collect();
            let twice = escort(&escort(&p, a).unwrap(), b).unwrap();
            let once = escort(&p, a * b).unwrap();
            for (x, y) in twice.iter().zip(&once) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn renyi_non_increasing_in_q(
            w in prop::collection::vec(0.0f64..1.0, 2..8),
            q1 in 0.1f64..4.0,
            dq in 0.0f64..3.0,
        ) {
            let s: f64 = w.iter().sum();
            prop_assume!(s > 0.0);
            let p: Vec<f64> = w.iter().map(|v| v / s).collect();
            let q2 = q1 + dq;
            prop_assume!(q1 != 1.0 && q2 != 1.0);
            let h1 = renyi_entropy(&p, q1).unwrap();
            let h2 = renyi_entropy(&p, q2).unwrap();
            prop_assert!(h2 <= h1 + 1e-12, "S_{} = {} > S_{} = {}", q2, h2, q1, h1);
        }

        #[test]
        fn shannon_bounded(w in prop::collection::vec(0.0f64..1.0, 1..10)) {
            let s: f64 = w.iter().sum();
            prop_assume!(s > 0.0);
            let p: Vec<f64> = w.iter().map(|v| v / s).collect();
            let h = shannon_entropy(&p).unwrap();
            prop_assert!(h >= 0.0 && h <= (p.len() as f64).log2() + 1e-12);
        }
    }
}
