// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finitely supported probability mass function on `ℤ^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    atoms: Vec<(Vec<i64>, f64)>,
}

impl Pmf {
    /// Builds a PMF, dropping zero-weight atoms. Offsets must be distinct
    /// and share one dimension; weights must sum to one within `1e-12`.
    pub fn new(atoms: Vec<(Vec<i64>, f64)>) -> Result<Self> {
        let atoms: Vec<_> = atoms.into_iter().filter(|(_, w)| *w != 0.0).collect();
        let Some(d) = atoms.first().map(|a| a.0.len()) else {
            return Err(Error::InvalidArgument("empty pmf".into()));
        };
        for (i, (k, w)) in atoms.iter().enumerate() {
            if k.len() != d {
                return Err(Error::InvalidArgument("mixed offset dimensions".into()));
            }
            if !(*w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!("weight {w} not positive")));
            }
            if atoms[..i].iter().any(|(k2, _)| k2 == k) {
                return Err(Error::InvalidArgument(format!("duplicate offset {k:?}")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("weights sum to {total}")));
        }
        Ok(Pmf { atoms })
    }

    pub fn dirac(offset: Vec<i64>) -> Self {
        Pmf { atoms: vec![(offset, 1.0)] }
    }

    pub fn atoms(&self) -> &[(Vec<i64>, f64)] {
        &self.atoms
    }

    pub fn dimension(&self) -> usize {
        self.atoms[0].0.len()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dimension()];
        for (k, w) in &self.atoms {
            for (mi, ki) in m.iter_mut().zip(k) {
                *mi += *ki as f64 * w;
            }
        }
        m
    }

    pub fn mass_at(&self, offset: &[i64]) -> f64 {
        self.atoms.iter().filter(|(k, _)| k == offset).map(|a| a.1).sum()
    }

    /// `Σ ‖k‖^p μ(k)` with the Euclidean norm.
    pub fn abs_moment(&self, p: f64) -> f64 {
        self.atoms
            .iter()
            .map(|(k, w)| {
                let n2: f64 = k.iter().map(|&x| (x as f64).powi(2)).sum();
                n2.sqrt().powf(p) * w
            })
            .sum()
    }

    /// Second-moment matrix `Σ k kᵗ μ(k)`, row-major.
    pub fn second_moment(&self) -> Vec<f64> {
        let d = self.dimension();
        let mut m = vec![0.0; d * d];
        for (k, w) in &self.atoms {
            for i in 0..d {
                for j in 0..d {
                    m[i * d + j] += (k[i] * k[j]) as f64 * w;
                }
            }
        }
        m
    }

    /// Largest `|coordinate|` over the support.
    pub fn max_support(&self) -> i64 {
        self.atoms.iter().flat_map(|(k, _)| k.iter().map(|x| x.abs())).max().unwrap_or(0)
    }
}

/// Transition data of one horizontal layer `ℤ^d × {n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub n: i64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub mu: Pmf,
    /// Mean of `mu`.
    pub eps: Vec<f64>,
    /// Set when the drift model asked for more than the support bound allows.
    pub clamped: bool,
}

impl Stratum {
    /// `a_n = q_n / p_n`.
    pub fn ratio(&self) -> f64 {
        self.q / self.p
    }

    /// First coordinate of the drift (the only one when `d = 1`).
    pub fn drift(&self) -> f64 {
        self.eps[0]
    }

    pub fn dimension(&self) -> usize {
        self.eps.len()
    }
}

/// Jump law with mean `eps·e_1` built from unit steps, or from the two
/// integers bracketing `eps` when `|eps| > 1` and `d = 1`.
pub(crate) fn unit_step_pmf(d: usize, eps: f64) -> Pmf {
    let e = |i: usize, s: i64| {
        let mut v = vec![0i64; d];
        v[i] = s;
        v
    };
    if d == 1 {
        let a = eps.abs();
        if a <= 1.0 {
            return Pmf::new(vec![(vec![1], (1.0 + eps) / 2.0), (vec![-1], (1.0 - eps) / 2.0)]).expect("unit-step pmf");
        }
        let s = eps.signum() as i64;
        let k = a.floor();
        let frac = a - k;
        return Pmf::new(vec![(vec![s * k as i64], 1.0 - frac), (vec![s * (k as i64 + 1)], frac)])
            .expect("bracketing pmf");
    }
    let w = 1.0 / (2.0 * d as f64);
    let mut atoms = vec![(e(0, 1), w * (1.0 + d as f64 * eps)), (e(0, -1), w * (1.0 - d as f64 * eps))];
    for i in 1..d {
        atoms.push((e(i, 1), w));
        atoms.push((e(i, -1), w));
    }
    Pmf::new(atoms).expect("unit-step pmf")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_step_means() {
        for &eps in &[0.0, 0.3, -0.7, 1.0, -1.0, 2.5, -3.0] {
            let p = unit_step_pmf(1, eps);
            assert!((p.mean()[0] - eps).abs() < 1e-12, "eps {eps}");
        }
        let p = unit_step_pmf(2, 0.25);
        let m = p.mean();
        assert!((m[0] - 0.25).abs() < 1e-12 && m[1].abs() < 1e-15);
        assert_eq!(unit_step_pmf(1, 1.0).atoms().len(), 1);
    }

    #[test]
    fn pmf_rejects_bad_input() {
        assert!(Pmf::new(vec![(vec![1], 0.5), (vec![1], 0.5)]).is_err());
        assert!(Pmf::new(vec![(vec![1], 0.5), (vec![-1], 0.4)]).is_err());
        assert!(Pmf::new(vec![(vec![1], 1.5), (vec![-1], -0.5)]).is_err());
        assert!(Pmf::new(vec![]).is_err());
    }

    #[test]
    fn moments() {
        let p = Pmf::new(vec![(vec![1, 0], 0.5), (vec![-1, 0], 0.5)]).unwrap();
        assert_eq!(p.second_moment(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.abs_moment(3.0), 1.0);
        assert_eq!(p.max_support(), 1);
    }
}
