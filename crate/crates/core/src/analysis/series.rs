// SPDX-License-Identifier: Apache-2.0

//! Criterion series evaluated on the geometric grid `n = K^j`.

use serde::{Deserialize, Serialize};

use super::inverse::{drift_mass_inverse, phi_inverse, PhiKind};
use super::phi::{drift_mass, phi_plus, phi_str, phi_sym};
use super::tables::PotentialTables;
use crate::error::{Error, Result};
use crate::numerics::{LogSum, SignedLog, EXACT_INT_LMAG};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub k: u64,
    pub j_max: u32,
}

impl GridSpec {
    pub fn new(k: u64, j_max: u32) -> Result<Self> {
        if k < 3 {
            return Err(Error::InvalidArgument(format!("grid base {k} below 3")));
        }
        if j_max < 1 {
            return Err(Error::InvalidArgument("empty grid".into()));
        }
        Ok(GridSpec { k, j_max })
    }

    /// Grid for the environment's `η` reaching as far as the window allows.
    pub fn auto(t: &PotentialTables) -> Result<Self> {
        let k = default_grid_base(t.eta());
        let j_max = ((t.scale_cap().lmag() / (k as f64).ln()).ceil() as i64 - 1).max(1) as u32;
        let mut g = GridSpec::new(k, j_max)?;
        while g.j_max > 1 && g.scale(g.j_max) >= t.scale_cap() {
            g.j_max -= 1;
        }
        Ok(g)
    }

    /// Checks `K > 2(1 + 1/η)`.
    pub fn validate_for(&self, eta: f64) -> Result<()> {
        if (self.k as f64) <= 2.0 * (1.0 + 1.0 / eta) {
            return Err(Error::InvalidArgument(format!(
                "grid base {} must exceed 2(1+1/η) = {}",
                self.k,
                2.0 * (1.0 + 1.0 / eta)
            )));
        }
        Ok(())
    }

    /// `K^j`, exact while below `2^40`.
    pub fn scale(&self, j: u32) -> SignedLog {
        let lmag = j as f64 * (self.k as f64).ln();
        if lmag < EXACT_INT_LMAG - 1e-9 {
            if let Some(v) = self.k.checked_pow(j) {
                return SignedLog::from_u64(v);
            }
        }
        SignedLog::from_log(lmag)
    }

    /// `Σ_{K^j ≤ n < K^{j+1}} 1/n`.
    pub fn cell_weight(&self, j: u32) -> f64 {
        harmonic_cell(self.k, j)
    }

    pub fn points(&self) -> std::ops::RangeInclusive<u32> {
        1..=self.j_max
    }
}

/// Smallest integer above `2(1 + 1/η)`.
pub fn default_grid_base(eta: f64) -> u64 {
    (2.0 * (1.0 + 1.0 / eta)).floor() as u64 + 1
}

fn harmonic_cell(k: u64, j: u32) -> f64 {
    let lo = (k as f64).powi(j as i32);
    if lo < 1e5 {
        let (lo, hi) = (k.pow(j), k.pow(j + 1));
        // small terms first
        return (lo..hi).rev().map(|n| 1.0 / n as f64).sum();
    }
    // ψ(K·a) − ψ(a) from the asymptotic expansion of the digamma function
    let a = lo;
    let b = lo * k as f64;
    let tail = |x: f64| -1.0 / (2.0 * x) - 1.0 / (12.0 * x * x) + 1.0 / (120.0 * x.powi(4));
    (k as f64).ln() + tail(b) - tail(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Fitted tail ratio below this (with small error) means convergent.
    pub theta_trans: f64,
    /// Largest accepted standard error of the fitted ratio.
    pub max_fit_se: f64,
    /// Tail terms staying above this fraction of the early terms means
    /// divergent.
    pub theta_rec: f64,
    pub min_points: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { theta_trans: 0.8, max_fit_se: 0.05, theta_rec: 0.1, min_points: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    RecurrentIndicative,
    TransientIndicative,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::RecurrentIndicative => "recurrent-indicative",
            Verdict::TransientIndicative => "transient-indicative",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    /// `Σ (1/n²)(Φ⁻¹(n))²/Φ_+⁻¹(n)`: divergence ⇔ recurrence.
    Recurrence,
    /// `Σ 1/Φ(n)`: convergence ⇒ transience.
    Transience,
    /// `Σ_j 1/C(K^j)`: convergence ⇒ transience.
    DriftMass,
    /// `Σ (1/n²) min{Φ_str⁻¹(n), (C⁻¹(n))²/Φ_str⁻¹(n)}`; conjectured.
    DriftMassConjecture,
}

impl SeriesKind {
    /// Whether a divergent series supports recurrence.
    fn divergence_is_recurrence(self) -> bool {
        matches!(self, SeriesKind::Recurrence | SeriesKind::DriftMassConjecture)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRow {
    pub j: u32,
    pub n: SignedLog,
    /// `None` when the grid point could not be evaluated inside the window.
    pub term: Option<SignedLog>,
    pub partial_sum: Option<SignedLog>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// `exp(slope)` of the least-squares line through `(j, ln t_j)`.
    pub ratio: f64,
    pub ratio_se: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub points: usize,
    pub j_first: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub kind: SeriesKind,
    pub grid: GridSpec,
    pub thresholds: Thresholds,
    pub rows: Vec<TermRow>,
    pub tail_ratio_fit: Option<TailFit>,
    pub verdict: Verdict,
    pub conjecture_grade: bool,
}

impl CriterionReport {
    pub fn usable_terms(&self) -> Vec<(u32, SignedLog)> {
        self.rows.iter().filter_map(|r| r.term.map(|t| (r.j, t))).collect()
    }

    fn assemble(kind: SeriesKind, grid: GridSpec, th: Thresholds, terms: Vec<(u32, Result<SignedLog>)>) -> Self {
        let mut acc = LogSum::new();
        let mut rows = Vec::with_capacity(terms.len());
        for (j, term) in terms {
            let n = grid.scale(j);
            match term {
                Ok(t) => {
                    acc.add(t);
                    rows.push(TermRow { j, n, term: Some(t), partial_sum: Some(acc.value()), note: None });
                }
                Err(e) => rows.push(TermRow { j, n, term: None, partial_sum: None, note: Some(e.to_string()) }),
            }
        }
        let mut r = CriterionReport {
            kind,
            grid,
            thresholds: th,
            rows,
            tail_ratio_fit: None,
            verdict: Verdict::Inconclusive,
            conjecture_grade: kind == SeriesKind::DriftMassConjecture,
        };
        let usable = r.usable_terms();
        r.tail_ratio_fit = tail_fit(&usable, th.min_points);
        r.verdict = decide(kind, &usable, r.tail_ratio_fit.as_ref(), &th);
        r
    }
}

/// Least squares of `ln t_j` on `j` over the second half of the usable
/// positive terms (at least `min_points` of them).
pub fn tail_fit(terms: &[(u32, SignedLog)], min_points: usize) -> Option<TailFit> {
    let pos: Vec<(f64, f64)> =
        terms.iter().filter(|(_, t)| t.is_positive()).map(|&(j, t)| (j as f64, t.lmag())).collect();
    let min_points = min_points.max(3);
    if pos.len() < min_points {
        return None;
    }
    let take = (pos.len() / 2).max(min_points).min(pos.len());
    let tail = &pos[pos.len() - take..];
    let n = tail.len() as f64;
    let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = tail.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let slope_se = (rss / (n - 2.0) / sxx).sqrt();
    let ratio = slope.exp();
    Some(TailFit { ratio, ratio_se: ratio * slope_se, slope, slope_se, points: tail.len(), j_first: tail[0].0 as u32 })
}

fn decide(kind: SeriesKind, usable: &[(u32, SignedLog)], fit: Option<&TailFit>, th: &Thresholds) -> Verdict {
    if usable.len() < th.min_points {
        return Verdict::Inconclusive;
    }
    if let Some(f) = fit {
        if f.ratio < th.theta_trans && f.ratio_se < th.max_fit_se {
            return Verdict::TransientIndicative;
        }
    }
    if kind.divergence_is_recurrence() && terms_persist(usable, th) {
        return Verdict::RecurrentIndicative;
    }
    Verdict::Inconclusive
}

/// Divergence heuristic: the general term does not tend to zero, read as
/// the largest term of the tail staying above `θ_rec` times the median of
/// the first three terms.
pub(crate) fn terms_persist(usable: &[(u32, SignedLog)], th: &Thresholds) -> bool {
    let mut head: Vec<f64> = usable.iter().take(3).map(|(_, t)| t.lmag()).collect();
    head.sort_by(f64::total_cmp);
    let ref_l = head[head.len() / 2];
    let tail = &usable[usable.len() - (usable.len() / 2).max(1)..];
    let tail_max = tail.iter().map(|(_, t)| t.lmag()).fold(f64::NEG_INFINITY, f64::max);
    tail_max >= ref_l + th.theta_rec.ln()
}

/// `t_j = (Φ⁻¹(K^j))² / (K^j Φ_+⁻¹(K^j)) · Σ_{K^j≤n<K^{j+1}} 1/n`.
pub fn recurrence_series(t: &PotentialTables, grid: GridSpec, th: Thresholds) -> Result<CriterionReport> {
    t.dimension_check()?;
    let terms = grid
        .points()
        .map(|j| {
            let n = grid.scale(j);
            let term = (|| {
                let inv = phi_inverse(t, n, PhiKind::Phi)?;
                let inv_plus = phi_inverse(t, n, PhiKind::PhiPlus)?;
                if inv_plus.is_zero() {
                    return Err(Error::BelowRange("Φ_+⁻¹ vanishes at this scale".into()));
                }
                Ok(inv.square().div(n * inv_plus) * SignedLog::from_real(grid.cell_weight(j)))
            })();
            (j, term)
        })
        .collect();
    Ok(CriterionReport::assemble(SeriesKind::Recurrence, grid, th, terms))
}

/// `t_j = K^j / Φ(K^j)`.
pub fn transience_series(t: &PotentialTables, grid: GridSpec, th: Thresholds) -> Result<CriterionReport> {
    t.dimension_check()?;
    let terms = grid
        .points()
        .map(|j| {
            let n = grid.scale(j);
            (j, phi_sym(t, n).map(|phi| n.div(phi)))
        })
        .collect();
    Ok(CriterionReport::assemble(SeriesKind::Transience, grid, th, terms))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftMassReport {
    /// Terms `1/C(K^j)`.
    pub summability: CriterionReport,
    /// The conjectured criterion; reported as raw terms.
    pub conjecture: CriterionReport,
}

/// Both drift-mass diagnostics. Refused when a negative drift occurs on the
/// levels the grid reaches, or when the drift mass vanishes.
pub fn drift_mass_series(t: &PotentialTables, grid: GridSpec, th: Thresholds) -> Result<DriftMassReport> {
    t.dimension_check()?;
    let mut reach = None;
    for j in grid.points().rev() {
        if let Ok(ab) = t.levels_at(grid.scale(j)) {
            reach = Some(ab);
            break;
        }
    }
    let (a, b) = reach.ok_or_else(|| Error::Insufficient("no grid point inside the window".into()))?;
    if let Some(k) = (-(a as i64)..=b as i64).find(|&k| t.level(k).eps < 0.0) {
        return Err(Error::DriftRefused(format!("negative drift at level {k}")));
    }
    if t.drift_mass(a, b).is_zero() {
        return Err(Error::DriftRefused("drift mass vanishes on the evaluated range".into()));
    }

    let summ = grid
        .points()
        .map(|j| {
            let n = grid.scale(j);
            let term = drift_mass(t, n).and_then(|c| {
                if c.is_zero() {
                    Err(Error::DriftRefused("zero drift mass at this scale".into()))
                } else {
                    Ok(c.recip())
                }
            });
            (j, term)
        })
        .collect();
    let conj = grid
        .points()
        .map(|j| {
            let n = grid.scale(j);
            let term = (|| {
                let s = phi_inverse(t, n, PhiKind::PhiStr)?;
                let c = drift_mass_inverse(t, n)?;
                if s.is_zero() {
                    return Err(Error::BelowRange("Φ_str⁻¹ vanishes at this scale".into()));
                }
                let m = s.min(c.square().div(s));
                Ok(m.div(n) * SignedLog::from_real(grid.cell_weight(j)))
            })();
            (j, term)
        })
        .collect();
    Ok(DriftMassReport {
        summability: CriterionReport::assemble(SeriesKind::DriftMass, grid, th, summ),
        conjecture: CriterionReport::assemble(SeriesKind::DriftMassConjecture, grid, th, conj),
    })
}

/// Per-grid-point values written alongside the series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridProfileRow {
    pub j: u32,
    pub n: SignedLog,
    pub phi: Option<SignedLog>,
    pub phi_plus: Option<SignedLog>,
    pub phi_str: Option<SignedLog>,
}

pub fn grid_profile(t: &PotentialTables, grid: GridSpec) -> Vec<GridProfileRow> {
    grid.points()
        .map(|j| {
            let n = grid.scale(j);
            GridProfileRow { j, n, phi: phi_sym(t, n).ok(), phi_plus: phi_plus(t, n).ok(), phi_str: phi_str(t, n).ok() }
        })
        .collect()
}

fn sl_cells(x: Option<SignedLog>) -> [String; 2] {
    match x {
        None => [String::new(), String::new()],
        Some(v) if v.is_zero() => ["".into(), "0".into()],
        Some(v) => [format!("{:.12}", v.log10_abs()), (v.sign().as_i8()).to_string()],
    }
}

/// CSV with one row per grid point. Every quantity is written as
/// `log10 |x|` plus a sign column; empty cells mark unevaluable points.
pub fn write_criterion_csv<W: std::io::Write>(
    t: &PotentialTables,
    recurrence: &CriterionReport,
    transience: &CriterionReport,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "j",
        "log10_n",
        "log10_phi",
        "sign_phi",
        "log10_phi_plus",
        "sign_phi_plus",
        "log10_phi_str",
        "sign_phi_str",
        "log10_term_recurrence",
        "sign_term_recurrence",
        "log10_term_transience",
        "sign_term_transience",
        "log10_partial_sum",
        "sign_partial_sum",
    ])?;
    let profile = grid_profile(t, recurrence.grid);
    for (i, p) in profile.iter().enumerate() {
        let rec = recurrence.rows.get(i);
        let tr = transience.rows.get(i);
        let mut rec_row = vec![p.j.to_string(), format!("{:.12}", p.n.log10_abs())];
        for x in [
            p.phi,
            p.phi_plus,
            p.phi_str,
            rec.and_then(|r| r.term),
            tr.and_then(|r| r.term),
            rec.and_then(|r| r.partial_sum),
        ] {
            rec_row.extend(sl_cells(x));
        }
        w.write_record(&rec_row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::build_tables;
    use crate::environment::{build_environment, DriftModel, EnvironmentModel};

    fn flat_tables(drift: DriftModel) -> PotentialTables {
        let m = EnvironmentModel::flat(1.0 / 3.0).with_drift(drift);
        build_tables(&build_environment(m).unwrap(), 70_000, 70_000).unwrap()
    }

    #[test]
    fn cell_weight_matches_harmonic_sum() {
        let g = GridSpec::new(13, 8).unwrap();
        for j in [1, 2, 4, 5] {
            let (lo, hi) = (13u64.pow(j), 13u64.pow(j + 1));
            let direct: f64 = (lo..hi).map(|n| 1.0 / n as f64).sum();
            assert!((g.cell_weight(j) - direct).abs() < 1e-10, "j = {j}");
        }
        assert!((g.cell_weight(8) - 13f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn grid_scale_and_base() {
        let g = GridSpec::new(13, 20).unwrap();
        assert_eq!(g.scale(3), SignedLog::from_u64(2197));
        assert!((g.scale(20).lmag() - 20.0 * 13f64.ln()).abs() < 1e-12);
        assert!(g.validate_for(0.2).is_ok());
        assert!(GridSpec::new(12, 3).unwrap().validate_for(0.2).is_err());
        assert!(GridSpec::new(2, 3).is_err());
        assert_eq!(default_grid_base(1.0 / 3.0), 9);
    }

    #[test]
    fn tail_fit_recovers_geometric_ratio() {
        let terms: Vec<(u32, SignedLog)> = (1..=10).map(|j| (j, SignedLog::from_log(2.0 - 0.7 * j as f64))).collect();
        let f = tail_fit(&terms, 4).unwrap();
        assert!((f.ratio - (-0.7f64).exp()).abs() < 1e-12);
        assert!(f.ratio_se < 1e-9);
        assert_eq!(f.points, 5);
        assert_eq!(f.j_first, 6);
        assert!(tail_fit(&terms[..2], 4).is_none());
    }

    #[test]
    fn flat_without_drift_is_recurrent() {
        let t = flat_tables(DriftModel::Zero);
        let g = GridSpec::auto(&t).unwrap();
        assert_eq!(g.k, 9);
        assert!(g.j_max >= 4);
        let th = Thresholds::default();
        let rec = recurrence_series(&t, g, th).unwrap();
        assert_eq!(rec.verdict, Verdict::RecurrentIndicative);
        // Φ⁻¹(n) ≈ n/2 and Φ_+⁻¹(n) ≈ n/√2 make every term ≈ log K / (2√2)
        for (_, term) in rec.usable_terms().iter().skip(1) {
            let x = term.to_real().unwrap();
            assert!((x / (9f64.ln() / 8f64.sqrt()) - 1.0).abs() < 0.05, "{x}");
        }
        let tr = transience_series(&t, g, th).unwrap();
        assert_ne!(tr.verdict, Verdict::TransientIndicative);
        for (_, term) in tr.usable_terms() {
            assert!((term.to_real().unwrap() - 0.5).abs() < 0.05);
        }
        // partial sums grow with nonnegative terms
        let sums: Vec<SignedLog> = rec.rows.iter().filter_map(|r| r.partial_sum).collect();
        assert!(sums.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn flat_with_constant_drift_is_transient() {
        let t = flat_tables(DriftModel::Constant { value: 0.5 });
        let g = GridSpec::auto(&t).unwrap();
        let th = Thresholds::default();
        let tr = transience_series(&t, g, th).unwrap();
        assert_eq!(tr.verdict, Verdict::TransientIndicative);
        // Φ(n) ≍ n² ⇒ terms fall by about 1/K per step
        let fit = tr.tail_ratio_fit.unwrap();
        assert!((fit.ratio * 9.0 - 1.0).abs() < 0.1, "ratio {}", fit.ratio);
        let rec = recurrence_series(&t, g, th).unwrap();
        assert_ne!(rec.verdict, Verdict::RecurrentIndicative);
    }

    #[test]
    fn drift_mass_needs_positive_drift() {
        let th = Thresholds::default();
        let t = flat_tables(DriftModel::Zero);
        let g = GridSpec::auto(&t).unwrap();
        assert!(matches!(drift_mass_series(&t, g, th), Err(Error::DriftRefused(_))));
        let t = flat_tables(DriftModel::Constant { value: -0.2 });
        assert!(matches!(drift_mass_series(&t, g, th), Err(Error::DriftRefused(_))));

        let t = flat_tables(DriftModel::Constant { value: 1.0 });
        let r = drift_mass_series(&t, g, th).unwrap();
        assert!(r.conjecture.conjecture_grade && !r.summability.conjecture_grade);
        // 1/C(n) with C(n) = 2n − 1
        for row in &r.summability.rows {
            let n = row.n.to_real().unwrap();
            assert!((row.term.unwrap().to_real().unwrap() * (2.0 * n - 1.0) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn criterion_csv_has_one_row_per_grid_point() {
        let t = flat_tables(DriftModel::Zero);
        let g = GridSpec::new(9, 6).unwrap();
        let th = Thresholds::default();
        let rec = recurrence_series(&t, g, th).unwrap();
        let tr = transience_series(&t, g, th).unwrap();
        let mut buf = Vec::new();
        write_criterion_csv(&t, &rec, &tr, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 7);
        // 9^6 = 531441 is past the window: empty cells, no failure
        assert!(rec.rows[5].term.is_none() && rec.rows[5].note.is_some());
        assert!(text.lines().last().unwrap().starts_with("6,"));
    }
}
