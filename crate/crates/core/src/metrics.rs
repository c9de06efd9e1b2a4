//! Pareto bookkeeping and comparison metrics. All objectives are maximised.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::math;

pub const WIN_TIE_TOL: f64 = 1e-12;
pub const DOMINANCE_TOL: f64 = 1e-9;

/// `a` weakly exceeds `b` everywhere and strictly somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

/// Indices of the points not dominated by any other point. Duplicates are
/// kept once (the first occurrence).
pub fn non_dominated(points: &[Vec<f64>]) -> Vec<usize> {
    let mut keep = Vec::new();
    'outer: for (i, p) in points.iter().enumerate() {
        for (j, q) in points.iter().enumerate() {
            if i != j && (dominates(q, p) || (j < i && q == p)) {
                continue 'outer;
            }
        }
        keep.push(i);
    }
    keep
}

/// Volume dominated by `points` with the origin as reference point.
///
/// Coordinates below zero are treated as zero. Exact, by slicing along the
/// last objective and recursing on the remaining ones.
pub fn hypervolume(points: &[Vec<f64>]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let pts: Vec<Vec<f64>> = points.iter().filter(|p| p.iter().all(|&x| x > 0.0)).cloned().collect();
    if pts.is_empty() {
        return 0.0;
    }
    hv_rec(pts)
}

fn hv_rec(mut pts: Vec<Vec<f64>>) -> f64 {
    let m = pts[0].len();
    if m == 1 {
        return pts.iter().map(|p| p[0]).fold(0.0, f64::max);
    }
    if m == 2 {
        pts.sort_by(|a, b| b[0].total_cmp(&a[0]));
        let mut area = 0.0;
        let mut best_y = 0.0;
        for p in &pts {
            if p[1] > best_y {
                area += p[0] * (p[1] - best_y);
                best_y = p[1];
            }
        }
        return area;
    }
    pts.sort_by(|a, b| b[m - 1].total_cmp(&a[m - 1]));
    let mut volume = 0.0;
    let mut k = 0;
    while k < pts.len() {
        let z = pts[k][m - 1];
        while k + 1 < pts.len() && pts[k + 1][m - 1] == z {
            k += 1;
        }
        let next = if k + 1 < pts.len() { pts[k + 1][m - 1] } else { 0.0 };
        let slice: Vec<Vec<f64>> = pts[..=k].iter().map(|p| p[..m - 1].to_vec()).collect();
        let kept: Vec<Vec<f64>> = non_dominated(&slice).into_iter().map(|i| slice[i].clone()).collect();
        volume += (z - next) * hv_rec(kept);
        k += 1;
    }
    volume
}

/// `w . r`
pub fn expected_utility(returns: &[f64], w: &[f64]) -> Result<f64> {
    check_len("utility weights", w.len(), returns.len())?;
    Ok(math::dot(returns, w))
}

/// Per-objective affine map into the unit box, shared by every method in a
/// comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizationBounds {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl NormalizationBounds {
    pub fn from_points<'a, I: IntoIterator<Item = &'a [f64]>>(points: I) -> Result<Self> {
        let mut it = points.into_iter();
        let first = it
            .next()
            .ok_or_else(|| Error::config("no points to derive normalization bounds from"))?;
        let mut low = first.to_vec();
        let mut high = first.to_vec();
        for p in it {
            check_len("point", p.len(), low.len())?;
            for i in 0..p.len() {
                low[i] = low[i].min(p[i]);
                high[i] = high[i].max(p[i]);
            }
        }
        Ok(NormalizationBounds { low, high })
    }

    /// A zero-width range maps every value to 1.
    pub fn normalize(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .enumerate()
            .map(|(i, &x)| {
                let span = self.high[i] - self.low[i];
                if span > 0.0 {
                    ((x - self.low[i]) / span).clamp(0.0, 1.0)
                } else {
                    1.0
                }
            })
            .collect()
    }
}

/// `mean_hv[method][preference]` → fraction of preferences where the method
/// attains the column maximum; ties within [`WIN_TIE_TOL`] count for all.
pub fn win_rate(mean_hv: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = mean_hv.first() else {
        return Vec::new();
    };
    let prefs = first.len();
    if prefs == 0 {
        return vec![0.0; mean_hv.len()];
    }
    let mut wins = vec![0usize; mean_hv.len()];
    for p in 0..prefs {
        let best = mean_hv.iter().map(|row| row[p]).fold(f64::NEG_INFINITY, f64::max);
        for (b, row) in mean_hv.iter().enumerate() {
            if best - row[p] <= WIN_TIE_TOL {
                wins[b] += 1;
            }
        }
    }
    wins.into_iter().map(|w| w as f64 / prefs as f64).collect()
}

/// `means[method][preference][objective]` → fraction of (preference,
/// objective) cells where the method is within [`DOMINANCE_TOL`] of the best.
pub fn objective_dominance_rate(means: &[Vec<Vec<f64>>]) -> Vec<f64> {
    let Some(first) = means.first() else {
        return Vec::new();
    };
    let mut cells = 0usize;
    let mut hits = vec![0usize; means.len()];
    for p in 0..first.len() {
        for i in 0..first[p].len() {
            cells += 1;
            let best = means.iter().map(|m| m[p][i]).fold(f64::NEG_INFINITY, f64::max);
            for (b, m) in means.iter().enumerate() {
                if best - m[p][i] <= DOMINANCE_TOL {
                    hits[b] += 1;
                }
            }
        }
    }
    if cells == 0 {
        return vec![0.0; means.len()];
    }
    hits.into_iter().map(|h| h as f64 / cells as f64).collect()
}

/// Performance ratios `max_b HV[p][b] / HV[p][b]` for `hv[instance][method]`.
/// A zero HV gives `+inf`; an instance where every method scores zero gives
/// ratio 1 for all of them.
pub fn performance_ratios(hv: &[Vec<f64>]) -> Vec<Vec<f64>> {
    hv.iter()
        .map(|row| {
            let best = row.iter().copied().fold(0.0, f64::max);
            row.iter()
                .map(|&h| {
                    if best <= 0.0 {
                        1.0
                    } else if h <= 0.0 {
                        f64::INFINITY
                    } else {
                        best / h
                    }
                })
                .collect()
        })
        .collect()
}

/// Fraction of instances with ratio at most `theta`.
pub fn profile(ratios: &[f64], theta: f64) -> f64 {
    if ratios.is_empty() {
        return 0.0;
    }
    ratios.iter().filter(|&&r| r <= theta).count() as f64 / ratios.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct DmpResult {
    pub auc: Vec<f64>,
    pub theta_max: f64,
    /// One message per method whose HV is zero on every instance.
    pub warnings: Vec<String>,
}

/// Area under each method's Dolan-Moré profile on `[1, theta_max]`,
/// normalised to `[0, 1]`. The profile is sampled at every finite observed
/// ratio plus both endpoints and integrated with the trapezoid rule.
pub fn dolan_more_auc(hv: &[Vec<f64>]) -> DmpResult {
    let methods = hv.first().map_or(0, |r| r.len());
    let ratios = performance_ratios(hv);
    let mut grid: Vec<f64> = ratios.iter().flatten().copied().filter(|r| r.is_finite()).collect();
    grid.push(1.0);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let theta_max = *grid.last().unwrap_or(&1.0);
    let mut auc = Vec::with_capacity(methods);
    let mut warnings = Vec::new();
    for b in 0..methods {
        let col: Vec<f64> = ratios.iter().map(|r| r[b]).collect();
        if !hv.is_empty() && hv.iter().all(|r| r[b] <= 0.0) {
            warnings.push(alloc::format!("method {b} has zero hypervolume on every instance"));
            auc.push(0.0);
            continue;
        }
        if theta_max <= 1.0 {
            auc.push(profile(&col, 1.0));
            continue;
        }
        let mut area = 0.0;
        for k in 0..grid.len() - 1 {
            let (a, c) = (grid[k], grid[k + 1]);
            area += (c - a) * (profile(&col, a) + profile(&col, c)) / 2.0;
        }
        auc.push(area / (theta_max - 1.0));
    }
    DmpResult {
        auc,
        theta_max,
        warnings,
    }
}

/// Sample mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, math::sqrt(var))
}

/// One evaluated run: the per-objective mean evaluation return at its
/// selected checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct RunPoint {
    pub method: String,
    pub preference: Vec<f64>,
    pub seed: u64,
    pub returns: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonCell {
    pub method: String,
    pub preference: Vec<f64>,
    pub seeds: usize,
    pub hv_mean: f64,
    pub hv_std: f64,
    pub eu_mean: f64,
    pub eu_std: f64,
    pub objective_means: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub hv_mean: f64,
    pub hv_std: f64,
    pub win_rate: f64,
    pub objective_dominance: f64,
    pub dmp_auc: f64,
    pub eu_mean: f64,
}

/// Per-(method, preference) cells and per-method summaries.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    pub methods: Vec<String>,
    pub preferences: Vec<Vec<f64>>,
    pub bounds: NormalizationBounds,
    pub cells: Vec<ComparisonCell>,
    pub summary: Vec<MethodSummary>,
    pub warnings: Vec<String>,
}

impl ComparisonTable {
    /// Every method must have been run on every preference. Hypervolume of a
    /// run is that of its single normalised point; `bounds` defaults to the
    /// extremes over all runs.
    pub fn build(runs: &[RunPoint], bounds: Option<NormalizationBounds>) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::config("no runs to compare"));
        }
        let mut methods: Vec<String> = Vec::new();
        let mut preferences: Vec<Vec<f64>> = Vec::new();
        for r in runs {
            if !methods.contains(&r.method) {
                methods.push(r.method.clone());
            }
            if !preferences.iter().any(|p| same_pref(p, &r.preference)) {
                preferences.push(r.preference.clone());
            }
        }
        let bounds = match bounds {
            Some(b) => b,
            None => NormalizationBounds::from_points(runs.iter().map(|r| r.returns.as_slice()))?,
        };
        let m = bounds.low.len();
        let mut cells = Vec::new();
        let mut hv_grid = vec![vec![0.0; preferences.len()]; methods.len()];
        let mut obj_grid = vec![vec![vec![0.0; m]; preferences.len()]; methods.len()];
        let mut per_method_hv: Vec<Vec<f64>> = vec![Vec::new(); methods.len()];
        let mut per_method_eu: Vec<Vec<f64>> = vec![Vec::new(); methods.len()];
        for (b, method) in methods.iter().enumerate() {
            for (p, pref) in preferences.iter().enumerate() {
                let group: Vec<&RunPoint> = runs
                    .iter()
                    .filter(|r| &r.method == method && same_pref(&r.preference, pref))
                    .collect();
                if group.is_empty() {
                    return Err(Error::config(alloc::format!(
                        "method '{method}' has no run for preference {pref:?}"
                    )));
                }
                let mut hvs = Vec::with_capacity(group.len());
                let mut eus = Vec::with_capacity(group.len());
                let mut obj = vec![0.0; m];
                for r in &group {
                    check_len("run returns", r.returns.len(), m)?;
                    hvs.push(hypervolume(&[bounds.normalize(&r.returns)]));
                    eus.push(expected_utility(&r.returns, pref)?);
                    math::axpy(1.0 / group.len() as f64, &r.returns, &mut obj);
                }
                let (hv_mean, hv_std) = mean_std(&hvs);
                let (eu_mean, eu_std) = mean_std(&eus);
                hv_grid[b][p] = hv_mean;
                obj_grid[b][p] = obj.clone();
                per_method_hv[b].extend_from_slice(&hvs);
                per_method_eu[b].extend_from_slice(&eus);
                cells.push(ComparisonCell {
                    method: method.clone(),
                    preference: pref.clone(),
                    seeds: group.len(),
                    hv_mean,
                    hv_std,
                    eu_mean,
                    eu_std,
                    objective_means: obj,
                });
            }
        }
        let wins = win_rate(&hv_grid);
        let odr = objective_dominance_rate(&obj_grid);
        let by_instance: Vec<Vec<f64>> = (0..preferences.len())
            .map(|p| hv_grid.iter().map(|row| row[p]).collect())
            .collect();
        let dmp = dolan_more_auc(&by_instance);
        let summary = methods
            .iter()
            .enumerate()
            .map(|(b, method)| {
                let (hv_mean, hv_std) = mean_std(&per_method_hv[b]);
                MethodSummary {
                    method: method.clone(),
                    hv_mean,
                    hv_std,
                    win_rate: wins[b],
                    objective_dominance: odr[b],
                    dmp_auc: dmp.auc[b],
                    eu_mean: mean_std(&per_method_eu[b]).0,
                }
            })
            .collect();
        let warnings = methods
            .iter()
            .zip(&per_method_hv)
            .filter(|(_, hv)| hv.iter().all(|h| *h <= 0.0))
            .map(|(name, _)| alloc::format!("{name} has zero hypervolume on every instance"))
            .collect();
        Ok(ComparisonTable {
            methods,
            preferences,
            bounds,
            cells,
            summary,
            warnings,
        })
    }
}

fn same_pref(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn unit_box() {
        assert_eq!(hypervolume(&[vec![1.0, 1.0]]), 1.0);
        assert_eq!(hypervolume(&[]), 0.0);
    }

    #[test]
    fn two_point_staircase() {
        let hv = hypervolume(&[vec![1.0, 0.5], vec![0.5, 1.0]]);
        assert!((hv - 0.75).abs() < 1e-15);
    }

    #[test]
    fn dominated_point_is_ignored() {
        let base = vec![vec![0.9, 0.2, 0.4], vec![0.3, 0.8, 0.5]];
        let mut with = base.clone();
        with.push(vec![0.2, 0.1, 0.3]);
        assert!((hypervolume(&base) - hypervolume(&with)).abs() < 1e-12);
    }

    #[test]
    fn three_d_boxes() {
        let hv = hypervolume(&[vec![1.0, 1.0, 0.5], vec![0.5, 0.5, 1.0]]);
        assert!((hv - (0.5 + 0.25 - 0.125)).abs() < 1e-15);
    }

    #[test]
    fn filter_keeps_front() {
        let pts = vec![vec![1.0, 0.0], vec![0.5, 0.5], vec![0.4, 0.4], vec![0.5, 0.5]];
        assert_eq!(non_dominated(&pts), vec![0, 1]);
    }

    #[test]
    fn utility() {
        assert_eq!(expected_utility(&[4.0, 5.0, 6.0], &[1.0, 0.0, 0.0]).unwrap(), 4.0);
        let third = 1.0 / 3.0;
        assert!((expected_utility(&[3.0; 3], &[third; 3]).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn win_rate_rules() {
        assert_eq!(win_rate(&[vec![2.0, 2.0], vec![1.0, 1.0]]), vec![1.0, 0.0]);
        assert_eq!(win_rate(&[vec![1.0, 2.0], vec![1.0, 2.0]]), vec![1.0, 1.0]);
        let a = vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let b = vec![0.5, 0.5, 0.5, 0.5, 1.0, 1.0, 1.0, 1.0];
        assert_eq!(win_rate(&[a, b]), vec![0.5, 0.5]);
    }

    #[test]
    fn dmp_single_method() {
        let r = dolan_more_auc(&[vec![0.3], vec![0.7]]);
        assert_eq!(r.auc, vec![1.0]);
    }

    #[test]
    fn dmp_twice_as_good() {
        let r = dolan_more_auc(&[vec![0.4, 0.2], vec![0.6, 0.3], vec![0.2, 0.1]]);
        assert_eq!(r.theta_max, 2.0);
        assert_eq!(r.auc, vec![1.0, 0.5]);
    }

    #[test]
    fn dmp_zero_column_warns() {
        let r = dolan_more_auc(&[vec![0.4, 0.0], vec![0.6, 0.0]]);
        assert_eq!(r.auc[1], 0.0);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn zero_range_maps_to_one() {
        let b = NormalizationBounds::from_points([[1.0, 2.0].as_slice(), [1.0, 4.0].as_slice()]).unwrap();
        assert_eq!(b.normalize(&[1.0, 3.0]), vec![1.0, 0.5]);
    }

    #[test]
    fn single_method_table() {
        let runs: Vec<RunPoint> = (0..3)
            .map(|s| RunPoint {
                method: "pasta".to_string(),
                preference: vec![0.5, 0.5],
                seed: s,
                returns: vec![s as f64, 2.0 - s as f64],
            })
            .collect();
        let t = ComparisonTable::build(&runs, None).unwrap();
        assert_eq!(t.summary[0].win_rate, 1.0);
        assert_eq!(t.summary[0].dmp_auc, 1.0);
        assert_eq!(t.cells.len(), 1);
    }
}
