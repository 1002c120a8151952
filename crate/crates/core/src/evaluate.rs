//! Slope-weighted error metrics and the model comparison tables.
//!
//! Each forecast error ŷ − y is weighted by the clamped rise of the smoothed
//! observed series at the target week, max(ỹ_t − ỹ_{t−1}, 0), so weeks of
//! growing incidence dominate and flat or falling weeks drop out.

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::varmodel::ModelTag;

/// Scope label for metrics pooled over all jurisdictions.
pub const POOLED_SCOPE: &str = "ALL";

/// Series the forecast errors are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreTarget {
    #[default]
    Smoothed,
    Raw,
}

impl FromStr for ScoreTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "smoothed" => Ok(ScoreTarget::Smoothed),
            "raw" => Ok(ScoreTarget::Raw),
            other => Err(Error::InvalidArgument(format!("score target must be smoothed|raw, got '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredForecast {
    pub jurisdiction: String,
    pub target_week: NaiveDate,
    pub observed: f64,
    pub predicted: f64,
    pub slope_weight: f64,
    #[serde(default)]
    pub lower95: Option<f64>,
    #[serde(default)]
    pub upper95: Option<f64>,
}

impl ScoredForecast {
    pub fn error(&self) -> f64 {
        self.predicted - self.observed
    }

    pub fn covered(&self) -> Option<bool> {
        Some(self.lower95? <= self.observed && self.observed <= self.upper95?)
    }
}

/// Weights for t = 1..n−1 (index 0 of the result is t = 1).
pub fn slope_weights(observed_smoothed: &[f64]) -> Result<Vec<f64>> {
    if observed_smoothed.len() < 2 {
        return Err(Error::InsufficientData {
            context: "slope weights".into(),
            needed: 2,
            available: observed_smoothed.len(),
        });
    }
    Ok(observed_smoothed.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeMetrics {
    pub rmse: f64,
    pub mae: f64,
    pub bias: f64,
    /// Forecasts scored, including zero-weight ones.
    pub n: usize,
    pub weight_sum: f64,
}

impl SlopeMetrics {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Rmse => self.rmse,
            Metric::Mae => self.mae,
            Metric::Bias => self.bias,
        }
    }
}

pub fn slope_weighted_metrics(scored: &[ScoredForecast]) -> Result<SlopeMetrics> {
    if let Some(bad) = scored
        .iter()
        .find(|s| !(s.slope_weight >= 0.0 && s.slope_weight.is_finite()) || !s.error().is_finite())
    {
        return Err(Error::NonFinite(format!(
            "forecast for {} on {} has weight {} and error {}",
            bad.jurisdiction,
            bad.target_week,
            bad.slope_weight,
            bad.error()
        )));
    }
    let w: f64 = scored.iter().map(|s| s.slope_weight).sum();
    if w <= 0.0 {
        return Err(Error::UndefinedMetric(format!(
            "all {} slope weights are zero",
            scored.len()
        )));
    }
    let (mut sq, mut abs, mut sig) = (0.0, 0.0, 0.0);
    for s in scored {
        let e = s.error();
        sq += e * e * s.slope_weight;
        abs += e.abs() * s.slope_weight;
        sig += e * s.slope_weight;
    }
    Ok(SlopeMetrics {
        rmse: (sq / w).sqrt(),
        mae: abs / w,
        bias: sig / w,
        n: scored.len(),
        weight_sum: w,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Rmse,
    Mae,
    Bias,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Rmse, Metric::Mae, Metric::Bias];

    pub fn label(&self) -> &'static str {
        match self {
            Metric::Rmse => "slope_rmse",
            Metric::Mae => "slope_mae",
            Metric::Bias => "slope_bias",
        }
    }
}

/// 100·(benchmark − candidate)/benchmark.
pub fn improvement_pct(candidate: f64, benchmark: f64) -> Result<f64> {
    if benchmark == 0.0 {
        return Err(Error::ZeroBenchmark);
    }
    Ok(100.0 * (benchmark - candidate) / benchmark)
}

/// As [`improvement_pct`], comparing magnitudes for bias.
pub fn improvement_pct_for(metric: Metric, candidate: f64, benchmark: f64) -> Result<f64> {
    match metric {
        Metric::Bias => improvement_pct(candidate.abs(), benchmark.abs()),
        _ => improvement_pct(candidate, benchmark),
    }
}

/// Fraction of interval-bearing forecasts whose interval contains the
/// observation, or `None` when none carry intervals.
pub fn interval_coverage(scored: &[ScoredForecast]) -> Option<f64> {
    let flags: Vec<bool> = scored.iter().filter_map(ScoredForecast::covered).collect();
    if flags.is_empty() {
        None
    } else {
        Some(flags.iter().filter(|&&c| c).count() as f64 / flags.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeMetrics {
    pub model: ModelTag,
    pub scope: String,
    /// `None` when every slope weight in scope is zero.
    pub metrics: Option<SlopeMetrics>,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub undefined_reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage95: Option<f64>,
}

/// Metrics per model for every jurisdiction and pooled over all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub models: Vec<ModelTag>,
    /// Jurisdictions followed by [`POOLED_SCOPE`].
    pub scopes: Vec<String>,
    pub entries: Vec<ScopeMetrics>,
}

impl MetricReport {
    pub fn build(scored: &BTreeMap<ModelTag, Vec<ScoredForecast>>, jurisdictions: &[String]) -> Self {
        let mut scopes: Vec<String> = jurisdictions.to_vec();
        scopes.push(POOLED_SCOPE.to_string());
        let mut entries = Vec::new();
        for (&model, list) in scored {
            for scope in &scopes {
                let subset: Vec<ScoredForecast> = if scope == POOLED_SCOPE {
                    list.clone()
                } else {
                    list.iter().filter(|s| &s.jurisdiction == scope).cloned().collect()
                };
                let (metrics, undefined_reason) = match slope_weighted_metrics(&subset) {
                    Ok(m) => (Some(m), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                entries.push(ScopeMetrics {
                    model,
                    scope: scope.clone(),
                    metrics,
                    n: subset.len(),
                    undefined_reason,
                    coverage95: interval_coverage(&subset),
                });
            }
        }
        Self {
            models: scored.keys().copied().collect(),
            scopes,
            entries,
        }
    }

    pub fn get(&self, model: ModelTag, scope: &str) -> Option<&ScopeMetrics> {
        self.entries.iter().find(|e| e.model == model && e.scope == scope)
    }

    pub fn metric(&self, model: ModelTag, scope: &str, metric: Metric) -> Option<f64> {
        self.get(model, scope)?.metrics.map(|m| m.get(metric))
    }

    /// Improvement of VAR-Lasso over `benchmark`, when both are defined.
    pub fn improvement(&self, scope: &str, metric: Metric, benchmark: ModelTag) -> Option<f64> {
        let c = self.metric(ModelTag::VarLasso, scope, metric)?;
        let b = self.metric(benchmark, scope, metric)?;
        improvement_pct_for(metric, c, b).ok()
    }

    /// Table layout: scope, metric, VAR, AR, Naive, %Imp_VA, %Imp_VN.
    /// Undefined cells are left empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["scope", "metric", "VAR", "AR", "Naive", "%Imp_VA", "%Imp_VN"])?;
        let cell = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for scope in &self.scopes {
            for metric in Metric::ALL {
                w.write_record([
                    scope.clone(),
                    metric.label().to_string(),
                    cell(self.metric(ModelTag::VarLasso, scope, metric)),
                    cell(self.metric(ModelTag::ArLasso, scope, metric)),
                    cell(self.metric(ModelTag::Naive, scope, metric)),
                    cell(self.improvement(scope, metric, ModelTag::ArLasso)),
                    cell(self.improvement(scope, metric, ModelTag::Naive)),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `{"models": {model: {scope: {...}}}, "improvements": {...}}`.
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::{json, Map, Value};
        let mut models = Map::new();
        for &model in &self.models {
            let mut scopes = Map::new();
            for e in self.entries.iter().filter(|e| e.model == model) {
                let mut obj = Map::new();
                obj.insert("n".into(), json!(e.n));
                match e.metrics {
                    Some(m) => {
                        obj.insert("slope_rmse".into(), json!(m.rmse));
                        obj.insert("slope_mae".into(), json!(m.mae));
                        obj.insert("slope_bias".into(), json!(m.bias));
                        obj.insert("weight_sum".into(), json!(m.weight_sum));
                    }
                    None => {
                        obj.insert("undefined".into(), json!(e.undefined_reason));
                    }
                }
                if let Some(c) = e.coverage95 {
                    obj.insert("coverage95".into(), json!(c));
                }
                scopes.insert(e.scope.clone(), Value::Object(obj));
            }
            models.insert(model.as_str().into(), Value::Object(scopes));
        }
        let mut improvements = Map::new();
        if self.models.contains(&ModelTag::VarLasso) {
            for (bench, key) in [(ModelTag::ArLasso, "var_vs_ar"), (ModelTag::Naive, "var_vs_naive")] {
                if !self.models.contains(&bench) {
                    continue;
                }
                let mut per_scope = Map::new();
                for scope in &self.scopes {
                    let mut m = Map::new();
                    for metric in Metric::ALL {
                        m.insert(metric.label().into(), json!(self.improvement(scope, metric, bench)));
                    }
                    per_scope.insert(scope.clone(), Value::Object(m));
                }
                improvements.insert(key.into(), Value::Object(per_scope));
            }
        }
        json!({ "models": models, "improvements": improvements })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn week(i: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 1, 7).unwrap() + chrono::Duration::days(7 * i)
    }

    fn scored(j: &str, obs: &[f64], pred: &[f64], w: &[f64]) -> Vec<ScoredForecast> {
        obs.iter()
            .zip(pred)
            .zip(w)
            .enumerate()
            .map(|(i, ((&o, &p), &w))| ScoredForecast {
                jurisdiction: j.into(),
                target_week: week(i as i64),
                observed: o,
                predicted: p,
                slope_weight: w,
                lower95: None,
                upper95: None,
            })
            .collect()
    }

    #[test]
    fn weight_examples() {
        assert_eq!(slope_weights(&[2.0, 5.0, 4.0, 7.0]).unwrap(), vec![3.0, 0.0, 3.0]);
        assert!(slope_weights(&[5.0, 4.0, 1.0]).unwrap().iter().all(|&w| w == 0.0));
        assert!(slope_weights(&[2.0; 4]).unwrap().iter().all(|&w| w == 0.0));
        assert!(slope_weights(&[1.0]).is_err());
    }

    #[test]
    fn worked_example() {
        let m = slope_weighted_metrics(&scored("A", &[5.0, 4.0, 7.0], &[6.0, 4.0, 6.0], &[3.0, 0.0, 3.0])).unwrap();
        assert_eq!(m.rmse, 1.0);
        assert_eq!(m.mae, 1.0);
        assert_eq!(m.bias, 0.0);
    }

    #[test]
    fn degenerate_metrics() {
        let perfect = slope_weighted_metrics(&scored("A", &[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0])).unwrap();
        assert_eq!((perfect.rmse, perfect.mae, perfect.bias), (0.0, 0.0, 0.0));
        let single = slope_weighted_metrics(&scored("A", &[3.0], &[1.5], &[2.0])).unwrap();
        assert_eq!((single.rmse, single.mae, single.bias), (1.5, 1.5, -1.5));
        let err = slope_weighted_metrics(&scored("A", &[1.0, 2.0], &[0.0, 0.0], &[0.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::UndefinedMetric(_)));
    }

    #[test]
    fn improvement_examples() {
        assert!((improvement_pct(1.75, 2.00).unwrap() - 12.5).abs() < 1e-12);
        assert!((improvement_pct_for(Metric::Bias, -0.19, -0.80).unwrap() - 76.25).abs() < 1e-12);
        assert_eq!(improvement_pct(3.0, 3.0).unwrap(), 0.0);
        assert!(matches!(improvement_pct(1.0, 0.0), Err(Error::ZeroBenchmark)));
    }

    #[test]
    fn pooled_scope_is_not_mean_of_scopes() {
        let mut list = scored("A", &[1.0, 2.0], &[2.0, 2.0], &[1.0, 1.0]);
        list.extend(scored("B", &[0.0], &[4.0], &[3.0]));
        let mut map = BTreeMap::new();
        map.insert(ModelTag::Naive, list.clone());
        let report = MetricReport::build(&map, &["A".into(), "B".into()]);
        let pooled = slope_weighted_metrics(&list).unwrap();
        assert_eq!(report.metric(ModelTag::Naive, POOLED_SCOPE, Metric::Rmse), Some(pooled.rmse));
        assert_eq!(report.entries.len(), 3);
        let json = report.to_json();
        assert_eq!(json["models"].as_object().unwrap().len(), 1);
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 3);
        assert!(text.starts_with("scope,metric,VAR,AR,Naive,%Imp_VA,%Imp_VN"));
    }

    #[test]
    fn coverage_counts_intervals() {
        let mut list = scored("A", &[1.0, 5.0], &[1.0, 1.0], &[1.0, 1.0]);
        assert_eq!(interval_coverage(&list), None);
        for s in &mut list {
            s.lower95 = Some(0.0);
            s.upper95 = Some(2.0);
        }
        assert_eq!(interval_coverage(&list), Some(0.5));
    }

    fn arb_scored() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0, 0.0f64..10.0), 1..40)
    }

    fn build(v: &[(f64, f64, f64)]) -> Vec<ScoredForecast> {
        let obs: Vec<f64> = v.iter().map(|t| t.0).collect();
        let pred: Vec<f64> = v.iter().map(|t| t.1).collect();
        let w: Vec<f64> = v.iter().map(|t| t.2).collect();
        scored("A", &obs, &pred, &w)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn jensen_chain(v in arb_scored()) {
            let s = build(&v);
            if let Ok(m) = slope_weighted_metrics(&s) {
                prop_assert!(m.rmse + 1e-9 >= m.mae);
                prop_assert!(m.mae + 1e-9 >= m.bias.abs());
            }
        }

        #[test]
        fn weight_scaling_invariant(v in arb_scored(), c in 0.01f64..100.0) {
            let s = build(&v);
            let mut t = s.clone();
            for x in &mut t {
                x.slope_weight *= c;
            }
            if let (Ok(a), Ok(b)) = (slope_weighted_metrics(&s), slope_weighted_metrics(&t)) {
                prop_assert!((a.rmse - b.rmse).abs() <= 1e-9 * (1.0 + a.rmse));
                prop_assert!((a.mae - b.mae).abs() <= 1e-9 * (1.0 + a.mae));
                prop_assert!((a.bias - b.bias).abs() <= 1e-9 * (1.0 + a.bias.abs()));
            }
        }

        #[test]
        fn zero_weight_points_ignored(v in arb_scored(), idx in 0usize..40, delta in -100.0f64..100.0) {
            let mut s = build(&v);
            let i = idx % s.len();
            s[i].slope_weight = 0.0;
            let mut t = s.clone();
            t[i].predicted += delta;
            prop_assert_eq!(slope_weighted_metrics(&s).ok(), slope_weighted_metrics(&t).ok());
        }
    }
}
