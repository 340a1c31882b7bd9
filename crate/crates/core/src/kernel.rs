//! Piecewise-continuous Volterra kernels.
//!
//! A kernel `K(t, s)` on `0 <= s <= t <= T` is made of `n` smooth segments
//! `K_i(t, s)`, each living on the band `alpha_{i-1}(t) < s < alpha_i(t)`
//! with `alpha_0 = 0` and `alpha_n(t) = t`. The interior curves
//! `alpha_1 .. alpha_{n-1}` carry the jump discontinuities.
//!
//! On a boundary curve itself the kernel is undefined in the continuous
//! problem; [`PiecewiseKernel::eval`] resolves `s = alpha_i(t)` to the band on
//! the left. Quadrature never samples the curves, so the rule only matters
//! for direct evaluation.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CurveFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SegmentFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Default sample count for [`PiecewiseKernel::validate`].
pub const DEFAULT_VALIDATION_SAMPLES: usize = 1000;

const CURVE_TOLERANCE: f64 = 1e-12;

/// A discontinuity curve `alpha(t)` starting at the origin.
#[derive(Clone)]
pub enum BoundaryCurve {
    /// `alpha(t) = c * t`.
    Proportional(f64),
    /// Arbitrary curve; the derivative must be supplied by the caller.
    General { value: CurveFn, derivative: CurveFn },
}

impl BoundaryCurve {
    pub fn proportional(ratio: f64) -> Self {
        BoundaryCurve::Proportional(ratio)
    }

    pub fn general<V, D>(value: V, derivative: D) -> Self
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        BoundaryCurve::General {
            value: Arc::new(value),
            derivative: Arc::new(derivative),
        }
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        match self {
            BoundaryCurve::Proportional(c) => c * t,
            BoundaryCurve::General { value, .. } => value(t),
        }
    }

    #[inline]
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            BoundaryCurve::Proportional(c) => *c,
            BoundaryCurve::General { derivative, .. } => derivative(t),
        }
    }
}

impl fmt::Debug for BoundaryCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCurve::Proportional(c) => write!(f, "Proportional({c})"),
            BoundaryCurve::General { .. } => f.write_str("General(..)"),
        }
    }
}

/// One smooth piece `K_i(t, s)` of a piecewise kernel.
#[derive(Clone)]
pub struct KernelSegment {
    func: SegmentFn,
    constant: Option<f64>,
}

impl KernelSegment {
    pub fn constant(value: f64) -> Self {
        KernelSegment {
            func: Arc::new(move |_, _| value),
            constant: Some(value),
        }
    }

    pub fn new<F>(func: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        KernelSegment {
            func: Arc::new(func),
            constant: None,
        }
    }

    #[inline]
    pub fn value(&self, t: f64, s: f64) -> f64 {
        match self.constant {
            Some(c) => c,
            None => (self.func)(t, s),
        }
    }

    /// `Some(c)` when the segment was built with [`KernelSegment::constant`].
    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }
}

impl fmt::Debug for KernelSegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constant {
            Some(c) => write!(f, "KernelSegment::constant({c})"),
            None => f.write_str("KernelSegment(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PiecewiseKernel {
    segments: Vec<KernelSegment>,
    boundaries: Vec<BoundaryCurve>,
    horizon: f64,
}

impl PiecewiseKernel {
    /// Builds a kernel from `n` segments and the `n - 1` interior curves.
    pub fn new(
        segments: Vec<KernelSegment>,
        boundaries: Vec<BoundaryCurve>,
        horizon: f64,
    ) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::config("kernel needs at least one segment"));
        }
        if boundaries.len() + 1 != segments.len() {
            return Err(Error::config(format!(
                "kernel with {} segments needs {} boundary curves, got {}",
                segments.len(),
                segments.len() - 1,
                boundaries.len()
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::config(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        Ok(PiecewiseKernel {
            segments,
            boundaries,
            horizon,
        })
    }

    /// Single segment `K == value` with no interior curves.
    pub fn constant(value: f64, horizon: f64) -> Result<Self> {
        Self::new(vec![KernelSegment::constant(value)], Vec::new(), horizon)
    }

    /// Constant bands separated by proportional curves `ratio_i * t`.
    pub fn proportional_bands(values: &[f64], ratios: &[f64], horizon: f64) -> Result<Self> {
        Self::new(
            values
                .iter()
                .copied()
                .map(KernelSegment::constant)
                .collect(),
            ratios
                .iter()
                .copied()
                .map(BoundaryCurve::Proportional)
                .collect(),
            horizon,
        )
    }

    /// Storage efficiency kernel with three age bands: 1 on `(0, t/4)`,
    /// 0.9 on `(t/4, 3t/4)` and 0.85 on `(3t/4, t)`.
    pub fn three_band_efficiency(horizon: f64) -> Result<Self> {
        Self::proportional_bands(&[1.0, 0.9, 0.85], &[0.25, 0.75], horizon)
    }

    pub fn segments(&self) -> &[KernelSegment] {
        &self.segments
    }

    pub fn boundaries(&self) -> &[BoundaryCurve] {
        &self.boundaries
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    /// Same kernel on a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.segments.clone(), self.boundaries.clone(), horizon)
    }

    fn domain_slack(&self) -> f64 {
        1e-12 * self.horizon.max(1.0)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= -self.domain_slack() && t <= self.horizon + self.domain_slack()) {
            return Err(Error::Domain(format!(
                "t={t} outside [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }

    /// `alpha_i(t)` for `i = 0..=n`, with the fixed outer curves included.
    #[inline]
    pub fn curve_value(&self, i: usize, t: f64) -> f64 {
        if i == 0 {
            0.0
        } else if i == self.segments.len() {
            t
        } else {
            self.boundaries[i - 1].value(t)
        }
    }

    #[inline]
    pub fn curve_derivative(&self, i: usize, t: f64) -> f64 {
        if i == 0 {
            0.0
        } else if i == self.segments.len() {
            1.0
        } else {
            self.boundaries[i - 1].derivative(t)
        }
    }

    /// Index of the band containing `s` at time `t`, left band on ties.
    #[inline]
    pub fn segment_index(&self, t: f64, s: f64) -> usize {
        self.boundaries
            .iter()
            .position(|curve| s <= curve.value(t))
            .unwrap_or(self.boundaries.len())
    }

    /// `K(t, s)`; requires `0 <= s <= t <= T`.
    pub fn eval(&self, t: f64, s: f64) -> Result<f64> {
        self.check_time(t)?;
        if s < -self.domain_slack() || s > t + self.domain_slack() {
            return Err(Error::Domain(format!("s={s} outside [0, t={t}]")));
        }
        let i = self.segment_index(t, s);
        Ok(self.segments[i].value(t, s))
    }

    /// `[0, alpha_1(t), ..., alpha_{n-1}(t), t]`.
    pub fn segment_bounds(&self, t: f64) -> Result<Vec<f64>> {
        self.check_time(t)?;
        Ok((0..=self.segments.len())
            .map(|i| self.curve_value(i, t))
            .collect())
    }

    /// `sum_i K_i(0,0) [alpha_i'(0) - alpha_{i-1}'(0)]`, the divisor of the
    /// x(0) formula.
    pub fn x0_denominator(&self) -> f64 {
        self.segments
            .iter()
            .enumerate()
            .map(|(idx, seg)| {
                let i = idx + 1;
                seg.value(0.0, 0.0)
                    * (self.curve_derivative(i, 0.0) - self.curve_derivative(i - 1, 0.0))
            })
            .sum()
    }

    /// Sample-based check of every structural invariant. Samples are the
    /// uniform grid `t_j = j T / samples`, `j = 1..=samples`.
    pub fn validate(&self, samples: usize) -> ValidationReport {
        let samples = samples.max(1);
        let n = self.segments.len();
        let mut report = ValidationReport::default();

        for (idx, curve) in self.boundaries.iter().enumerate() {
            let at_zero = curve.value(0.0);
            if !(at_zero.abs() <= CURVE_TOLERANCE) {
                report.push(
                    Invariant::CurveOrigin,
                    Some(0.0),
                    format!("alpha_{}(0) = {at_zero}", idx + 1),
                );
            }
        }

        let mut previous: Vec<f64> = (0..=n).map(|i| self.curve_value(i, 0.0)).collect();
        let mut diagonal_reported = false;
        let mut finite_reported = vec![false; n];
        for j in 1..=samples {
            let t = self.horizon * j as f64 / samples as f64;
            let bounds: Vec<f64> = (0..=n).map(|i| self.curve_value(i, t)).collect();

            for i in 1..n {
                if bounds[i] < previous[i] - CURVE_TOLERANCE {
                    report.push(
                        Invariant::CurveMonotone,
                        Some(t),
                        format!("alpha_{i} decreases from {} to {}", previous[i], bounds[i]),
                    );
                }
            }
            for i in 1..=n {
                if !(bounds[i] > bounds[i - 1]) {
                    report.push(
                        Invariant::BandOrdering,
                        Some(t),
                        format!(
                            "alpha_{}(t) = {} is not above alpha_{}(t) = {}",
                            i,
                            bounds[i],
                            i - 1,
                            bounds[i - 1]
                        ),
                    );
                }
            }
            for (idx, seg) in self.segments.iter().enumerate() {
                if finite_reported[idx] {
                    continue;
                }
                let (lo, hi) = (bounds[idx], bounds[idx + 1]);
                let probes = [lo, 0.5 * (lo + hi), hi];
                if let Some(s) = probes.iter().find(|&&s| !seg.value(t, s).is_finite()) {
                    finite_reported[idx] = true;
                    report.push(
                        Invariant::FiniteSegment,
                        Some(t),
                        format!("K_{}({t}, {s}) is not finite", idx + 1),
                    );
                }
            }
            if !diagonal_reported && self.segments[n - 1].value(t, t) == 0.0 {
                diagonal_reported = true;
                report.push(
                    Invariant::DiagonalNonzero,
                    Some(t),
                    format!("K_{n}(t, t) = 0"),
                );
            }
            previous = bounds;
        }

        let slopes: Vec<f64> = self.boundaries.iter().map(|c| c.derivative(0.0)).collect();
        for i in 1..slopes.len() {
            if slopes[i] < slopes[i - 1] {
                report.push(
                    Invariant::SlopeOrdering,
                    Some(0.0),
                    format!(
                        "alpha_{}'(0) = {} < alpha_{}'(0) = {}",
                        i + 1,
                        slopes[i],
                        i,
                        slopes[i - 1]
                    ),
                );
            }
        }
        if let Some(&last) = slopes.last() {
            if !(last < 1.0) {
                report.push(
                    Invariant::SlopeOrdering,
                    Some(0.0),
                    format!("alpha_{}'(0) = {last} is not below 1", slopes.len()),
                );
            }
        }

        let denominator = self.x0_denominator();
        if !(denominator.abs() > CURVE_TOLERANCE) {
            report.push(
                Invariant::X0Denominator,
                Some(0.0),
                format!("x(0) denominator = {denominator}"),
            );
        }
        report
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Invariant {
    CurveOrigin,
    CurveMonotone,
    BandOrdering,
    SlopeOrdering,
    DiagonalNonzero,
    X0Denominator,
    FiniteSegment,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub invariant: Invariant,
    pub t: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn push(&mut self, invariant: Invariant, t: Option<f64>, detail: String) {
        self.violations.push(Violation {
            invariant,
            t,
            detail,
        });
    }

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, invariant: Invariant) -> bool {
        self.violations.iter().any(|v| v.invariant == invariant)
    }
}

/// Validates with explicit structure checks; mismatched list lengths or a
/// non-positive horizon are configuration errors rather than violations.
pub fn validate(
    segments: Vec<KernelSegment>,
    boundaries: Vec<BoundaryCurve>,
    horizon: f64,
    samples: usize,
) -> Result<ValidationReport> {
    if samples == 0 {
        return Err(Error::config("validation needs a positive sample count"));
    }
    Ok(PiecewiseKernel::new(segments, boundaries, horizon)?.validate(samples))
}

// Kernel specification file.

/// JSON kernel description:
/// `{"T": 1.0, "segments": [{"value": 1.0}, ...], "boundaries": [{"proportional": 0.25}, ...]}`
/// or `{"preset": "three-band-efficiency"}`. `T` may be omitted, in which
/// case the caller supplies the horizon (typically the data span).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<SegmentSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boundaries: Vec<BoundarySpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub value: SegmentValue,
}

/// A segment value: a number, a built-in id (`"unit"`, `"efficiency:90"`),
/// or an age-dependent efficiency schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SegmentValue {
    Constant(f64),
    Builtin(String),
    Schedule(EfficiencySchedule),
}

/// Efficiency that drifts linearly with storage age `t - s`:
/// `K(t, s) = from + (to - from) (t - s) / T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencySchedule {
    pub age_linear: AgeLinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgeLinear {
    pub from: f64,
    pub to: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub proportional: f64,
}

impl KernelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::format(None, format!("kernel file: {e}")))
    }

    /// Builds the kernel, using `fallback_horizon` when the file has no `T`.
    pub fn build(&self, fallback_horizon: Option<f64>) -> Result<PiecewiseKernel> {
        let horizon = match (self.horizon, fallback_horizon) {
            (Some(h), Some(f)) if (h - f).abs() > 1e-9 * h.abs().max(1.0) => {
                return Err(Error::config(format!(
                    "kernel horizon T={h} does not match data horizon {f}"
                )))
            }
            (Some(h), _) => h,
            (None, Some(f)) => f,
            (None, None) => return Err(Error::config("kernel file has no T and no data horizon")),
        };
        if let Some(preset) = &self.preset {
            if !self.segments.is_empty() || !self.boundaries.is_empty() {
                return Err(Error::config(
                    "kernel preset cannot be combined with segments",
                ));
            }
            return match preset.as_str() {
                "three-band-efficiency" => PiecewiseKernel::three_band_efficiency(horizon),
                "unit" => PiecewiseKernel::constant(1.0, horizon),
                other => Err(Error::config(format!("unknown kernel preset '{other}'"))),
            };
        }
        let segments = self
            .segments
            .iter()
            .map(|seg| seg.value.to_segment(horizon))
            .collect::<Result<Vec<_>>>()?;
        let boundaries = self
            .boundaries
            .iter()
            .map(|b| BoundaryCurve::Proportional(b.proportional))
            .collect();
        PiecewiseKernel::new(segments, boundaries, horizon)
    }
}

impl SegmentValue {
    fn to_segment(&self, horizon: f64) -> Result<KernelSegment> {
        match self {
            SegmentValue::Constant(c) => Ok(KernelSegment::constant(*c)),
            SegmentValue::Builtin(id) => parse_builtin_segment(id),
            SegmentValue::Schedule(EfficiencySchedule {
                age_linear: AgeLinear { from, to },
            }) => {
                let (from, to) = (*from, *to);
                Ok(KernelSegment::new(move |t, s| {
                    from + (to - from) * (t - s) / horizon
                }))
            }
        }
    }
}

fn parse_builtin_segment(id: &str) -> Result<KernelSegment> {
    if id == "unit" {
        return Ok(KernelSegment::constant(1.0));
    }
    if let Some(pct) = id.strip_prefix("efficiency:") {
        let pct: f64 = pct
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("bad efficiency id '{id}'")))?;
        return Ok(KernelSegment::constant(pct / 100.0));
    }
    Err(Error::config(format!("unknown segment expression '{id}'")))
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn bounds_partition_interval(
            t in 1e-6f64..1.0,
            mut ratios in proptest::collection::vec(0.01f64..0.99, 0..5),
        ) {
            ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ratios.dedup();
            let values = vec![1.0; ratios.len() + 1];
            let k = PiecewiseKernel::proportional_bands(&values, &ratios, 1.0).unwrap();
            let b = k.segment_bounds(t).unwrap();
            prop_assert_eq!(b.len(), ratios.len() + 2);
            let sum: f64 = b.windows(2).map(|w| w[1] - w[0]).sum();
            prop_assert!((sum - t).abs() <= 1e-12 * t);
            prop_assert!(b.windows(2).all(|w| w[1] > w[0]));
        }

        #[test]
        fn eval_matches_band_interior(t in 0.01f64..1.0, frac in 0.001f64..0.999) {
            let values = [1.0, 0.9, 0.85];
            let k = PiecewiseKernel::three_band_efficiency(1.0).unwrap();
            let b = k.segment_bounds(t).unwrap();
            for i in 0..3 {
                let s = b[i] + frac * (b[i + 1] - b[i]);
                if s > b[i] && s < b[i + 1] {
                    prop_assert_eq!(k.eval(t, s).unwrap(), values[i]);
                }
            }
        }
    }
}
