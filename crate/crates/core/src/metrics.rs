//! Motion precision, selectivity, agreement and timing.
//!
//! Every metric is a percentage over support masks, so positive rescaling
//! of the inputs never changes it.

use std::fmt;
use std::fmt::Write as _;
use std::hint::black_box;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::explain::RelevanceVolume;
use crate::volume::Volume3;

/// Default relevance threshold, as a fraction of `max|R|`.
pub const DEFAULT_EPS_R_REL: f32 = 1e-3;
/// Default flow threshold in pixels per frame.
pub const DEFAULT_EPS_O: f32 = 1e-2;
pub const DEFAULT_WARMUP: usize = 3;

/// Threshold separating relevant from negligible voxels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RelevanceEps {
    /// Fraction of the volume's `max|R|`.
    Relative(f32),
    Absolute(f32),
}

impl Default for RelevanceEps {
    fn default() -> Self {
        RelevanceEps::Relative(DEFAULT_EPS_R_REL)
    }
}

impl RelevanceEps {
    pub fn resolve(self, v: &Volume3) -> Result<f32> {
        match self {
            RelevanceEps::Relative(f) | RelevanceEps::Absolute(f) if !(f.is_finite() && f >= 0.0) => {
                Err(Error::input(format!("relevance epsilon must be finite and >= 0, got {f}")))
            }
            RelevanceEps::Relative(f) => Ok(f * v.max_abs()),
            RelevanceEps::Absolute(f) => Ok(f),
        }
    }
}

impl fmt::Display for RelevanceEps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelevanceEps::Relative(x) => write!(f, "{x}*max|R|"),
            RelevanceEps::Absolute(x) => write!(f, "{x}"),
        }
    }
}

fn check_dims(a: &Volume3, b: &Volume3, what: &str) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::input(format!(
            "{what}: dims {} and {} differ",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

fn pct(num: usize, den: usize) -> f64 {
    100.0 * num as f64 / den as f64
}

/// `100 · |I_R ∧ I_O| / |I_R|` with `I_R = R > ε_r`, `I_O = flow > ε_o`.
pub fn motion_precision(r: &RelevanceVolume, flow_mag: &Volume3, eps_r: RelevanceEps, eps_o: f32) -> Result<f64> {
    check_dims(&r.volume, flow_mag, "motion precision")?;
    let er = eps_r.resolve(&r.volume)?;
    let mut relevant = 0usize;
    let mut hit = 0usize;
    for (&rv, &fv) in r.volume.data().iter().zip(flow_mag.data()) {
        if rv > er {
            relevant += 1;
            if fv > eps_o {
                hit += 1;
            }
        }
    }
    if relevant == 0 {
        return Err(Error::EmptyRelevance(format!(
            "no voxel of {} exceeds {er}; precision undefined",
            r.method
        )));
    }
    Ok(pct(hit, relevant))
}

/// Area and mass of `sel` relative to `base`, both in percent.
///
/// The threshold is resolved on `base` and applied to both volumes.
pub fn selectivity_ratios(sel: &RelevanceVolume, base: &RelevanceVolume, eps_r: RelevanceEps) -> Result<(f64, f64)> {
    check_dims(&sel.volume, &base.volume, "selectivity")?;
    let er = eps_r.resolve(&base.volume)?;
    let (mut area_sel, mut area_base) = (0usize, 0usize);
    let (mut mass_sel, mut mass_base) = (0.0f64, 0.0f64);
    for (&s, &b) in sel.volume.data().iter().zip(base.volume.data()) {
        if s > 0.0 && b <= 0.0 {
            return Err(Error::input("selective support is not contained in the base support"));
        }
        area_sel += usize::from(s > er);
        area_base += usize::from(b > er);
        mass_sel += (s as f64).max(0.0);
        mass_base += (b as f64).max(0.0);
    }
    if area_base == 0 {
        return Err(Error::EmptyRelevance(format!(
            "base {} has no voxel above {er}",
            base.method
        )));
    }
    Ok((pct(area_sel, area_base), 100.0 * (mass_sel / mass_base).min(1.0)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AgreementMode {
    /// `|A ∩ B| / |A ∪ B|`.
    #[default]
    Iou,
    /// `|A ∩ B| / |A|`.
    Directional,
}

impl AgreementMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AgreementMode::Iou => "iou",
            AgreementMode::Directional => "directional",
        }
    }
}

impl FromStr for AgreementMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iou" => Ok(AgreementMode::Iou),
            "directional" => Ok(AgreementMode::Directional),
            _ => Err(Error::input(format!("unknown agreement mode `{s}`"))),
        }
    }
}

/// Overlap of the supports of `a` and `b`. Each support uses its own
/// resolved threshold.
pub fn agreement(a: &RelevanceVolume, b: &RelevanceVolume, eps_r: RelevanceEps, mode: AgreementMode) -> Result<f64> {
    check_dims(&a.volume, &b.volume, "agreement")?;
    let (ea, eb) = (eps_r.resolve(&a.volume)?, eps_r.resolve(&b.volume)?);
    let (mut inter, mut union, mut count_a) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.volume.data().iter().zip(b.volume.data()) {
        let (ia, ib) = (x > ea, y > eb);
        inter += usize::from(ia && ib);
        union += usize::from(ia || ib);
        count_a += usize::from(ia);
    }
    let den = match mode {
        AgreementMode::Iou => union,
        AgreementMode::Directional => count_a,
    };
    if den == 0 {
        return Err(Error::EmptyRelevance(format!(
            "no support in {} / {} for agreement",
            a.method, b.method
        )));
    }
    Ok(pct(inter, den))
}

/// Mean and population standard deviation of a sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(samples: &[f64]) -> Option<Summary> {
        if samples.is_empty() {
            return None;
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(Summary {
            mean,
            std: var.sqrt(),
            count: samples.len(),
        })
    }
}

/// Per-clip values for one method. `None` marks an undefined metric.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClipMetrics {
    pub precision_pct: Option<f64>,
    pub selectivity_area_pct: Option<f64>,
    pub selectivity_mass_pct: Option<f64>,
    pub agreement_pct: Option<f64>,
}

/// Per-clip metrics aggregated for one method label.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub method: String,
    pub clips: usize,
    pub precision_pct: Option<Summary>,
    pub selectivity_area_pct: Option<Summary>,
    pub selectivity_mass_pct: Option<Summary>,
    pub agreement_pct: Option<Summary>,
}

impl MetricsReport {
    pub fn aggregate(method: impl Into<String>, clips: &[ClipMetrics]) -> MetricsReport {
        let collect = |f: fn(&ClipMetrics) -> Option<f64>| Summary::of(&clips.iter().filter_map(f).collect::<Vec<_>>());
        MetricsReport {
            method: method.into(),
            clips: clips.len(),
            precision_pct: collect(|c| c.precision_pct),
            selectivity_area_pct: collect(|c| c.selectivity_area_pct),
            selectivity_mass_pct: collect(|c| c.selectivity_mass_pct),
            agreement_pct: collect(|c| c.agreement_pct),
        }
    }

    fn rows(&self) -> [(&'static str, Option<Summary>); 4] {
        [
            ("precision", self.precision_pct),
            ("selectivity_area", self.selectivity_area_pct),
            ("selectivity_mass", self.selectivity_mass_pct),
            ("agreement", self.agreement_pct),
        ]
    }
}

pub const METRICS_CSV_HEADER: &str = "method,metric,avg,std,n,clips";

/// One `method,metric,avg,std,n,clips` line per defined metric.
pub fn metrics_csv(reports: &[MetricsReport]) -> String {
    let mut out = format!("{METRICS_CSV_HEADER}\n");
    for r in reports {
        for (name, s) in r.rows() {
            if let Some(s) = s {
                writeln!(out, "{},{name},{:.4},{:.4},{},{}", r.method, s.mean, s.std, s.count, r.clips).unwrap();
            }
        }
    }
    out
}

pub fn metrics_text(reports: &[MetricsReport], mode: AgreementMode) -> String {
    let mut out = String::new();
    for r in reports {
        writeln!(out, "{} ({} clips)", r.method, r.clips).unwrap();
        for (name, s) in r.rows() {
            match s {
                Some(s) => writeln!(out, "  {name:<17} {:>8.2}% ± {:.2} (n={})", s.mean, s.std, s.count).unwrap(),
                None => writeln!(out, "  {name:<17}        -").unwrap(),
            }
        }
    }
    writeln!(out, "agreement mode: {}", mode.as_str()).unwrap();
    out
}

/// Wall-clock statistics for one timed task.
#[derive(Clone, Debug, PartialEq)]
pub struct TimingStats {
    pub label: String,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub min_ms: f64,
    pub repetitions: usize,
    pub warmup: usize,
}

/// Runs `body` `warmup` times untimed, then `repetitions` times timed.
pub fn benchmark<T>(label: impl Into<String>, repetitions: usize, warmup: usize, mut body: impl FnMut() -> T) -> Result<TimingStats> {
    if repetitions == 0 {
        return Err(Error::input("repetitions must be >= 1"));
    }
    for _ in 0..warmup {
        black_box(body());
    }
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        black_box(body());
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let s = Summary::of(&samples).expect("nonempty");
    Ok(TimingStats {
        label: label.into(),
        mean_ms: s.mean,
        std_ms: s.std,
        min_ms: samples.iter().copied().fold(f64::INFINITY, f64::min),
        repetitions,
        warmup,
    })
}

/// Timings for a baseline, its selective step and the two combined.
#[derive(Clone, Debug, PartialEq)]
pub struct TimingReport {
    pub rows: Vec<TimingStats>,
}

impl TimingReport {
    pub fn row(&self, label: &str) -> Option<&TimingStats> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// `combined − baseline` mean, in ms.
    pub fn overhead_ms(&self, baseline: &str, combined: &str) -> Option<f64> {
        Some(self.row(combined)?.mean_ms - self.row(baseline)?.mean_ms)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,avg_ms,std_ms,min_ms,reps,warmup\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{:.4},{:.4},{:.4},{},{}",
                r.label, r.mean_ms, r.std_ms, r.min_ms, r.repetitions, r.warmup
            )
            .unwrap();
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            writeln!(
                out,
                "{:<24} {:>10.3} ms ± {:.3} (min {:.3}, {} reps, {} warmup)",
                r.label, r.mean_ms, r.std_ms, r.min_ms, r.repetitions, r.warmup
            )
            .unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::{Method, MethodTag};
    use crate::volume::Dims3;

    fn rel(data: Vec<f32>) -> RelevanceVolume {
        let n = data.len();
        RelevanceVolume::new(
            Volume3::new(Dims3::new(1, 1, n), data).unwrap(),
            MethodTag::base(Method::Dtd),
            0,
        )
    }

    fn vol(data: Vec<f32>) -> Volume3 {
        let n = data.len();
        Volume3::new(Dims3::new(1, 1, n), data).unwrap()
    }

    const ABS0: RelevanceEps = RelevanceEps::Absolute(0.0);

    #[test]
    fn precision_counts() {
        let r = rel(vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        let f = vol(vec![1.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(motion_precision(&r, &f, ABS0, 0.0).unwrap(), 75.0);
        let all = vol(vec![1.0; 6]);
        assert_eq!(motion_precision(&rel(vec![2.0; 6]), &all, ABS0, 0.0).unwrap(), 100.0);
        assert!(matches!(
            motion_precision(&rel(vec![0.0; 6]), &all, ABS0, 0.0),
            Err(Error::EmptyRelevance(_))
        ));
        assert!(motion_precision(&rel(vec![1.0; 5]), &all, ABS0, 0.0).is_err());
    }

    #[test]
    fn precision_uses_strict_thresholds() {
        let r = rel(vec![1.0, 0.001, 0.0009]);
        let f = vol(vec![0.01, 0.02, 1.0]);
        // ε_r = 1e-3·1 keeps voxels 0 only; flow 0.01 is not > 0.01.
        assert_eq!(motion_precision(&r, &f, RelevanceEps::default(), DEFAULT_EPS_O).unwrap(), 0.0);
    }

    #[test]
    fn selectivity_counts() {
        // 10 positive base voxels summing to 10; two of them (mass 5) kept.
        let sel = rel(vec![2.5, 2.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let base = rel(vec![2.5, 2.5, 0.625, 0.625, 0.625, 0.625, 0.625, 0.625, 0.625, 0.625]);
        let (area, mass) = selectivity_ratios(&sel, &base, ABS0).unwrap();
        assert_eq!(area, 20.0);
        assert!((mass - 50.0).abs() < 1e-9);
        assert_eq!(selectivity_ratios(&base, &base, RelevanceEps::default()).unwrap(), (100.0, 100.0));
        assert_eq!(selectivity_ratios(&rel(vec![0.0; 10]), &base, RelevanceEps::default()).unwrap(), (0.0, 0.0));
        assert!(matches!(
            selectivity_ratios(&rel(vec![0.0; 10]), &rel(vec![0.0; 10]), ABS0),
            Err(Error::EmptyRelevance(_))
        ));
        assert!(selectivity_ratios(&base, &sel, ABS0).is_err());
    }

    #[test]
    fn agreement_counts() {
        let a = rel(vec![1., 1., 1., 1., 0., 0., 0., 0.]);
        let b = rel(vec![0., 0., 1., 1., 1., 1., 0., 0.]);
        let iou = agreement(&a, &b, ABS0, AgreementMode::Iou).unwrap();
        assert!((iou - 100.0 * 2.0 / 6.0).abs() < 1e-12);
        assert_eq!(agreement(&b, &a, ABS0, AgreementMode::Iou).unwrap(), iou);
        assert_eq!(agreement(&a, &b, ABS0, AgreementMode::Directional).unwrap(), 50.0);
        assert_eq!(agreement(&a, &a, ABS0, AgreementMode::Iou).unwrap(), 100.0);
        let c = rel(vec![0., 0., 0., 0., 0., 0., 1., 1.]);
        assert_eq!(agreement(&a, &c, ABS0, AgreementMode::Iou).unwrap(), 0.0);
        let z = rel(vec![0.0; 8]);
        assert!(matches!(agreement(&z, &z, ABS0, AgreementMode::Iou), Err(Error::EmptyRelevance(_))));
    }

    #[test]
    fn rescaling_leaves_metrics_unchanged() {
        let a = rel(vec![0.5, 0.0001, 3.0, 0.0, 2.0]);
        let b = rel(vec![0.1, 0.2, 0.0, 0.0, 4.0]);
        let f = vol(vec![0.5, 0.0, 2.0, 1.0, 0.0]);
        let eps = RelevanceEps::default();
        let scaled = |r: &RelevanceVolume, c: f32| RelevanceVolume { volume: r.volume.scale(c), ..r.clone() };
        for c in [0.01f32, 7.0, 1000.0] {
            assert_eq!(
                motion_precision(&a, &f, eps, DEFAULT_EPS_O).unwrap(),
                motion_precision(&scaled(&a, c), &f, eps, DEFAULT_EPS_O).unwrap()
            );
            assert_eq!(
                agreement(&a, &b, eps, AgreementMode::Iou).unwrap(),
                agreement(&scaled(&a, c), &scaled(&b, c), eps, AgreementMode::Iou).unwrap()
            );
        }
    }

    #[test]
    fn summaries_and_reports() {
        let s = Summary::of(&[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std, s.count), (2.0, 1.0, 2));
        assert!(Summary::of(&[]).is_none());
        let clips = vec![
            ClipMetrics { precision_pct: Some(40.0), ..Default::default() },
            ClipMetrics { precision_pct: None, ..Default::default() },
            ClipMetrics { precision_pct: Some(60.0), ..Default::default() },
        ];
        let r = MetricsReport::aggregate("dtd", &clips);
        assert_eq!(r.clips, 3);
        assert_eq!(r.precision_pct.unwrap().count, 2);
        assert_eq!(r.precision_pct.unwrap().mean, 50.0);
        let csv = metrics_csv(std::slice::from_ref(&r));
        assert_eq!(csv, "method,metric,avg,std,n,clips\ndtd,precision,50.0000,10.0000,2,3\n");
        assert!(metrics_text(&[r], AgreementMode::Iou).contains("agreement mode: iou"));
    }

    #[test]
    fn benchmark_stats() {
        let mut calls = 0;
        let t = benchmark("noop", 1, 2, || calls += 1).unwrap();
        assert_eq!(calls, 3);
        assert_eq!(t.std_ms, 0.0);
        let t = benchmark("sum", 20, 0, || (0..1000u64).sum::<u64>()).unwrap();
        assert!(t.mean_ms >= t.min_ms && t.min_ms >= 0.0);
        assert!(benchmark("x", 0, 0, || ()).is_err());
        let report = TimingReport {
            rows: vec![
                TimingStats { label: "dtd".into(), mean_ms: 10.0, std_ms: 0.0, min_ms: 10.0, repetitions: 1, warmup: 0 },
                TimingStats { label: "selective-dtd".into(), mean_ms: 10.5, std_ms: 0.0, min_ms: 10.5, repetitions: 1, warmup: 0 },
            ],
        };
        assert_eq!(report.overhead_ms("dtd", "selective-dtd"), Some(0.5));
        assert!(report.to_csv().starts_with("method,avg_ms,std_ms"));
    }
}
