//! Selective relevance: keep only the relevance that changes sharply over
//! time.
//!
//! The temporal edge map `G` is the 3D Sobel response of a relevance volume
//! along the frame axis. Voxels whose `|G|` exceeds `n · std(G)` form a
//! binary mask, and the masked relevance is the selective map.

use crate::error::{Error, Result};
use crate::explain::RelevanceVolume;
use crate::volume::{sobel3, volume_stats, Axis, Volume3};

/// Threshold used when none is given.
pub const DEFAULT_N_SIGMA: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectiveConfig {
    /// Threshold in standard deviations of the edge map.
    pub n_sigma: f64,
    /// Compare `|G|` (true) or signed `G` (false) against the threshold.
    pub use_magnitude: bool,
}

impl Default for SelectiveConfig {
    fn default() -> Self {
        SelectiveConfig {
            n_sigma: DEFAULT_N_SIGMA,
            use_magnitude: true,
        }
    }
}

impl SelectiveConfig {
    pub fn new(n_sigma: f64) -> Result<Self> {
        let cfg = SelectiveConfig {
            n_sigma,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n_sigma.is_finite() || self.n_sigma < 0.0 {
            return Err(Error::input(format!(
                "n_sigma must be finite and >= 0, got {}",
                self.n_sigma
            )));
        }
        Ok(())
    }
}

/// A volume whose values are exactly 0 or 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportMask(Volume3);

impl SupportMask {
    pub fn from_volume(v: Volume3) -> Result<Self> {
        if v.data().iter().any(|&x| x != 0.0 && x != 1.0) {
            return Err(Error::input("mask values must be 0 or 1"));
        }
        Ok(SupportMask(v))
    }

    pub fn volume(&self) -> &Volume3 {
        &self.0
    }

    pub fn into_volume(self) -> Volume3 {
        self.0
    }

    pub fn count(&self) -> usize {
        self.0.data().iter().filter(|&&x| x == 1.0).count()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.data()[i] == 1.0
    }

    /// True if every selected voxel of `self` is selected in `other`.
    pub fn is_subset_of(&self, other: &SupportMask) -> bool {
        self.0.dims() == other.0.dims()
            && self
                .0
                .data()
                .iter()
                .zip(other.0.data())
                .all(|(&a, &b)| a == 0.0 || b == 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectiveResult {
    pub edge_map: Volume3,
    pub mask: SupportMask,
    pub selected: RelevanceVolume,
    /// The realized threshold `n_sigma · std(G)`.
    pub threshold_value: f64,
    pub config: SelectiveConfig,
}

/// Temporal Sobel response of the relevance.
pub fn temporal_edge_map(r: &RelevanceVolume) -> Result<Volume3> {
    sobel3(&r.volume, Axis::T)
}

/// Thresholds `g` at `n_sigma · std(g)` (population std, mean not
/// subtracted, strict comparison). A zero std selects nothing.
pub fn selective_mask(g: &Volume3, cfg: &SelectiveConfig) -> Result<(SupportMask, f64)> {
    cfg.validate()?;
    let std = volume_stats(g).std;
    let threshold = cfg.n_sigma * std;
    let data = if std == 0.0 {
        vec![0.0; g.len()]
    } else {
        g.data()
            .iter()
            .map(|&v| {
                let v = if cfg.use_magnitude { (v as f64).abs() } else { v as f64 };
                if v > threshold {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    };
    Ok((SupportMask(Volume3::new(g.dims(), data)?), threshold))
}

/// Keeps relevance where the mask is 1. The result is tagged
/// `selective-<method>`.
pub fn apply_selective(r: &RelevanceVolume, mask: &SupportMask) -> Result<RelevanceVolume> {
    let v = r
        .volume
        .zip_with(&mask.0, |x, m| if m == 1.0 { x } else { 0.0 })?;
    Ok(RelevanceVolume {
        volume: v,
        method: r.method.selective(),
        class_idx: r.class_idx,
        flags: r.flags.clone(),
    })
}

/// Edge map, mask and masked relevance in one call.
pub fn selective_relevance(r: &RelevanceVolume, cfg: &SelectiveConfig) -> Result<SelectiveResult> {
    let edge_map = temporal_edge_map(r)?;
    let (mask, threshold_value) = selective_mask(&edge_map, cfg)?;
    let selected = apply_selective(r, &mask)?;
    Ok(SelectiveResult {
        edge_map,
        mask,
        selected,
        threshold_value,
        config: *cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::{Method, MethodTag};
    use crate::volume::Dims3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(v: Volume3) -> RelevanceVolume {
        RelevanceVolume::new(v, MethodTag::base(Method::Dtd), 3)
    }

    fn random_rel(seed: u64, dims: Dims3) -> RelevanceVolume {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rel(Volume3::from_fn(dims, |_, _, _| rng.gen_range(-0.5f32..1.0).max(0.0)).unwrap())
    }

    #[test]
    fn static_relevance_has_zero_edges_and_empty_mask() {
        let v = Volume3::from_fn(Dims3::new(6, 5, 5), |_, h, w| (h * 5 + w) as f32).unwrap();
        let res = selective_relevance(&rel(v), &SelectiveConfig::default()).unwrap();
        assert!(res.edge_map.data().iter().all(|&x| x == 0.0));
        assert_eq!(res.mask.count(), 0);
        assert!(res.selected.volume.data().iter().all(|&x| x == 0.0));
        assert_eq!(res.threshold_value, 0.0);
    }

    #[test]
    fn step_response_is_confined_around_the_step() {
        // Frames 0..=3 are 0, frames 4.. are 1 (step between t0 = 3 and 4).
        let dims = Dims3::new(8, 5, 5);
        let v = Volume3::from_fn(dims, |t, _, _| if t >= 4 { 1.0 } else { 0.0 }).unwrap();
        let g = temporal_edge_map(&rel(v.clone())).unwrap();
        for t in 0..8 {
            for h in 0..5 {
                for w in 0..5 {
                    let x = g.get(t, h, w);
                    match t {
                        3 | 4 => assert_eq!(x, 16.0),
                        _ => assert_eq!(x, 0.0),
                    }
                }
            }
        }
        assert_eq!(g, sobel3(&v, Axis::T).unwrap());
    }

    #[test]
    fn zero_edge_map_selects_nothing() {
        let g = Volume3::zeros(Dims3::new(4, 4, 4));
        let (m, thr) = selective_mask(&g, &SelectiveConfig::default()).unwrap();
        assert_eq!(m.count(), 0);
        assert_eq!(thr, 0.0);
        // A nonzero constant also has zero std.
        let g = Volume3::filled(Dims3::new(4, 4, 4), 2.5);
        assert_eq!(selective_mask(&g, &SelectiveConfig::default()).unwrap().0.count(), 0);
    }

    #[test]
    fn single_spike_is_selected() {
        let dims = Dims3::new(4, 4, 4);
        let g = Volume3::from_fn(dims, |t, h, w| if (t, h, w) == (1, 2, 3) { 100.0 } else { 0.0 })
            .unwrap();
        // Population std of one 100 among 64 values.
        let mean = 100.0 / 64.0;
        let var = ((100.0f64 - mean).powi(2) + 63.0 * mean * mean) / 64.0;
        let (m, thr) = selective_mask(&g, &SelectiveConfig::default()).unwrap();
        assert!((thr - 4.0 * var.sqrt()).abs() < 1e-9);
        assert!((var.sqrt() - 12.4).abs() < 0.05);
        assert_eq!(m.count(), 1);
        assert!(m.contains(dims.offset(1, 2, 3)));
    }

    #[test]
    fn bounded_symmetric_distribution_selects_under_one_percent() {
        // Uniform on [-1, 1]: std = 1/sqrt(3), so 4·std > 1 bounds every value.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = Volume3::from_fn(Dims3::new(10, 20, 20), |_, _, _| rng.gen_range(-1.0f32..1.0)).unwrap();
        let (m, _) = selective_mask(&g, &SelectiveConfig::default()).unwrap();
        assert!((m.count() as f64) / (g.len() as f64) < 0.01);
    }

    #[test]
    fn raw_mode_ignores_negative_edges() {
        let dims = Dims3::new(1, 1, 4);
        let g = Volume3::new(dims, vec![10.0, -10.0, 0.0, 0.0]).unwrap();
        let cfg = SelectiveConfig {
            n_sigma: 1.0,
            use_magnitude: false,
        };
        let (m, _) = selective_mask(&g, &cfg).unwrap();
        assert_eq!(m.volume().data(), &[1.0, 0.0, 0.0, 0.0]);
        let (m, _) = selective_mask(&g, &SelectiveConfig { use_magnitude: true, ..cfg }).unwrap();
        assert_eq!(m.volume().data(), &[1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn apply_with_trivial_masks() {
        let r = random_rel(4, Dims3::new(3, 3, 3));
        let ones = SupportMask::from_volume(Volume3::filled(r.dims(), 1.0)).unwrap();
        let zeros = SupportMask::from_volume(Volume3::zeros(r.dims())).unwrap();
        let all = apply_selective(&r, &ones).unwrap();
        assert_eq!(all.volume, r.volume);
        assert_eq!(all.method.to_string(), "selective-dtd");
        assert!(apply_selective(&r, &zeros).unwrap().volume.data().iter().all(|&x| x == 0.0));
        let other = SupportMask::from_volume(Volume3::zeros(Dims3::new(3, 3, 4))).unwrap();
        assert!(apply_selective(&r, &other).is_err());
    }

    #[test]
    fn rejects_bad_config_and_mask() {
        assert!(SelectiveConfig::new(-1.0).is_err());
        assert!(SelectiveConfig::new(f64::NAN).is_err());
        assert!(SupportMask::from_volume(Volume3::filled(Dims3::new(1, 1, 1), 0.5)).is_err());
    }

    proptest! {
        #[test]
        fn apply_keeps_or_zeroes_exactly(seed in any::<u64>()) {
            let r = random_rel(seed, Dims3::new(4, 4, 4));
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let mask = SupportMask::from_volume(
                Volume3::from_fn(r.dims(), |_, _, _| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }).unwrap(),
            ).unwrap();
            let out = apply_selective(&r, &mask).unwrap();
            for i in 0..r.volume.len() {
                let expected = if mask.contains(i) { r.volume.data()[i] } else { 0.0 };
                prop_assert_eq!(out.volume.data()[i].to_bits(), expected.to_bits());
            }
        }

        #[test]
        fn masks_shrink_as_threshold_grows(seed in any::<u64>(), a in 0.0f64..5.0, b in 0.0f64..5.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let r = random_rel(seed, Dims3::new(5, 6, 6));
            let g = temporal_edge_map(&r).unwrap();
            let (m_lo, _) = selective_mask(&g, &SelectiveConfig::new(lo).unwrap()).unwrap();
            let (m_hi, _) = selective_mask(&g, &SelectiveConfig::new(hi).unwrap()).unwrap();
            prop_assert!(m_hi.is_subset_of(&m_lo));
        }

        #[test]
        fn mask_is_scale_invariant(seed in any::<u64>(), c in 0.01f32..100.0) {
            let r = random_rel(seed, Dims3::new(5, 5, 5));
            let scaled = rel(r.volume.scale(c));
            let m1 = selective_relevance(&r, &SelectiveConfig::default()).unwrap().mask;
            let m2 = selective_relevance(&scaled, &SelectiveConfig::default()).unwrap().mask;
            // Rounding can move voxels sitting exactly on the threshold; allow
            // none to differ unless they are within 1e-4 relative of it.
            let g = temporal_edge_map(&r).unwrap();
            let thr = SelectiveConfig::default().n_sigma * volume_stats(&g).std;
            for i in 0..g.len() {
                if m1.contains(i) != m2.contains(i) {
                    prop_assert!(((g.data()[i].abs() as f64) - thr).abs() <= 1e-4 * thr);
                }
            }
        }

        #[test]
        fn selected_mass_bounded_by_positive_mass(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = rel(Volume3::from_fn(Dims3::new(5, 4, 4), |_, _, _| rng.gen_range(-1.0f32..1.0)).unwrap());
            let res = selective_relevance(&r, &SelectiveConfig::new(1.0).unwrap()).unwrap();
            let sel: f64 = res.selected.volume.data().iter().map(|&v| v as f64).sum();
            let pos: f64 = r.volume.data().iter().map(|&v| (v as f64).max(0.0)).sum();
            prop_assert!(sel <= pos + 1e-9);
            for i in 0..r.volume.len() {
                if res.selected.volume.data()[i] > 0.0 {
                    prop_assert!(r.volume.data()[i] > 0.0);
                }
            }
        }
    }
}
