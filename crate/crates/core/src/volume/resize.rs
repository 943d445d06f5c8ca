use super::{Dims3, Volume3};
use crate::error::{Error, Result};

/// Source sample positions for one axis under align-corners mapping:
/// `(lower index, upper index, weight of upper)`.
fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    (0..dst)
        .map(|i| {
            if src == 1 || dst == 1 {
                return (0, 0, 0.0);
            }
            let pos = i as f64 * (src - 1) as f64 / (dst - 1) as f64;
            let lo = (pos.floor() as usize).min(src - 1);
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

/// Align-corners trilinear interpolation to `out`.
pub fn trilinear_resize(v: &Volume3, out: Dims3) -> Result<Volume3> {
    if out.is_empty() {
        return Err(Error::Size(format!("resize target {out} contains a zero")));
    }
    let src = v.dims();
    if src == out {
        return Ok(v.clone());
    }
    let tt = axis_taps(src.t, out.t);
    let th = axis_taps(src.h, out.h);
    let tw = axis_taps(src.w, out.w);
    let mut data = Vec::with_capacity(out.len());
    for &(t0, t1, ft) in &tt {
        for &(h0, h1, fh) in &th {
            for &(w0, w1, fw) in &tw {
                let g = |t, h, w| v.get(t, h, w) as f64;
                let lerp = |a: f64, b: f64, f: f64| if f == 0.0 { a } else { a + (b - a) * f };
                let c00 = lerp(g(t0, h0, w0), g(t0, h0, w1), fw);
                let c01 = lerp(g(t0, h1, w0), g(t0, h1, w1), fw);
                let c10 = lerp(g(t1, h0, w0), g(t1, h0, w1), fw);
                let c11 = lerp(g(t1, h1, w0), g(t1, h1, w1), fw);
                let c0 = lerp(c00, c01, fh);
                let c1 = lerp(c10, c11, fh);
                data.push(lerp(c0, c1, ft) as f32);
            }
        }
    }
    Ok(Volume3::from_raw(out, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_stays_constant() {
        let v = Volume3::filled(Dims3::new(2, 3, 4), 7.0);
        let r = trilinear_resize(&v, Dims3::new(5, 9, 2)).unwrap();
        assert!(r.data().iter().all(|&x| x == 7.0));
    }

    #[test]
    fn gradcam_map_upsamples_to_clip_size() {
        let v = Volume3::from_fn(Dims3::new(2, 7, 7), |t, h, w| (t + h * w) as f32).unwrap();
        let r = trilinear_resize(&v, Dims3::new(16, 112, 112)).unwrap();
        assert_eq!(r.dims(), Dims3::new(16, 112, 112));
        assert_eq!(r.get(0, 0, 0), v.get(0, 0, 0));
        assert_eq!(r.get(15, 111, 111), v.get(1, 6, 6));
    }

    #[test]
    fn ramp_matches_closed_form() {
        // f(h) = 3h + 1 on 5 rows, upsampled to 10 rows: sample i sits at
        // h = i * 4 / 9, where the ramp is linear so interpolation is exact.
        let v = Volume3::from_fn(Dims3::new(1, 5, 3), |_, h, _| 3.0 * h as f32 + 1.0).unwrap();
        let r = trilinear_resize(&v, Dims3::new(1, 10, 3)).unwrap();
        for i in 0..10 {
            let expected = 3.0 * (i as f64 * 4.0 / 9.0) + 1.0;
            for w in 0..3 {
                assert!((r.get(0, i, w) as f64 - expected).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn zero_target_is_size_error() {
        let v = Volume3::zeros(Dims3::new(2, 2, 2));
        assert!(matches!(
            trilinear_resize(&v, Dims3::new(0, 2, 2)),
            Err(Error::Size(_))
        ));
    }

    proptest! {
        #[test]
        fn same_dims_is_identity(data in prop::collection::vec(-5f32..5.0, 24)) {
            let v = Volume3::new(Dims3::new(2, 3, 4), data).unwrap();
            prop_assert_eq!(trilinear_resize(&v, v.dims()).unwrap(), v);
        }
    }
}
