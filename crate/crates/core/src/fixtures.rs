//! Seeded synthetic inputs: weight bundles, tiny networks, clips and the
//! moving-square scene.
//!
//! Everything here is a pure function of its arguments and seed.

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::net::{Architecture, InputShape, Model, Tensor, WeightBundle};
use crate::volume::{Dims3, Volume3};

/// Small architectures used for oracle checks. `tiny-gap` ends in
/// conv → gap3d → dense so that CAM is defined directly. All others feed
/// only rectified activations into hidden linear layers.
pub const TINY_NETS: &[(&str, &str)] = &[
    (
        "tiny-conv",
        "input channels=3 t=4 h=6 w=6\n\
         conv3d name=c1 out=3 kernel=3 pad=1\n\
         relu name=r1\n\
         maxpool3d name=p1 window=2\n\
         conv3d name=c2 out=4 kernel=2\n\
         relu name=r2\n\
         flatten name=flat\n\
         dense name=fc out=3\n",
    ),
    (
        "tiny-strided",
        "input channels=3 t=5 h=7 w=7\n\
         conv3d name=c1 out=4 kernel=3 stride=1,2,2 pad=1\n\
         relu name=r1\n\
         maxpool3d name=p1 window=2 stride=2 pad=0,1,1\n\
         flatten name=flat\n\
         dense name=fc1 out=6\n\
         relu name=r2\n\
         dense name=fc2 out=4\n",
    ),
    (
        "tiny-gap",
        "input channels=3 t=4 h=6 w=6\n\
         conv3d name=c1 out=4 kernel=3 pad=1\n\
         relu name=r1\n\
         conv3d name=feat out=5 kernel=3 pad=1\n\
         gap3d name=gap\n\
         dense name=fc out=3\n",
    ),
    (
        "tiny-relu-gap",
        "input channels=3 t=6 h=8 w=8\n\
         conv3d name=c1 out=4 kernel=3 stride=1,2,2 pad=1\n\
         relu name=r1\n\
         conv3d name=c2 out=6 kernel=3 pad=1\n\
         relu name=r2\n\
         gap3d name=gap\n\
         dense name=fc out=4\n",
    ),
];

/// Tiny nets whose hidden linear layers only see nonnegative inputs.
pub const RECTIFIED_TINY_NETS: &[&str] = &["tiny-conv", "tiny-strided", "tiny-relu-gap"];

pub fn tiny_arch(name: &str) -> Option<Architecture> {
    TINY_NETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| Architecture::parse(text).expect("tiny net parses"))
}

/// He-uniform weights for every parametrized layer of `arch`. Biases are
/// uniform in ±0.5 unless `zero_bias`.
pub fn random_bundle(arch: &Architecture, seed: u64, zero_bias: bool) -> Result<WeightBundle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bundle = WeightBundle::new();
    let mut shape = arch.input.as_vec();
    for layer in &arch.layers {
        if let Some((wshape, bshape)) = layer.param_shapes(&shape) {
            let fan_in: usize = wshape[1..].iter().product();
            let a = (6.0 / fan_in as f32).sqrt();
            let n: usize = wshape.iter().product();
            let w: Vec<f32> = (0..n).map(|_| rng.gen_range(-a..a)).collect();
            let b: Vec<f32> = (0..bshape[0])
                .map(|_| if zero_bias { 0.0 } else { rng.gen_range(-0.5..0.5) })
                .collect();
            bundle.insert(format!("{}.weight", layer.name), Tensor::new(wshape, w)?);
            bundle.insert(format!("{}.bias", layer.name), Tensor::new(bshape, b)?);
        }
        shape = layer.output_shape(&shape)?;
    }
    Ok(bundle)
}

pub fn random_model(arch: Architecture, seed: u64, zero_bias: bool) -> Result<Model> {
    let bundle = random_bundle(&arch, seed, zero_bias)?;
    Model::load(arch, &bundle)
}

/// Mean-subtracted input drawn uniformly from the valid pixel range
/// `[−mean, 255 − mean]`; channel `c` uses mean `c % 3`.
pub fn random_input(shape: InputShape, means: [f32; 3], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per = shape.t * shape.h * shape.w;
    let mut data = Vec::with_capacity(shape.channels * per);
    for c in 0..shape.channels {
        let m = means[c % 3];
        data.extend((0..per).map(|_| rng.gen_range(0.0f32..=255.0) - m));
    }
    Tensor::new(shape.as_vec(), data).expect("input shape")
}

/// Nonnegative relevance-like volume: uniform noise where a second draw
/// passes `density`, zero elsewhere.
pub fn random_relevance(dims: Dims3, density: f64, seed: u64) -> Volume3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Volume3::from_fn(dims, |_, _, _| {
        let v = rng.gen_range(0.0f32..1.0);
        if rng.gen_bool(density) {
            v
        } else {
            0.0
        }
    })
    .expect("finite")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SquareSpec {
    pub frames: usize,
    pub h: usize,
    pub w: usize,
    pub size: usize,
    /// Top-left corner at frame 0, `(y, x)`.
    pub origin: (usize, usize),
    /// Displacement per frame, `(dy, dx)`.
    pub velocity: (isize, isize),
    pub seed: u64,
    /// Random static texture behind the square instead of a flat fill.
    pub textured: bool,
}

impl Default for SquareSpec {
    fn default() -> Self {
        SquareSpec {
            frames: 16,
            h: 112,
            w: 112,
            size: 24,
            origin: (44, 20),
            velocity: (0, 3),
            seed: 7,
            textured: true,
        }
    }
}

impl SquareSpec {
    /// Top-left corner at frame `t`.
    pub fn position(&self, t: usize) -> (usize, usize) {
        let y = self.origin.0 as isize + self.velocity.0 * t as isize;
        let x = self.origin.1 as isize + self.velocity.1 * t as isize;
        (y as usize, x as usize)
    }

    pub fn contains(&self, t: usize, y: usize, x: usize) -> bool {
        let (y0, x0) = self.position(t);
        (y0..y0 + self.size).contains(&y) && (x0..x0 + self.size).contains(&x)
    }

    fn validate(&self) -> Result<()> {
        if self.frames < 2 || self.size == 0 {
            return Err(Error::input("square scene needs >= 2 frames and a nonempty square"));
        }
        for t in [0, self.frames - 1] {
            let y = self.origin.0 as isize + self.velocity.0 * t as isize;
            let x = self.origin.1 as isize + self.velocity.1 * t as isize;
            if y < 0 || x < 0 || y as usize + self.size > self.h || x as usize + self.size > self.w {
                return Err(Error::input(format!("square leaves the frame at t={t}")));
            }
        }
        Ok(())
    }
}

/// A textured square translating over a static background.
#[derive(Clone, Debug)]
pub struct SquareScene {
    pub spec: SquareSpec,
    pub frames: Vec<RgbImage>,
    /// 1 where the square covers the voxel, else 0.
    pub support: Volume3,
}

pub fn moving_square(spec: SquareSpec) -> Result<SquareScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let background: Vec<[u8; 3]> = (0..spec.h * spec.w)
        .map(|_| {
            if spec.textured {
                let g = rng.gen_range(40u8..160);
                [g, g.saturating_add(rng.gen_range(0..20)), g]
            } else {
                [60, 60, 60]
            }
        })
        .collect();
    let sprite: Vec<[u8; 3]> = (0..spec.size * spec.size)
        .map(|_| {
            let g = rng.gen_range(170u8..=255);
            [g, g / 2, rng.gen_range(0..60)]
        })
        .collect();
    let frames = (0..spec.frames)
        .map(|t| {
            let (y0, x0) = spec.position(t);
            RgbImage::from_fn(spec.w as u32, spec.h as u32, |x, y| {
                let (x, y) = (x as usize, y as usize);
                if spec.contains(t, y, x) {
                    Rgb(sprite[(y - y0) * spec.size + (x - x0)])
                } else {
                    Rgb(background[y * spec.w + x])
                }
            })
        })
        .collect();
    let support = Volume3::from_fn(Dims3::new(spec.frames, spec.h, spec.w), |t, y, x| {
        if spec.contains(t, y, x) {
            1.0
        } else {
            0.0
        }
    })?;
    Ok(SquareScene {
        spec,
        frames,
        support,
    })
}

/// Relevance constructed over a square scene: a static blob that never
/// moves plus a blob riding on the square.
#[derive(Clone, Debug)]
pub struct MotionRelevance {
    pub relevance: Volume3,
    /// The static blob's voxels (1/0).
    pub static_support: Volume3,
    /// Share of total mass in the static blob.
    pub static_share: f64,
}

/// `static_share` of the mass goes to a fixed box in the corner opposite
/// the square's path; the rest is spread over the square at every frame.
/// Both blobs have a raised-cosine profile so values vary inside them.
pub fn motion_relevance(scene: &SquareScene, static_share: f64) -> Result<MotionRelevance> {
    if !(0.0..1.0).contains(&static_share) {
        return Err(Error::input("static_share must be in [0, 1)"));
    }
    let s = scene.spec;
    let dims = Dims3::new(s.frames, s.h, s.w);
    let bump = |i: usize, n: usize| {
        let p = (i as f64 + 0.5) / n as f64;
        0.5 - 0.5 * (2.0 * std::f64::consts::PI * p).cos() + 0.1
    };
    let side = s.size.min(s.h / 4).max(2);
    let (sy, sx) = if s.origin.0 >= s.h / 2 { (2, 2) } else { (s.h - side - 2, 2) };
    let in_static = |y: usize, x: usize| (sy..sy + side).contains(&y) && (sx..sx + side).contains(&x);
    for t in 0..s.frames {
        for y in sy..sy + side {
            for x in sx..sx + side {
                if s.contains(t, y, x) {
                    return Err(Error::input("static blob overlaps the square's path"));
                }
            }
        }
    }
    let static_raw = |y: usize, x: usize| bump(y - sy, side) * bump(x - sx, side);
    let moving_raw = |t: usize, y: usize, x: usize| {
        let (y0, x0) = s.position(t);
        bump(y - y0, s.size) * bump(x - x0, s.size)
    };
    let mut static_mass = 0.0;
    let mut moving_mass = 0.0;
    for t in 0..s.frames {
        for y in 0..s.h {
            for x in 0..s.w {
                if in_static(y, x) {
                    static_mass += static_raw(y, x);
                }
                if s.contains(t, y, x) {
                    moving_mass += moving_raw(t, y, x);
                }
            }
        }
    }
    let ks = static_share / static_mass;
    let km = (1.0 - static_share) / moving_mass;
    let relevance = Volume3::from_fn(dims, |t, y, x| {
        if in_static(y, x) {
            (ks * static_raw(y, x)) as f32
        } else if s.contains(t, y, x) {
            (km * moving_raw(t, y, x)) as f32
        } else {
            0.0
        }
    })?;
    let static_support = Volume3::from_fn(dims, |_, y, x| if in_static(y, x) { 1.0 } else { 0.0 })?;
    Ok(MotionRelevance {
        relevance,
        static_support,
        static_share,
    })
}
