//! Shared inputs for the kernel benchmarks.

use selrel::explain::{Method, MethodTag, RelevanceVolume};
use selrel::fixtures::{moving_square, random_input, random_model, random_relevance, tiny_arch, SquareSpec};
use selrel::flow::{FlowParams, GrayFrame};
use selrel::net::{Architecture, Model, Tensor};
use selrel::volume::{Dims3, Volume3};

/// A clip-sized (16×112×112) sparse relevance volume.
pub fn clip_relevance(seed: u64) -> RelevanceVolume {
    RelevanceVolume::new(
        random_relevance(Dims3::new(16, 112, 112), 0.3, seed),
        MethodTag::base(Method::Dtd),
        0,
    )
}

pub fn clip_volume(seed: u64) -> Volume3 {
    clip_relevance(seed).volume
}

/// A seeded model and a matching input.
pub fn model_and_input(name: &str, seed: u64) -> (Model, Tensor) {
    let arch = tiny_arch(name)
        .or_else(|| Architecture::preset(name))
        .unwrap_or_else(|| panic!("unknown net {name}"));
    let model = random_model(arch, seed, false).expect("random weights load");
    let x = random_input(model.input_shape(), model.means(), seed + 1);
    (model, x)
}

/// Two consecutive grayscale frames of the moving-square fixture.
pub fn frame_pair() -> (GrayFrame, GrayFrame, FlowParams) {
    let scene = moving_square(SquareSpec::default()).expect("default scene fits");
    let p = FlowParams::default();
    (
        GrayFrame::from_rgb(&scene.frames[0], p.gray_weights),
        GrayFrame::from_rgb(&scene.frames[1], p.gray_weights),
        p,
    )
}
