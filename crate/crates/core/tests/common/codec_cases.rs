//! Randomized codec inputs: panning clips of varied size with perturbed
//! ground-truth masks and varied encoder settings.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use texvc::analyzer::TextureMask;
use texvc::codec::EncoderConfig;
use texvc::synth::{panning_sequence, PanningConfig, TextureKind};
use texvc::Sequence;

pub struct CodecCase {
    pub sequence: Sequence,
    pub masks: Vec<TextureMask>,
    pub config: EncoderConfig,
}

pub fn closure_case(seed: u64) -> CodecCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = [40, 64, 72, 96, 120, 136][rng.gen_range(0..6)];
    let height = [24, 48, 56, 64, 80][rng.gen_range(0..5)];
    let clip = panning_sequence(&PanningConfig {
        width,
        height,
        frames: rng.gen_range(5..=10),
        speed: rng.gen_range(0.5..3.0),
        seed,
        kind: TextureKind::ALL[rng.gen_range(0..TextureKind::ALL.len())],
    });
    let masks = clip
        .masks
        .into_iter()
        .map(|mut m| {
            for cy in 0..m.grid_h {
                for cx in 0..m.grid_w {
                    if rng.gen_bool(0.1) {
                        let v = m.is_texture(cx, cy);
                        m.set(cx, cy, !v);
                    }
                }
            }
            m
        })
        .collect();
    let config = EncoderConfig {
        gf_group_size: [4, 8, 16][rng.gen_range(0..3)],
        q_level: [16, 24, 28, 32][rng.gen_range(0..4)],
        texture_mode: rng.gen_bool(0.5),
        motion_seed: seed,
        ..EncoderConfig::default()
    };
    CodecCase {
        sequence: clip.sequence,
        masks,
        config,
    }
}
