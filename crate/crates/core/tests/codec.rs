mod common;

use common::codec_cases::closure_case;
use common::texture_oracle::{brute_force, texture_case};
use texvc::analyzer::TextureMask;
use texvc::codec::{
    decode_padded, decode_sequence, encode_sequence, is_texture_block, BlockMode, CodecError, EncoderConfig, FrameType,
    NodeAnalysis,
};
use texvc::motion::AffineMotion;
use texvc::synth::{panning_sequence, texture_frame, PanningConfig, TextureKind};
use texvc::{BlockRect, Frame, Sequence};

fn clip(width: usize, height: usize, frames: usize, seed: u64) -> (Sequence, Vec<TextureMask>) {
    let c = panning_sequence(&PanningConfig {
        width,
        height,
        frames,
        seed,
        ..PanningConfig::default()
    });
    (c.sequence, c.masks)
}

#[test]
fn decoder_matches_encoder_reconstruction() {
    for seed in 0..6 {
        let case = closure_case(seed);
        let out = encode_sequence(&case.sequence, Some(&case.masks), &case.config).unwrap();
        let dec = decode_padded(&out.bytes).unwrap();
        assert_eq!(dec.frames, out.recon, "seed {seed}");
        let cropped = decode_sequence(&out.bytes).unwrap();
        assert_eq!(cropped.dims(), case.sequence.dims());
        if !case.config.texture_mode {
            assert!(out.trace.iter().all(|d| d.mode != BlockMode::Texture));
        }
    }
}

#[test]
fn frame_bits_account_for_the_whole_file() {
    let (seq, masks) = clip(72, 40, 6, 1);
    let out = encode_sequence(&seq, Some(&masks), &EncoderConfig::default()).unwrap();
    let frame_bits: u64 = out.stats.frames.iter().map(|f| f.bits).sum();
    assert_eq!(frame_bits + out.stats.overhead_bits, 8 * out.bytes.len() as u64);
    assert_eq!(out.stats.total_bytes, out.bytes.len());
    for f in &out.stats.frames {
        assert_eq!(f.bits % 8, 0);
        assert_eq!(f.mode_counts.total(), out.trace.iter().filter(|d| d.frame == f.index).count());
    }
}

#[test]
fn group_of_four_over_nine_frames() {
    let (seq, masks) = clip(48, 32, 9, 2);
    let cfg = EncoderConfig {
        gf_group_size: 4,
        ..EncoderConfig::default()
    };
    let out = encode_sequence(&seq, Some(&masks), &cfg).unwrap();
    let keys: Vec<usize> = out.stats.frames.iter().filter(|f| f.frame_type == FrameType::Key).map(|f| f.index).collect();
    assert_eq!(keys, vec![0, 4, 8]);
    for f in &out.stats.frames {
        assert_eq!(f.motion.is_none(), f.frame_type == FrameType::Key);
        if f.frame_type == FrameType::Key {
            assert_eq!(f.mode_counts.intra_dc, f.mode_counts.total());
        }
    }
}

#[test]
fn key_only_stream_decodes() {
    let f = texture_frame(40, 24, TextureKind::Grating, 1);
    let seq = Sequence::new(vec![f], (30, 1)).unwrap();
    let out = encode_sequence(&seq, None, &EncoderConfig { texture_mode: false, ..Default::default() }).unwrap();
    let dec = decode_padded(&out.bytes).unwrap();
    assert_eq!(dec.motion, vec![None]);
    assert_eq!(dec.frames, out.recon);
}

#[test]
fn static_texture_costs_almost_nothing_after_the_key_frame() {
    let f = texture_frame(128, 128, TextureKind::FineNoise, 5);
    let seq = Sequence::new(vec![f; 8], (30, 1)).unwrap();
    let masks: Vec<TextureMask> = (0..8).map(|i| TextureMask::uniform(8, 8, true, i)).collect();
    let out = encode_sequence(&seq, Some(&masks), &EncoderConfig::default()).unwrap();
    let key = out.stats.frames[0].bits as f64;
    for f in &out.stats.frames[1..] {
        assert!((f.bits as f64) < 0.02 * key, "frame {} {} bits vs key {key}", f.index, f.bits);
        assert_eq!(f.texture_blocks, 4);
        assert_eq!(f.texture_area_fraction, 1.0);
    }
}

#[test]
fn texture_blocks_pass_the_texture_test_and_carry_no_residual() {
    let (seq, masks) = clip(192, 128, 9, 3);
    let cfg = EncoderConfig {
        record_analysis: true,
        ..EncoderConfig::default()
    };
    let out = encode_sequence(&seq, Some(&masks), &cfg).unwrap();
    let dec = decode_padded(&out.bytes).unwrap();
    let mut texture = 0;
    for d in &out.trace {
        let key = d.frame - d.frame % cfg.gf_group_size;
        let rect = BlockRect::new(d.x, d.y, d.size);
        let eligible = dec.motion[d.frame].is_some_and(|m| is_texture_block(rect, &masks[d.frame], &masks[key], &m));
        assert_eq!(d.mode == BlockMode::Texture, eligible, "{d:?}");
        if eligible {
            texture += 1;
            assert!(brute_force(rect, &masks[d.frame], &masks[key], &dec.motion[d.frame].unwrap()));
        }
    }
    assert!(texture > 0);
    fn visit(n: &NodeAnalysis, f: &mut impl FnMut(&NodeAnalysis)) {
        f(n);
        n.children.iter().for_each(|c| visit(c, f));
    }
    for frame in &out.analyses {
        for sb in frame {
            visit(sb, &mut |n| {
                for o in &n.options {
                    if o.mode == BlockMode::Texture {
                        assert_eq!(n.options.len(), 1);
                        assert!(n.children.is_empty());
                        assert_eq!(o.bits, 2, "mode code only");
                    }
                }
            });
        }
    }
}

/// Costs of every coding tree of a node of at most 32x32.
fn tree_costs(n: &NodeAnalysis, lambda: f64) -> Vec<f64> {
    let mut out: Vec<f64> = (0..n.options.len()).map(|i| n.leaf_cost(i, lambda)).collect();
    if n.children.is_empty() {
        return out;
    }
    let lists: Vec<Vec<f64>> = n.children.iter().map(|c| tree_costs(c, lambda)).collect();
    let mut idx = vec![0; lists.len()];
    loop {
        let sum: f64 = lists.iter().zip(&idx).map(|(l, &i)| l[i]).sum();
        out.push(n.split_cost(lambda, sum));
        let mut k = 0;
        while k < idx.len() {
            idx[k] += 1;
            if idx[k] < lists[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == idx.len() {
            return out;
        }
    }
}

/// Minimum over every tree of a superblock, and the number of trees.
fn exhaustive_min(root: &NodeAnalysis, lambda: f64) -> (f64, u64) {
    let mut best = f64::INFINITY;
    let mut count = 0u64;
    for i in 0..root.options.len() {
        best = best.min(root.leaf_cost(i, lambda));
        count += 1;
    }
    if root.children.is_empty() {
        return (best, count);
    }
    let lists: Vec<Vec<f64>> = root.children.iter().map(|c| tree_costs(c, lambda)).collect();
    let base = root.split_cost(lambda, 0.0);
    let mut stack = vec![(0usize, 0.0f64)];
    while let Some((depth, acc)) = stack.pop() {
        if depth == lists.len() {
            best = best.min(base + acc);
            count += 1;
            continue;
        }
        for &c in &lists[depth] {
            stack.push((depth + 1, acc + c));
        }
    }
    (best, count)
}

fn check_superblocks(seq: &Sequence, masks: Option<&[TextureMask]>, cfg: &EncoderConfig) -> usize {
    let out = encode_sequence(seq, masks, cfg).unwrap();
    let lambda = cfg.lambda();
    let padded = seq.padded();
    let mut checked = 0;
    for (f, frame) in out.analyses.iter().enumerate() {
        for (s, sb) in frame.iter().enumerate() {
            let (min, count) = exhaustive_min(sb, lambda);
            assert!((sb.cost - min).abs() <= 1e-9 * min.max(1.0), "frame {f} sb {s}: {} vs {min}", sb.cost);
            let (bits, ssd) = sb.chosen_totals();
            assert_eq!(bits, out.superblock_bits[f][s]);
            let mut err = 0u64;
            for p in 0..3 {
                let (x0, y0, n) = if p == 0 { (sb.rect.x, sb.rect.y, 64) } else { (sb.rect.x / 2, sb.rect.y / 2, 32) };
                let (src, rec) = (&padded.frames[f].planes[p], &out.recon[f].planes[p]);
                for y in y0..(y0 + n).min(src.height) {
                    for x in x0..(x0 + n).min(src.width) {
                        err += (src.get(x, y) as i64 - rec.get(x, y) as i64).pow(2) as u64;
                    }
                }
            }
            assert_eq!(err, ssd);
            assert!((ssd as f64 + lambda * bits as f64 - sb.cost).abs() <= 1e-6 * sb.cost.max(1.0));
            if f > 0 && sb.fits && sb.options.len() == 3 && sb.children.iter().all(|c| c.children.iter().all(|g| g.options.len() == 3)) {
                assert_eq!(count, 3 + 84u64.pow(4));
            }
            checked += 1;
        }
    }
    checked
}

#[test]
fn recursive_decisions_match_exhaustive_enumeration() {
    let (seq, _) = clip(64, 64, 2, 4);
    let base = EncoderConfig {
        record_analysis: true,
        texture_mode: false,
        ..EncoderConfig::default()
    };
    assert_eq!(check_superblocks(&seq, None, &base), 2);
    let pure_distortion = EncoderConfig { lambda_factor: 0.0, ..base.clone() };
    check_superblocks(&seq, None, &pure_distortion);
    // Frame edges and forced texture leaves.
    let (seq, masks) = clip(100, 70, 3, 5);
    let cfg = EncoderConfig { texture_mode: true, ..base };
    assert_eq!(check_superblocks(&seq, Some(&masks), &cfg), 3 * 4);
}

#[test]
fn zero_lambda_minimises_distortion() {
    let (seq, _) = clip(64, 64, 2, 6);
    let cfg = EncoderConfig {
        record_analysis: true,
        texture_mode: false,
        lambda_factor: 0.0,
        ..EncoderConfig::default()
    };
    let out = encode_sequence(&seq, None, &cfg).unwrap();
    fn min_ssd(n: &NodeAnalysis) -> u64 {
        let leaf = n.options.iter().map(|o| o.ssd).min().unwrap_or(u64::MAX);
        let split = if n.children.is_empty() { u64::MAX } else { n.children.iter().map(min_ssd).sum() };
        leaf.min(split)
    }
    let sb = &out.analyses[1][0];
    assert_eq!(sb.chosen_totals().1, min_ssd(sb));
}

#[test]
fn bits_do_not_grow_with_q() {
    let (seq, masks) = clip(96, 64, 12, 7);
    for texture_mode in [false, true] {
        let totals: Vec<usize> = [16, 24, 28, 32]
            .iter()
            .map(|&q| {
                let cfg = EncoderConfig {
                    q_level: q,
                    texture_mode,
                    ..EncoderConfig::default()
                };
                encode_sequence(&seq, Some(&masks), &cfg).unwrap().bytes.len()
            })
            .collect();
        assert!(totals.windows(2).all(|w| w[1] <= w[0]), "texture {texture_mode}: {totals:?}");
    }
}

#[test]
fn mask_errors() {
    let (seq, masks) = clip(48, 32, 3, 8);
    let cfg = EncoderConfig::default();
    assert!(matches!(encode_sequence(&seq, None, &cfg), Err(CodecError::MissingMask { .. })));
    assert!(matches!(encode_sequence(&seq, Some(&masks[..2]), &cfg), Err(CodecError::MissingMask { .. })));
    let mut bad = masks.clone();
    bad[1] = TextureMask::uniform(2, 2, true, 1);
    assert!(matches!(encode_sequence(&seq, Some(&bad), &cfg), Err(CodecError::MaskSize { frame: 1, .. })));
    assert!(encode_sequence(&seq, None, &EncoderConfig { texture_mode: false, ..cfg.clone() }).is_ok());
    assert!(matches!(encode_sequence(&seq, Some(&masks), &EncoderConfig { gf_group_size: 3, ..cfg }), Err(CodecError::Config(_))));
}

#[test]
fn single_byte_corruption_is_detected() {
    let (seq, masks) = clip(48, 32, 5, 9);
    let out = encode_sequence(&seq, Some(&masks), &EncoderConfig { gf_group_size: 4, ..Default::default() }).unwrap();
    for i in 0..out.bytes.len() {
        let mut bad = out.bytes.clone();
        bad[i] ^= 1 << (i % 8);
        assert!(decode_padded(&bad).is_err(), "byte {i}");
    }
}

/// Rewrite the stream checksum so corruption reaches the frame decoder.
fn reseal(bytes: &mut [u8]) {
    let n = bytes.len() - 4;
    let crc = crc32fast_hash(&bytes[..n]);
    bytes[n..].copy_from_slice(&crc.to_le_bytes());
}

fn crc32fast_hash(data: &[u8]) -> u32 {
    // Bitwise CRC-32 (IEEE), independent of the codec's implementation.
    let mut crc = !0u32;
    for &b in data {
        crc ^= b as u32;
        for _ in 0..8 {
            crc = if crc & 1 != 0 { (crc >> 1) ^ 0xEDB8_8320 } else { crc >> 1 };
        }
    }
    !crc
}

/// A flip either fails to decode, fails the reconstruction checksum, or
/// decodes to the same pictures.
#[test]
fn payload_corruption_is_caught_by_the_frame_checks() {
    let (seq, masks) = clip(48, 32, 5, 10);
    let out = encode_sequence(&seq, Some(&masks), &EncoderConfig { gf_group_size: 4, ..Default::default() }).unwrap();
    let footer = 4 * seq.len() + 4;
    let (mut recon_mismatch, mut harmless) = (0, 0);
    for i in 13..out.bytes.len() - footer {
        let mut bad = out.bytes.clone();
        bad[i] ^= 0x10;
        reseal(&mut bad);
        match decode_padded(&bad) {
            Err(CodecError::ReconMismatch { .. }) => recon_mismatch += 1,
            Err(_) => {}
            Ok(d) => {
                assert_eq!(d.frames, out.recon, "flip at byte {i} changed the output unnoticed");
                harmless += 1;
            }
        }
    }
    assert!(recon_mismatch > 0);
    assert!(harmless * 100 < out.bytes.len(), "{harmless} harmless flips");
}

#[test]
fn texture_decision_matches_brute_force() {
    let (mut t, mut f) = (0, 0);
    for seed in 0..400 {
        let c = texture_case(seed);
        let got = is_texture_block(c.rect, &c.cur, &c.reference, &c.motion);
        assert_eq!(got, brute_force(c.rect, &c.cur, &c.reference, &c.motion), "seed {seed}");
        if got {
            t += 1
        } else {
            f += 1
        }
    }
    assert!(t > 40 && f > 40, "{t} true / {f} false");
}

#[test]
fn identity_motion_reproduces_key_frame() {
    let f = texture_frame(64, 48, TextureKind::BandNoise, 9);
    let seq = Sequence::new(vec![f.clone(), f], (30, 1)).unwrap();
    let masks: Vec<TextureMask> = (0..2).map(|i| TextureMask::uniform(4, 3, true, i)).collect();
    let out = encode_sequence(&seq, Some(&masks), &EncoderConfig::default()).unwrap();
    assert_eq!(out.stats.frames[1].motion.unwrap().motion, AffineMotion::IDENTITY);
    assert_eq!(out.recon[1], Frame { index: 1, ..out.recon[0].clone() });
}
