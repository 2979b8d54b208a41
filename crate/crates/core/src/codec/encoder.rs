//! Encoder: GF groups, frame-level texture motion, and rate-distortion
//! quadtree decisions per 64x64 superblock.

use rayon::prelude::*;
use serde::Serialize;

use super::bits::{BitCounter, BitSink, BitWriter};
use super::block::{code_residual, extract, predict_inter, predict_intra_dc, squared_error, store, BlockMode, BlockPixels, MIN_BLOCK, SUPERBLOCK};
use super::stream::{overhead_bytes, recon_crc, write_footer, write_frame, write_header, FrameRecord, FrameType, StreamHeader};
use super::texture::is_texture_block;
use super::CodecError;
use crate::analyzer::TextureMask;
use crate::frame::{BlockRect, Frame, Plane, Sequence};
use crate::motion::{estimate_texture_motion, warp_frame, AffineMotion, MotionConfig, MotionError, MotionModelKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncoderConfig {
    /// Frames per group; the first frame of each group is a key frame.
    pub gf_group_size: usize,
    /// Quantizer step, 1..=63.
    pub q_level: u32,
    /// Code texture blocks by synthesis from the masks.
    pub texture_mode: bool,
    pub motion_model: MotionModelKind,
    /// Block-matching range in pixels, for both frame motion and INTER_MV.
    pub search_range: i32,
    /// Seed of the motion estimator's RANSAC sampling.
    pub motion_seed: u64,
    /// Lagrange multiplier is `lambda_factor * q_level^2`.
    pub lambda_factor: f64,
    /// Keep the full per-superblock decision trees in the output.
    pub record_analysis: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            gf_group_size: 8,
            q_level: 24,
            texture_mode: true,
            motion_model: MotionModelKind::RotZoom,
            search_range: 32,
            motion_seed: 0,
            lambda_factor: 0.85,
            record_analysis: false,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), CodecError> {
        if !(4..=16).contains(&self.gf_group_size) {
            return Err(CodecError::Config(format!("group size {} outside 4..=16", self.gf_group_size)));
        }
        if !(1..=63).contains(&self.q_level) {
            return Err(CodecError::Config(format!("q level {} outside 1..=63", self.q_level)));
        }
        if !(0..=255).contains(&self.search_range) {
            return Err(CodecError::Config(format!("search range {} outside 0..=255", self.search_range)));
        }
        if !(self.lambda_factor.is_finite() && self.lambda_factor >= 0.0) {
            return Err(CodecError::Config(format!("lambda factor {}", self.lambda_factor)));
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        self.lambda_factor * (self.q_level as f64).powi(2)
    }

    fn motion_config(&self) -> MotionConfig {
        MotionConfig {
            search_range: self.search_range,
            seed: self.motion_seed,
            ..MotionConfig::default()
        }
    }

    pub fn is_key(&self, index: usize) -> bool {
        index.is_multiple_of(self.gf_group_size)
    }
}

/// Frame-level motion of an inter frame relative to its group's key frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameMotion {
    /// Parameters as carried in the frame header.
    pub motion: AffineMotion,
    pub kind: MotionModelKind,
    pub inlier_fraction: f64,
    /// Cells the estimate was fitted on.
    pub cells: usize,
    /// False when the whole frame was used: baseline coding, or no
    /// texture cells in the current frame.
    pub texture_region: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ModeCounts {
    pub intra_dc: usize,
    pub inter_mv: usize,
    pub global_warp: usize,
    pub texture: usize,
}

impl ModeCounts {
    fn add(&mut self, mode: BlockMode) {
        match mode {
            BlockMode::IntraDc => self.intra_dc += 1,
            BlockMode::InterMv => self.inter_mv += 1,
            BlockMode::GlobalWarp => self.global_warp += 1,
            BlockMode::Texture => self.texture += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.intra_dc + self.inter_mv + self.global_warp + self.texture
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameStats {
    pub index: usize,
    pub frame_type: FrameType,
    pub q_level: u32,
    /// 8 x the bytes of the frame record (header and payload).
    pub bits: u64,
    pub texture_blocks: usize,
    /// Share of the coded (padded) luma area in TEXTURE blocks.
    pub texture_area_fraction: f64,
    pub mode_counts: ModeCounts,
    pub motion: Option<FrameMotion>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceStats {
    pub width: usize,
    pub height: usize,
    pub q_level: u32,
    pub gf_group_size: usize,
    pub texture_mode: bool,
    pub total_bytes: usize,
    /// File header and footer bits.
    pub overhead_bits: u64,
    pub frames: Vec<FrameStats>,
}

impl SequenceStats {
    pub fn bits_per_frame(&self) -> f64 {
        8.0 * self.total_bytes as f64 / self.frames.len().max(1) as f64
    }
}

/// One coded leaf, for auditing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockDecision {
    pub frame: usize,
    pub x: usize,
    pub y: usize,
    pub size: usize,
    pub mode: BlockMode,
    pub mv: Option<(i32, i32)>,
    /// Texture-block test result; `None` where texture coding is off.
    pub texture_eligible: Option<bool>,
}

/// A fully evaluated leaf candidate. `bits` excludes the split flag.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafOption {
    pub mode: BlockMode,
    pub mv: Option<(i32, i32)>,
    pub ssd: u64,
    pub bits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeChoice {
    Leaf(usize),
    Split,
}

/// Rate-distortion evaluation of one quadtree node and its subtree.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeAnalysis {
    pub rect: BlockRect,
    /// Nodes crossing the frame edge are split without signalling.
    pub fits: bool,
    /// Whether a split bit is coded at this node.
    pub split_flag: bool,
    /// Leaf candidates in tie-break order.
    pub options: Vec<LeafOption>,
    /// Children inside the frame; empty for forced texture and 16x16 nodes.
    pub children: Vec<NodeAnalysis>,
    pub choice: NodeChoice,
    pub cost: f64,
    pub texture_eligible: Option<bool>,
}

impl NodeAnalysis {
    pub fn leaf_cost(&self, i: usize, lambda: f64) -> f64 {
        let o = &self.options[i];
        o.ssd as f64 + lambda * (o.bits + self.split_flag as u64) as f64
    }

    /// Cost of splitting given the children's costs.
    pub fn split_cost(&self, lambda: f64, children: f64) -> f64 {
        lambda * self.split_flag as u64 as f64 + children
    }

    /// Bits and squared error of the chosen subtree.
    pub fn chosen_totals(&self) -> (u64, u64) {
        match self.choice {
            NodeChoice::Leaf(i) => (self.options[i].bits + self.split_flag as u64, self.options[i].ssd),
            NodeChoice::Split => self.children.iter().fold((self.split_flag as u64, 0), |(b, d), c| {
                let (cb, cd) = c.chosen_totals();
                (b + cb, d + cd)
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EncodeOutput {
    pub bytes: Vec<u8>,
    pub stats: SequenceStats,
    /// Encoder-side reconstruction at the padded coding size.
    pub recon: Vec<Frame>,
    pub trace: Vec<BlockDecision>,
    /// Per frame, per superblock decision trees when requested.
    pub analyses: Vec<Vec<NodeAnalysis>>,
    /// Per frame, per superblock payload bits.
    pub superblock_bits: Vec<Vec<u64>>,
}

fn check_masks(seq: &Sequence, masks: Option<&[TextureMask]>, cfg: &EncoderConfig) -> Result<(), CodecError> {
    if !cfg.texture_mode {
        return Ok(());
    }
    let masks = masks.unwrap_or(&[]);
    if masks.len() != seq.len() {
        return Err(CodecError::MissingMask {
            masks: masks.len(),
            frames: seq.len(),
        });
    }
    for (i, (f, m)) in seq.frames.iter().zip(masks).enumerate() {
        let grid = f.grid_dims();
        if (m.grid_w, m.grid_h) != grid {
            return Err(CodecError::MaskSize {
                frame: i,
                mask: (m.grid_w, m.grid_h),
                grid,
            });
        }
    }
    Ok(())
}

/// Frame-level motion for every inter frame against its key frame's
/// source. Texture coding fits the texture cells of the current frame and
/// falls back to the whole frame when it has none; baseline coding always
/// fits the whole frame. Frames are estimated in parallel.
pub fn plan_motion(
    seq: &Sequence,
    masks: Option<&[TextureMask]>,
    cfg: &EncoderConfig,
) -> Result<Vec<Option<FrameMotion>>, CodecError> {
    cfg.validate()?;
    check_masks(seq, masks, cfg)?;
    let padded = seq.padded();
    let mcfg = cfg.motion_config();
    (0..seq.len())
        .into_par_iter()
        .map(|i| {
            if cfg.is_key(i) {
                return Ok(None);
            }
            let cur = &padded.frames[i];
            let key = &padded.frames[i - i % cfg.gf_group_size];
            let whole = TextureMask::uniform_for(cur, true);
            let estimate = |mask: &TextureMask| estimate_texture_motion(cur, key, mask, cfg.motion_model, &mcfg);
            let (est, texture_region) = match masks.filter(|_| cfg.texture_mode) {
                Some(m) => match estimate(&m[i]) {
                    Err(MotionError::NoTextureRegion) => (estimate(&whole), false),
                    r => (r, true),
                },
                None => (estimate(&whole), false),
            };
            let est = est.map_err(|e| CodecError::Invalid(format!("motion estimation for frame {i}: {e}")))?;
            Ok(Some(FrameMotion {
                motion: est.motion.quantized(),
                kind: est.kind,
                inlier_fraction: est.inlier_fraction,
                cells: est.cells,
                texture_region,
            }))
        })
        .collect()
}

struct TextureCtx<'a> {
    cur: &'a TextureMask,
    reference: &'a TextureMask,
    motion: AffineMotion,
}

struct FrameCtx<'a> {
    src: &'a Frame,
    prev: Option<&'a Frame>,
    warped: Option<&'a Frame>,
    texture: Option<TextureCtx<'a>>,
    q: u32,
    lambda: f64,
    range: i32,
}

impl FrameCtx<'_> {
    fn inter(&self) -> bool {
        self.prev.is_some()
    }

    fn predict(&self, recon: &Frame, rect: BlockRect, mode: BlockMode, mv: Option<(i32, i32)>) -> BlockPixels {
        match mode {
            BlockMode::IntraDc => predict_intra_dc(recon, rect),
            BlockMode::InterMv => predict_inter(self.prev.expect("inter frame"), rect, mv.expect("motion vector")),
            BlockMode::GlobalWarp | BlockMode::Texture => extract(self.warped.expect("inter frame"), rect),
        }
    }

    /// Code one leaf into `sink`; returns its reconstruction and error.
    fn code_leaf<S: BitSink>(
        &self,
        recon: &Frame,
        src: &BlockPixels,
        rect: BlockRect,
        mode: BlockMode,
        mv: Option<(i32, i32)>,
        sink: &mut S,
    ) -> (BlockPixels, u64) {
        if self.inter() {
            sink.put_bits(mode.code() as u64, 2);
        }
        if let Some((x, y)) = mv {
            sink.put_se(x);
            sink.put_se(y);
        }
        let pred = self.predict(recon, rect, mode, mv);
        if mode == BlockMode::Texture {
            let ssd = (0..3).map(|p| squared_error(&src[p], &pred[p])).sum();
            return (pred, ssd);
        }
        code_residual(src, &pred, rect.size, self.q, sink)
    }

    fn evaluate(&self, recon: &Frame, src: &BlockPixels, rect: BlockRect, mode: BlockMode, mv: Option<(i32, i32)>) -> LeafOption {
        let mut counter = BitCounter::default();
        let (_, ssd) = self.code_leaf(recon, src, rect, mode, mv, &mut counter);
        LeafOption {
            mode,
            mv,
            ssd,
            bits: counter.bits,
        }
    }
}

/// Luma SAD of `rect` in `src` against `reference` displaced by `mv`,
/// over every `row_step`-th row. Stops once the sum exceeds `limit`.
fn displaced_sad(src: &Plane, reference: &Plane, rect: BlockRect, mv: (i32, i32), row_step: usize, limit: u32) -> u32 {
    let rx = (rect.x as i32 + mv.0) as usize;
    let ry = (rect.y as i32 + mv.1) as usize;
    let mut sum = 0u32;
    for r in (0..rect.size).step_by(row_step) {
        let a = &src.row(rect.y + r)[rect.x..rect.x + rect.size];
        let b = &reference.row(ry + r)[rx..rx + rect.size];
        sum += a.iter().zip(b).map(|(&p, &q)| p.abs_diff(q) as u32).sum::<u32>();
        if sum > limit {
            break;
        }
    }
    sum
}

/// Integer vector for INTER_MV: 16x16 blocks scan a step-2 grid with
/// row-subsampled SAD; larger blocks start from zero and their children's
/// vectors. Both finish with a +-1 descent on full SAD. Vectors keep the
/// block inside the reference.
fn search_mv(ctx: &FrameCtx, rect: BlockRect, seeds: &[(i32, i32)]) -> (i32, i32) {
    let src = ctx.src.y();
    let reference = ctx.prev.expect("inter frame").y();
    let r = ctx.range;
    let lo_x = -(rect.x as i32).min(r);
    let lo_y = -(rect.y as i32).min(r);
    let hi_x = (reference.width as i32 - (rect.x + rect.size) as i32).min(r);
    let hi_y = (reference.height as i32 - (rect.y + rect.size) as i32).min(r);
    let inside = |mv: (i32, i32)| (lo_x..=hi_x).contains(&mv.0) && (lo_y..=hi_y).contains(&mv.1);

    let mut best = (0, 0);
    let mut best_sad = displaced_sad(src, reference, rect, best, 1, u32::MAX);
    if rect.size == MIN_BLOCK {
        let mut coarse_sad = displaced_sad(src, reference, rect, best, 2, u32::MAX);
        for dy in (lo_y..=hi_y).filter(|v| v % 2 == 0) {
            for dx in (lo_x..=hi_x).filter(|v| v % 2 == 0) {
                let s = displaced_sad(src, reference, rect, (dx, dy), 2, coarse_sad);
                if s < coarse_sad {
                    coarse_sad = s;
                    best = (dx, dy);
                }
            }
        }
        best_sad = displaced_sad(src, reference, rect, best, 1, u32::MAX);
    }
    for &mv in seeds {
        if inside(mv) && mv != best {
            let s = displaced_sad(src, reference, rect, mv, 1, best_sad);
            if s < best_sad {
                best_sad = s;
                best = mv;
            }
        }
    }
    loop {
        let mut moved = false;
        let centre = best;
        for (dx, dy) in [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)] {
            let mv = (centre.0 + dx, centre.1 + dy);
            if !inside(mv) {
                continue;
            }
            let s = displaced_sad(src, reference, rect, mv, 1, best_sad);
            if s < best_sad {
                best_sad = s;
                best = mv;
                moved = true;
            }
        }
        if !moved {
            return best;
        }
    }
}

fn quadrants_inside(rect: BlockRect, width: usize, height: usize) -> Vec<BlockRect> {
    rect.quadrants().into_iter().filter(|q| q.x < width && q.y < height).collect()
}

/// Evaluate a node and everything below it. Texture blocks are forced to
/// a single TEXTURE leaf. Otherwise children are evaluated first, then the
/// leaf candidates; ties keep the earlier of GLOBAL_WARP, INTER_MV,
/// INTRA_DC, split.
fn analyze(ctx: &FrameCtx, recon: &Frame, rect: BlockRect) -> NodeAnalysis {
    let (w, h) = (ctx.src.width, ctx.src.height);
    if !rect.fits(w, h) {
        let children: Vec<NodeAnalysis> = quadrants_inside(rect, w, h).into_iter().map(|q| analyze(ctx, recon, q)).collect();
        return NodeAnalysis {
            rect,
            fits: false,
            split_flag: false,
            options: Vec::new(),
            cost: children.iter().map(|c| c.cost).sum(),
            children,
            choice: NodeChoice::Split,
            texture_eligible: None,
        };
    }
    let split_flag = rect.size > MIN_BLOCK;
    let src = extract(ctx.src, rect);
    let texture_eligible = ctx.texture.as_ref().map(|t| is_texture_block(rect, t.cur, t.reference, &t.motion));
    let mut node = NodeAnalysis {
        rect,
        fits: true,
        split_flag,
        options: Vec::new(),
        children: Vec::new(),
        choice: NodeChoice::Leaf(0),
        cost: 0.0,
        texture_eligible,
    };
    if texture_eligible == Some(true) {
        node.options.push(ctx.evaluate(recon, &src, rect, BlockMode::Texture, None));
        node.cost = node.leaf_cost(0, ctx.lambda);
        return node;
    }
    if split_flag {
        node.children = rect.quadrants().into_iter().map(|q| analyze(ctx, recon, q)).collect();
    }
    if ctx.inter() {
        node.options.push(ctx.evaluate(recon, &src, rect, BlockMode::GlobalWarp, None));
        let seeds: Vec<(i32, i32)> = node
            .children
            .iter()
            .flat_map(|c| c.options.iter().filter_map(|o| o.mv))
            .collect();
        let mv = search_mv(ctx, rect, &seeds);
        node.options.push(ctx.evaluate(recon, &src, rect, BlockMode::InterMv, Some(mv)));
    }
    node.options.push(ctx.evaluate(recon, &src, rect, BlockMode::IntraDc, None));

    let mut best = (NodeChoice::Leaf(0), node.leaf_cost(0, ctx.lambda));
    for i in 1..node.options.len() {
        let c = node.leaf_cost(i, ctx.lambda);
        if c < best.1 {
            best = (NodeChoice::Leaf(i), c);
        }
    }
    if split_flag {
        let c = node.split_cost(ctx.lambda, node.children.iter().map(|c| c.cost).sum());
        if c < best.1 {
            best = (NodeChoice::Split, c);
        }
    }
    (node.choice, node.cost) = best;
    node
}

/// Write the chosen subtree and store its reconstruction.
fn emit(ctx: &FrameCtx, node: &NodeAnalysis, recon: &mut Frame, w: &mut BitWriter, frame: usize, trace: &mut Vec<BlockDecision>) {
    if node.fits && node.split_flag {
        w.put_bit(node.choice == NodeChoice::Split);
    }
    match node.choice {
        NodeChoice::Split => {
            for c in &node.children {
                emit(ctx, c, recon, w, frame, trace);
            }
        }
        NodeChoice::Leaf(i) => {
            let opt = &node.options[i];
            let src = extract(ctx.src, node.rect);
            let before = w.bit_len();
            let (rec, _) = ctx.code_leaf(recon, &src, node.rect, opt.mode, opt.mv, w);
            debug_assert_eq!(w.bit_len() - before, opt.bits);
            store(recon, node.rect, &rec);
            trace.push(BlockDecision {
                frame,
                x: node.rect.x,
                y: node.rect.y,
                size: node.rect.size,
                mode: opt.mode,
                mv: opt.mv,
                texture_eligible: node.texture_eligible,
            });
        }
    }
}

/// Superblocks of a padded frame in raster order.
pub(crate) fn superblocks(width: usize, height: usize) -> impl Iterator<Item = BlockRect> {
    (0..height.div_ceil(SUPERBLOCK))
        .flat_map(move |r| (0..width.div_ceil(SUPERBLOCK)).map(move |c| BlockRect::new(c * SUPERBLOCK, r * SUPERBLOCK, SUPERBLOCK)))
}

/// Encode `seq`. Texture mode needs one mask per frame on the padded
/// 16x16 grid.
pub fn encode_sequence(seq: &Sequence, masks: Option<&[TextureMask]>, cfg: &EncoderConfig) -> Result<EncodeOutput, CodecError> {
    let plan = plan_motion(seq, masks, cfg)?;
    encode_with_motion(seq, masks, cfg, &plan)
}

/// Encode with frame motion from [`plan_motion`], which depends on the
/// configuration only through the group size, texture mode and motion
/// settings and can be shared across q levels.
pub fn encode_with_motion(
    seq: &Sequence,
    masks: Option<&[TextureMask]>,
    cfg: &EncoderConfig,
    plan: &[Option<FrameMotion>],
) -> Result<EncodeOutput, CodecError> {
    cfg.validate()?;
    check_masks(seq, masks, cfg)?;
    let first = seq.frames.first().ok_or(CodecError::EmptySequence)?;
    if plan.len() != seq.len() || plan.iter().enumerate().any(|(i, m)| m.is_some() == cfg.is_key(i)) {
        return Err(CodecError::Config("motion plan does not match the sequence".into()));
    }
    let padded = seq.padded();
    let (w, h) = (padded.frames[0].width, padded.frames[0].height);
    let header = StreamHeader {
        width: first.display_width,
        height: first.display_height,
        frame_count: seq.len(),
        gf_group_size: cfg.gf_group_size,
        model: cfg.motion_model,
    };
    let mut bytes = Vec::new();
    write_header(&mut bytes, &header)?;

    let mut out_frames: Vec<Frame> = Vec::with_capacity(seq.len());
    let mut stats = Vec::with_capacity(seq.len());
    let mut crcs = Vec::with_capacity(seq.len());
    let mut trace = Vec::new();
    let mut analyses = Vec::new();
    let mut sb_bits = Vec::new();
    let mut key_index = 0;

    for (i, src) in padded.frames.iter().enumerate() {
        let key = cfg.is_key(i);
        if key {
            key_index = i;
        }
        let motion = plan[i];
        let warped = motion.map(|m| warp_frame(&out_frames[key_index], &m.motion));
        let texture = match (cfg.texture_mode, motion) {
            (true, Some(m)) => {
                let masks = masks.expect("checked");
                Some(TextureCtx {
                    cur: &masks[i],
                    reference: &masks[key_index],
                    motion: m.motion,
                })
            }
            _ => None,
        };
        let ctx = FrameCtx {
            src,
            prev: if key { None } else { out_frames.last() },
            warped: warped.as_ref(),
            texture,
            q: cfg.q_level,
            lambda: cfg.lambda(),
            range: cfg.search_range,
        };
        let mut recon = Frame::new(w, h, [0, 0, 0]).with_index(i);
        recon.display_width = src.display_width;
        recon.display_height = src.display_height;
        let mut writer = BitWriter::new();
        let trace_start = trace.len();
        let mut frame_analyses = Vec::new();
        let mut frame_sb_bits = Vec::new();
        for rect in superblocks(w, h) {
            let node = analyze(&ctx, &recon, rect);
            let before = writer.bit_len();
            emit(&ctx, &node, &mut recon, &mut writer, i, &mut trace);
            frame_sb_bits.push(writer.bit_len() - before);
            if cfg.record_analysis {
                frame_analyses.push(node);
            }
        }
        let payload = writer.finish();
        let frame_type = if key { FrameType::Key } else { FrameType::Inter };
        let record_bytes = write_frame(
            &mut bytes,
            &FrameRecord {
                frame_type,
                q: cfg.q_level,
                motion: motion.map(|m| m.motion.to_fixed()),
                payload: &payload,
            },
        );
        let mut counts = ModeCounts::default();
        let mut texture_area = 0;
        for d in &trace[trace_start..] {
            counts.add(d.mode);
            if d.mode == BlockMode::Texture {
                texture_area += d.size * d.size;
            }
        }
        stats.push(FrameStats {
            index: i,
            frame_type,
            q_level: cfg.q_level,
            bits: 8 * record_bytes as u64,
            texture_blocks: counts.texture,
            texture_area_fraction: texture_area as f64 / (w * h) as f64,
            mode_counts: counts,
            motion,
        });
        crcs.push(recon_crc(&recon));
        analyses.push(frame_analyses);
        sb_bits.push(frame_sb_bits);
        out_frames.push(recon);
    }
    write_footer(&mut bytes, &crcs);
    let stats = SequenceStats {
        width: header.width,
        height: header.height,
        q_level: cfg.q_level,
        gf_group_size: cfg.gf_group_size,
        texture_mode: cfg.texture_mode,
        total_bytes: bytes.len(),
        overhead_bits: 8 * overhead_bytes(seq.len()) as u64,
        frames: stats,
    };
    Ok(EncodeOutput {
        bytes,
        stats,
        recon: out_frames,
        trace,
        analyses,
        superblock_bits: sb_bits,
    })
}
