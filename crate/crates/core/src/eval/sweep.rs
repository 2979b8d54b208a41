//! Encode a clip at several q levels with and without texture coding and
//! compare the two rate-distortion curves.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bd::{bd_psnr, bd_rate, BdMethod, RdCurve, RdPoint};
use super::metrics::{bits_per_frame, data_rate_saving, psnr_nontexture, Saving};
use super::EvalError;
use crate::analyzer::TextureMask;
use crate::codec::{decode_sequence, encode_with_motion, plan_motion, EncoderConfig};
use crate::Sequence;

pub const DEFAULT_Q_LEVELS: [u32; 4] = [16, 24, 28, 32];

#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig {
    pub q_levels: Vec<u32>,
    /// Settings shared by every encode; q level and texture mode are set
    /// per run.
    pub encoder: EncoderConfig,
    pub method: BdMethod,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            q_levels: DEFAULT_Q_LEVELS.to_vec(),
            encoder: EncoderConfig::default(),
            method: BdMethod::default(),
        }
    }
}

/// One q level of the comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdRow {
    pub q_level: u32,
    pub baseline_bits_per_frame: f64,
    pub texture_bits_per_frame: f64,
    pub baseline_psnr: f64,
    pub texture_psnr: f64,
    /// Rate difference relative to the larger rate; `smaller` names the
    /// baseline as first and texture coding as second.
    pub saving: Saving,
    /// Share of the coded area synthesized as texture.
    pub texture_area_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdReport {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub gf_group_size: usize,
    pub method: BdMethod,
    pub rows: Vec<RdRow>,
    pub baseline: RdCurve,
    pub texture: RdCurve,
    /// Texture coding against the baseline; `None` if the curves do not
    /// overlap.
    pub bd_rate: Option<f64>,
    pub bd_psnr: Option<f64>,
}

impl RdReport {
    /// Plain-text table with one row per q level and the Bjøntegaard
    /// deltas.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>5}  {:>14}  {:>14}  {:>9}  {:>13}  {:>13}  {:>9}",
            "q", "baseline b/f", "texture b/f", "saving %", "baseline PSNR", "texture PSNR", "texture %"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>5}  {:>14.1}  {:>14.1}  {:>9.2}  {:>13.3}  {:>13.3}  {:>9.1}",
                r.q_level,
                r.baseline_bits_per_frame,
                r.texture_bits_per_frame,
                r.saving.percent,
                r.baseline_psnr,
                r.texture_psnr,
                100.0 * r.texture_area_fraction
            );
        }
        let fmt = |v: Option<f64>, unit: &str| v.map_or("n/a".to_string(), |v| format!("{v:.4} {unit}"));
        let _ = writeln!(s, "BD-RATE {}  BD-PSNR {}", fmt(self.bd_rate, "%"), fmt(self.bd_psnr, "dB"));
        s
    }
}

/// One encode of the sweep.
#[derive(Debug, Clone)]
pub struct SweepEncode {
    pub texture_mode: bool,
    pub q_level: u32,
    pub bytes: Vec<u8>,
}

fn overlap_or_none(r: Result<f64, EvalError>) -> Result<Option<f64>, EvalError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(EvalError::NoOverlap(axis)) => {
            log::warn!("RD curves do not overlap in {axis}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Encode at every q level in both modes, decode each stream, and measure
/// bits per frame and non-texture PSNR against `masks`. Frame motion is
/// estimated once per mode and the encodes run in parallel; results do not
/// depend on scheduling.
pub fn rd_sweep(seq: &Sequence, masks: &[TextureMask], cfg: &SweepConfig) -> Result<(RdReport, Vec<SweepEncode>), EvalError> {
    let first = seq.frames.first().ok_or(EvalError::NoFrames)?;
    let mode_cfg = |texture_mode: bool, q_level: u32| EncoderConfig {
        texture_mode,
        q_level,
        ..cfg.encoder.clone()
    };
    let plans = [false, true]
        .par_iter()
        .map(|&t| plan_motion(seq, Some(masks), &mode_cfg(t, cfg.encoder.q_level)))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(bool, u32)> = [false, true]
        .iter()
        .flat_map(|&t| cfg.q_levels.iter().map(move |&q| (t, q)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(t, q)| {
            let out = encode_with_motion(seq, Some(masks), &mode_cfg(t, q), &plans[t as usize])?;
            let decoded = decode_sequence(&out.bytes)?;
            let psnr = psnr_nontexture(seq, &decoded, masks)?;
            let rate = bits_per_frame(out.bytes.len(), seq.len())?;
            let area = out.stats.frames.iter().map(|f| f.texture_area_fraction).sum::<f64>() / seq.len() as f64;
            Ok((rate, psnr, area, out.bytes))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;

    let n = cfg.q_levels.len();
    let (base, tex) = results.split_at(n);
    let mut rows = Vec::with_capacity(n);
    for (i, &q) in cfg.q_levels.iter().enumerate() {
        rows.push(RdRow {
            q_level: q,
            baseline_bits_per_frame: base[i].0,
            texture_bits_per_frame: tex[i].0,
            baseline_psnr: base[i].1,
            texture_psnr: tex[i].1,
            saving: data_rate_saving(base[i].0, tex[i].0)?,
            texture_area_fraction: tex[i].2,
        });
    }
    let curve = |r: &[(f64, f64, f64, Vec<u8>)]| RdCurve::new(r.iter().map(|x| RdPoint { rate: x.0, psnr: x.1 }).collect());
    let (baseline, texture) = (curve(base)?, curve(tex)?);
    let report = RdReport {
        frames: seq.len(),
        width: first.width,
        height: first.height,
        gf_group_size: cfg.encoder.gf_group_size,
        method: cfg.method,
        bd_rate: overlap_or_none(bd_rate(&baseline, &texture, cfg.method))?,
        bd_psnr: overlap_or_none(bd_psnr(&baseline, &texture, cfg.method))?,
        rows,
        baseline,
        texture,
    };
    let encodes = jobs
        .iter()
        .zip(results)
        .map(|(&(texture_mode, q_level), r)| SweepEncode {
            texture_mode,
            q_level,
            bytes: r.3,
        })
        .collect();
    Ok((report, encodes))
}
