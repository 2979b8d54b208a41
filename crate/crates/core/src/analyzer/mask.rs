//! Per-frame block masks and their on-disk form.

use std::collections::VecDeque;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use super::AnalyzerError;
use crate::frame::{Frame, BLOCK};

/// Default decision threshold on the texture-class probability.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// One label per 16x16 luma cell of a padded frame, in raster order.
/// `labels[i]` is true for a texture cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureMask {
    pub grid_w: usize,
    pub grid_h: usize,
    pub labels: Vec<bool>,
    /// Texture-class probability per cell.
    pub probs: Vec<f64>,
    pub frame_index: usize,
}

impl TextureMask {
    /// Label cells by `prob >= threshold`.
    pub fn from_probs(grid_w: usize, grid_h: usize, probs: Vec<f64>, threshold: f64, frame_index: usize) -> Self {
        assert_eq!(probs.len(), grid_w * grid_h, "probability count must match the grid");
        let labels = probs.iter().map(|&p| p >= threshold).collect();
        TextureMask {
            grid_w,
            grid_h,
            labels,
            probs,
            frame_index,
        }
    }

    /// A mask with hard labels; probabilities are 1 for texture, 0 otherwise.
    pub fn from_labels(grid_w: usize, grid_h: usize, labels: Vec<bool>, frame_index: usize) -> Self {
        assert_eq!(labels.len(), grid_w * grid_h, "label count must match the grid");
        let probs = labels.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
        TextureMask {
            grid_w,
            grid_h,
            labels,
            probs,
            frame_index,
        }
    }

    pub fn uniform(grid_w: usize, grid_h: usize, texture: bool, frame_index: usize) -> Self {
        Self::from_labels(grid_w, grid_h, vec![texture; grid_w * grid_h], frame_index)
    }

    /// A uniform mask sized for `frame` (padded to the block grid).
    pub fn uniform_for(frame: &Frame, texture: bool) -> Self {
        let (gw, gh) = frame.grid_dims();
        Self::uniform(gw, gh, texture, frame.index)
    }

    #[inline]
    pub fn is_texture(&self, cx: usize, cy: usize) -> bool {
        self.labels[cy * self.grid_w + cx]
    }

    /// Label of the cell holding luma pixel (x, y).
    #[inline]
    pub fn is_texture_at(&self, x: usize, y: usize) -> bool {
        self.is_texture(x / BLOCK, y / BLOCK)
    }

    pub fn set(&mut self, cx: usize, cy: usize, texture: bool) {
        self.labels[cy * self.grid_w + cx] = texture;
    }

    pub fn texture_count(&self) -> usize {
        self.labels.iter().filter(|&&t| t).count()
    }

    /// Coordinates of every texture cell in raster order.
    pub fn texture_cells(&self) -> Vec<(usize, usize)> {
        (0..self.grid_h)
            .flat_map(|cy| (0..self.grid_w).map(move |cx| (cx, cy)))
            .filter(|&(cx, cy)| self.is_texture(cx, cy))
            .collect()
    }

    /// Check the grid covers `frame` exactly once padded.
    pub fn check_matches(&self, frame: &Frame) -> Result<(), AnalyzerError> {
        let (gw, gh) = frame.grid_dims();
        if (gw, gh) != (self.grid_w, self.grid_h) {
            return Err(AnalyzerError::MaskSize {
                mask: (self.grid_w, self.grid_h),
                frame: (gw, gh),
            });
        }
        Ok(())
    }

    /// Binary PGM, one byte per cell: 255 texture, 0 non-texture.
    pub fn write_pgm<W: Write>(&self, mut sink: W) -> io::Result<()> {
        write!(sink, "P5\n{} {}\n255\n", self.grid_w, self.grid_h)?;
        let bytes: Vec<u8> = self.labels.iter().map(|&t| if t { 255 } else { 0 }).collect();
        sink.write_all(&bytes)?;
        sink.flush()
    }

    /// Read a mask written by [`TextureMask::write_pgm`]. Any sample of
    /// 128 or more counts as texture.
    pub fn read_pgm<R: Read>(mut source: R, frame_index: usize) -> Result<Self, AnalyzerError> {
        let mut buf = Vec::new();
        source.read_to_end(&mut buf)?;
        let bad = |m: &str| AnalyzerError::MaskFormat(m.to_string());
        // Header: magic, width, height, maxval, each separated by whitespace,
        // with '#' comments allowed before the single whitespace byte that
        // ends the header.
        let mut pos = 0;
        let mut fields = Vec::new();
        while fields.len() < 4 {
            while pos < buf.len() && (buf[pos].is_ascii_whitespace() || buf[pos] == b'#') {
                if buf[pos] == b'#' {
                    while pos < buf.len() && buf[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < buf.len() && !buf[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated PGM header"));
            }
            fields.push(String::from_utf8_lossy(&buf[start..pos]).into_owned());
        }
        pos += 1;
        if fields[0] != "P5" {
            return Err(bad("not a binary PGM (P5)"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad PGM header number"));
        let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if maxval != 255 || w == 0 || h == 0 {
            return Err(bad("PGM must be 8-bit with non-zero size"));
        }
        let body = buf.get(pos..pos + w * h).ok_or_else(|| bad("truncated PGM payload"))?;
        let labels = body.iter().map(|&v| v >= 128).collect();
        Ok(Self::from_labels(w, h, labels, frame_index))
    }

    /// Probabilities as text, one grid row per line.
    pub fn write_probs<W: Write>(&self, mut sink: W) -> io::Result<()> {
        for row in self.probs.chunks(self.grid_w) {
            let line: Vec<String> = row.iter().map(|p| format!("{p:.6}")).collect();
            writeln!(sink, "{}", line.join(" "))?;
        }
        sink.flush()
    }
}

/// Relabel 4-connected texture components smaller than `min_region_blocks`
/// as non-texture. Probabilities are left unchanged.
pub fn clean_mask(mask: &TextureMask, min_region_blocks: usize) -> TextureMask {
    let mut out = mask.clone();
    if min_region_blocks <= 1 {
        return out;
    }
    let (w, h) = (mask.grid_w, mask.grid_h);
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if seen[start] || !mask.labels[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut component = Vec::new();
        while let Some(i) = queue.pop_front() {
            component.push(i);
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if !seen[j] && mask.labels[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        if component.len() < min_region_blocks {
            for i in component {
                out.labels[i] = false;
            }
        }
    }
    out
}

/// Path of the mask file for frame `index` of sequence `stem` in `dir`.
pub fn mask_path(dir: &Path, stem: &str, index: usize) -> PathBuf {
    dir.join(format!("{stem}.mask.{index}.pgm"))
}

/// Path of the probability sidecar for frame `index`.
pub fn probs_path(dir: &Path, stem: &str, index: usize) -> PathBuf {
    dir.join(format!("{stem}.mask.{index}.probs.txt"))
}

/// Write one PGM and one probability sidecar per mask.
pub fn save_masks(dir: &Path, stem: &str, masks: &[TextureMask]) -> Result<(), AnalyzerError> {
    fs::create_dir_all(dir)?;
    for m in masks {
        m.write_pgm(io::BufWriter::new(fs::File::create(mask_path(dir, stem, m.frame_index))?))?;
        m.write_probs(io::BufWriter::new(fs::File::create(probs_path(dir, stem, m.frame_index))?))?;
    }
    Ok(())
}

/// Load masks for frames `0..count`. When `stem` is `None` the directory must
/// hold masks for exactly one sequence, whose stem is then used.
pub fn load_masks(dir: &Path, stem: Option<&str>, count: usize) -> Result<Vec<TextureMask>, AnalyzerError> {
    let stem = match stem {
        Some(s) if mask_path(dir, s, 0).exists() => s.to_string(),
        _ => discover_stem(dir)?,
    };
    (0..count)
        .map(|i| {
            let path = mask_path(dir, &stem, i);
            let file = fs::File::open(&path).map_err(|_| AnalyzerError::MissingMask(path.display().to_string()))?;
            TextureMask::read_pgm(io::BufReader::new(file), i)
        })
        .collect()
}

fn discover_stem(dir: &Path) -> Result<String, AnalyzerError> {
    let mut stems: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_suffix(".mask.0.pgm").map(str::to_string)
        })
        .collect();
    stems.sort();
    stems.dedup();
    match stems.len() {
        1 => Ok(stems.remove(0)),
        0 => Err(AnalyzerError::MissingMask(format!("no *.mask.0.pgm in {}", dir.display()))),
        _ => Err(AnalyzerError::MissingMask(format!(
            "several mask sets in {} ({}); name the input after one of them",
            dir.display(),
            stems.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Flood fill by repeated relaxation, independent of the queue version.
    fn component_sizes_oracle(mask: &TextureMask) -> Vec<usize> {
        let n = mask.labels.len();
        let mut id: Vec<usize> = (0..n).collect();
        loop {
            let mut changed = false;
            for i in 0..n {
                if !mask.labels[i] {
                    continue;
                }
                let (x, y) = (i % mask.grid_w, i / mask.grid_w);
                for (nx, ny) in [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)] {
                    if nx < mask.grid_w && ny < mask.grid_h {
                        let j = ny * mask.grid_w + nx;
                        if mask.labels[j] && id[j] < id[i] {
                            id[i] = id[j];
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        (0..n)
            .map(|i| {
                if mask.labels[i] {
                    id.iter().enumerate().filter(|&(j, &c)| mask.labels[j] && c == id[i]).count()
                } else {
                    0
                }
            })
            .collect()
    }

    #[test]
    fn threshold_labels() {
        let m = TextureMask::from_probs(2, 1, vec![0.5, 0.4999], 0.5, 0);
        assert_eq!(m.labels, vec![true, false]);
        let m = TextureMask::from_probs(2, 1, vec![0.999, 1.0], 1.0, 0);
        assert_eq!(m.labels, vec![false, true]);
    }

    #[test]
    fn clean_min_zero_is_identity() {
        let m = TextureMask::from_labels(3, 1, vec![true, false, true], 0);
        assert_eq!(clean_mask(&m, 0), m);
    }

    #[test]
    fn clean_isolated_cell() {
        let m = TextureMask::from_labels(3, 3, vec![false, false, false, false, true, false, false, false, false], 0);
        assert_eq!(clean_mask(&m, 2).texture_count(), 0);
    }

    #[test]
    fn clean_diagonal_pair_is_two_components() {
        let m = TextureMask::from_labels(2, 2, vec![true, false, false, true], 0);
        let c = clean_mask(&m, 2);
        assert_eq!(c.texture_count(), 0);
        assert_eq!(c.probs, m.probs);
    }

    #[test]
    fn pgm_round_trip() {
        let m = TextureMask::from_labels(3, 2, vec![true, false, true, true, false, false], 4);
        let mut buf = Vec::new();
        m.write_pgm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n3 2\n255\n"));
        let back = TextureMask::read_pgm(buf.as_slice(), 4).unwrap();
        assert_eq!(back, m);
        assert!(TextureMask::read_pgm(&b"P2\n1 1\n255\n\x00"[..], 0).is_err());
        assert!(TextureMask::read_pgm(&b"P5\n2 2\n255\n\x00"[..], 0).is_err());
    }

    #[test]
    fn save_and_discover() {
        let dir = std::env::temp_dir().join(format!("texvc-mask-{}", std::process::id()));
        let masks: Vec<_> = (0..3).map(|i| TextureMask::uniform(2, 2, i % 2 == 0, i)).collect();
        save_masks(&dir, "clip", &masks).unwrap();
        assert_eq!(load_masks(&dir, Some("clip"), 3).unwrap(), masks);
        assert_eq!(load_masks(&dir, Some("other"), 3).unwrap(), masks);
        assert!(load_masks(&dir, Some("clip"), 4).is_err());
        fs::remove_dir_all(&dir).unwrap();
    }

    proptest! {
        #[test]
        fn clean_matches_flood_fill_oracle(w in 1usize..7, h in 1usize..7, bits in any::<u64>(), min in 0usize..6) {
            let labels: Vec<bool> = (0..w * h).map(|i| bits >> (i % 64) & 1 == 1).collect();
            let m = TextureMask::from_labels(w, h, labels, 0);
            let sizes = component_sizes_oracle(&m);
            let c = clean_mask(&m, min);
            for i in 0..w * h {
                prop_assert_eq!(c.labels[i], m.labels[i] && (min <= 1 || sizes[i] >= min));
            }
            // Idempotent and never adds texture.
            prop_assert_eq!(clean_mask(&c, min).clone(), c.clone());
            prop_assert!(c.texture_count() <= m.texture_count());
        }
    }
}
