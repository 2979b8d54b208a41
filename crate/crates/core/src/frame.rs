//! Planar 8-bit 4:2:0 pictures and block geometry.

use thiserror::Error;

/// Luma block granularity for masks, transforms and padding.
pub const BLOCK: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("block {rect:?} lies outside the {width}x{height} plane")]
    OutOfBounds {
        rect: BlockRect,
        width: usize,
        height: usize,
    },
    #[error("frame dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
}

/// One sample plane, row-major with stride equal to width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Plane {
    pub fn new(width: usize, height: usize, fill: u8) -> Self {
        Plane {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Plane {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    /// Sample with coordinates clamped to the plane edge.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Edge-replicating extension to `width`x`height` (never shrinks).
    fn padded(&self, width: usize, height: usize) -> Plane {
        if width == self.width && height == self.height {
            return self.clone();
        }
        Plane::from_fn(width, height, |x, y| {
            self.get(x.min(self.width - 1), y.min(self.height - 1))
        })
    }

    fn cropped(&self, width: usize, height: usize) -> Plane {
        if width == self.width && height == self.height {
            return self.clone();
        }
        Plane::from_fn(width, height, |x, y| self.get(x, y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaneKind {
    Y,
    U,
    V,
}

impl PlaneKind {
    pub const ALL: [PlaneKind; 3] = [PlaneKind::Y, PlaneKind::U, PlaneKind::V];

    fn index(self) -> usize {
        match self {
            PlaneKind::Y => 0,
            PlaneKind::U => 1,
            PlaneKind::V => 2,
        }
    }
}

/// Chroma dimension for a 4:2:0 luma dimension.
#[inline]
pub fn chroma_dim(luma: usize) -> usize {
    luma.div_ceil(2)
}

/// Round up to the next multiple of the 16-pixel block grid.
#[inline]
pub fn align16(v: usize) -> usize {
    v.div_ceil(BLOCK) * BLOCK
}

/// A 4:2:0 picture. `width`/`height` are the stored plane dimensions;
/// `display_width`/`display_height` are the dimensions before padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub display_width: usize,
    pub display_height: usize,
    pub planes: [Plane; 3],
    pub index: usize,
}

impl Frame {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        let (cw, ch) = (chroma_dim(width), chroma_dim(height));
        Frame {
            width,
            height,
            display_width: width,
            display_height: height,
            planes: [
                Plane::new(width, height, fill[0]),
                Plane::new(cw, ch, fill[1]),
                Plane::new(cw, ch, fill[2]),
            ],
            index: 0,
        }
    }

    /// Build a frame from explicit planes; chroma must be the 4:2:0 size of luma.
    pub fn from_planes(y: Plane, u: Plane, v: Plane) -> Self {
        assert_eq!(u.width, chroma_dim(y.width));
        assert_eq!(u.height, chroma_dim(y.height));
        assert_eq!((u.width, u.height), (v.width, v.height));
        Frame {
            width: y.width,
            height: y.height,
            display_width: y.width,
            display_height: y.height,
            planes: [y, u, v],
            index: 0,
        }
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    #[inline]
    pub fn plane(&self, kind: PlaneKind) -> &Plane {
        &self.planes[kind.index()]
    }

    #[inline]
    pub fn plane_mut(&mut self, kind: PlaneKind) -> &mut Plane {
        &mut self.planes[kind.index()]
    }

    pub fn y(&self) -> &Plane {
        &self.planes[0]
    }

    pub fn is_padded(&self) -> bool {
        self.width.is_multiple_of(BLOCK) && self.height.is_multiple_of(BLOCK)
    }

    /// Number of 16x16 cells across and down.
    pub fn grid_dims(&self) -> (usize, usize) {
        (self.width.div_ceil(BLOCK), self.height.div_ceil(BLOCK))
    }

    /// Drop padding and return the frame at its display dimensions.
    pub fn cropped(&self) -> Frame {
        let (w, h) = (self.display_width, self.display_height);
        Frame {
            width: w,
            height: h,
            display_width: w,
            display_height: h,
            planes: [
                self.planes[0].cropped(w, h),
                self.planes[1].cropped(chroma_dim(w), chroma_dim(h)),
                self.planes[2].cropped(chroma_dim(w), chroma_dim(h)),
            ],
            index: self.index,
        }
    }
}

/// Extend a frame to 16-multiples by edge replication. Display dimensions
/// are carried over so the original picture can be recovered.
pub fn pad_frame(frame: &Frame) -> Frame {
    let (w, h) = (align16(frame.width), align16(frame.height));
    Frame {
        width: w,
        height: h,
        display_width: frame.display_width,
        display_height: frame.display_height,
        planes: [
            frame.planes[0].padded(w, h),
            frame.planes[1].padded(w / 2, h / 2),
            frame.planes[2].padded(w / 2, h / 2),
        ],
        index: frame.index,
    }
}

/// An axis-aligned square block in luma coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockRect {
    pub x: usize,
    pub y: usize,
    pub size: usize,
}

impl BlockRect {
    pub const fn new(x: usize, y: usize, size: usize) -> Self {
        BlockRect { x, y, size }
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.x + self.size <= width && self.y + self.size <= height
    }

    /// The four quadrants, in raster order.
    pub fn quadrants(&self) -> [BlockRect; 4] {
        let h = self.size / 2;
        [
            BlockRect::new(self.x, self.y, h),
            BlockRect::new(self.x + h, self.y, h),
            BlockRect::new(self.x, self.y + h, h),
            BlockRect::new(self.x + h, self.y + h, h),
        ]
    }
}

/// Copy a block out of one plane. Luma rects are used as given; chroma
/// rects are halved in position and size.
pub fn extract_block(frame: &Frame, rect: BlockRect, plane: PlaneKind) -> Result<Vec<u8>, FrameError> {
    let p = frame.plane(plane);
    let r = match plane {
        PlaneKind::Y => rect,
        _ => BlockRect::new(rect.x / 2, rect.y / 2, rect.size / 2),
    };
    if !r.fits(p.width, p.height) {
        return Err(FrameError::OutOfBounds {
            rect: r,
            width: p.width,
            height: p.height,
        });
    }
    let mut out = Vec::with_capacity(r.size * r.size);
    for y in r.y..r.y + r.size {
        out.extend_from_slice(&p.row(y)[r.x..r.x + r.size]);
    }
    Ok(out)
}

/// Ordered frames of identical dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    pub frames: Vec<Frame>,
    /// Frame rate as numerator/denominator; metadata only.
    pub frame_rate: (u32, u32),
}

impl Sequence {
    pub fn new(frames: Vec<Frame>, frame_rate: (u32, u32)) -> Result<Self, FrameError> {
        if let Some(first) = frames.first() {
            for f in &frames[1..] {
                if (f.width, f.height) != (first.width, first.height) {
                    return Err(FrameError::DimensionMismatch(
                        first.width,
                        first.height,
                        f.width,
                        f.height,
                    ));
                }
            }
        }
        Ok(Sequence { frames, frame_rate })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(|f| (f.width, f.height))
    }

    pub fn padded(&self) -> Sequence {
        Sequence {
            frames: self.frames.iter().map(pad_frame).collect(),
            frame_rate: self.frame_rate,
        }
    }
}
