//! Binary pixel masks, squared Euclidean distance transforms and connected
//! components.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{Pixel, PixelPoint};

/// Row-major boolean pixel grid.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl core::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("positives", &self.count())
            .finish()
    }
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Option<Self> {
        (bits.len() == width as usize * height as usize).then_some(Self { width, height, bits })
    }

    pub fn from_pixels(width: u32, height: u32, pixels: impl IntoIterator<Item = Pixel>) -> Self {
        let mut m = Self::new(width, height);
        for p in pixels {
            m.set(p, true);
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn same_shape(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn in_bounds(&self, p: Pixel) -> bool {
        p.u >= 0 && p.v >= 0 && p.u < self.width as i64 && p.v < self.height as i64
    }

    #[inline]
    fn index(&self, p: Pixel) -> usize {
        p.v as usize * self.width as usize + p.u as usize
    }

    /// Out-of-frame pixels read as background.
    #[inline]
    pub fn get(&self, p: Pixel) -> bool {
        self.in_bounds(p) && self.bits[self.index(p)]
    }

    /// Out-of-frame writes are ignored.
    #[inline]
    pub fn set(&mut self, p: Pixel, value: bool) {
        if self.in_bounds(p) {
            let i = self.index(p);
            self.bits[i] = value;
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn clear(&mut self) {
        self.bits.iter_mut().for_each(|b| *b = false);
    }

    pub fn positives(&self) -> impl Iterator<Item = Pixel> + '_ {
        let w = self.width as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| Pixel::new((i % w) as i64, (i / w) as i64))
    }

    /// Inclusive bounding box of the positive pixels.
    pub fn bbox(&self) -> Option<PixelRect> {
        PixelRect::bounding(self.positives())
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn union_with(&mut self, other: &BinaryMask) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
    }

    /// Sets every pixel of `rect` (clipped to the frame) to `value`.
    pub fn fill_rect(&mut self, rect: &PixelRect, value: bool) {
        let Some(r) = rect.clip(self.width, self.height) else {
            return;
        };
        let w = self.width as usize;
        for v in r.min.v..=r.max.v {
            let row = v as usize * w;
            self.bits[row + r.min.u as usize..=row + r.max.u as usize].fill(value);
        }
    }
}

/// Inclusive axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub min: Pixel,
    pub max: Pixel,
}

impl PixelRect {
    pub fn new(min: Pixel, max: Pixel) -> Self {
        Self { min, max }
    }

    pub fn bounding(pixels: impl IntoIterator<Item = Pixel>) -> Option<PixelRect> {
        let mut it = pixels.into_iter();
        let first = it.next()?;
        let mut r = PixelRect::new(first, first);
        for p in it {
            r.min.u = r.min.u.min(p.u);
            r.min.v = r.min.v.min(p.v);
            r.max.u = r.max.u.max(p.u);
            r.max.v = r.max.v.max(p.v);
        }
        Some(r)
    }

    pub fn width(&self) -> i64 {
        self.max.u - self.min.u + 1
    }

    pub fn height(&self) -> i64 {
        self.max.v - self.min.v + 1
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.u >= self.min.u && p.u <= self.max.u && p.v >= self.min.v && p.v <= self.max.v
    }

    pub fn expand(&self, margin: i64) -> PixelRect {
        PixelRect::new(
            Pixel::new(self.min.u - margin, self.min.v - margin),
            Pixel::new(self.max.u + margin, self.max.v + margin),
        )
    }

    pub fn clip(&self, width: u32, height: u32) -> Option<PixelRect> {
        let r = PixelRect::new(
            Pixel::new(self.min.u.max(0), self.min.v.max(0)),
            Pixel::new(
                self.max.u.min(width as i64 - 1),
                self.max.v.min(height as i64 - 1),
            ),
        );
        (r.min.u <= r.max.u && r.min.v <= r.max.v).then_some(r)
    }
}

const FAR: f64 = 1e20;

/// One-dimensional lower envelope of parabolas (Felzenszwalb & Huttenlocher).
fn envelope_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let fq = f[q] + (q * q) as f64;
        let mut s;
        loop {
            let p = v[k];
            s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
            } else {
                break;
            }
        }
        if s <= z[k] {
            // k == 0 and the new parabola dominates everywhere.
            v[0] = q;
            z[0] = f64::NEG_INFINITY;
            z[1] = f64::INFINITY;
            continue;
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact squared Euclidean distance from every cell to the nearest `true`
/// cell of a `w x h` grid. Cells with no seed anywhere get `f64::INFINITY`.
pub fn squared_distance_transform(seeds: &[bool], w: usize, h: usize) -> Vec<f64> {
    assert_eq!(seeds.len(), w * h);
    let mut grid: Vec<f64> = seeds.iter().map(|s| if *s { 0.0 } else { FAR }).collect();
    if !seeds.iter().any(|s| *s) {
        grid.fill(f64::INFINITY);
        return grid;
    }
    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    for x in 0..w {
        for y in 0..h {
            f[y] = grid[y * w + x];
        }
        envelope_1d(&f[..h], &mut out[..h], &mut v, &mut z);
        for y in 0..h {
            grid[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        let row = &mut grid[y * w..(y + 1) * w];
        f[..w].copy_from_slice(row);
        envelope_1d(&f[..w], &mut out[..w], &mut v, &mut z);
        row.copy_from_slice(&out[..w]);
    }
    for d in grid.iter_mut() {
        if *d >= FAR * 0.5 {
            *d = f64::INFINITY;
        }
    }
    grid
}

/// Squared distance to the nearest seed pixel, evaluated over a rectangular
/// window of the frame. Exact for every pixel inside the window provided all
/// seeds lie inside it.
#[derive(Debug, Clone)]
pub struct DistanceField {
    window: Option<PixelRect>,
    d2: Vec<f64>,
}

impl DistanceField {
    /// Distance field of `seeds` over `window` (clipped to the frame).
    pub fn over_window(seeds: &BinaryMask, window: PixelRect) -> Self {
        let Some(win) = window.clip(seeds.width(), seeds.height()) else {
            return Self { window: None, d2: Vec::new() };
        };
        let (w, h) = (win.width() as usize, win.height() as usize);
        let mut grid = vec![false; w * h];
        for (y, v) in (win.min.v..=win.max.v).enumerate() {
            for (x, u) in (win.min.u..=win.max.u).enumerate() {
                grid[y * w + x] = seeds.get(Pixel::new(u, v));
            }
        }
        Self {
            window: Some(win),
            d2: squared_distance_transform(&grid, w, h),
        }
    }

    /// Over the seeds' bounding box grown by `margin` pixels.
    pub fn around_seeds(seeds: &BinaryMask, margin: i64) -> Self {
        match seeds.bbox() {
            Some(b) => Self::over_window(seeds, b.expand(margin)),
            None => Self { window: None, d2: Vec::new() },
        }
    }

    /// Over the whole frame.
    pub fn full(seeds: &BinaryMask) -> Self {
        let frame = PixelRect::new(
            Pixel::new(0, 0),
            Pixel::new(seeds.width() as i64 - 1, seeds.height() as i64 - 1),
        );
        Self::over_window(seeds, frame)
    }

    pub fn window(&self) -> Option<PixelRect> {
        self.window
    }

    /// `None` outside the window; `INFINITY` when there are no seeds.
    #[inline]
    pub fn squared_distance(&self, p: Pixel) -> Option<f64> {
        let win = self.window?;
        if !win.contains(p) {
            return None;
        }
        let w = win.width() as usize;
        let i = (p.v - win.min.v) as usize * w + (p.u - win.min.u) as usize;
        Some(self.d2[i])
    }
}

/// An 8-connected group of positive pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub size: usize,
    /// Mean of the member cell centres.
    pub centroid: PixelPoint,
    pub bbox: PixelRect,
}

/// 8-connected components of at least `min_size` pixels, largest first.
/// Equal sizes keep raster discovery order.
pub fn connected_components(mask: &BinaryMask, min_size: usize) -> Vec<Component> {
    let (_, mut out) = label_components(mask);
    out.retain(|c| c.size >= min_size);
    out.sort_by(|a, b| b.size.cmp(&a.size));
    out
}

/// Row-major component label per cell (`None` for negatives) and the
/// components in raster discovery order, indexed by label.
pub fn label_components(mask: &BinaryMask) -> (Vec<Option<usize>>, Vec<Component>) {
    let w = mask.width() as usize;
    let h = mask.height() as usize;
    let bits = mask.bits();
    let mut labels: Vec<Option<usize>> = vec![None; w * h];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    for start in 0..w * h {
        if !bits[start] || labels[start].is_some() {
            continue;
        }
        let label = out.len();
        labels[start] = Some(label);
        stack.push(start);
        let (mut size, mut su, mut sv) = (0usize, 0f64, 0f64);
        let mut bbox = PixelRect::new(
            Pixel::new((start % w) as i64, (start / w) as i64),
            Pixel::new((start % w) as i64, (start / w) as i64),
        );
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            size += 1;
            su += x as f64;
            sv += y as f64;
            bbox.min.u = bbox.min.u.min(x as i64);
            bbox.max.u = bbox.max.u.max(x as i64);
            bbox.min.v = bbox.min.v.min(y as i64);
            bbox.max.v = bbox.max.v.max(y as i64);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if bits[j] && labels[j].is_none() {
                        labels[j] = Some(label);
                        stack.push(j);
                    }
                }
            }
        }
        out.push(Component {
            size,
            centroid: PixelPoint::new(su / size as f64 + 0.5, sv / size as f64 + 0.5),
            bbox,
        });
    }
    (labels, out)
}
