//! Two-dimensional loss landscapes: generation, evaluation, minima and
//! box-counting dimension.
//!
//! A [`HeightField`] is an `n x n` grid over the unit square. Node `(col, row)`
//! sits at position `(col * h, row * h)` with `h = extent / (n - 1)`; values
//! are stored row-major.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Fractal,
    Convex,
    ShuffledSmoothed,
    External,
}

impl FieldKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FieldKind::Fractal => "fractal",
            FieldKind::Convex => "convex",
            FieldKind::ShuffledSmoothed => "shuffled_smoothed",
            FieldKind::External => "external",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fractal" => Some(FieldKind::Fractal),
            "convex" => Some(FieldKind::Convex),
            "shuffled_smoothed" | "shuffled" => Some(FieldKind::ShuffledSmoothed),
            "external" => Some(FieldKind::External),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightField<T> {
    n: usize,
    values: Vec<T>,
    extent: T,
    kind: FieldKind,
    seed: u64,
}

impl<T: Real> HeightField<T> {
    pub fn from_values(n: usize, values: Vec<T>, kind: FieldKind, seed: u64) -> Result<Self> {
        if n < 3 {
            return Err(Error::Argument(format!("grid side {n} < 3")));
        }
        if values.len() != n * n {
            return Err(Error::Argument(format!(
                "expected {} values for a {n}x{n} grid, got {}",
                n * n,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value at row {}, col {}",
                i / n,
                i % n
            )));
        }
        Ok(Self {
            n,
            values,
            extent: T::one(),
            kind,
            seed,
        })
    }

    /// Samples `f(x, y)` at every grid node of the unit square.
    pub fn from_fn(n: usize, kind: FieldKind, f: impl Fn(T, T) -> T) -> Result<Self> {
        if n < 3 {
            return Err(Error::Argument(format!("grid side {n} < 3")));
        }
        let h = T::one() / T::of_usize(n - 1);
        let mut values = Vec::with_capacity(n * n);
        for row in 0..n {
            for col in 0..n {
                values.push(f(T::of_usize(col) * h, T::of_usize(row) * h));
            }
        }
        Self::from_values(n, values, kind, 0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn extent(&self) -> T {
        self.extent
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Grid spacing in landscape units.
    pub fn spacing(&self) -> T {
        self.extent / T::of_usize(self.n - 1)
    }

    #[inline]
    pub fn at(&self, col: usize, row: usize) -> T {
        self.values[row * self.n + col]
    }

    pub fn node_position(&self, col: usize, row: usize) -> [T; 2] {
        let h = self.spacing();
        [T::of_usize(col) * h, T::of_usize(row) * h]
    }

    pub fn min_max(&self) -> (T, T) {
        self.values
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> T {
        let s: f64 = self.values.iter().map(|v| v.f64()).sum();
        T::of(s / self.values.len() as f64)
    }

    pub fn median(&self) -> T {
        let v: Vec<f64> = self.values.iter().map(|v| v.f64()).collect();
        T::of(stats::quantile_sorted(&stats::sorted(&v), 0.5))
    }

    /// Returns a copy with every value multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = *v * factor);
        out
    }

    pub fn contains(&self, pos: [T; 2]) -> bool {
        pos.iter()
            .all(|&c| c >= T::zero() && c <= self.extent)
    }
}

/// Diamond-square midpoint displacement on an `n = 2^k + 1` grid. Each
/// refinement level `l` adds Gaussian displacements of amplitude `2^(-H l)`;
/// smaller `hurst` gives rougher terrain. Output is normalised to `[0, 1]`.
pub fn generate_fractal_terrain<T: Real>(n: usize, hurst: f64, seed: u64) -> Result<HeightField<T>> {
    if n < 5 || !(n - 1).is_power_of_two() {
        return Err(Error::Argument(format!("grid side {n} is not 2^k + 1 with k >= 2")));
    }
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::Argument(format!("roughness H = {hurst} outside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = vec![0.0f64; n * n];
    let idx = |c: usize, r: usize| r * n + c;
    let last = n - 1;
    for &(c, r) in &[(0, 0), (last, 0), (0, last), (last, last)] {
        g[idx(c, r)] = rng.sample::<f64, _>(StandardNormal);
    }

    let mut step = last;
    let mut level = 0i32;
    while step > 1 {
        let half = step / 2;
        level += 1;
        let amp = 2f64.powf(-hurst * level as f64);

        // diamond: centres of squares
        for r in (half..n).step_by(step) {
            for c in (half..n).step_by(step) {
                let avg = (g[idx(c - half, r - half)]
                    + g[idx(c + half, r - half)]
                    + g[idx(c - half, r + half)]
                    + g[idx(c + half, r + half)])
                    / 4.0;
                g[idx(c, r)] = avg + amp * rng.sample::<f64, _>(StandardNormal);
            }
        }

        // square: edge midpoints, 3 neighbours on the border
        for r in (0..n).step_by(half) {
            let start = if (r / half) % 2 == 0 { half } else { 0 };
            for c in (start..n).step_by(step) {
                let mut sum = 0.0;
                let mut cnt = 0.0;
                if c >= half {
                    sum += g[idx(c - half, r)];
                    cnt += 1.0;
                }
                if c + half < n {
                    sum += g[idx(c + half, r)];
                    cnt += 1.0;
                }
                if r >= half {
                    sum += g[idx(c, r - half)];
                    cnt += 1.0;
                }
                if r + half < n {
                    sum += g[idx(c, r + half)];
                    cnt += 1.0;
                }
                g[idx(c, r)] = sum / cnt + amp * rng.sample::<f64, _>(StandardNormal);
            }
        }
        step = half;
    }

    let (lo, hi) = g
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    let values = g.iter().map(|&v| T::of((v - lo) / range)).collect();
    HeightField::from_values(n, values, FieldKind::Fractal, seed)
}

/// `L(x, y) = curvature * ((x - 0.5)^2 + (y - 0.5)^2)` on the unit square.
pub fn make_convex_paraboloid<T: Real>(n: usize, curvature: f64) -> Result<HeightField<T>> {
    if !(curvature > 0.0) || !curvature.is_finite() {
        return Err(Error::Argument(format!("curvature {curvature} must be positive")));
    }
    let c = T::of(curvature);
    let half = T::of(0.5);
    HeightField::from_fn(n, FieldKind::Convex, |x, y| {
        c * ((x - half) * (x - half) + (y - half) * (y - half))
    })
}

/// Randomly permutes the cells of `field` and smooths the result with a
/// truncated Gaussian kernel (radius `4 sigma`, renormalised at the borders).
/// The border renormalisation biases the mean slightly, so the output is
/// shifted by a constant to restore the input mean exactly.
pub fn shuffle_and_smooth<T: Real>(field: &HeightField<T>, kernel_sigma: f64, seed: u64) -> Result<HeightField<T>> {
    if !(kernel_sigma > 0.0) || !kernel_sigma.is_finite() {
        return Err(Error::Argument(format!("kernel sigma {kernel_sigma} must be positive")));
    }
    let n = field.n;
    let mut cells: Vec<f64> = field.values.iter().map(|v| v.f64()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cells.shuffle(&mut rng);

    let radius = (4.0 * kernel_sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * kernel_sigma * kernel_sigma)).exp())
        .collect();
    let blur = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                let (mut acc, mut wsum) = (0.0, 0.0);
                for (ki, &w) in kernel.iter().enumerate() {
                    let off = ki as isize - radius;
                    let (cc, rr) = if horizontal {
                        (c as isize + off, r as isize)
                    } else {
                        (c as isize, r as isize + off)
                    };
                    if cc < 0 || rr < 0 || cc >= n as isize || rr >= n as isize {
                        continue;
                    }
                    acc += w * src[rr as usize * n + cc as usize];
                    wsum += w;
                }
                out[r * n + c] = acc / wsum;
            }
        }
        out
    };
    let smoothed = blur(&blur(&cells, true), false);

    let m_in = stats::mean(&cells);
    let shift = m_in - stats::mean(&smoothed);
    let values = smoothed.iter().map(|&v| T::of(v + shift)).collect();
    HeightField::from_values(n, values, FieldKind::ShuffledSmoothed, seed)
}

/// Bilinear interpolation of the gridded loss at `pos`.
pub fn eval_loss<T: Real>(field: &HeightField<T>, pos: [T; 2]) -> Result<T> {
    if !field.contains(pos) {
        return Err(Error::OutOfBounds(format!(
            "({}, {}) outside [0, {}]^2",
            pos[0], pos[1], field.extent
        )));
    }
    let h = field.spacing();
    let last = field.n - 2;
    let locate = |c: T| -> (usize, T) {
        let u = c / h;
        let i = u.floor().to_usize().unwrap_or(0).min(last);
        (i, u - T::of_usize(i))
    };
    let (i, fx) = locate(pos[0]);
    let (j, fy) = locate(pos[1]);
    let one = T::one();
    let v00 = field.at(i, j);
    let v10 = field.at(i + 1, j);
    let v01 = field.at(i, j + 1);
    let v11 = field.at(i + 1, j + 1);
    let bottom = v00 * (one - fx) + v10 * fx;
    let top = v01 * (one - fx) + v11 * fx;
    Ok(bottom * (one - fy) + top * fy)
}

/// Central finite difference of [`eval_loss`] with a step of one grid cell.
pub fn numerical_gradient<T: Real>(field: &HeightField<T>, pos: [T; 2]) -> Result<[T; 2]> {
    let h = field.spacing();
    if !field.contains(pos) {
        return Err(Error::OutOfBounds(format!("({}, {})", pos[0], pos[1])));
    }
    // rounding slack so that positions exactly one cell in are accepted
    let slack = h * T::of(1e-9);
    if pos.iter().any(|&c| c - h < -slack || c + h > field.extent + slack) {
        return Err(Error::Boundary(format!(
            "({}, {}) is within one cell of the edge",
            pos[0], pos[1]
        )));
    }
    let probe = |c: T| c.max(T::zero()).min(field.extent);
    let two_h = h + h;
    let gx = (eval_loss(field, [probe(pos[0] + h), pos[1]])? - eval_loss(field, [probe(pos[0] - h), pos[1]])?) / two_h;
    let gy = (eval_loss(field, [pos[0], probe(pos[1] + h)])? - eval_loss(field, [pos[0], probe(pos[1] - h)])?) / two_h;
    Ok([gx, gy])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum<T> {
    pub position: [T; 2],
    pub value: T,
    /// Radius of the largest disc around the minimum on which the loss stays
    /// below `value + 0.1 * range`.
    pub width_estimate: T,
}

/// Strict local minima over the 8-neighbourhood, sorted by ascending value.
pub fn detect_minima<T: Real>(field: &HeightField<T>) -> Vec<Minimum<T>> {
    let n = field.n as isize;
    let (lo, hi) = field.min_max();
    let rise = T::of(0.1) * (hi - lo);
    let mut found: Vec<(usize, usize)> = Vec::new();
    for r in 0..n {
        for c in 0..n {
            let v = field.at(c as usize, r as usize);
            let mut strict = true;
            'nb: for dr in -1..=1 {
                for dc in -1..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (cc, rr) = (c + dc, r + dr);
                    if cc < 0 || rr < 0 || cc >= n || rr >= n {
                        continue;
                    }
                    if field.at(cc as usize, rr as usize) <= v {
                        strict = false;
                        break 'nb;
                    }
                }
            }
            if strict {
                found.push((c as usize, r as usize));
            }
        }
    }

    let pyramid = MaxPyramid::new(field);
    let mut minima: Vec<Minimum<T>> = found
        .into_iter()
        .map(|(c, r)| {
            let value = field.at(c, r);
            let width = basin_radius(field, &pyramid, c, r, value + rise);
            Minimum {
                position: field.node_position(c, r),
                value,
                width_estimate: width,
            }
        })
        .collect();
    minima.sort_by(|a, b| {
        a.value
            .partial_cmp(&b.value)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.position[1].partial_cmp(&b.position[1]).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.position[0].partial_cmp(&b.position[0]).unwrap_or(std::cmp::Ordering::Equal))
    });
    minima
}

/// Max-pyramid over the grid for nearest "at least this high" queries.
struct MaxPyramid {
    /// `levels[l]` holds the maxima of `2^l x 2^l` blocks, `sides[l]` per row.
    levels: Vec<Vec<f64>>,
    sides: Vec<usize>,
    n: usize,
}

impl MaxPyramid {
    fn new<T: Real>(field: &HeightField<T>) -> Self {
        let n = field.n;
        let mut levels = vec![field.values.iter().map(|v| v.f64()).collect::<Vec<f64>>()];
        let mut sides = vec![n];
        while *sides.last().expect("non-empty") > 1 {
            let prev = levels.last().expect("non-empty");
            let ps = *sides.last().expect("non-empty");
            let side = ps.div_ceil(2);
            let mut next = vec![f64::NEG_INFINITY; side * side];
            for r in 0..ps {
                for c in 0..ps {
                    let slot = &mut next[(r / 2) * side + c / 2];
                    *slot = slot.max(prev[r * ps + c]);
                }
            }
            levels.push(next);
            sides.push(side);
        }
        Self { levels, sides, n }
    }

    /// Squared cell distance from `(c, r)` to the nearest node with value
    /// `>= threshold`, by best-first descent of the pyramid.
    fn nearest_at_least(&self, c: usize, r: usize, threshold: f64) -> Option<usize> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;
        let top = self.levels.len() - 1;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0usize, top, 0usize, 0usize)));
        while let Some(Reverse((d2, level, bx, by))) = heap.pop() {
            if self.levels[level][by * self.sides[level] + bx] < threshold {
                continue;
            }
            if level == 0 {
                return Some(d2);
            }
            let child = level - 1;
            let cs = self.sides[child];
            let size = 1usize << child;
            for (ox, oy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let (cx, cy) = (2 * bx + ox, 2 * by + oy);
                if cx >= cs || cy >= cs {
                    continue;
                }
                let x0 = cx * size;
                let y0 = cy * size;
                let x1 = ((cx + 1) * size).min(self.n) - 1;
                let y1 = ((cy + 1) * size).min(self.n) - 1;
                let dx = if c < x0 { x0 - c } else { c.saturating_sub(x1) };
                let dy = if r < y0 { y0 - r } else { r.saturating_sub(y1) };
                heap.push(Reverse((dx * dx + dy * dy, child, cx, cy)));
            }
        }
        None
    }
}

/// Distance from node `(c, r)` to the nearest node whose value reaches
/// `threshold`; the field extent if no node does.
fn basin_radius<T: Real>(field: &HeightField<T>, pyramid: &MaxPyramid, c: usize, r: usize, threshold: T) -> T {
    match pyramid.nearest_at_least(c, r, threshold.f64()) {
        Some(d2) => T::of((d2 as f64).sqrt()) * field.spacing(),
        None => field.extent,
    }
}

/// Square binary raster used for box counting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    n: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(n: usize, bits: Vec<bool>) -> Result<Self> {
        if n == 0 || bits.len() != n * n {
            return Err(Error::Argument(format!(
                "mask of {} cells is not {n}x{n}",
                bits.len()
            )));
        }
        Ok(Self { n, bits })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let bits = (0..n * n).map(|i| f(i % n, i / n)).collect();
        Self { n, bits }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[row * self.n + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn transposed(&self) -> Self {
        Self::from_fn(self.n, |c, r| self.get(r, c))
    }

    /// Quarter turn: column `c` of the result is row `n - 1 - c` of `self`.
    pub fn rotated(&self) -> Self {
        let n = self.n;
        Self::from_fn(n, |c, r| self.get(r, n - 1 - c))
    }
}

/// Cells whose value is at or above `threshold` (default: the field median).
pub fn binarize<T: Real>(field: &HeightField<T>, threshold: Option<T>) -> BinaryMask {
    let t = threshold.unwrap_or_else(|| field.median());
    BinaryMask {
        n: field.n,
        bits: field.values.iter().map(|&v| v >= t).collect(),
    }
}

/// Boundary of the level set `{L >= threshold}`: cells above the threshold
/// with at least one 4-neighbour below it.
pub fn level_set_contour<T: Real>(field: &HeightField<T>, threshold: Option<T>) -> BinaryMask {
    let region = binarize(field, threshold);
    let n = field.n;
    BinaryMask::from_fn(n, |c, r| {
        if !region.get(c, r) {
            return false;
        }
        let nb = [
            (c.wrapping_sub(1), r),
            (c + 1, r),
            (c, r.wrapping_sub(1)),
            (c, r + 1),
        ];
        nb.iter()
            .any(|&(cc, rr)| cc < n && rr < n && !region.get(cc, rr))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDimension {
    pub dimension: f64,
    pub fit_rmse: f64,
}

/// Powers of two from 1 up to `n / 4`.
pub fn default_box_scales(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut s = 1;
    while s <= (n / 4).max(1) {
        out.push(s);
        s *= 2;
    }
    out
}

/// Box-counting dimension: slope of `log N(s)` against `-log s`.
///
/// When `s` does not divide `n`, the box grid is anchored at each of the four
/// corners in turn (partial boxes at the far edges) and the counts averaged,
/// which makes the estimate exactly invariant under transposition and
/// quarter-turn rotation of the mask.
pub fn box_counting_dimension(mask: &BinaryMask, scales: &[usize]) -> Result<BoxDimension> {
    if mask.count() == 0 {
        return Err(Error::Degenerate("box counting on an empty mask".into()));
    }
    let mut sizes: Vec<usize> = scales.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 4 || sizes[0] == 0 {
        return Err(Error::Argument(format!(
            "need at least 4 distinct positive box sizes, got {scales:?}"
        )));
    }
    let n = mask.n;
    let mut xs = Vec::with_capacity(sizes.len());
    let mut ys = Vec::with_capacity(sizes.len());
    for &s in &sizes {
        let count = if n % s == 0 {
            count_boxes(mask, s, false, false) as f64
        } else {
            let total: usize = [(false, false), (true, false), (false, true), (true, true)]
                .iter()
                .map(|&(fc, fr)| count_boxes(mask, s, fc, fr))
                .sum();
            total as f64 / 4.0
        };
        xs.push((s as f64).ln());
        ys.push(count.ln());
    }
    let fit = stats::fit_line(&xs, &ys)
        .ok_or_else(|| Error::Degenerate("box sizes have no spread".into()))?;
    Ok(BoxDimension {
        dimension: -fit.slope,
        fit_rmse: fit.rmse,
    })
}

/// Occupied boxes of side `s`; `flip_c`/`flip_r` anchor the grid at the far
/// column/row edge instead of the origin.
fn count_boxes(mask: &BinaryMask, s: usize, flip_c: bool, flip_r: bool) -> usize {
    let n = mask.n;
    let nb = n.div_ceil(s);
    let mut occupied = vec![false; nb * nb];
    for r in 0..n {
        let rr = if flip_r { n - 1 - r } else { r };
        for c in 0..n {
            if mask.get(c, r) {
                let cc = if flip_c { n - 1 - c } else { c };
                occupied[(rr / s) * nb + cc / s] = true;
            }
        }
    }
    occupied.iter().filter(|&&b| b).count()
}
