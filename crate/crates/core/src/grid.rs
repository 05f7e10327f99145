//! Tensor-product grids and fields, cell-sum quadrature, sublevel-set
//! measures, truncations, and the product cutoff functions used by the energy
//! estimates.
//!
//! Conventions: fields are node-based on uniform axes. Integrals use cell sums
//! (average of the 2^d corner values times the cell volume, cells selected by
//! their center). Measures use node counting: a node owns a cell of volume
//! Π h_i (· Δt in space-time) and belongs to a sublevel set iff its own value
//! satisfies the inequality.

use crate::params::{AnisoExponents, CylinderBounds, IntrinsicCylinder, Orientation};
use thiserror::Error;

/// Relative tolerance (in units of one grid step) for snapping interpolation
/// queries and domain checks to nodes.
const SNAP: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("axis step must be positive, got {0}")]
    BadStep(f64),
    #[error("axis needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("value count {got} does not match grid size {want}")]
    ShapeMismatch { want: usize, got: usize },
    #[error("dimension mismatch: field has {field} axes, argument has {arg}")]
    DimMismatch { field: usize, arg: usize },
    #[error(
        "region escapes the field domain on {axis}: [{lo}, {hi}] vs domain [{dom_lo}, {dom_hi}]"
    )]
    RegionEscapesDomain {
        axis: String,
        lo: f64,
        hi: f64,
        dom_lo: f64,
        dom_hi: f64,
    },
    #[error("query point {point:?} (t = {t:?}) outside the field domain")]
    OutOfDomain { point: Vec<f64>, t: Option<f64> },
    #[error("need at least 2 time levels, got {0}")]
    TooFewLevels(usize),
    #[error("degenerate cutoff: {0}")]
    DegenerateCutoff(String),
    #[error("time window [{lo}, {hi}] does not select any stored level pair")]
    EmptyWindow { lo: f64, hi: f64 },
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
}

/// Uniformly spaced axis: nodes start + i * step, i = 0..len.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    start: f64,
    step: f64,
    len: usize,
}

impl Axis {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self, GridError> {
        if !(step > 0.0) {
            return Err(GridError::BadStep(step));
        }
        if len < 2 {
            return Err(GridError::TooFewNodes(len));
        }
        Ok(Self { start, step, len })
    }

    /// Symmetric axis on [-half_width, half_width] with `cells` cells.
    pub fn symmetric(half_width: f64, cells: usize) -> Result<Self, GridError> {
        let step = 2.0 * half_width / cells as f64;
        Self::new(-half_width, step, cells + 1)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn last(&self) -> f64 {
        self.node(self.len - 1)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.node(i))
    }

    /// Cell-and-fraction position of `x`, snapped to nodes within `SNAP`.
    /// Returns None when `x` lies outside the axis beyond the snap tolerance.
    fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let u = (x - self.start) / self.step;
        if u < -SNAP || u > (self.len - 1) as f64 + SNAP {
            return None;
        }
        let mut cell = u.floor() as isize;
        let mut frac = u - cell as f64;
        if frac > 1.0 - SNAP {
            cell += 1;
            frac = 0.0;
        } else if frac < SNAP {
            frac = 0.0;
        }
        let cell = cell.clamp(0, self.len as isize - 1) as usize;
        if cell == self.len - 1 {
            return Some((self.len - 1, 0.0));
        }
        Some((cell, frac))
    }
}

pub(crate) fn total_len(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Row-major strides (axis 0 slowest).
pub(crate) fn strides_for(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Visit every multi-index of `shape` in row-major order.
pub(crate) fn for_each_index(shape: &[usize], mut f: impl FnMut(&[usize])) {
    if shape.is_empty() || shape.iter().any(|&n| n == 0) {
        return;
    }
    let mut idx = vec![0usize; shape.len()];
    loop {
        f(&idx);
        let mut axis = shape.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < shape[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// Base offsets and the stride of every 1-D lane along `axis`.
pub(crate) fn lanes(shape: &[usize], axis: usize) -> (Vec<usize>, usize) {
    let strides = strides_for(shape);
    let stride = strides[axis];
    let mut bases = Vec::with_capacity(total_len(shape) / shape[axis]);
    let outer: Vec<usize> = (0..shape.len())
        .filter(|&a| a != axis)
        .map(|a| shape[a])
        .collect();
    let outer_strides: Vec<usize> = (0..shape.len())
        .filter(|&a| a != axis)
        .map(|a| strides[a])
        .collect();
    if outer.is_empty() {
        bases.push(0);
        return (bases, stride);
    }
    for_each_index(&outer, |idx| {
        let base: usize = idx.iter().zip(&outer_strides).map(|(i, s)| i * s).sum();
        bases.push(base);
    });
    (bases, stride)
}

/// Multilinear interpolation on a row-major array over `axes`.
fn interp_nd(axes: &[Axis], values: &[f64], query: &[f64]) -> Option<f64> {
    let d = axes.len();
    let strides = strides_for(&axes.iter().map(|a| a.len()).collect::<Vec<_>>());
    let mut cells = Vec::with_capacity(d);
    for (a, &x) in axes.iter().zip(query) {
        cells.push(a.locate(x)?);
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut off = 0usize;
        for (k, (cell, frac)) in cells.iter().enumerate() {
            let hi = (corner >> k) & 1 == 1;
            let wk = if hi { *frac } else { 1.0 - *frac };
            if wk == 0.0 {
                w = 0.0;
                break;
            }
            w *= wk;
            off += (cell + usize::from(hi)) * strides[k];
        }
        if w != 0.0 {
            acc += w * values[off];
        }
    }
    Some(acc)
}

/// Scalar samples over a spatial tensor-product grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    axes: Vec<Axis>,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(axes: Vec<Axis>, values: Vec<f64>) -> Result<Self, GridError> {
        let want = total_len(&axes.iter().map(|a| a.len()).collect::<Vec<_>>());
        if values.len() != want {
            return Err(GridError::ShapeMismatch {
                want,
                got: values.len(),
            });
        }
        Ok(Self { axes, values })
    }

    pub fn from_fn(axes: Vec<Axis>, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let shape: Vec<usize> = axes.iter().map(|a| a.len()).collect();
        let mut values = Vec::with_capacity(total_len(&shape));
        let mut coord = vec![0.0; axes.len()];
        for_each_index(&shape, |idx| {
            for (k, &i) in idx.iter().enumerate() {
                coord[k] = axes[k].node(i);
            }
            values.push(f(&coord));
        });
        Self { axes, values }
    }

    pub fn constant(axes: Vec<Axis>, c: f64) -> Self {
        let n = total_len(&axes.iter().map(|a| a.len()).collect::<Vec<_>>());
        Self {
            axes,
            values: vec![c; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len()).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Volume Π h_i owned by a single node.
    pub fn node_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.step()).product()
    }

    pub fn interp(&self, x: &[f64]) -> Result<f64, GridError> {
        if x.len() != self.dim() {
            return Err(GridError::DimMismatch {
                field: self.dim(),
                arg: x.len(),
            });
        }
        interp_nd(&self.axes, &self.values, x).ok_or_else(|| GridError::OutOfDomain {
            point: x.to_vec(),
            t: None,
        })
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn check_finite(&self) -> Result<(), GridError> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(GridError::NonFinite(i)),
            None => Ok(()),
        }
    }
}

/// Scalar samples over a spatial grid times uniformly spaced time levels.
/// Layout is level-major: `values[k * nspace + spatial_offset]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    space: Vec<Axis>,
    time: Axis,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn new(space: Vec<Axis>, time: Axis, values: Vec<f64>) -> Result<Self, GridError> {
        if time.len() < 2 {
            return Err(GridError::TooFewLevels(time.len()));
        }
        let nspace = total_len(&space.iter().map(|a| a.len()).collect::<Vec<_>>());
        let want = nspace * time.len();
        if values.len() != want {
            return Err(GridError::ShapeMismatch {
                want,
                got: values.len(),
            });
        }
        Ok(Self {
            space,
            time,
            values,
        })
    }

    pub fn from_fn(
        space: Vec<Axis>,
        time: Axis,
        mut f: impl FnMut(&[f64], f64) -> f64,
    ) -> Result<Self, GridError> {
        if time.len() < 2 {
            return Err(GridError::TooFewLevels(time.len()));
        }
        let shape: Vec<usize> = space.iter().map(|a| a.len()).collect();
        let nspace = total_len(&shape);
        let mut values = Vec::with_capacity(nspace * time.len());
        let mut coord = vec![0.0; space.len()];
        for k in 0..time.len() {
            let t = time.node(k);
            for_each_index(&shape, |idx| {
                for (a, &i) in idx.iter().enumerate() {
                    coord[a] = space[a].node(i);
                }
                values.push(f(&coord, t));
            });
        }
        Ok(Self {
            space,
            time,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.space.len()
    }

    pub fn space_axes(&self) -> &[Axis] {
        &self.space
    }

    pub fn time_axis(&self) -> &Axis {
        &self.time
    }

    pub fn levels(&self) -> usize {
        self.time.len()
    }

    pub fn nspace(&self) -> usize {
        self.values.len() / self.time.len()
    }

    pub fn space_shape(&self) -> Vec<usize> {
        self.space.iter().map(|a| a.len()).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn level_values(&self, k: usize) -> &[f64] {
        let n = self.nspace();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn level_field(&self, k: usize) -> GridField {
        GridField {
            axes: self.space.clone(),
            values: self.level_values(k).to_vec(),
        }
    }

    /// Volume Π h_i · Δt owned by a single space-time node.
    pub fn node_volume(&self) -> f64 {
        self.space.iter().map(|a| a.step()).product::<f64>() * self.time.step()
    }

    pub fn interp(&self, x: &[f64], t: f64) -> Result<f64, GridError> {
        if x.len() != self.dim() {
            return Err(GridError::DimMismatch {
                field: self.dim(),
                arg: x.len(),
            });
        }
        // time is the slowest axis of the flat layout; prepend it
        let mut axes = Vec::with_capacity(self.space.len() + 1);
        axes.push(self.time.clone());
        axes.extend(self.space.iter().cloned());
        let mut q = Vec::with_capacity(x.len() + 1);
        q.push(t);
        q.extend_from_slice(x);
        interp_nd(&axes, &self.values, &q).ok_or_else(|| GridError::OutOfDomain {
            point: x.to_vec(),
            t: Some(t),
        })
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn check_finite(&self) -> Result<(), GridError> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(GridError::NonFinite(i)),
            None => Ok(()),
        }
    }

    /// Index of the stored level closest to `t`; errors if `t` lies outside
    /// the stored range beyond the snap tolerance.
    pub fn level_at(&self, t: f64) -> Result<usize, GridError> {
        let u = (t - self.time.start()) / self.time.step();
        let max = (self.time.len() - 1) as f64;
        if u < -SNAP || u > max + SNAP {
            return Err(GridError::OutOfDomain {
                point: Vec::new(),
                t: Some(t),
            });
        }
        Ok(u.round().clamp(0.0, max) as usize)
    }
}

/// Integration / measurement region.
#[derive(Debug, Clone)]
pub enum Region {
    All,
    /// Closed coordinate box in space.
    SpaceBox { min: Vec<f64>, max: Vec<f64> },
    /// Intrinsic cylinder (open in space, half-open in time). Spatial ops
    /// use only its cube part.
    Cylinder(CylinderBounds),
}

impl Region {
    pub fn cylinder(c: &IntrinsicCylinder, exps: &AnisoExponents) -> Region {
        Region::Cylinder(c.bounds(exps))
    }

    fn contains(&self, x: &[f64], t: Option<f64>) -> bool {
        match self {
            Region::All => true,
            Region::SpaceBox { min, max } => x
                .iter()
                .enumerate()
                .all(|(i, xi)| *xi >= min[i] && *xi <= max[i]),
            Region::Cylinder(b) => match t {
                Some(t) => b.contains(x, t),
                None => b.contains_space(x),
            },
        }
    }

    /// Spatial bounding interval per axis, if bounded.
    fn space_bbox(&self, axis: usize) -> Option<(f64, f64)> {
        match self {
            Region::All => None,
            Region::SpaceBox { min, max } => Some((min[axis], max[axis])),
            Region::Cylinder(b) => Some((
                b.center_x[axis] - b.half_sides[axis],
                b.center_x[axis] + b.half_sides[axis],
            )),
        }
    }

    fn time_bbox(&self) -> Option<(f64, f64)> {
        match self {
            Region::Cylinder(b) => Some((b.t_lo, b.t_hi)),
            _ => None,
        }
    }
}

fn check_region_space(axes: &[Axis], region: &Region) -> Result<(), GridError> {
    for (i, a) in axes.iter().enumerate() {
        if let Some((lo, hi)) = region.space_bbox(i) {
            let tol = SNAP * a.step();
            if lo < a.start() - tol || hi > a.last() + tol {
                return Err(GridError::RegionEscapesDomain {
                    axis: format!("x{}", i + 1),
                    lo,
                    hi,
                    dom_lo: a.start(),
                    dom_hi: a.last(),
                });
            }
        }
    }
    Ok(())
}

fn check_region_time(time: &Axis, region: &Region) -> Result<(), GridError> {
    if let Some((lo, hi)) = region.time_bbox() {
        let tol = SNAP * time.step();
        if lo < time.start() - tol || hi > time.last() + tol {
            return Err(GridError::RegionEscapesDomain {
                axis: "t".into(),
                lo,
                hi,
                dom_lo: time.start(),
                dom_hi: time.last(),
            });
        }
    }
    Ok(())
}

/// Cell-sum quadrature of a spatial field over `region`: for each grid cell
/// whose center lies in the region, add the average of its 2^N corner values
/// times the cell volume.
pub fn integrate_space(f: &GridField, region: &Region) -> Result<f64, GridError> {
    check_region_space(f.axes(), region)?;
    let shape = f.shape();
    let strides = strides_for(&shape);
    let cells: Vec<usize> = shape.iter().map(|n| n - 1).collect();
    let vol = f.node_volume();
    let corner_weight = 1.0 / (1usize << f.dim()) as f64;
    let mut center = vec![0.0; f.dim()];
    let mut sum = 0.0;
    for_each_index(&cells, |idx| {
        for (a, &i) in idx.iter().enumerate() {
            center[a] = f.axes[a].node(i) + 0.5 * f.axes[a].step();
        }
        if !region.contains(&center, None) {
            return;
        }
        let base: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        let mut cell_sum = 0.0;
        for corner in 0..(1usize << f.dim()) {
            let mut off = base;
            for (a, s) in strides.iter().enumerate() {
                if (corner >> a) & 1 == 1 {
                    off += s;
                }
            }
            cell_sum += f.values[off];
        }
        sum += cell_sum * corner_weight * vol;
    });
    Ok(sum)
}

/// Space-time cell-sum quadrature over `region` within the optional time
/// window `[lo, hi]` (a cell counts when its center is inside).
pub fn integrate_spacetime(
    f: &SpaceTimeField,
    region: &Region,
    window: Option<(f64, f64)>,
) -> Result<f64, GridError> {
    check_region_space(f.space_axes(), region)?;
    check_region_time(f.time_axis(), region)?;
    let shape = f.space_shape();
    let strides = strides_for(&shape);
    let cells: Vec<usize> = shape.iter().map(|n| n - 1).collect();
    let nspace = f.nspace();
    let vol = f.node_volume();
    let corner_weight = 1.0 / (1usize << (f.dim() + 1)) as f64;
    let dt = f.time_axis().step();
    let mut center = vec![0.0; f.dim()];
    let mut sum = 0.0;
    for k in 0..f.levels() - 1 {
        let t_lo = f.time_axis().node(k);
        let t_center = t_lo + 0.5 * dt;
        if let Some((lo, hi)) = window {
            if t_lo < lo - SNAP * dt || f.time_axis().node(k + 1) > hi + SNAP * dt {
                continue;
            }
        }
        let lo_level = &f.values[k * nspace..(k + 1) * nspace];
        let hi_level = &f.values[(k + 1) * nspace..(k + 2) * nspace];
        for_each_index(&cells, |idx| {
            for (a, &i) in idx.iter().enumerate() {
                center[a] = f.space[a].node(i) + 0.5 * f.space[a].step();
            }
            if !region.contains(&center, Some(t_center)) {
                return;
            }
            let base: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
            let mut cell_sum = 0.0;
            for corner in 0..(1usize << f.dim()) {
                let mut off = base;
                for (a, s) in strides.iter().enumerate() {
                    if (corner >> a) & 1 == 1 {
                        off += s;
                    }
                }
                cell_sum += lo_level[off] + hi_level[off];
            }
            sum += cell_sum * corner_weight * vol;
        });
    }
    Ok(sum)
}

/// Inequality selecting a level set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelRel {
    /// f ≤ k
    Le,
    /// f < k
    Lt,
    /// f ≥ k
    Ge,
    /// f > k
    Gt,
}

impl LevelRel {
    fn holds(self, v: f64, k: f64) -> bool {
        match self {
            LevelRel::Le => v <= k,
            LevelRel::Lt => v < k,
            LevelRel::Ge => v >= k,
            LevelRel::Gt => v > k,
        }
    }
}

/// Node counts (hits, total) of `{f rel k}` within the region.
pub fn sublevel_count(
    f: &SpaceTimeField,
    k: f64,
    rel: LevelRel,
    region: &Region,
) -> Result<(usize, usize), GridError> {
    check_region_space(f.space_axes(), region)?;
    check_region_time(f.time_axis(), region)?;
    let shape = f.space_shape();
    let nspace = f.nspace();
    let mut coord = vec![0.0; f.dim()];
    let mut hits = 0usize;
    let mut total = 0usize;
    for lev in 0..f.levels() {
        let t = f.time_axis().node(lev);
        let level = &f.values[lev * nspace..(lev + 1) * nspace];
        let mut flat = 0usize;
        for_each_index(&shape, |idx| {
            for (a, &i) in idx.iter().enumerate() {
                coord[a] = f.space[a].node(i);
            }
            if region.contains(&coord, Some(t)) {
                total += 1;
                if rel.holds(level[flat], k) {
                    hits += 1;
                }
            }
            flat += 1;
        });
    }
    Ok((hits, total))
}

/// Node-counting measure of `{f rel k}` within the region: hits × (Π h_i Δt).
pub fn sublevel_measure(
    f: &SpaceTimeField,
    k: f64,
    rel: LevelRel,
    region: &Region,
) -> Result<f64, GridError> {
    let (hits, _) = sublevel_count(f, k, rel, region)?;
    Ok(hits as f64 * f.node_volume())
}

/// Spatial version of [`sublevel_measure`].
pub fn sublevel_measure_space(
    f: &GridField,
    k: f64,
    rel: LevelRel,
    region: &Region,
) -> Result<f64, GridError> {
    check_region_space(f.axes(), region)?;
    let shape = f.shape();
    let mut coord = vec![0.0; f.dim()];
    let mut hits = 0usize;
    let mut flat = 0usize;
    for_each_index(&shape, |idx| {
        for (a, &i) in idx.iter().enumerate() {
            coord[a] = f.axes[a].node(i);
        }
        if region.contains(&coord, None) && rel.holds(f.values[flat], k) {
            hits += 1;
        }
        flat += 1;
    });
    Ok(hits as f64 * f.node_volume())
}

/// Truncation sign: (u-k)_+ or (u-k)_-.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncSign {
    Plus,
    Minus,
}

impl TruncSign {
    pub fn apply(self, v: f64, k: f64) -> f64 {
        match self {
            TruncSign::Plus => (v - k).max(0.0),
            TruncSign::Minus => (k - v).max(0.0),
        }
    }
}

/// Pointwise truncation (f-k)_± of a space-time field; nonnegative.
pub fn truncate(f: &SpaceTimeField, k: f64, sign: TruncSign) -> SpaceTimeField {
    let mut out = f.clone();
    for v in out.values_mut() {
        *v = sign.apply(*v, k);
    }
    out
}

/// Pointwise truncation of a spatial field.
pub fn truncate_space(f: &GridField, k: f64, sign: TruncSign) -> GridField {
    let mut out = f.clone();
    for v in out.values_mut() {
        *v = sign.apply(*v, k);
    }
    out
}

/// Nested pair of cylinders defining a product cutoff.
#[derive(Debug, Clone)]
pub struct CutoffSpec {
    pub inner: IntrinsicCylinder,
    pub outer: IntrinsicCylinder,
}

/// Product cutoff η(x,t) = η̄(t) Π η_i^{p_i}(x_i): each η_i is a piecewise
/// linear ramp equal to 1 on the inner slab and 0 outside the outer slab; η̄
/// ramps in time on the open side(s) of the cylinder.
#[derive(Debug, Clone)]
pub struct Cutoff {
    center_x: Vec<f64>,
    inner_half: Vec<f64>,
    outer_half: Vec<f64>,
    p_f: Vec<f64>,
    orientation: Orientation,
    center_t: f64,
    inner_tau: f64,
    outer_tau: f64,
}

impl Cutoff {
    pub fn new(spec: &CutoffSpec, exps: &AnisoExponents) -> Result<Self, GridError> {
        let inner = &spec.inner;
        let outer = &spec.outer;
        if inner.center_x != outer.center_x || inner.center_t != outer.center_t {
            return Err(GridError::DegenerateCutoff(
                "inner and outer cylinders must share their center".into(),
            ));
        }
        if inner.orientation != outer.orientation {
            return Err(GridError::DegenerateCutoff(
                "inner and outer cylinders must share their orientation".into(),
            ));
        }
        let dim = exps.dim();
        let inner_half: Vec<f64> = (0..dim).map(|i| inner.half_side(i, exps)).collect();
        let outer_half: Vec<f64> = (0..dim).map(|i| outer.half_side(i, exps)).collect();
        for i in 0..dim {
            if !(inner_half[i] < outer_half[i]) {
                return Err(GridError::DegenerateCutoff(format!(
                    "axis {}: inner half-side {} must be strictly below outer {}",
                    i + 1,
                    inner_half[i],
                    outer_half[i]
                )));
            }
        }
        let inner_tau = inner.time_depth(exps);
        let outer_tau = outer.time_depth(exps);
        if !(inner_tau < outer_tau) {
            return Err(GridError::DegenerateCutoff(format!(
                "inner time depth {inner_tau} must be strictly below outer {outer_tau}"
            )));
        }
        Ok(Self {
            center_x: inner.center_x.clone(),
            inner_half,
            outer_half,
            p_f: (0..dim).map(|i| exps.p_f(i)).collect(),
            orientation: inner.orientation,
            center_t: inner.center_t,
            inner_tau,
            outer_tau,
        })
    }

    /// Ramp η_i(x_i) before the p_i-th power.
    pub fn eta_axis(&self, i: usize, x: f64) -> f64 {
        let d = (x - self.center_x[i]).abs();
        if d <= self.inner_half[i] {
            1.0
        } else if d >= self.outer_half[i] {
            0.0
        } else {
            (self.outer_half[i] - d) / (self.outer_half[i] - self.inner_half[i])
        }
    }

    /// |∂_i η_i| at x: the ramp slope on the ramp, 0 on the plateaus.
    pub fn eta_axis_slope_at(&self, i: usize, x: f64) -> f64 {
        let d = (x - self.center_x[i]).abs();
        if d > self.inner_half[i] && d < self.outer_half[i] {
            self.grad_bound(i)
        } else {
            0.0
        }
    }

    /// Sup-norm of |∂_i η_i|: 1/(outer half-side − inner half-side).
    pub fn grad_bound(&self, i: usize) -> f64 {
        1.0 / (self.outer_half[i] - self.inner_half[i])
    }

    /// Time ramp η̄(t): 1 on the inner time slab, 0 outside the outer one,
    /// linear on the gap(s). Backward cylinders ramp on the early side,
    /// forward on the late side, full on both.
    pub fn eta_time(&self, t: f64) -> f64 {
        let s = t - self.center_t;
        let ramp_up = |s: f64| -> f64 {
            // 0 at -outer_tau, 1 at -inner_tau
            if s >= -self.inner_tau {
                1.0
            } else if s <= -self.outer_tau {
                0.0
            } else {
                (s + self.outer_tau) / (self.outer_tau - self.inner_tau)
            }
        };
        match self.orientation {
            Orientation::Backward => {
                if s > 0.0 {
                    0.0
                } else {
                    ramp_up(s)
                }
            }
            Orientation::Forward => {
                if s < 0.0 {
                    0.0
                } else {
                    ramp_up(-s)
                }
            }
            Orientation::Full => ramp_up(-s.abs()),
        }
    }

    /// |∂_t η̄| at t.
    pub fn eta_time_slope_at(&self, t: f64) -> f64 {
        let d = (t - self.center_t).abs();
        let on_ramp = d > self.inner_tau && d < self.outer_tau;
        let on_active_side = match self.orientation {
            Orientation::Backward => t <= self.center_t,
            Orientation::Forward => t >= self.center_t,
            Orientation::Full => true,
        };
        if on_ramp && on_active_side {
            self.time_grad_bound()
        } else {
            0.0
        }
    }

    /// Sup-norm of |∂_t η̄|: 1/(outer depth − inner depth).
    pub fn time_grad_bound(&self) -> f64 {
        1.0 / (self.outer_tau - self.inner_tau)
    }

    /// Full cutoff η(x,t) = η̄(t) Π η_i^{p_i}(x_i).
    pub fn eta(&self, x: &[f64], t: f64) -> f64 {
        let mut v = self.eta_time(t);
        for i in 0..self.p_f.len() {
            if v == 0.0 {
                return 0.0;
            }
            v *= self.eta_axis(i, x[i]).powf(self.p_f[i]);
        }
        v
    }

    /// η̂_i = η / η_i^{p_i} (the product with the i-th factor removed).
    pub fn eta_hat(&self, i: usize, x: &[f64], t: f64) -> f64 {
        let mut v = self.eta_time(t);
        for j in 0..self.p_f.len() {
            if j == i {
                continue;
            }
            if v == 0.0 {
                return 0.0;
            }
            v *= self.eta_axis(j, x[j]).powf(self.p_f[j]);
        }
        v
    }

    /// Sample η on a grid.
    pub fn sample(&self, space: &[Axis], time: &Axis) -> Result<SpaceTimeField, GridError> {
        SpaceTimeField::from_fn(space.to_vec(), time.clone(), |x, t| self.eta(x, t))
    }
}
