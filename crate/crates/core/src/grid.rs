//! Voxel grid data model and exact set algebra.
//!
//! A [`GridSpec`] describes a rectangular grid of cubic cells with uniform
//! spacing. A [`VoxelSet`] is a bit-packed subset of its cells. The outermost
//! one-cell frame of the grid can never hold members, which makes every set
//! bounded away from the domain boundary by construction; the computational
//! box plays the role of the convex confinement region of the flow.

use std::io::{Read, Write};

use crate::{sdf, Error, Result};

/// Index of a cell, always three entries; the third is zero on 2D grids.
pub type CellIndex = [usize; 3];

/// Dimensions, spacing and physical placement of a voxel grid.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    dim: usize,
    shape: [usize; 3],
    spacing: f64,
    origin: [f64; 3],
}

impl GridSpec {
    /// A grid with the given per-axis cell counts. `origin` is the physical
    /// coordinate of the center of cell `(0, .., 0)`.
    pub fn new(dim: usize, shape: &[usize], spacing: f64, origin: &[f64]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidSpec(format!("dim must be 2 or 3, got {dim}")));
        }
        if shape.len() != dim || origin.len() != dim {
            return Err(Error::InvalidSpec(format!(
                "expected {dim} shape/origin entries, got {}/{}",
                shape.len(),
                origin.len()
            )));
        }
        if shape.iter().any(|&n| n < 4) {
            return Err(Error::InvalidSpec("every shape entry must be >= 4".into()));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidSpec(format!("spacing must be positive, got {spacing}")));
        }
        let mut sh = [1usize; 3];
        let mut or = [0.0f64; 3];
        sh[..dim].copy_from_slice(shape);
        or[..dim].copy_from_slice(origin);
        Ok(GridSpec { dim, shape: sh, spacing, origin: or })
    }

    /// A cube grid of `n` cells per axis covering `[-half_extent, half_extent]^dim`.
    pub fn centered(dim: usize, n: usize, half_extent: f64) -> Result<Self> {
        if !(half_extent > 0.0) {
            return Err(Error::InvalidSpec("half_extent must be positive".into()));
        }
        let spacing = 2.0 * half_extent / n as f64;
        let o = -half_extent + 0.5 * spacing;
        let shape = vec![n; dim];
        let origin = vec![o; dim];
        GridSpec::new(dim, &shape, spacing, &origin)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Per-axis cell counts (length `dim`).
    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.dim]
    }

    pub(crate) fn shape3(&self) -> [usize; 3] {
        self.shape
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin[..self.dim]
    }

    /// Total number of cells.
    pub fn cell_count(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    /// Number of cells off the frame.
    pub fn interior_count(&self) -> usize {
        (0..3)
            .map(|a| if a < self.dim { self.shape[a] - 2 } else { 1 })
            .product()
    }

    /// Linear index; the first axis varies fastest.
    #[inline]
    pub fn linear(&self, v: CellIndex) -> usize {
        debug_assert!(self.contains(v));
        v[0] + self.shape[0] * (v[1] + self.shape[1] * v[2])
    }

    #[inline]
    pub fn unlinear(&self, i: usize) -> CellIndex {
        let x = i % self.shape[0];
        let r = i / self.shape[0];
        [x, r % self.shape[1], r / self.shape[1]]
    }

    #[inline]
    pub fn contains(&self, v: CellIndex) -> bool {
        v[0] < self.shape[0] && v[1] < self.shape[1] && v[2] < self.shape[2]
    }

    /// True on the outermost one-cell frame (of the real axes).
    #[inline]
    pub fn is_frame(&self, v: CellIndex) -> bool {
        (0..self.dim).any(|a| v[a] == 0 || v[a] + 1 == self.shape[a])
    }

    /// Physical coordinate of the center of cell `v`.
    #[inline]
    pub fn center(&self, v: CellIndex) -> [f64; 3] {
        let mut c = [0.0; 3];
        for a in 0..self.dim {
            c[a] = self.origin[a] + v[a] as f64 * self.spacing;
        }
        c
    }

    /// Iterate over all cell indices in linear order.
    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        let [nx, ny, nz] = self.shape;
        (0..nz).flat_map(move |z| (0..ny).flat_map(move |y| (0..nx).map(move |x| [x, y, z])))
    }

    /// Measure of one cell, `spacing^dim`.
    pub fn cell_measure(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }
}

/// A finite set of grid cells, one bit per cell.
#[derive(Clone, PartialEq)]
pub struct VoxelSet {
    spec: GridSpec,
    words: Vec<u64>,
}

impl std::fmt::Debug for VoxelSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "VoxelSet({}D {:?}, {} cells)",
            self.spec.dim,
            self.spec.shape(),
            self.count()
        )
    }
}

impl VoxelSet {
    pub fn empty(spec: GridSpec) -> Self {
        let n = spec.cell_count().div_ceil(64);
        VoxelSet { spec, words: vec![0; n] }
    }

    /// Every cell off the frame.
    pub fn full_interior(spec: GridSpec) -> Self {
        let mut s = VoxelSet::empty(spec);
        let sp = s.spec.clone();
        for v in sp.cells() {
            if !sp.is_frame(v) {
                s.set_raw(sp.linear(v));
            }
        }
        s
    }

    /// Rasterize the predicate over cell centers. Errors if any frame cell
    /// center satisfies it.
    pub fn rasterize<F: Fn(&[f64]) -> bool>(spec: GridSpec, f: F) -> Result<Self> {
        let mut s = VoxelSet::empty(spec);
        let sp = s.spec.clone();
        for v in sp.cells() {
            let c = sp.center(v);
            if f(&c[..sp.dim]) {
                if sp.is_frame(v) {
                    return Err(Error::FrameContact);
                }
                s.set_raw(sp.linear(v));
            }
        }
        Ok(s)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    #[inline]
    fn set_raw(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    fn clear_raw(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    #[inline]
    pub fn contains_linear(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn contains(&self, v: CellIndex) -> bool {
        self.contains_linear(self.spec.linear(v))
    }

    /// Membership with bounds check; cells outside the grid are non-members.
    #[inline]
    pub fn contains_signed(&self, x: i64, y: i64, z: i64) -> bool {
        let [nx, ny, nz] = self.spec.shape;
        if x < 0 || y < 0 || z < 0 || x >= nx as i64 || y >= ny as i64 || z >= nz as i64 {
            return false;
        }
        self.contains([x as usize, y as usize, z as usize])
    }

    /// Add a cell. Frame cells are rejected.
    pub fn insert(&mut self, v: CellIndex) -> Result<()> {
        if !self.spec.contains(v) {
            return Err(Error::InvalidParam(format!("cell {v:?} outside grid")));
        }
        if self.spec.is_frame(v) {
            return Err(Error::FrameContact);
        }
        self.set_raw(self.spec.linear(v));
        Ok(())
    }

    pub fn remove(&mut self, v: CellIndex) {
        if self.spec.contains(v) {
            self.clear_raw(self.spec.linear(v));
        }
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Number of member cells.
    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Lebesgue measure: member count times `spacing^dim`.
    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.spec.cell_measure()
    }

    fn check_spec(&self, other: &VoxelSet) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::SpecMismatch);
        }
        Ok(())
    }

    fn zip_words(&self, other: &VoxelSet, f: impl Fn(u64, u64) -> u64) -> VoxelSet {
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(&a, &b)| f(a, b))
            .collect();
        VoxelSet { spec: self.spec.clone(), words }
    }

    pub fn union(&self, other: &VoxelSet) -> Result<VoxelSet> {
        self.check_spec(other)?;
        Ok(self.zip_words(other, |a, b| a | b))
    }

    pub fn intersection(&self, other: &VoxelSet) -> Result<VoxelSet> {
        self.check_spec(other)?;
        Ok(self.zip_words(other, |a, b| a & b))
    }

    pub fn difference(&self, other: &VoxelSet) -> Result<VoxelSet> {
        self.check_spec(other)?;
        Ok(self.zip_words(other, |a, b| a & !b))
    }

    pub fn symdiff(&self, other: &VoxelSet) -> Result<VoxelSet> {
        self.check_spec(other)?;
        Ok(self.zip_words(other, |a, b| a ^ b))
    }

    /// Measure of the exclusive-or of memberships.
    pub fn symdiff_measure(&self, other: &VoxelSet) -> Result<f64> {
        self.check_spec(other)?;
        let n: usize = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(&a, &b)| (a ^ b).count_ones() as usize)
            .sum();
        Ok(n as f64 * self.spec.cell_measure())
    }

    /// True iff every member of `self` is a member of `other`.
    pub fn subset(&self, other: &VoxelSet) -> Result<bool> {
        self.check_spec(other)?;
        Ok(self.words.iter().zip(&other.words).all(|(&a, &b)| a & !b == 0))
    }

    /// Member cells with at least one face-adjacent non-member (frame and
    /// off-grid cells count as non-members).
    pub fn boundary_cells(&self) -> Vec<CellIndex> {
        let mut out = Vec::new();
        for v in self.spec.cells() {
            if !self.contains(v) {
                continue;
            }
            let (x, y, z) = (v[0] as i64, v[1] as i64, v[2] as i64);
            let mut exposed = false;
            for a in 0..self.spec.dim {
                let mut d = [0i64; 3];
                d[a] = 1;
                if !self.contains_signed(x + d[0], y + d[1], z + d[2])
                    || !self.contains_signed(x - d[0], y - d[1], z - d[2])
                {
                    exposed = true;
                    break;
                }
            }
            if exposed {
                out.push(v);
            }
        }
        out
    }

    /// Linear indices of all members, ascending.
    pub fn member_indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.count());
        for (wi, &w) in self.words.iter().enumerate() {
            let mut bits = w;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                out.push(wi * 64 + b);
                bits &= bits - 1;
            }
        }
        out
    }

    /// Cells whose center lies within distance `eps` of some member center.
    /// Errors if the result would touch the frame.
    pub fn dilate(&self, eps: f64) -> Result<VoxelSet> {
        if eps < 0.0 || !eps.is_finite() {
            return Err(Error::InvalidParam(format!("dilation radius {eps} must be >= 0")));
        }
        if self.is_empty() {
            return Err(Error::EmptySet);
        }
        if eps == 0.0 {
            return Ok(self.clone());
        }
        let d2 = sdf::squared_cell_distances(self)?;
        let dx = self.spec.spacing;
        let mut out = VoxelSet::empty(self.spec.clone());
        let spec = self.spec.clone();
        for v in spec.cells() {
            let i = spec.linear(v);
            // d <= eps, compared as exact integers scaled by dx^2
            if (d2[i] as f64) * dx * dx <= eps * eps {
                if spec.is_frame(v) {
                    return Err(Error::ObstacleTooLarge);
                }
                out.set_raw(i);
            }
        }
        Ok(out)
    }

    /// Cells whose center lies at distance greater than `eps` from every
    /// non-member center, the adjoint of [`VoxelSet::dilate`]. Eroding a
    /// dilation by the same radius contains the original set.
    pub fn erode(&self, eps: f64) -> Result<VoxelSet> {
        if eps < 0.0 || !eps.is_finite() {
            return Err(Error::InvalidParam(format!("erosion radius {eps} must be >= 0")));
        }
        if eps == 0.0 {
            return Ok(self.clone());
        }
        let full = VoxelSet::full_interior(self.spec.clone());
        let complement = full.difference(self)?;
        if complement.is_empty() {
            return Ok(self.clone());
        }
        let d2 = sdf::squared_cell_distances(&complement)?;
        let dx = self.spec.spacing;
        let mut out = VoxelSet::empty(self.spec.clone());
        let spec = self.spec.clone();
        for v in spec.cells() {
            let i = spec.linear(v);
            if self.contains_linear(i) && (d2[i] as f64) * dx * dx > eps * eps {
                out.set_raw(i);
            }
        }
        Ok(out)
    }

    /// Minimum number of cells between any member and the frame, along any
    /// single axis. Used to validate obstacle placement.
    pub fn frame_clearance(&self) -> usize {
        let mut best = usize::MAX;
        for v in self.spec.cells() {
            if !self.contains(v) {
                continue;
            }
            for a in 0..self.spec.dim {
                best = best.min(v[a]).min(self.spec.shape[a] - 1 - v[a]);
            }
        }
        if best == usize::MAX {
            0
        } else {
            best
        }
    }

    // ---- file formats ----

    /// Write the bit-exact MCHV volume format.
    pub fn write_mchv<W: Write>(&self, w: &mut W) -> Result<()> {
        let sp = &self.spec;
        let shape = sp
            .shape()
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let origin = sp
            .origin()
            .iter()
            .map(|o| format!("{o}"))
            .collect::<Vec<_>>()
            .join(",");
        write!(
            w,
            "MCHV1\ndim={} shape={} spacing={} origin={}\n",
            sp.dim, shape, sp.spacing, origin
        )?;
        let nbytes = sp.cell_count().div_ceil(8);
        let mut bytes = Vec::with_capacity(self.words.len() * 8);
        for word in &self.words {
            bytes.extend_from_slice(&word.to_le_bytes());
        }
        bytes.truncate(nbytes);
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_mchv<R: Read>(r: &mut R) -> Result<VoxelSet> {
        let mut data = Vec::new();
        r.read_to_end(&mut data)?;
        let magic = b"MCHV1\n";
        if data.len() < magic.len() || &data[..magic.len()] != magic {
            return Err(Error::Format("missing MCHV1 magic".into()));
        }
        let rest = &data[magic.len()..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("missing header line".into()))?;
        let header = std::str::from_utf8(&rest[..nl])
            .map_err(|_| Error::Format("header is not utf-8".into()))?;
        let mut dim = None;
        let mut shape = Vec::new();
        let mut spacing = None;
        let mut origin = Vec::new();
        for field in header.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad header field '{field}'")))?;
            match key {
                "dim" => dim = Some(value.parse::<usize>().map_err(|e| Error::Format(e.to_string()))?),
                "shape" => {
                    for p in value.split(',') {
                        shape.push(p.parse::<usize>().map_err(|e| Error::Format(e.to_string()))?);
                    }
                }
                "spacing" => {
                    spacing = Some(value.parse::<f64>().map_err(|e| Error::Format(e.to_string()))?)
                }
                "origin" => {
                    for p in value.split(',') {
                        origin.push(p.parse::<f64>().map_err(|e| Error::Format(e.to_string()))?);
                    }
                }
                other => return Err(Error::Format(format!("unknown header key '{other}'"))),
            }
        }
        let dim = dim.ok_or_else(|| Error::Format("missing dim".into()))?;
        let spacing = spacing.ok_or_else(|| Error::Format("missing spacing".into()))?;
        let spec = GridSpec::new(dim, &shape, spacing, &origin)?;
        let bits = &rest[nl + 1..];
        let nbytes = spec.cell_count().div_ceil(8);
        if bits.len() != nbytes {
            return Err(Error::Format(format!(
                "expected {nbytes} payload bytes, got {}",
                bits.len()
            )));
        }
        let mut set = VoxelSet::empty(spec);
        for (i, &byte) in bits.iter().enumerate() {
            for b in 0..8 {
                if byte >> b & 1 == 1 {
                    let cell = i * 8 + b;
                    if cell >= set.spec.cell_count() {
                        return Err(Error::Format("membership bits in padding".into()));
                    }
                    let v = set.spec.unlinear(cell);
                    if set.spec.is_frame(v) {
                        return Err(Error::Format("member on the grid frame".into()));
                    }
                    set.set_raw(cell);
                }
            }
        }
        Ok(set)
    }

    /// Binary PGM (P5) export for 2D sets, members white.
    pub fn write_pgm<W: Write>(&self, w: &mut W) -> Result<()> {
        if self.spec.dim != 2 {
            return Err(Error::InvalidParam("PGM export requires dim=2".into()));
        }
        let [nx, ny, _] = self.spec.shape;
        write!(w, "P5\n{nx} {ny}\n255\n")?;
        let mut row = vec![0u8; nx];
        for y in (0..ny).rev() {
            for (x, px) in row.iter_mut().enumerate() {
                *px = if self.contains([x, y, 0]) { 255 } else { 0 };
            }
            w.write_all(&row)?;
        }
        Ok(())
    }
}
