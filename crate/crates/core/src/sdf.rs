//! Exact Euclidean distance transform and signed distance fields.
//!
//! Distances are measured between cell centers, so every squared distance is
//! an integer in cell units. The transform runs the separable lower-envelope
//! algorithm once per axis with exact rational breakpoint comparisons, which
//! makes it match the all-pairs brute force bit for bit.

use crate::{Error, GridSpec, Result, VoxelSet};

/// One real value per grid cell.
#[derive(Clone, Debug)]
pub struct ScalarField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub(crate) fn new(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(spec.cell_count(), values.len());
        ScalarField { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at_linear(&self, i: usize) -> f64 {
        self.values[i]
    }

    #[inline]
    pub fn at(&self, v: crate::CellIndex) -> f64 {
        self.values[self.spec.linear(v)]
    }

    pub fn scale(&self, factor: f64) -> ScalarField {
        ScalarField {
            spec: self.spec.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Plain text dump, one grid line per row, for debugging.
    pub fn write_ascii<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        let [nx, ny, nz] = self.spec.shape3();
        for z in 0..nz {
            for y in 0..ny {
                let row: Vec<String> = (0..nx)
                    .map(|x| format!("{}", self.values[self.spec.linear([x, y, z])]))
                    .collect();
                writeln!(w, "{}", row.join(" "))?;
            }
            if z + 1 < nz {
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

const INF: i64 = i64::MAX / 4;

/// One-dimensional squared-distance transform of `f` at integer positions,
/// written into `out`. Breakpoints between parabolas are kept as exact
/// rationals; all comparisons cross-multiply, so no rounding occurs.
fn envelope_1d(f: &[i64], out: &mut [i64], hull: &mut Vec<(i64, i64, i64)>) {
    // hull entries: (position v, numerator, denominator) where num/den is the
    // left breakpoint of the parabola rooted at v. den > 0 always.
    hull.clear();
    for (q, &fq) in f.iter().enumerate() {
        if fq >= INF {
            continue;
        }
        let q = q as i64;
        loop {
            match hull.last() {
                None => {
                    hull.push((q, -INF, 1));
                    break;
                }
                Some(&(p, num, den)) => {
                    // intersection of parabolas rooted at p and q > p:
                    // s = (fq + q^2 - fp - p^2) / (2 (q - p))
                    let fp = f[p as usize];
                    let s_num = fq + q * q - fp - p * p;
                    let s_den = 2 * (q - p);
                    // s <= previous breakpoint: parabola p is dominated
                    if s_num as i128 * den as i128 <= num as i128 * s_den as i128 {
                        hull.pop();
                    } else {
                        hull.push((q, s_num, s_den));
                        break;
                    }
                }
            }
        }
    }
    if hull.is_empty() {
        out.fill(INF);
        return;
    }
    let mut k = 0;
    for (x, o) in out.iter_mut().enumerate() {
        let x = x as i64;
        while k + 1 < hull.len() && hull[k + 1].1 <= x * hull[k + 1].2 {
            k += 1;
        }
        let v = hull[k].0;
        *o = f[v as usize] + (x - v) * (x - v);
    }
}

/// Exact squared distances, in cell units, from every cell center to the
/// nearest member center of `mask`.
pub(crate) fn squared_cell_distances(mask: &VoxelSet) -> Result<Vec<i64>> {
    if mask.is_empty() {
        return Err(Error::EmptySet);
    }
    squared_to_sources(mask.spec(), |i| mask.contains_linear(i))
}

/// Squared distances to an arbitrary source predicate over linear indices.
pub(crate) fn squared_to_sources(
    spec: &GridSpec,
    is_source: impl Fn(usize) -> bool,
) -> Result<Vec<i64>> {
    let [nx, ny, nz] = spec.shape3();
    let n = spec.cell_count();
    let mut d = vec![INF; n];
    for (i, slot) in d.iter_mut().enumerate() {
        if is_source(i) {
            *slot = 0;
        }
    }
    let mut line = Vec::new();
    let mut out_line = Vec::new();
    let mut hull = Vec::new();
    let axes: [(usize, usize, usize, usize); 3] = [
        (nx, 1, ny, nz),       // along x: stride 1, lines indexed by (y, z)
        (ny, nx, nx, nz),      // along y
        (nz, nx * ny, nx, ny), // along z
    ];
    for a in 0..spec.dim() {
        let (len, stride, n1, n2) = axes[a];
        line.resize(len, 0);
        out_line.resize(len, 0);
        for j2 in 0..n2 {
            for j1 in 0..n1 {
                let base = match a {
                    0 => nx * (j1 + ny * j2),
                    1 => j1 + nx * ny * j2,
                    _ => j1 + nx * j2,
                };
                for (k, l) in line.iter_mut().enumerate() {
                    *l = d[base + k * stride];
                }
                envelope_1d(&line, &mut out_line, &mut hull);
                for (k, &o) in out_line.iter().enumerate() {
                    d[base + k * stride] = o;
                }
            }
        }
    }
    Ok(d)
}

/// Distance from every cell center to the nearest member center of `mask`,
/// zero exactly on members.
pub fn distance_transform(mask: &VoxelSet) -> Result<ScalarField> {
    let d2 = squared_cell_distances(mask)?;
    let dx = mask.spec().spacing();
    let values = d2.iter().map(|&q| (q as f64).sqrt() * dx).collect();
    Ok(ScalarField::new(mask.spec().clone(), values))
}

/// Signed distance of `e`: distance to the opposite phase minus half a cell,
/// negated on members. Negative exactly on members, no zero values anywhere.
/// Frame cells are in neither phase and carry the positive outside value.
pub fn signed_distance(e: &VoxelSet) -> Result<ScalarField> {
    let spec = e.spec().clone();
    let full = VoxelSet::full_interior(spec.clone());
    let outside = full.difference(e)?;
    if e.is_empty() || outside.is_empty() {
        return Err(Error::BoundaryUndefined);
    }
    let to_member = squared_cell_distances(e)?;
    let to_outside = squared_cell_distances(&outside)?;
    let dx = spec.spacing();
    let half = 0.5 * dx;
    let values = (0..spec.cell_count())
        .map(|i| {
            if e.contains_linear(i) {
                half - (to_outside[i] as f64).sqrt() * dx
            } else {
                (to_member[i] as f64).sqrt() * dx - half
            }
        })
        .collect();
    Ok(ScalarField::new(spec, values))
}

/// The bulk weight of one flow step: signed distance of the previous set
/// divided by the time step.
pub fn confinement_weight(e_prev: &VoxelSet, h: f64) -> Result<ScalarField> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParam(format!("time step h={h} must be positive")));
    }
    Ok(signed_distance(e_prev)?.scale(1.0 / h))
}

/// Signed distance with the ambient complement as the outside phase: the
/// opposite phase of a member is any non-member cell, frame included. For
/// the full interior the interface is the domain wall, so the flow can start
/// there; for sets whose boundary is nearer than the wall this agrees with
/// [`signed_distance`].
pub fn signed_distance_ambient(e: &VoxelSet) -> Result<ScalarField> {
    if e.is_empty() {
        return Err(Error::BoundaryUndefined);
    }
    let spec = e.spec().clone();
    let to_member = squared_cell_distances(e)?;
    let to_nonmember = squared_to_sources(&spec, |i| !e.contains_linear(i))?;
    let dx = spec.spacing();
    let half = 0.5 * dx;
    let values = (0..spec.cell_count())
        .map(|i| {
            if e.contains_linear(i) {
                half - (to_nonmember[i] as f64).sqrt() * dx
            } else {
                (to_member[i] as f64).sqrt() * dx - half
            }
        })
        .collect();
    Ok(ScalarField::new(spec, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::GridSpec;
    use rand::{Rng, SeedableRng};

    fn spec2(n: usize) -> GridSpec {
        GridSpec::new(2, &[n, n], 1.0, &[0.0, 0.0]).unwrap()
    }

    fn brute_force_d2(mask: &VoxelSet) -> Vec<i64> {
        let spec = mask.spec();
        let members: Vec<[usize; 3]> = spec.cells().filter(|&v| mask.contains(v)).collect();
        spec.cells()
            .map(|v| {
                members
                    .iter()
                    .map(|m| {
                        (0..3)
                            .map(|a| {
                                let d = v[a] as i64 - m[a] as i64;
                                d * d
                            })
                            .sum::<i64>()
                    })
                    .min()
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn single_cell_distances() {
        let spec = spec2(9);
        let mut m = VoxelSet::empty(spec);
        m.insert([4, 4, 0]).unwrap();
        let d = distance_transform(&m).unwrap();
        assert_eq!(d.at([4, 4, 0]), 0.0);
        assert_eq!(d.at([5, 4, 0]), 1.0);
        assert_eq!(d.at([5, 5, 0]), 2f64.sqrt());
        assert_eq!(d.at([7, 4, 0]), 3.0);
    }

    #[test]
    fn full_mask_is_zero() {
        let spec = spec2(8);
        let m = VoxelSet::full_interior(spec);
        let d = distance_transform(&m).unwrap();
        // frame corners sit sqrt(2) from the nearest interior cell
        let global_max = d.values().iter().cloned().fold(0.0f64, f64::max);
        assert!(global_max <= 2f64.sqrt() + 1e-15);
        for v in m.spec().cells() {
            if m.contains(v) {
                assert_eq!(d.at(v), 0.0);
            }
        }
    }

    #[test]
    fn empty_mask_rejected() {
        let spec = spec2(8);
        assert!(matches!(
            distance_transform(&VoxelSet::empty(spec)),
            Err(crate::Error::EmptySet)
        ));
    }

    #[test]
    fn matches_brute_force_exactly_2d() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let spec = spec2(32);
            let mut m = VoxelSet::empty(spec.clone());
            let density = 0.002 + 0.02 * (trial as f64 / 20.0);
            for x in 1..31 {
                for y in 1..31 {
                    if rng.gen_bool(density) {
                        m.insert([x, y, 0]).unwrap();
                    }
                }
            }
            if m.is_empty() {
                m.insert([5, 7, 0]).unwrap();
            }
            let got = squared_cell_distances(&m).unwrap();
            let want = brute_force_d2(&m);
            assert_eq!(got, want, "trial {trial}");
            // the public field applies sqrt to the same integers
            let f = distance_transform(&m).unwrap();
            for (i, &q) in want.iter().enumerate() {
                assert_eq!(f.at_linear(i), (q as f64).sqrt());
            }
        }
    }

    #[test]
    fn matches_brute_force_exactly_3d() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let spec = GridSpec::new(3, &[12, 10, 14], 0.5, &[0.0; 3]).unwrap();
        for _ in 0..5 {
            let mut m = VoxelSet::empty(spec.clone());
            for _ in 0..6 {
                let v = [
                    rng.gen_range(1..11),
                    rng.gen_range(1..9),
                    rng.gen_range(1..13),
                ];
                m.insert(v).unwrap();
            }
            assert_eq!(squared_cell_distances(&m).unwrap(), brute_force_d2(&m));
        }
    }

    #[test]
    fn lipschitz_across_face_neighbors() {
        let spec = spec2(24);
        let mut m = VoxelSet::empty(spec.clone());
        m.insert([3, 17, 0]).unwrap();
        m.insert([15, 4, 0]).unwrap();
        let d = distance_transform(&m).unwrap();
        for v in spec.cells() {
            for a in 0..2 {
                let mut w = v;
                w[a] += 1;
                if spec.contains(w) {
                    assert!((d.at(v) - d.at(w)).abs() <= spec.spacing() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn signed_distance_half_grid() {
        let spec = spec2(10);
        let e = VoxelSet::rasterize(spec, |p| p[0] < 4.5 && p[0] > 0.5 && p[1] > 0.5 && p[1] < 8.5)
            .unwrap();
        let sd = signed_distance(&e).unwrap();
        // interface between x=4 and x=5
        assert_eq!(sd.at([4, 4, 0]), -0.5);
        assert_eq!(sd.at([5, 4, 0]), 0.5);
        assert_eq!(sd.at([3, 4, 0]), -1.5);
    }

    #[test]
    fn signed_distance_signs_and_gap() {
        let spec = spec2(32);
        let e = VoxelSet::rasterize(spec, |p| {
            let (dx, dy) = (p[0] - 15.5, p[1] - 15.5);
            dx * dx + dy * dy <= 100.0
        })
        .unwrap();
        let sd = signed_distance(&e).unwrap();
        for v in e.spec().cells() {
            let val = sd.at(v);
            assert!(val.abs() >= 0.5 - 1e-15);
            if e.contains(v) {
                assert!(val < 0.0);
            } else {
                assert!(val > 0.0);
            }
        }
        // center is about -(r - dx/2)
        let center = sd.at([15, 15, 0]).min(sd.at([16, 16, 0]));
        assert!((center + 9.5).abs() <= 1.0, "center value {center}");
    }

    #[test]
    fn signed_distance_antisymmetric_on_interior() {
        let spec = spec2(20);
        let e = VoxelSet::rasterize(spec.clone(), |p| {
            let (dx, dy) = (p[0] - 9.0, p[1] - 10.0);
            dx * dx + dy * dy <= 16.0
        })
        .unwrap();
        let full = VoxelSet::full_interior(spec.clone());
        let complement = full.difference(&e).unwrap();
        let sd_e = signed_distance(&e).unwrap();
        let sd_c = signed_distance(&complement).unwrap();
        for v in spec.cells() {
            if !spec.is_frame(v) {
                assert_eq!(sd_e.at(v), -sd_c.at(v), "at {v:?}");
            }
        }
    }

    #[test]
    fn signed_distance_rejects_degenerate() {
        let spec = spec2(8);
        assert!(matches!(
            signed_distance(&VoxelSet::empty(spec.clone())),
            Err(crate::Error::BoundaryUndefined)
        ));
        assert!(matches!(
            signed_distance(&VoxelSet::full_interior(spec)),
            Err(crate::Error::BoundaryUndefined)
        ));
    }

    #[test]
    fn confinement_weight_scales() {
        let spec = spec2(10);
        let e = VoxelSet::rasterize(spec, |p| p[0] < 4.5 && p[0] > 0.5 && p[1] > 0.5 && p[1] < 8.5)
            .unwrap();
        let sd = signed_distance(&e).unwrap();
        let u1 = confinement_weight(&e, 1.0).unwrap();
        let u4 = confinement_weight(&e, 0.25).unwrap();
        for i in 0..e.spec().cell_count() {
            assert_eq!(u1.at_linear(i), sd.at_linear(i));
            assert_eq!(u4.at_linear(i), sd.at_linear(i) * 4.0);
        }
        // interface-adjacent outside cell: 0.5 / 0.25 = 2 (cells, dx = 1)
        assert_eq!(u4.at([5, 4, 0]), 2.0);
        assert!(confinement_weight(&e, 0.0).is_err());
    }
}
