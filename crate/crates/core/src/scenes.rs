//! Parametric obstacle generators, rasterized at cell centers.
//!
//! Every generator produces a non-empty set at least 3 cells clear of the
//! frame, erroring otherwise. Parameters are in physical units of the grid.

use std::collections::BTreeMap;

use crate::{Error, GridSpec, Result, VoxelSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    Ball,
    Box,
    LShape,
    Star,
    Torus,
    CatenoidRegion,
    Dumbbell,
    OmegaTheta0,
}

impl SceneKind {
    pub fn parse(name: &str) -> Result<SceneKind> {
        Ok(match name {
            "ball" => SceneKind::Ball,
            "box" => SceneKind::Box,
            "l_shape" | "lshape" => SceneKind::LShape,
            "star" => SceneKind::Star,
            "torus" => SceneKind::Torus,
            "catenoid" | "catenoid_region" => SceneKind::CatenoidRegion,
            "dumbbell" => SceneKind::Dumbbell,
            "omega_theta0" | "omega" => SceneKind::OmegaTheta0,
            other => {
                return Err(Error::InvalidParam(format!(
                    "unknown scene '{other}' (ball, box, l_shape, star, torus, \
                     catenoid_region, dumbbell, omega_theta0)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SceneKind::Ball => "ball",
            SceneKind::Box => "box",
            SceneKind::LShape => "l_shape",
            SceneKind::Star => "star",
            SceneKind::Torus => "torus",
            SceneKind::CatenoidRegion => "catenoid_region",
            SceneKind::Dumbbell => "dumbbell",
            SceneKind::OmegaTheta0 => "omega_theta0",
        }
    }

    /// The natural dimension of the scene, if it is fixed.
    pub fn required_dim(&self) -> Option<usize> {
        match self {
            SceneKind::LShape | SceneKind::Star => Some(2),
            SceneKind::Torus | SceneKind::CatenoidRegion | SceneKind::OmegaTheta0 => Some(3),
            _ => None,
        }
    }
}

/// A scene plus the grid it rasterizes onto.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SceneSpec {
    pub kind: SceneKind,
    /// Per-kind parameters; unspecified keys take defaults.
    pub params: BTreeMap<String, f64>,
    pub spec: GridSpec,
}

/// Default parameters per scene kind, in physical units.
pub fn default_params(kind: SceneKind) -> BTreeMap<String, f64> {
    let entries: &[(&str, f64)] = match kind {
        SceneKind::Ball => &[("r", 0.3)],
        SceneKind::Box => &[("half", 0.4)],
        SceneKind::LShape => &[("arm", 0.4)],
        SceneKind::Star => &[("r_outer", 0.55), ("r_inner", 0.22), ("points", 5.0)],
        SceneKind::Torus => &[("r_major", 0.6), ("r_minor", 0.2)],
        SceneKind::CatenoidRegion => &[("half_height", 1.0)],
        SceneKind::Dumbbell => &[("r_ball", 0.28), ("r_neck", 0.10), ("sep", 0.42)],
        SceneKind::OmegaTheta0 => &[("theta0", 0.3), ("l", 0.62), ("a", 0.5)],
    };
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Half-extent of a centered domain that comfortably contains the scene,
/// leaving room for dilation and the frame.
pub fn natural_half_extent(kind: SceneKind, params: &BTreeMap<String, f64>) -> f64 {
    let get = |key: &str| {
        params
            .get(key)
            .copied()
            .unwrap_or_else(|| default_params(kind)[key])
    };
    let reach = match kind {
        SceneKind::Ball => get("r"),
        SceneKind::Box => get("half"),
        SceneKind::LShape => get("arm"),
        SceneKind::Star => get("r_outer"),
        SceneKind::Torus => get("r_major") + get("r_minor"),
        SceneKind::CatenoidRegion => get("half_height").cosh(),
        SceneKind::Dumbbell => get("sep") + get("r_ball"),
        SceneKind::OmegaTheta0 => 1.0,
    };
    reach * 1.25
}

impl SceneSpec {
    pub fn new(kind: SceneKind, params: BTreeMap<String, f64>, spec: GridSpec) -> Result<Self> {
        if let Some(d) = kind.required_dim() {
            if d != spec.dim() {
                return Err(Error::InvalidParam(format!(
                    "scene '{}' requires dim={d}",
                    kind.name()
                )));
            }
        }
        Ok(SceneSpec { kind, params, spec })
    }

    /// Scene on a centered grid sized from the scene's natural extent.
    pub fn on_centered_grid(kind: SceneKind, n: usize, dim: usize) -> Result<Self> {
        let params = default_params(kind);
        let half = natural_half_extent(kind, &params);
        SceneSpec::new(kind, params, GridSpec::centered(dim, n, half)?)
    }

    fn get(&self, key: &str) -> f64 {
        self.params
            .get(key)
            .copied()
            .unwrap_or_else(|| default_params(self.kind)[key])
    }
}

/// Rasterize the scene: cells whose center lies in the analytic set.
pub fn generate(scene: &SceneSpec) -> Result<VoxelSet> {
    let dim = scene.spec.dim();
    let set = match scene.kind {
        SceneKind::Ball => {
            let r = scene.get("r");
            if !(r > 0.0) {
                return Err(Error::InvalidParam("ball radius must be positive".into()));
            }
            VoxelSet::rasterize(scene.spec.clone(), |p| {
                p.iter().map(|c| c * c).sum::<f64>() <= r * r
            })?
        }
        SceneKind::Box => {
            let half = scene.get("half");
            if !(half > 0.0) {
                return Err(Error::InvalidParam("box half width must be positive".into()));
            }
            VoxelSet::rasterize(scene.spec.clone(), |p| p.iter().all(|c| c.abs() <= half))?
        }
        SceneKind::LShape => {
            // a square of side 2*arm minus its upper-right quadrant
            let arm = scene.get("arm");
            if !(arm > 0.0) {
                return Err(Error::InvalidParam("l_shape arm must be positive".into()));
            }
            VoxelSet::rasterize(scene.spec.clone(), |p| {
                p[0].abs() <= arm && p[1].abs() <= arm && !(p[0] > 0.0 && p[1] > 0.0)
            })?
        }
        SceneKind::Star => {
            let (ro, ri) = (scene.get("r_outer"), scene.get("r_inner"));
            let points = scene.get("points") as usize;
            if !(ro > ri && ri > 0.0) || points < 3 {
                return Err(Error::InvalidParam(
                    "star needs r_outer > r_inner > 0 and points >= 3".into(),
                ));
            }
            let verts = star_polygon(ro, ri, points);
            VoxelSet::rasterize(scene.spec.clone(), |p| point_in_polygon(p[0], p[1], &verts))?
        }
        SceneKind::Torus => {
            return torus(scene.get("r_major"), scene.get("r_minor"), scene.spec.clone());
        }
        SceneKind::CatenoidRegion => {
            // the region between a catenoid of unit waist and two planes
            let l = scene.get("half_height");
            if !(l > 0.0) {
                return Err(Error::InvalidParam("catenoid half height must be positive".into()));
            }
            VoxelSet::rasterize(scene.spec.clone(), |p| {
                let rho2 = p[0] * p[0] + p[1] * p[1];
                p[2].abs() <= l && rho2 <= p[2].cosh().powi(2)
            })?
        }
        SceneKind::Dumbbell => {
            let (rb, rn, sep) = (scene.get("r_ball"), scene.get("r_neck"), scene.get("sep"));
            if !(rb > rn && rn > 0.0 && sep > 0.0) {
                return Err(Error::InvalidParam(
                    "dumbbell needs r_ball > r_neck > 0 and sep > 0".into(),
                ));
            }
            VoxelSet::rasterize(scene.spec.clone(), move |p| {
                let cross: f64 = p[1..].iter().map(|c| c * c).sum();
                let in_neck = p[0].abs() <= sep && cross <= rn * rn;
                let ball = |cx: f64| (p[0] - cx) * (p[0] - cx) + cross <= rb * rb;
                in_neck || ball(-sep) || ball(sep)
            })?
        }
        SceneKind::OmegaTheta0 => {
            // angular sector of the region between a catenoid and the unit
            // cylinder, bounded by |z| <= l
            let (theta0, l, a) = (scene.get("theta0"), scene.get("l"), scene.get("a"));
            if !(theta0 > 0.0 && theta0 < std::f64::consts::PI) {
                return Err(Error::InvalidParam("omega_theta0 needs 0 < theta0 < pi".into()));
            }
            if !(a > 0.0 && a < 1.0 && l > 0.0) || a * (l / a).cosh() >= 1.0 {
                return Err(Error::InvalidParam(
                    "omega_theta0 needs 0 < a < 1, l > 0 and a*cosh(l/a) < 1".into(),
                ));
            }
            VoxelSet::rasterize(scene.spec.clone(), move |p| {
                let rho = p[0].hypot(p[1]);
                let theta = p[1].atan2(p[0]).rem_euclid(2.0 * std::f64::consts::PI);
                theta >= theta0
                    && p[2].abs() <= l
                    && a * (p[2] / a).cosh() <= rho
                    && rho <= 1.0
            })?
        }
    };
    finish(set, dim)
}

/// Solid torus `{ (sqrt(x^2+y^2) - r_major)^2 + z^2 <= r_minor^2 }`.
pub fn torus(r_major: f64, r_minor: f64, spec: GridSpec) -> Result<VoxelSet> {
    if !(r_minor > 0.0 && r_minor < r_major) {
        return Err(Error::InvalidParam(format!(
            "torus needs 0 < r_minor < r_major, got {r_minor} vs {r_major}"
        )));
    }
    if spec.dim() != 3 {
        return Err(Error::InvalidParam("torus requires dim=3".into()));
    }
    let set = VoxelSet::rasterize(spec, move |p| {
        let d = p[0].hypot(p[1]) - r_major;
        d * d + p[2] * p[2] <= r_minor * r_minor
    })?;
    finish(set, 3)
}

fn finish(set: VoxelSet, _dim: usize) -> Result<VoxelSet> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    if set.frame_clearance() < 3 {
        return Err(Error::InvalidParam(
            "scene comes closer than 3 cells to the frame; enlarge the domain".into(),
        ));
    }
    Ok(set)
}

fn star_polygon(r_outer: f64, r_inner: f64, points: usize) -> Vec<(f64, f64)> {
    let mut verts = Vec::with_capacity(2 * points);
    for k in 0..2 * points {
        let r = if k % 2 == 0 { r_outer } else { r_inner };
        let phi = std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI / points as f64;
        verts.push((r * phi.cos(), r * phi.sin()));
    }
    verts
}

/// Even-odd crossing test.
fn point_in_polygon(x: f64, y: f64, verts: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let n = verts.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = verts[i];
        let (xj, yj) = verts[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}
