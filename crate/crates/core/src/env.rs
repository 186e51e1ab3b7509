//! Indoor environment: regions, walls, access points and the reference-point grid.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon, Segment, EPS};

/// Default reference-point spacing in meters.
pub const DEFAULT_RP_SPACING: f64 = 0.2;

/// Probe rule deciding which regions an access point "sees".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityRule {
    /// A region is valid when the segment from the AP to its centroid crosses no wall.
    #[default]
    Centroid,
    /// Like `Centroid`, but any of the centroid or the (slightly shrunk) corners may be visible.
    AnyProbe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: usize,
    pub polygon: Polygon,
    centroid: Point,
}

impl Region {
    pub fn new(id: usize, polygon: Polygon) -> Self {
        let centroid = polygon.centroid();
        Region {
            id,
            polygon,
            centroid,
        }
    }

    pub fn centroid(&self) -> Point {
        self.centroid
    }

    pub fn contains(&self, p: Point) -> bool {
        self.polygon.contains(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccessPoint {
    pub id: usize,
    pub position: Point,
    pub host_region: usize,
    pub valid_regions: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    regions: Vec<Region>,
    aps: Vec<AccessPoint>,
    walls: Vec<Segment>,
    rp_spacing: f64,
    rule: VisibilityRule,
}

impl Environment {
    /// Validates the layout and precomputes every AP's valid-region set.
    ///
    /// Regions get ids `1..=K` and APs ids `1..=D` in the order given.
    pub fn new(
        regions: Vec<Polygon>,
        ap_positions: Vec<Point>,
        walls: Vec<Segment>,
        rp_spacing: f64,
        rule: VisibilityRule,
    ) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::Config("environment has no regions".into()));
        }
        if !(rp_spacing > 0.0 && rp_spacing.is_finite()) {
            return Err(Error::Config(format!(
                "rp_spacing must be positive, got {rp_spacing}"
            )));
        }
        let regions: Vec<Region> = regions
            .into_iter()
            .enumerate()
            .map(|(i, poly)| Region::new(i + 1, poly))
            .collect();
        for r in &regions {
            if !r.polygon.is_simple() {
                return Err(Error::Config(format!(
                    "region {} is not a simple polygon with positive area",
                    r.id
                )));
            }
        }
        for (i, a) in regions.iter().enumerate() {
            for b in &regions[i + 1..] {
                if a.polygon.interiors_overlap(&b.polygon) {
                    return Err(Error::Config(format!(
                        "regions {} and {} overlap",
                        a.id, b.id
                    )));
                }
            }
        }
        let aps = ap_positions
            .into_iter()
            .enumerate()
            .map(|(i, position)| AccessPoint {
                id: i + 1,
                position,
                host_region: 0,
                valid_regions: BTreeSet::new(),
            })
            .collect();
        let mut env = Environment {
            regions,
            aps,
            walls,
            rp_spacing,
            rule,
        };
        let valid = compute_valid_regions(&env)?;
        let hosts: Vec<usize> = env
            .aps
            .iter()
            .map(|ap| {
                env.point_in_region(ap.position)
                    .expect("checked by compute_valid_regions")
            })
            .collect();
        for (ap, host) in env.aps.iter_mut().zip(hosts) {
            ap.host_region = host;
            ap.valid_regions = valid[&ap.id].clone();
        }
        Ok(env)
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, id: usize) -> &Region {
        &self.regions[id - 1]
    }

    pub fn num_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn aps(&self) -> &[AccessPoint] {
        &self.aps
    }

    pub fn ap(&self, id: usize) -> &AccessPoint {
        &self.aps[id - 1]
    }

    pub fn num_aps(&self) -> usize {
        self.aps.len()
    }

    pub fn walls(&self) -> &[Segment] {
        &self.walls
    }

    pub fn rp_spacing(&self) -> f64 {
        self.rp_spacing
    }

    pub fn visibility_rule(&self) -> VisibilityRule {
        self.rule
    }

    /// Copy of this environment with valid-region sets recomputed under `rule`.
    pub fn with_rule(&self, rule: VisibilityRule) -> Result<Self> {
        Environment::new(
            self.regions.iter().map(|r| r.polygon.clone()).collect(),
            self.aps.iter().map(|a| a.position).collect(),
            self.walls.clone(),
            self.rp_spacing,
            rule,
        )
    }

    /// Region containing `p`; boundary points go to the lowest region id.
    pub fn point_in_region(&self, p: Point) -> Option<usize> {
        self.regions.iter().find(|r| r.contains(p)).map(|r| r.id)
    }

    /// Whether AP `q`'s path-loss model is trusted inside region `k`.
    pub fn is_valid(&self, k: usize, q: usize) -> bool {
        self.aps[q - 1].valid_regions.contains(&k)
    }

    /// Ids of the APs whose valid set contains region `k`, ascending.
    pub fn valid_aps(&self, k: usize) -> Vec<usize> {
        self.aps
            .iter()
            .filter(|a| a.valid_regions.contains(&k))
            .map(|a| a.id)
            .collect()
    }

    /// Whether the straight segment between two points crosses no wall.
    pub fn line_of_sight(&self, a: Point, b: Point) -> bool {
        let seg = Segment::new(a, b);
        !self.walls.iter().any(|w| w.intersects(&seg))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: EnvDoc = serde_json::from_str(s)?;
        doc.into_environment()
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::EnvironmentNotFound(path.to_path_buf()));
        }
        Environment::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Compact JSON with coordinates rounded to two decimals.
    pub fn to_json(&self) -> String {
        let pt = |p: Point| format!("[{:.2},{:.2}]", p.x, p.y);
        let mut s = String::from("{\"regions\":[");
        for (i, r) in self.regions.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let poly: Vec<String> = r.polygon.vertices().iter().map(|&p| pt(p)).collect();
            let _ = write!(s, "{{\"id\":{},\"polygon\":[{}]}}", r.id, poly.join(","));
        }
        s.push_str("],\"aps\":[");
        for (i, a) in self.aps.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{{\"id\":{},\"pos\":{}}}", a.id, pt(a.position));
        }
        s.push_str("],\"walls\":[");
        for (i, w) in self.walls.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "[{},{}]", pt(w.a), pt(w.b));
        }
        let _ = write!(s, "],\"rp_spacing\":{}}}", self.rp_spacing);
        s.push('\n');
        s
    }
}

#[derive(Debug, Deserialize)]
struct EnvDoc {
    regions: Vec<RegionDoc>,
    #[serde(default)]
    aps: Vec<ApDoc>,
    #[serde(default)]
    walls: Vec<Segment>,
    #[serde(default = "default_spacing")]
    rp_spacing: f64,
    #[serde(default)]
    visibility_rule: VisibilityRule,
}

#[derive(Debug, Deserialize)]
struct RegionDoc {
    id: usize,
    polygon: Vec<Point>,
}

#[derive(Debug, Deserialize)]
struct ApDoc {
    id: usize,
    pos: Point,
}

fn default_spacing() -> f64 {
    DEFAULT_RP_SPACING
}

impl EnvDoc {
    fn into_environment(mut self) -> Result<Environment> {
        self.regions.sort_by_key(|r| r.id);
        self.aps.sort_by_key(|a| a.id);
        for (i, r) in self.regions.iter().enumerate() {
            if r.id != i + 1 {
                return Err(Error::Config(format!(
                    "region ids must be 1..=K without gaps; found {}",
                    r.id
                )));
            }
        }
        for (i, a) in self.aps.iter().enumerate() {
            if a.id != i + 1 {
                return Err(Error::Config(format!(
                    "AP ids must be 1..=D without gaps; found {}",
                    a.id
                )));
            }
        }
        Environment::new(
            self.regions
                .into_iter()
                .map(|r| Polygon::new(r.polygon))
                .collect(),
            self.aps.into_iter().map(|a| a.pos).collect(),
            self.walls,
            self.rp_spacing,
            self.visibility_rule,
        )
    }
}

/// Valid-region set of every AP: its host region plus every region whose probe
/// point(s) can be reached from the AP without crossing a wall.
pub fn compute_valid_regions(env: &Environment) -> Result<BTreeMap<usize, BTreeSet<usize>>> {
    let mut out = BTreeMap::new();
    for ap in &env.aps {
        let host = env.point_in_region(ap.position).ok_or_else(|| {
            Error::Config(format!(
                "AP {} at ({:.2}, {:.2}) lies outside every region",
                ap.id, ap.position.x, ap.position.y
            ))
        })?;
        let mut set = BTreeSet::from([host]);
        for r in &env.regions {
            if r.id == host {
                continue;
            }
            if probes(r, env.rule)
                .into_iter()
                .any(|p| env.line_of_sight(ap.position, p))
            {
                set.insert(r.id);
            }
        }
        out.insert(ap.id, set);
    }
    Ok(out)
}

fn probes(region: &Region, rule: VisibilityRule) -> Vec<Point> {
    let c = region.centroid();
    match rule {
        VisibilityRule::Centroid => vec![c],
        VisibilityRule::AnyProbe => std::iter::once(c)
            .chain(region.polygon.vertices().iter().map(|&v| v.lerp(c, 0.1)))
            .collect(),
    }
}

/// One reference point of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpPoint {
    pub pos: Point,
    pub region: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Lattice {
    origin: Point,
    rows: usize,
    cols: usize,
    /// Row-major map from lattice cell to index in `RpGrid::points`.
    cells: Vec<Option<usize>>,
}

/// Reference points at a fixed spacing, ordered by (region, row, column).
#[derive(Debug, Clone, PartialEq)]
pub struct RpGrid {
    points: Vec<RpPoint>,
    spacing: f64,
    lattices: Vec<Lattice>,
}

impl RpGrid {
    pub fn points(&self) -> &[RpPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Points of region `k`.
    pub fn region_points(&self, k: usize) -> impl Iterator<Item = (usize, &RpPoint)> {
        self.points
            .iter()
            .enumerate()
            .filter(move |(_, p)| p.region == k)
    }

    /// Mean of the reference points of region `k`, if it has any.
    pub fn region_mean(&self, k: usize) -> Option<Point> {
        let mut n = 0usize;
        let mut acc = Point::default();
        for (_, p) in self.region_points(k) {
            acc = acc + p.pos;
            n += 1;
        }
        (n > 0).then(|| acc * (1.0 / n as f64))
    }

    /// Nearest reference point of region `k` to `p` within `radius`.
    pub fn snap(&self, k: usize, p: Point, radius: f64) -> Option<usize> {
        let lat = self.lattices.get(k.checked_sub(1)?)?;
        let fc = (p.x - lat.origin.x) / self.spacing;
        let fr = (p.y - lat.origin.y) / self.spacing;
        if !fc.is_finite() || !fr.is_finite() {
            return None;
        }
        let (c0, r0) = (fc.round() as i64, fr.round() as i64);
        let mut best: Option<(f64, usize)> = None;
        for dr in -1..=1 {
            for dc in -1..=1 {
                let (r, c) = (r0 + dr, c0 + dc);
                if r < 0 || c < 0 || r as usize >= lat.rows || c as usize >= lat.cols {
                    continue;
                }
                if let Some(idx) = lat.cells[r as usize * lat.cols + c as usize] {
                    let d = self.points[idx].pos.dist(p);
                    if d <= radius + EPS && best.is_none_or(|(bd, bi)| d < bd || (d == bd && idx < bi)) {
                        best = Some((d, idx));
                    }
                }
            }
        }
        best.map(|(_, i)| i)
    }
}

/// Regular lattice at the environment spacing, clipped to each region.
///
/// Each region's lattice is anchored at its bounding-box minimum corner. A lattice
/// point is kept for region `k` only if `point_in_region` assigns it to `k`, so points
/// on shared edges belong to the lower id.
pub fn build_rp_grid(env: &Environment) -> RpGrid {
    let s = env.rp_spacing;
    let mut points = Vec::new();
    let mut lattices = Vec::with_capacity(env.regions.len());
    for region in &env.regions {
        let b = region.polygon.bounds();
        let cols = (b.width() / s + 1e-9).floor() as usize + 1;
        let rows = (b.height() / s + 1e-9).floor() as usize + 1;
        let mut cells = vec![None; rows * cols];
        let before = points.len();
        for row in 0..rows {
            for col in 0..cols {
                let p = Point::new(b.min.x + col as f64 * s, b.min.y + row as f64 * s);
                if env.point_in_region(p) == Some(region.id) {
                    cells[row * cols + col] = Some(points.len());
                    points.push(RpPoint {
                        pos: p,
                        region: region.id,
                    });
                }
            }
        }
        if points.len() == before {
            log::warn!("region {} produced no reference points", region.id);
        }
        lattices.push(Lattice {
            origin: b.min,
            rows,
            cols,
            cells,
        });
    }
    RpGrid {
        points,
        spacing: s,
        lattices,
    }
}
