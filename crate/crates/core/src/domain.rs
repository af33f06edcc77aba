//! Open sets in ℝ³ described by constructive solid geometry, and their
//! voxelization into the node sets used by the discrete operators.
//!
//! A voxelized domain carries two nested node sets on a uniform grid:
//!
//! * `A`: every grid node strictly inside Ω. The unconstrained spinor
//!   components live here.
//! * `I ⊂ A`: nodes of `A` whose six axis neighbours are all in `A`. The
//!   Dirichlet-constrained components live here; values on the boundary
//!   layer `B = A ∖ I` are eliminated (zero extension).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Axis-aligned box `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    /// The cube `[-r, r]³`.
    pub fn centered(r: f64) -> Self {
        Self::new([-r; 3], [r; 3])
    }

    pub fn is_degenerate(&self) -> bool {
        (0..3).any(|d| !(self.max[d] > self.min[d]) || !self.min[d].is_finite() || !self.max[d].is_finite())
    }

    fn union(&self, other: &Aabb) -> Aabb {
        Aabb::new(
            [0, 1, 2].map(|d| self.min[d].min(other.min[d])),
            [0, 1, 2].map(|d| self.max[d].max(other.max[d])),
        )
    }

    fn intersection(&self, other: &Aabb) -> Aabb {
        Aabb::new(
            [0, 1, 2].map(|d| self.min[d].max(other.min[d])),
            [0, 1, 2].map(|d| self.max[d].min(other.max[d])),
        )
    }
}

/// Constructive-solid-geometry description of an open set.
///
/// Primitives are open; `Complement` is the interior of the complement, i.e.
/// the complement of the closure of its argument (so the complement of a
/// ball is the exterior of the closed ball).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    /// All of ℝ³.
    Whole,
    #[serde(rename = "box")]
    Cuboid { min: [f64; 3], max: [f64; 3] },
    Ball { center: [f64; 3], radius: f64 },
    /// `{x : normal · x < offset}`.
    HalfSpace { normal: [f64; 3], offset: f64 },
    Union { parts: Vec<DomainSpec> },
    Intersection { parts: Vec<DomainSpec> },
    Complement { of: Box<DomainSpec> },
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|d| (a[d] - b[d]).powi(2)).sum()
}

impl DomainSpec {
    pub fn unit_cube() -> Self {
        DomainSpec::Cuboid {
            min: [0.0; 3],
            max: [1.0; 3],
        }
    }

    pub fn ball(center: [f64; 3], radius: f64) -> Self {
        DomainSpec::Ball { center, radius }
    }

    /// `ℝ³` minus the closed ball.
    pub fn exterior_of_ball(center: [f64; 3], radius: f64) -> Self {
        DomainSpec::Complement {
            of: Box::new(DomainSpec::ball(center, radius)),
        }
    }

    /// The slab `ℝ² × (lo, hi)` in the third coordinate.
    pub fn slab(lo: f64, hi: f64) -> Self {
        DomainSpec::Intersection {
            parts: vec![
                DomainSpec::HalfSpace {
                    normal: [0.0, 0.0, -1.0],
                    offset: -lo,
                },
                DomainSpec::HalfSpace {
                    normal: [0.0, 0.0, 1.0],
                    offset: hi,
                },
            ],
        }
    }

    /// Strict membership in the open set.
    pub fn contains(&self, p: &[f64; 3]) -> bool {
        match self {
            DomainSpec::Whole => true,
            DomainSpec::Cuboid { min, max } => (0..3).all(|d| p[d] > min[d] && p[d] < max[d]),
            DomainSpec::Ball { center, radius } => dist2(p, center) < radius * radius,
            DomainSpec::HalfSpace { normal, offset } => dot(normal, p) < *offset,
            DomainSpec::Union { parts } => parts.iter().any(|s| s.contains(p)),
            DomainSpec::Intersection { parts } => parts.iter().all(|s| s.contains(p)),
            DomainSpec::Complement { of } => !of.closure_contains(p),
        }
    }

    /// Membership in the closure of the set.
    pub fn closure_contains(&self, p: &[f64; 3]) -> bool {
        match self {
            DomainSpec::Whole => true,
            DomainSpec::Cuboid { min, max } => (0..3).all(|d| p[d] >= min[d] && p[d] <= max[d]),
            DomainSpec::Ball { center, radius } => dist2(p, center) <= radius * radius,
            DomainSpec::HalfSpace { normal, offset } => dot(normal, p) <= *offset,
            DomainSpec::Union { parts } => parts.iter().any(|s| s.closure_contains(p)),
            DomainSpec::Intersection { parts } => parts.iter().all(|s| s.closure_contains(p)),
            DomainSpec::Complement { of } => !of.contains(p),
        }
    }

    /// A box containing the set, when the set is bounded in an obvious way.
    pub fn bounding_box(&self) -> Option<Aabb> {
        match self {
            DomainSpec::Whole | DomainSpec::HalfSpace { .. } | DomainSpec::Complement { .. } => None,
            DomainSpec::Cuboid { min, max } => Some(Aabb::new(*min, *max)),
            DomainSpec::Ball { center, radius } => Some(Aabb::new(
                center.map(|c| c - radius),
                center.map(|c| c + radius),
            )),
            DomainSpec::Union { parts } => {
                let mut acc: Option<Aabb> = None;
                for p in parts {
                    let b = p.bounding_box()?;
                    acc = Some(acc.map_or(b, |a| a.union(&b)));
                }
                acc
            }
            DomainSpec::Intersection { parts } => parts
                .iter()
                .filter_map(|p| p.bounding_box())
                .reduce(|a, b| a.intersection(&b)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DomainSpec::Cuboid { min, max } => {
                if Aabb::new(*min, *max).is_degenerate() {
                    return Err(Error::InvalidArgument("box with min >= max".into()));
                }
            }
            DomainSpec::Ball { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidArgument("ball radius must be positive".into()));
                }
            }
            DomainSpec::HalfSpace { normal, .. } => {
                if dot(normal, normal) == 0.0 {
                    return Err(Error::InvalidArgument("half-space normal is zero".into()));
                }
            }
            DomainSpec::Union { parts } | DomainSpec::Intersection { parts } => {
                if parts.is_empty() {
                    return Err(Error::InvalidArgument("empty union/intersection".into()));
                }
                for p in parts {
                    p.validate()?;
                }
            }
            DomainSpec::Complement { of } => of.validate()?,
            DomainSpec::Whole => {}
        }
        Ok(())
    }
}

const NONE: u32 = u32::MAX;

/// Grid coordinates are snapped to 1e-12 so that nodes meant to sit on a
/// face (e.g. `12 · (1/12)`) land exactly on it.
fn snap(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// A voxelized open set with its `A` / `I` node classification.
#[derive(Clone, Debug)]
pub struct VoxelDomain {
    origin: [f64; 3],
    h: f64,
    dims: [usize; 3],
    bbox: Aabb,
    /// Grid index triples of the nodes of `A`, lexicographic.
    nodes: Vec<[u32; 3]>,
    /// Linear grid index → row in `A` (or `NONE`).
    grid_to_all: Vec<u32>,
    /// Row in `I` → row in `A`.
    interior: Vec<u32>,
    /// Row in `A` → row in `I` (or `NONE` on the boundary layer).
    all_to_interior: Vec<u32>,
}

/// Classifies grid nodes of `bbox` (spacing `h`) against `spec`.
///
/// Nodes sit at `bbox.min + i·h`; only nodes strictly inside both Ω and the
/// box are kept, so complements of bounded sets are truncated by the box.
pub fn voxelize(spec: &DomainSpec, h: f64, bbox: &Aabb) -> Result<VoxelDomain> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("grid spacing must be positive, got {h}")));
    }
    if bbox.is_degenerate() {
        return Err(Error::InvalidArgument("degenerate bounding box".into()));
    }
    spec.validate()?;
    let dims = [0, 1, 2].map(|d| ((bbox.max[d] - bbox.min[d]) / h + 1e-9).floor() as usize + 1);
    let total = dims[0]
        .checked_mul(dims[1])
        .and_then(|v| v.checked_mul(dims[2]))
        .filter(|&v| v < NONE as usize)
        .ok_or_else(|| Error::InvalidArgument("grid too large".into()))?;

    let coord = |d: usize, i: usize| snap(bbox.min[d] + i as f64 * h);
    let mut grid_to_all = vec![NONE; total];
    let mut nodes = Vec::new();
    for i in 0..dims[0] {
        let x = coord(0, i);
        if !(x > bbox.min[0] && x < bbox.max[0]) {
            continue;
        }
        for j in 0..dims[1] {
            let y = coord(1, j);
            if !(y > bbox.min[1] && y < bbox.max[1]) {
                continue;
            }
            for k in 0..dims[2] {
                let z = coord(2, k);
                if !(z > bbox.min[2] && z < bbox.max[2]) {
                    continue;
                }
                if spec.contains(&[x, y, z]) {
                    grid_to_all[(i * dims[1] + j) * dims[2] + k] = nodes.len() as u32;
                    nodes.push([i as u32, j as u32, k as u32]);
                }
            }
        }
    }
    if nodes.is_empty() {
        return Err(Error::EmptyDomain);
    }

    let mut dom = VoxelDomain {
        origin: bbox.min,
        h,
        dims,
        bbox: *bbox,
        nodes,
        grid_to_all,
        interior: Vec::new(),
        all_to_interior: Vec::new(),
    };
    let mut all_to_interior = vec![NONE; dom.nodes.len()];
    let mut interior = Vec::new();
    for a in 0..dom.nodes.len() {
        let full = (0..3).all(|axis| {
            dom.neighbor(a, axis, 1).is_some() && dom.neighbor(a, axis, -1).is_some()
        });
        if full {
            all_to_interior[a] = interior.len() as u32;
            interior.push(a as u32);
        }
    }
    dom.interior = interior;
    dom.all_to_interior = all_to_interior;
    Ok(dom)
}

impl VoxelDomain {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn bbox(&self) -> Aabb {
        self.bbox
    }

    /// `|A|`.
    pub fn num_all(&self) -> usize {
        self.nodes.len()
    }

    /// `|I|`.
    pub fn num_interior(&self) -> usize {
        self.interior.len()
    }

    /// `|B| = |A| - |I|`.
    pub fn num_boundary(&self) -> usize {
        self.nodes.len() - self.interior.len()
    }

    pub fn grid_index(&self, a: usize) -> [u32; 3] {
        self.nodes[a]
    }

    pub fn coords(&self, a: usize) -> [f64; 3] {
        let g = self.nodes[a];
        [0, 1, 2].map(|d| snap(self.origin[d] + g[d] as f64 * self.h))
    }

    /// Row in `A` of the grid node at the given index, if that node is in `A`.
    pub fn lookup(&self, g: [i64; 3]) -> Option<usize> {
        for d in 0..3 {
            if g[d] < 0 || g[d] >= self.dims[d] as i64 {
                return None;
            }
        }
        let lin = (g[0] as usize * self.dims[1] + g[1] as usize) * self.dims[2] + g[2] as usize;
        match self.grid_to_all[lin] {
            NONE => None,
            a => Some(a as usize),
        }
    }

    /// Row in `A` of the neighbour of node `a` one step along `axis` in direction `dir` (±1).
    pub fn neighbor(&self, a: usize, axis: usize, dir: i64) -> Option<usize> {
        self.neighbor_at(a, axis, dir)
    }

    /// Row in `A` of the node `offset` grid steps from `a` along `axis`.
    pub fn neighbor_at(&self, a: usize, axis: usize, offset: i64) -> Option<usize> {
        let g = self.nodes[a];
        let mut t = [g[0] as i64, g[1] as i64, g[2] as i64];
        t[axis] += offset;
        self.lookup(t)
    }

    /// Row in `I` of node `a`, or `None` on the boundary layer.
    pub fn interior_index(&self, a: usize) -> Option<usize> {
        match self.all_to_interior[a] {
            NONE => None,
            r => Some(r as usize),
        }
    }

    pub fn is_interior(&self, a: usize) -> bool {
        self.all_to_interior[a] != NONE
    }

    /// Row in `A` of interior node `i`.
    pub fn interior_node(&self, i: usize) -> usize {
        self.interior[i] as usize
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.interior.iter().map(|&a| a as usize)
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&a| !self.is_interior(a))
    }

    /// Whether every node within `radius` grid steps of `a` along each axis is in `A`.
    pub fn axis_neighborhood_in_all(&self, a: usize, radius: i64) -> bool {
        (0..3).all(|axis| (1..=radius).all(|r| {
            self.neighbor_at(a, axis, r).is_some() && self.neighbor_at(a, axis, -r).is_some()
        }))
    }

    /// Node coordinates as CSV with an `I`/`B` flag column.
    pub fn nodes_csv(&self) -> String {
        let mut out = String::from("x,y,z,flag\n");
        for a in 0..self.num_all() {
            let p = self.coords(a);
            let flag = if self.is_interior(a) { "I" } else { "B" };
            let _ = writeln!(out, "{},{},{},{}", p[0], p[1], p[2], flag);
        }
        out
    }
}

/// Midpoint-rule approximation `h³ Σ (x₁² + x₂²)^k` of the weighted measure of
/// `Ω_n = {x ∈ Ω : |x| ≤ n}` on the origin-centred lattice `hℤ³`.
pub fn truncated_measure(spec: &DomainSpec, k: u32, n: f64, h: f64) -> f64 {
    let steps = (n / h + 1e-9).floor() as i64;
    let n2 = n * n;
    let mut total = 0.0;
    for i in -steps..=steps {
        let x = snap(i as f64 * h);
        for j in -steps..=steps {
            let y = snap(j as f64 * h);
            let r12 = x * x + y * y;
            if r12 > n2 {
                continue;
            }
            let w = r12.powi(k as i32);
            for l in -steps..=steps {
                let z = snap(l as f64 * h);
                if r12 + z * z <= n2 && spec.contains(&[x, y, z]) {
                    total += w;
                }
            }
        }
    }
    total * h * h * h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> Aabb {
        Aabb::new([0.0; 3], [1.0; 3])
    }

    /// Enumerates the lattice by hand: nodes `i/n` for `i = 1..n-1` are
    /// strictly inside; interior ones have every index in `2..=n-2`.
    fn cube_counts_oracle(n: usize) -> (usize, usize) {
        let inside = n - 1;
        let interior = n.saturating_sub(3);
        (inside.pow(3), interior.pow(3))
    }

    #[test]
    fn unit_cube_quarter_spacing() {
        let d = voxelize(&DomainSpec::unit_cube(), 0.25, &unit_box()).unwrap();
        assert_eq!((d.num_all(), d.num_interior(), d.num_boundary()), (27, 1, 26));
        assert_eq!(d.coords(d.interior_node(0)), [0.5, 0.5, 0.5]);
    }

    #[test]
    fn unit_cube_half_spacing_has_no_interior() {
        let d = voxelize(&DomainSpec::unit_cube(), 0.5, &unit_box()).unwrap();
        assert_eq!((d.num_all(), d.num_interior()), (1, 0));
    }

    #[test]
    fn cube_counts_match_enumeration() {
        for n in [4usize, 6, 8, 12, 24] {
            let d = voxelize(&DomainSpec::unit_cube(), 1.0 / n as f64, &unit_box()).unwrap();
            assert_eq!((d.num_all(), d.num_interior()), cube_counts_oracle(n), "n = {n}");
        }
    }

    #[test]
    fn unit_ball_half_spacing() {
        let d = voxelize(&DomainSpec::ball([0.0; 3], 1.0), 0.5, &Aabb::centered(1.0)).unwrap();
        // Nodes at {−½, 0, ½}³; the corners have |x|² = ¾ < 1.
        assert_eq!((d.num_all(), d.num_interior()), (27, 1));
        assert_eq!(d.coords(d.interior_node(0)), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_domain_is_rejected() {
        let tiny = DomainSpec::ball([0.3, 0.3, 0.3], 0.01);
        assert!(matches!(voxelize(&tiny, 0.25, &unit_box()), Err(Error::EmptyDomain)));
    }

    #[test]
    fn invalid_inputs() {
        assert!(voxelize(&DomainSpec::unit_cube(), 0.0, &unit_box()).is_err());
        assert!(voxelize(&DomainSpec::unit_cube(), 0.1, &Aabb::new([0.0; 3], [0.0, 1.0, 1.0])).is_err());
    }

    #[test]
    fn complement_excludes_closed_ball() {
        let ext = DomainSpec::exterior_of_ball([0.0; 3], 1.0);
        assert!(!ext.contains(&[1.0, 0.0, 0.0]));
        assert!(ext.contains(&[1.0 + 1e-9, 0.0, 0.0]));
        assert!(ext.bounding_box().is_none());
    }

    #[test]
    fn csg_membership() {
        let u = DomainSpec::Union {
            parts: vec![DomainSpec::unit_cube(), DomainSpec::ball([2.0, 0.5, 0.5], 0.5)],
        };
        assert!(u.contains(&[0.5, 0.5, 0.5]));
        assert!(u.contains(&[2.2, 0.5, 0.5]));
        assert!(!u.contains(&[1.0, 0.5, 0.5]));
        let b = u.bounding_box().unwrap();
        assert_eq!(b.max[0], 2.5);
        let slab = DomainSpec::slab(0.0, 1.0);
        assert!(slab.contains(&[100.0, -50.0, 0.5]));
        assert!(!slab.contains(&[0.0, 0.0, 1.0]));
    }

    #[test]
    fn refinement_never_decreases_counts() {
        let spec = DomainSpec::unit_cube();
        let mut prev = (0, 0, 0);
        for n in [4usize, 8, 16] {
            let d = voxelize(&spec, 1.0 / n as f64, &unit_box()).unwrap();
            let cur = (d.num_all(), d.num_interior(), d.num_boundary());
            assert!(cur.0 >= prev.0 && cur.1 >= prev.1 && cur.2 >= prev.2);
            prev = cur;
        }
    }

    #[test]
    fn ordering_is_deterministic() {
        let spec = DomainSpec::ball([0.1, 0.0, -0.2], 0.9);
        let a = voxelize(&spec, 0.1, &Aabb::centered(1.2)).unwrap();
        let b = voxelize(&spec, 0.1, &Aabb::centered(1.2)).unwrap();
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.interior, b.interior);
    }

    #[test]
    fn interior_nodes_have_all_neighbours() {
        let d = voxelize(&DomainSpec::ball([0.0; 3], 1.0), 0.2, &Aabb::centered(1.0)).unwrap();
        for a in d.interior_nodes() {
            assert!(d.axis_neighborhood_in_all(a, 1));
        }
        assert!(d.num_boundary() > 0);
    }

    #[test]
    fn measure_of_unit_ball_from_whole_space() {
        let exact = 4.0 * std::f64::consts::PI / 3.0;
        let coarse = truncated_measure(&DomainSpec::Whole, 0, 1.0, 0.1);
        let fine = truncated_measure(&DomainSpec::Whole, 0, 1.0, 0.025);
        assert!((coarse - exact).abs() / exact < 0.05);
        assert!((fine - exact).abs() < (coarse - exact).abs() + 1e-12);
        assert!((fine - exact).abs() / exact < 0.01);
    }

    #[test]
    fn measure_of_bounded_set_stabilizes() {
        let cube = DomainSpec::unit_cube();
        let a = truncated_measure(&cube, 0, 2.0, 0.125);
        let b = truncated_measure(&cube, 0, 5.0, 0.125);
        assert_eq!(a, b);
        assert!((a - 0.669921875).abs() < 1e-12); // 7³ nodes · h³
    }

    #[test]
    fn weighted_measure_is_monotone() {
        let ext = DomainSpec::exterior_of_ball([0.0; 3], 1.0);
        let m2 = truncated_measure(&ext, 1, 2.0, 0.25);
        let m4 = truncated_measure(&ext, 1, 4.0, 0.25);
        assert!(m4 > m2 && m2 > 0.0);
    }

    #[test]
    fn node_csv_has_flag_column() {
        let d = voxelize(&DomainSpec::unit_cube(), 0.25, &unit_box()).unwrap();
        let csv = d.nodes_csv();
        assert_eq!(csv.lines().count(), 28);
        assert!(csv.contains("0.5,0.5,0.5,I"));
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = DomainSpec::Intersection {
            parts: vec![DomainSpec::unit_cube(), DomainSpec::exterior_of_ball([0.5; 3], 0.2)],
        };
        #[derive(Serialize, Deserialize)]
        struct Wrap {
            domain: DomainSpec,
        }
        let text = toml::to_string(&Wrap { domain: spec.clone() }).unwrap();
        let back: Wrap = toml::from_str(&text).unwrap();
        assert_eq!(back.domain, spec);
    }
}
