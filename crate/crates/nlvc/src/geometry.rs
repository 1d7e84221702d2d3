//! Particle discretizations of a box domain: uniform cell-center grids,
//! interaction-domain classification, and exact horizon neighbor search.

use crate::error::{NlvcError, Result};
use crate::linalg::Point3;
use std::collections::HashMap;
use std::io::{BufReader, BufWriter};
use std::path::Path;

/// Relative slack applied to squared-distance comparisons against the
/// horizon. Neighbor search and kernel support share this exact predicate so
/// that pairs sitting on the horizon shell are never half-included.
pub const BALL_EPS: f64 = 1e-12;

/// Closed-ball membership `|y - x| <= delta`, with an epsilon guard that
/// absorbs roundoff in the squared-distance computation at the shell.
pub fn in_closed_ball(x: Point3, y: Point3, delta: f64) -> bool {
    (y - x).norm_sq() <= delta * delta * (1.0 + BALL_EPS)
}

/// Node classification: interior of the domain, or the Dirichlet/Neumann
/// parts of the interaction layer outside it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    InteriorOmega,
    GammaD,
    GammaN,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::InteriorOmega => "omega",
            Region::GammaD => "gamma_d",
            Region::GammaN => "gamma_n",
        }
    }

    pub fn parse(s: &str) -> Result<Region> {
        match s {
            "omega" => Ok(Region::InteriorOmega),
            "gamma_d" => Ok(Region::GammaD),
            "gamma_n" => Ok(Region::GammaN),
            other => Err(NlvcError::InvalidInput(format!(
                "unknown region label {other:?} (expected omega, gamma_d, or gamma_n)"
            ))),
        }
    }

    pub fn is_gamma(self) -> bool {
        matches!(self, Region::GammaD | Region::GammaN)
    }
}

/// Grid dimensionality: a true 3-D box, or a 2-D box embedded in the
/// x3 = 0 plane (planar quadrature weights are areas).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridMode {
    Full3D,
    PlaneEmbedded,
}

/// Axis-aligned box. In `PlaneEmbedded` mode the x3 extent must be empty
/// (lo.x3 == hi.x3 == 0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxBounds {
    pub lo: Point3,
    pub hi: Point3,
}

impl BoxBounds {
    pub fn new(lo: Point3, hi: Point3) -> BoxBounds {
        BoxBounds { lo, hi }
    }

    pub fn unit_cube() -> BoxBounds {
        BoxBounds::new(Point3::ZERO, Point3::new(1.0, 1.0, 1.0))
    }

    pub fn unit_square() -> BoxBounds {
        BoxBounds::new(Point3::ZERO, Point3::new(1.0, 1.0, 0.0))
    }
}

/// Rule for partitioning the interaction layer into Dirichlet and Neumann
/// parts. The default leaves everything Dirichlet.
#[derive(Clone, Copy, Debug)]
pub enum GammaSplit {
    AllDirichlet,
    /// Nodes satisfying the predicate are labeled `GammaN`, the rest
    /// `GammaD` (e.g. "left face Neumann" selects the slab beyond one face).
    NeumannWhere(fn(Point3) -> bool),
}

/// Immutable particle set: positions, quadrature volumes, region labels.
#[derive(Clone, Debug)]
pub struct NodeSet {
    pub positions: Vec<Point3>,
    pub volumes: Vec<f64>,
    pub region: Vec<Region>,
    pub mode: GridMode,
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn is_omega(&self, i: usize) -> bool {
        self.region[i] == Region::InteriorOmega
    }

    pub fn omega_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_omega(i)).collect()
    }

    pub fn gamma_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.region[i].is_gamma()).collect()
    }

    pub fn omega_count(&self) -> usize {
        self.region.iter().filter(|r| **r == Region::InteriorOmega).count()
    }

    pub fn gamma_count(&self) -> usize {
        self.len() - self.omega_count()
    }

    fn validate(&self) -> Result<()> {
        if self.volumes.len() != self.len() || self.region.len() != self.len() {
            return Err(NlvcError::InvalidInput(
                "node table columns have mismatched lengths".into(),
            ));
        }
        for (i, p) in self.positions.iter().enumerate() {
            if !p.is_finite() {
                return Err(NlvcError::InvalidInput(format!("non-finite position at node {i}")));
            }
            if self.mode == GridMode::PlaneEmbedded && p.x3 != 0.0 {
                return Err(NlvcError::InvalidInput(format!(
                    "plane-embedded node {i} has x3 = {} != 0",
                    p.x3
                )));
            }
        }
        for (i, v) in self.volumes.iter().enumerate() {
            if !(*v > 0.0) || !v.is_finite() {
                return Err(NlvcError::InvalidInput(format!(
                    "node {i} has non-positive volume {v}"
                )));
            }
        }
        Ok(())
    }
}

fn axis_cells(lo: f64, hi: f64, h: f64, axis: usize) -> Result<usize> {
    let len = hi - lo;
    if len <= 0.0 {
        return Err(NlvcError::InvalidInput(format!(
            "empty box: axis {} has extent [{lo}, {hi}]",
            axis + 1
        )));
    }
    let n = (len / h).round();
    if n < 1.0 || ((n * h - len) / len).abs() > 1e-9 {
        return Err(NlvcError::InvalidInput(format!(
            "spacing {h} does not tile axis {} of extent {len}",
            axis + 1
        )));
    }
    Ok(n as usize)
}

/// Build a uniform cell-center grid covering `bounds` enlarged by `margin`
/// on every (active) side, so that interaction-layer candidates exist when
/// `margin` is set to the kernel horizon. Cells inside the original box are
/// labeled `InteriorOmega`; the enlargement cells are provisional `GammaD`
/// candidates for [`classify_interaction_domain`]. Volumes are h^3
/// (h^2 in plane-embedded mode).
pub fn build_grid(bounds: BoxBounds, h: f64, mode: GridMode, margin: f64) -> Result<NodeSet> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(NlvcError::InvalidInput(format!("grid spacing must be positive, got {h}")));
    }
    if margin < 0.0 || !margin.is_finite() {
        return Err(NlvcError::InvalidInput(format!("margin must be nonnegative, got {margin}")));
    }
    if mode == GridMode::PlaneEmbedded && (bounds.lo.x3 != 0.0 || bounds.hi.x3 != 0.0) {
        return Err(NlvcError::InvalidInput(
            "plane-embedded bounds must have zero x3 extent".into(),
        ));
    }

    let lo = [bounds.lo.x1, bounds.lo.x2, bounds.lo.x3];
    let hi = [bounds.hi.x1, bounds.hi.x2, bounds.hi.x3];
    let active = match mode {
        GridMode::Full3D => 3,
        GridMode::PlaneEmbedded => 2,
    };
    // Margin cells: enough cells to cover `margin` (the delta-reachable
    // exterior layer); classify drops any unreachable excess.
    let mcells = if margin == 0.0 { 0 } else { (margin / h - 1e-9).ceil().max(0.0) as i64 };

    let mut n = [1usize; 3];
    for a in 0..active {
        n[a] = axis_cells(lo[a], hi[a], h, a)?;
    }

    let volume = if mode == GridMode::PlaneEmbedded { h * h } else { h * h * h };
    let ranges: Vec<Vec<i64>> = (0..3)
        .map(|a| {
            if a < active {
                (-mcells..n[a] as i64 + mcells).collect()
            } else {
                vec![0]
            }
        })
        .collect();

    let count = ranges[0].len() * ranges[1].len() * ranges[2].len();
    let mut positions = Vec::with_capacity(count);
    let mut region = Vec::with_capacity(count);
    for &i1 in &ranges[0] {
        for &i2 in &ranges[1] {
            for &i3 in &ranges[2] {
                let idx = [i1, i2, i3];
                let mut c = [0.0f64; 3];
                for a in 0..3 {
                    c[a] = if a < active { lo[a] + (idx[a] as f64 + 0.5) * h } else { 0.0 };
                }
                positions.push(Point3::new(c[0], c[1], c[2]));
                // Integer index test keeps inside/outside exact at cell level.
                let inside = (0..active).all(|a| idx[a] >= 0 && idx[a] < n[a] as i64);
                region.push(if inside { Region::InteriorOmega } else { Region::GammaD });
            }
        }
    }

    let nodes = NodeSet {
        volumes: vec![volume; positions.len()],
        positions,
        region,
        mode,
    };
    nodes.validate()?;
    Ok(nodes)
}

/// Spatial hash with bucket size `delta` for exact ball queries.
struct Bins {
    cell: f64,
    origin: Point3,
    map: HashMap<(i64, i64, i64), Vec<u32>>,
}

impl Bins {
    fn build(points: &[Point3], cell: f64) -> Bins {
        // Inflate the bucket a hair past the search radius. With cell == radius
        // exactly, a pair at distance == radius can round to bin coordinates
        // 1 + 2·ulp apart, whose floors differ by 2 and escape the 3x3x3
        // visit. The margin dominates both floor rounding noise and the
        // closed-ball tolerance, so adjacent buckets always suffice.
        let cell = cell * (1.0 + 1e-9);
        let mut origin = Point3::ZERO;
        if let Some(p) = points.first() {
            origin = *p;
        }
        for p in points {
            origin.x1 = origin.x1.min(p.x1);
            origin.x2 = origin.x2.min(p.x2);
            origin.x3 = origin.x3.min(p.x3);
        }
        let mut map: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            map.entry(Self::key(origin, cell, *p)).or_default().push(i as u32);
        }
        Bins { cell, origin, map }
    }

    fn key(origin: Point3, cell: f64, p: Point3) -> (i64, i64, i64) {
        (
            ((p.x1 - origin.x1) / cell).floor() as i64,
            ((p.x2 - origin.x2) / cell).floor() as i64,
            ((p.x3 - origin.x3) / cell).floor() as i64,
        )
    }

    /// Visit every stored index in the 3x3x3 bucket neighborhood of `p`.
    fn visit_near(&self, p: Point3, mut f: impl FnMut(u32)) {
        let (k1, k2, k3) = Self::key(self.origin, self.cell, p);
        for d1 in -1..=1 {
            for d2 in -1..=1 {
                for d3 in -1..=1 {
                    if let Some(v) = self.map.get(&(k1 + d1, k2 + d2, k3 + d3)) {
                        for &j in v {
                            f(j);
                        }
                    }
                }
            }
        }
    }
}

/// Label each exterior candidate within horizon reach of some interior node
/// (`GammaD`/`GammaN` per the split rule) and drop unreachable candidates.
/// Interior nodes pass through unchanged; relative node order is preserved.
pub fn classify_interaction_domain(
    nodes: &NodeSet,
    delta: f64,
    split: GammaSplit,
) -> Result<NodeSet> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(NlvcError::InvalidInput(format!("horizon must be positive, got {delta}")));
    }
    let omega: Vec<u32> = nodes
        .region
        .iter()
        .enumerate()
        .filter(|(_, r)| **r == Region::InteriorOmega)
        .map(|(i, _)| i as u32)
        .collect();
    let omega_pos: Vec<Point3> = omega.iter().map(|&i| nodes.positions[i as usize]).collect();
    let bins = Bins::build(&omega_pos, delta);

    let mut positions = Vec::new();
    let mut volumes = Vec::new();
    let mut region = Vec::new();
    for i in 0..nodes.len() {
        let keep = if nodes.is_omega(i) {
            Some(Region::InteriorOmega)
        } else {
            let p = nodes.positions[i];
            let mut reachable = false;
            bins.visit_near(p, |j| {
                if !reachable && in_closed_ball(p, omega_pos[j as usize], delta) {
                    reachable = true;
                }
            });
            if reachable {
                Some(match split {
                    GammaSplit::AllDirichlet => Region::GammaD,
                    GammaSplit::NeumannWhere(pred) => {
                        if pred(p) {
                            Region::GammaN
                        } else {
                            Region::GammaD
                        }
                    }
                })
            } else {
                None
            }
        };
        if let Some(r) = keep {
            positions.push(nodes.positions[i]);
            volumes.push(nodes.volumes[i]);
            region.push(r);
        }
    }

    let out = NodeSet { positions, volumes, region, mode: nodes.mode };
    if out.gamma_count() == 0 {
        log::warn!("interaction domain is empty (horizon {delta} reaches no exterior node)");
    }
    out.validate()?;
    Ok(out)
}

/// Directed neighbor pairs within the closed horizon ball, no self-pairs,
/// per-node neighbor lists sorted ascending. The flat directed-pair index is
/// the CSR position; `reverse[t]` is the flat index of the transposed pair.
#[derive(Clone, Debug)]
pub struct PairStructure {
    pub offsets: Vec<usize>,
    pub neighbors: Vec<u32>,
    pub reverse: Vec<u32>,
    pub delta: f64,
}

impl PairStructure {
    pub fn n_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_pairs(&self) -> usize {
        self.neighbors.len()
    }

    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn neighbors_of(&self, i: usize) -> &[u32] {
        &self.neighbors[self.range(i)]
    }

    /// Flat index of the directed pair (i, j), if present.
    pub fn pair_index(&self, i: usize, j: usize) -> Option<usize> {
        let list = self.neighbors_of(i);
        list.binary_search(&(j as u32)).ok().map(|p| self.offsets[i] + p)
    }

    /// Iterate all directed pairs as (flat index, i, j).
    pub fn iter_pairs(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.n_nodes()).flat_map(move |i| {
            self.range(i).map(move |t| (t, i, self.neighbors[t] as usize))
        })
    }
}

/// Exact Euclidean closed-ball neighbor search over the node set.
pub fn neighbor_pairs(nodes: &NodeSet, delta: f64) -> Result<PairStructure> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(NlvcError::InvalidInput(format!("horizon must be positive, got {delta}")));
    }
    let n = nodes.len();
    let bins = Bins::build(&nodes.positions, delta);

    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0usize);
    let mut neighbors: Vec<u32> = Vec::new();
    let mut scratch: Vec<u32> = Vec::new();
    for i in 0..n {
        let p = nodes.positions[i];
        scratch.clear();
        let mut coincident = None;
        bins.visit_near(p, |j| {
            if j as usize != i && in_closed_ball(p, nodes.positions[j as usize], delta) {
                if (nodes.positions[j as usize] - p).norm_sq() == 0.0 {
                    coincident = Some(j as usize);
                }
                scratch.push(j);
            }
        });
        // Zero separations have no direction, so every kernel is singular
        // there; reject rather than emit NaN pairs.
        if let Some(j) = coincident {
            return Err(NlvcError::InvalidInput(format!(
                "nodes {i} and {j} are coincident"
            )));
        }
        scratch.sort_unstable();
        neighbors.extend_from_slice(&scratch);
        offsets.push(neighbors.len());
    }

    // Transpose map; symmetry of the closed-ball predicate guarantees the
    // reverse pair exists.
    let mut reverse = vec![0u32; neighbors.len()];
    for i in 0..n {
        for t in offsets[i]..offsets[i + 1] {
            let j = neighbors[t] as usize;
            let list = &neighbors[offsets[j]..offsets[j + 1]];
            let p = list
                .binary_search(&(i as u32))
                .map_err(|_| NlvcError::Numerical(format!("pair ({i},{j}) lacks its transpose")))?;
            reverse[t] = (offsets[j] + p) as u32;
        }
    }

    Ok(PairStructure { offsets, neighbors, reverse, delta })
}

const FLOAT_FMT: fn(f64) -> String = |v| format!("{v:.16e}");

/// Write the node table as CSV: `id,x1,x2,x3,volume,region`.
pub fn write_nodes(path: &Path, nodes: &NodeSet) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(["id", "x1", "x2", "x3", "volume", "region"])?;
    for i in 0..nodes.len() {
        let p = nodes.positions[i];
        w.write_record([
            i.to_string(),
            FLOAT_FMT(p.x1),
            FLOAT_FMT(p.x2),
            FLOAT_FMT(p.x3),
            FLOAT_FMT(nodes.volumes[i]),
            nodes.region[i].as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Read a node table written by [`write_nodes`]. Rows must be listed in id
/// order starting at 0. The mode is inferred: all-zero x3 with volumes
/// matching h^2 cannot be distinguished from a flat 3-D slab, so the caller
/// provides it.
pub fn read_nodes(path: &Path, mode: GridMode) -> Result<NodeSet> {
    let file = std::fs::File::open(path)?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let mut positions = Vec::new();
    let mut volumes = Vec::new();
    let mut region = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 6 {
            return Err(NlvcError::InvalidInput(format!(
                "node row {row}: expected 6 columns, got {}",
                rec.len()
            )));
        }
        let id: usize = rec[0]
            .parse()
            .map_err(|_| NlvcError::InvalidInput(format!("node row {row}: bad id {:?}", &rec[0])))?;
        if id != row {
            return Err(NlvcError::InvalidInput(format!(
                "node row {row}: ids must be consecutive from 0, got {id}"
            )));
        }
        let mut vals = [0.0f64; 4];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = rec[k + 1].parse().map_err(|_| {
                NlvcError::InvalidInput(format!("node row {row}: bad float {:?}", &rec[k + 1]))
            })?;
        }
        positions.push(Point3::new(vals[0], vals[1], vals[2]));
        volumes.push(vals[3]);
        region.push(Region::parse(&rec[5])?);
    }
    let nodes = NodeSet { positions, volumes, region, mode };
    nodes.validate()?;
    Ok(nodes)
}
