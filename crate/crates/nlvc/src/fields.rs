//! One-point and two-point field containers, lifts from one-point data to
//! pair data, the planar worked-example fields, and CSV field I/O.
//!
//! Two-point fields are stored only on the directed pairs of a
//! [`PairStructure`]; every operator multiplies entries by the kernel, which
//! vanishes off-support, so extension by zero outside the stored pairs is
//! implicit.

use crate::error::{NlvcError, Result};
use crate::geometry::{GridMode, NodeSet, PairStructure};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::linalg::{Mat3, Point3};
use std::io::{BufReader, BufWriter};
use std::path::Path;

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// One real value per node.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(n: usize) -> ScalarField {
        ScalarField { values: vec![0.0; n] }
    }

    pub fn from_fn(nodes: &NodeSet, f: impl Fn(Point3) -> f64) -> ScalarField {
        ScalarField { values: nodes.positions.iter().map(|&p| f(p)).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        self.validate_len(n_nodes)?;
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(NlvcError::InvalidInput(format!("non-finite scalar value at node {i}")));
        }
        Ok(())
    }

    /// Length check only; operator hot paths use this so that non-finite
    /// values surface in residual norms instead of aborting mid-solve.
    pub fn validate_len(&self, n_nodes: usize) -> Result<()> {
        if self.len() != n_nodes {
            return Err(NlvcError::InvalidInput(format!(
                "scalar field has {} entries for {n_nodes} nodes",
                self.len()
            )));
        }
        Ok(())
    }
}

/// One 3-vector per node. Plane-embedded problems keep the third component
/// zero (fields live in the plane but are stored as embedded 3-vectors).
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub values: Vec<Point3>,
}

impl VectorField {
    pub fn zeros(n: usize) -> VectorField {
        VectorField { values: vec![Point3::ZERO; n] }
    }

    pub fn from_fn(nodes: &NodeSet, f: impl Fn(Point3) -> Point3) -> VectorField {
        VectorField { values: nodes.positions.iter().map(|&p| f(p)).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Point3 {
        self.values[i]
    }

    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        self.validate_len(n_nodes)?;
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(NlvcError::InvalidInput(format!("non-finite vector value at node {i}")));
        }
        Ok(())
    }

    /// Length check only; see [`ScalarField::validate_len`].
    pub fn validate_len(&self, n_nodes: usize) -> Result<()> {
        if self.len() != n_nodes {
            return Err(NlvcError::InvalidInput(format!(
                "vector field has {} entries for {n_nodes} nodes",
                self.len()
            )));
        }
        Ok(())
    }
}

/// One-point field of either rank, as produced/consumed by the point
/// operators (divergences return scalars or vectors depending on rank).
#[derive(Clone, Debug, PartialEq)]
pub enum OnePointField {
    Scalar(ScalarField),
    Vector(VectorField),
}

impl OnePointField {
    pub fn len(&self) -> usize {
        match self {
            OnePointField::Scalar(f) => f.len(),
            OnePointField::Vector(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_scalar(&self) -> Result<&ScalarField> {
        match self {
            OnePointField::Scalar(f) => Ok(f),
            OnePointField::Vector(_) => {
                Err(NlvcError::InvalidInput("expected a scalar one-point field".into()))
            }
        }
    }

    pub fn as_vector(&self) -> Result<&VectorField> {
        match self {
            OnePointField::Vector(f) => Ok(f),
            OnePointField::Scalar(_) => {
                Err(NlvcError::InvalidInput("expected a vector one-point field".into()))
            }
        }
    }
}

/// Tensor rank of a two-point field entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rank {
    Scalar,
    Vector,
    Matrix,
}

/// One entry per directed pair of a [`PairStructure`], rank fixed at
/// construction. Matrix entries are row-major 3×3.
#[derive(Clone, Debug, PartialEq)]
pub enum TwoPointField {
    Scalar(Vec<f64>),
    Vector(Vec<Point3>),
    Matrix(Vec<Mat3>),
}

impl TwoPointField {
    pub fn zeros(rank: Rank, n_pairs: usize) -> TwoPointField {
        match rank {
            Rank::Scalar => TwoPointField::Scalar(vec![0.0; n_pairs]),
            Rank::Vector => TwoPointField::Vector(vec![Point3::ZERO; n_pairs]),
            Rank::Matrix => TwoPointField::Matrix(vec![Mat3::ZERO; n_pairs]),
        }
    }

    pub fn rank(&self) -> Rank {
        match self {
            TwoPointField::Scalar(_) => Rank::Scalar,
            TwoPointField::Vector(_) => Rank::Vector,
            TwoPointField::Matrix(_) => Rank::Matrix,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TwoPointField::Scalar(v) => v.len(),
            TwoPointField::Vector(v) => v.len(),
            TwoPointField::Matrix(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_scalar(&self) -> Result<&Vec<f64>> {
        match self {
            TwoPointField::Scalar(v) => Ok(v),
            _ => Err(NlvcError::InvalidInput("expected a scalar two-point field".into())),
        }
    }

    pub fn as_vector(&self) -> Result<&Vec<Point3>> {
        match self {
            TwoPointField::Vector(v) => Ok(v),
            _ => Err(NlvcError::InvalidInput("expected a vector two-point field".into())),
        }
    }

    pub fn as_matrix(&self) -> Result<&Vec<Mat3>> {
        match self {
            TwoPointField::Matrix(v) => Ok(v),
            _ => Err(NlvcError::InvalidInput("expected a matrix two-point field".into())),
        }
    }

    pub fn validate(&self, pairs: &PairStructure) -> Result<()> {
        self.validate_len(pairs)?;
        let finite = match self {
            TwoPointField::Scalar(v) => v.iter().all(|x| x.is_finite()),
            TwoPointField::Vector(v) => v.iter().all(|x| x.is_finite()),
            TwoPointField::Matrix(v) => v.iter().all(|x| x.is_finite()),
        };
        if !finite {
            return Err(NlvcError::InvalidInput("non-finite two-point field entry".into()));
        }
        Ok(())
    }

    /// Length check only; see [`ScalarField::validate_len`].
    pub fn validate_len(&self, pairs: &PairStructure) -> Result<()> {
        if self.len() != pairs.n_pairs() {
            return Err(NlvcError::InvalidInput(format!(
                "two-point field has {} entries for {} directed pairs",
                self.len(),
                pairs.n_pairs()
            )));
        }
        Ok(())
    }

    /// Entrywise scaling by a constant.
    pub fn scale(&self, s: f64) -> TwoPointField {
        match self {
            TwoPointField::Scalar(v) => {
                TwoPointField::Scalar(v.iter().map(|x| x * s).collect())
            }
            TwoPointField::Vector(v) => {
                TwoPointField::Vector(v.iter().map(|&x| x * s).collect())
            }
            TwoPointField::Matrix(v) => {
                TwoPointField::Matrix(v.iter().map(|&x| x * s).collect())
            }
        }
    }

    /// Entrywise sum; both operands must share rank and length.
    pub fn add(&self, other: &TwoPointField) -> Result<TwoPointField> {
        self.combine(other, "add", |a, b| a + b, |a, b| a + b, |a, b| a + b)
    }

    /// Entrywise difference; both operands must share rank and length.
    pub fn sub(&self, other: &TwoPointField) -> Result<TwoPointField> {
        self.combine(other, "subtract", |a, b| a - b, |a, b| a - b, |a, b| a - b)
    }

    fn combine(
        &self,
        other: &TwoPointField,
        verb: &str,
        fs: impl Fn(f64, f64) -> f64,
        fv: impl Fn(Point3, Point3) -> Point3,
        fm: impl Fn(Mat3, Mat3) -> Mat3,
    ) -> Result<TwoPointField> {
        if self.len() != other.len() {
            return Err(NlvcError::InvalidInput(format!(
                "cannot {verb} two-point fields of lengths {} and {}",
                self.len(),
                other.len()
            )));
        }
        match (self, other) {
            (TwoPointField::Scalar(a), TwoPointField::Scalar(b)) => Ok(TwoPointField::Scalar(
                a.iter().zip(b).map(|(&x, &y)| fs(x, y)).collect(),
            )),
            (TwoPointField::Vector(a), TwoPointField::Vector(b)) => Ok(TwoPointField::Vector(
                a.iter().zip(b).map(|(&x, &y)| fv(x, y)).collect(),
            )),
            (TwoPointField::Matrix(a), TwoPointField::Matrix(b)) => Ok(TwoPointField::Matrix(
                a.iter().zip(b).map(|(&x, &y)| fm(x, y)).collect(),
            )),
            _ => Err(NlvcError::InvalidInput(format!(
                "cannot {verb} two-point fields of different ranks"
            ))),
        }
    }

    /// Max-norm over all entry components.
    pub fn inf_norm(&self) -> f64 {
        match self {
            TwoPointField::Scalar(v) => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            TwoPointField::Vector(v) => v.iter().fold(0.0, |m, x| m.max(x.inf_norm())),
            TwoPointField::Matrix(v) => v.iter().fold(0.0, |m, x| m.max(x.inf_norm())),
        }
    }
}

/// Pair average u_ij = ½(v_i + v_j); symmetric under (i,j) swap.
pub fn lift_average(v: &VectorField, pairs: &PairStructure) -> TwoPointField {
    let mut out = Vec::with_capacity(pairs.n_pairs());
    for (_, i, j) in pairs.iter_pairs() {
        out.push((v.get(i) + v.get(j)) * 0.5);
    }
    TwoPointField::Vector(out)
}

/// Separation sample u_ij = f(x_i − x_j); antisymmetric when f is odd.
pub fn lift_difference(
    f: impl Fn(Point3) -> Point3,
    nodes: &NodeSet,
    pairs: &PairStructure,
) -> TwoPointField {
    let mut out = Vec::with_capacity(pairs.n_pairs());
    for (_, i, j) in pairs.iter_pairs() {
        out.push(f(nodes.positions[i] - nodes.positions[j]));
    }
    TwoPointField::Vector(out)
}

/// Weighted source sample u_ij = v_i ψ(x_i − x_j).
pub fn lift_weighted(
    v: &VectorField,
    psi: impl Fn(Point3) -> f64,
    nodes: &NodeSet,
    pairs: &PairStructure,
) -> TwoPointField {
    let mut out = Vec::with_capacity(pairs.n_pairs());
    for (_, i, j) in pairs.iter_pairs() {
        out.push(v.get(i) * psi(nodes.positions[i] - nodes.positions[j]));
    }
    TwoPointField::Vector(out)
}

/// The translation field h_ij = x_j − x_i, antisymmetric by construction;
/// both the divergence and the curl of this field vanish identically.
pub fn translation_residual_field(nodes: &NodeSet, pairs: &PairStructure) -> TwoPointField {
    let mut out = Vec::with_capacity(pairs.n_pairs());
    for (_, i, j) in pairs.iter_pairs() {
        out.push(nodes.positions[j] - nodes.positions[i]);
    }
    TwoPointField::Vector(out)
}

/// Planar worked-example data: φ = x₁², w = (0, x₂², 0), and the two-point
/// field u assembled from the closed-form expression
/// u(x,y) = δ^(−3/2)|y−x|^(−1) (−(x₁²−y₁²)(x₁−y₁), −(x₁²−y₁²)(x₂−y₂),
/// (y₁−x₁)(y₂²−x₂²)), which coincides with Gφ + C*w on every stored pair.
pub fn example32_fields(
    nodes: &NodeSet,
    pairs: &PairStructure,
    spec: &KernelSpec,
) -> Result<(ScalarField, VectorField, TwoPointField)> {
    if nodes.mode != GridMode::PlaneEmbedded {
        return Err(NlvcError::InvalidInput(
            "worked planar example requires a plane-embedded grid".into(),
        ));
    }
    if spec.family != KernelFamily::PlanarScaled {
        return Err(NlvcError::InvalidInput(format!(
            "worked planar example requires the planar_scaled kernel, got {}",
            spec.family.as_str()
        )));
    }
    let phi = ScalarField::from_fn(nodes, |p| p.x1 * p.x1);
    let w = VectorField::from_fn(nodes, |p| Point3::new(0.0, p.x2 * p.x2, 0.0));
    let scale = spec.delta.powf(-1.5);
    let mut u = Vec::with_capacity(pairs.n_pairs());
    for (_, i, j) in pairs.iter_pairs() {
        let x = nodes.positions[i];
        let y = nodes.positions[j];
        let d = y - x;
        let q = scale / d.norm();
        let dsq1 = x.x1 * x.x1 - y.x1 * y.x1;
        u.push(Point3::new(
            -q * dsq1 * (x.x1 - y.x1),
            -q * dsq1 * (x.x2 - y.x2),
            q * (y.x1 - x.x1) * (y.x2 * y.x2 - x.x2 * x.x2),
        ));
    }
    Ok((phi, w, TwoPointField::Vector(u)))
}

/// Zero out every entry on a pair with at least one endpoint in the
/// interaction layer, leaving interior-interior pairs untouched. This is the
/// zero-extension of interior pair data.
pub fn mask_omega_pairs(
    field: &TwoPointField,
    nodes: &NodeSet,
    pairs: &PairStructure,
) -> TwoPointField {
    let keep = |i: usize, j: usize| nodes.is_omega(i) && nodes.is_omega(j);
    match field {
        TwoPointField::Scalar(v) => {
            let mut out = v.clone();
            for (t, i, j) in pairs.iter_pairs() {
                if !keep(i, j) {
                    out[t] = 0.0;
                }
            }
            TwoPointField::Scalar(out)
        }
        TwoPointField::Vector(v) => {
            let mut out = v.clone();
            for (t, i, j) in pairs.iter_pairs() {
                if !keep(i, j) {
                    out[t] = Point3::ZERO;
                }
            }
            TwoPointField::Vector(out)
        }
        TwoPointField::Matrix(v) => {
            let mut out = v.clone();
            for (t, i, j) in pairs.iter_pairs() {
                if !keep(i, j) {
                    out[t] = Mat3::ZERO;
                }
            }
            TwoPointField::Matrix(out)
        }
    }
}

/// Write a one-point field as CSV `id,c1[,c2,c3]`.
pub fn write_one_point(path: &Path, field: &OnePointField) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    match field {
        OnePointField::Scalar(f) => {
            w.write_record(["id", "c1"])?;
            for (i, v) in f.values.iter().enumerate() {
                w.write_record([i.to_string(), fmt(*v)])?;
            }
        }
        OnePointField::Vector(f) => {
            w.write_record(["id", "c1", "c2", "c3"])?;
            for (i, v) in f.values.iter().enumerate() {
                w.write_record([i.to_string(), fmt(v.x1), fmt(v.x2), fmt(v.x3)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_floats(rec: &csv::StringRecord, from: usize, row: usize) -> Result<Vec<f64>> {
    rec.iter()
        .skip(from)
        .map(|s| {
            s.parse::<f64>().map_err(|_| {
                NlvcError::InvalidInput(format!("field row {row}: bad float {s:?}"))
            })
        })
        .collect()
}

fn check_id(rec: &csv::StringRecord, row: usize) -> Result<()> {
    let id: usize = rec[0]
        .parse()
        .map_err(|_| NlvcError::InvalidInput(format!("field row {row}: bad id {:?}", &rec[0])))?;
    if id != row {
        return Err(NlvcError::InvalidInput(format!(
            "field row {row}: ids must be consecutive from 0, got {id}"
        )));
    }
    Ok(())
}

/// Read a one-point field (`id,c1` scalar or `id,c1,c2,c3` vector); the
/// rank is inferred from the column count.
pub fn read_one_point(path: &Path, n_nodes: usize) -> Result<OnePointField> {
    let file = std::fs::File::open(path)?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let width = r.headers()?.len();
    let mut scalars = Vec::new();
    let mut vectors = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(NlvcError::InvalidInput(format!(
                "field row {row}: expected {width} columns, got {}",
                rec.len()
            )));
        }
        check_id(&rec, row)?;
        let vals = parse_floats(&rec, 1, row)?;
        match width {
            2 => scalars.push(vals[0]),
            4 => vectors.push(Point3::new(vals[0], vals[1], vals[2])),
            _ => {
                return Err(NlvcError::InvalidInput(format!(
                    "one-point field files have 2 or 4 columns, got {width}"
                )))
            }
        }
    }
    let field = if width == 2 {
        let f = ScalarField { values: scalars };
        f.validate(n_nodes)?;
        OnePointField::Scalar(f)
    } else {
        let f = VectorField { values: vectors };
        f.validate(n_nodes)?;
        OnePointField::Vector(f)
    };
    Ok(field)
}

/// Write a two-point field as CSV `i,j,c1[,...]` in directed-pair order
/// (rows sorted by i, then by j).
pub fn write_two_point(path: &Path, field: &TwoPointField, pairs: &PairStructure) -> Result<()> {
    field.validate(pairs)?;
    let file = std::fs::File::create(path)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let comps = match field.rank() {
        Rank::Scalar => 1,
        Rank::Vector => 3,
        Rank::Matrix => 9,
    };
    let mut header = vec!["i".to_string(), "j".to_string()];
    header.extend((1..=comps).map(|c| format!("c{c}")));
    w.write_record(&header)?;
    for (t, i, j) in pairs.iter_pairs() {
        let mut rec = vec![i.to_string(), j.to_string()];
        match field {
            TwoPointField::Scalar(v) => rec.push(fmt(v[t])),
            TwoPointField::Vector(v) => {
                rec.extend([fmt(v[t].x1), fmt(v[t].x2), fmt(v[t].x3)]);
            }
            TwoPointField::Matrix(v) => rec.extend(v[t].0.iter().map(|x| fmt(*x))),
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a two-point field written by [`write_two_point`]. Every directed
/// pair of the structure must appear exactly once, in pair order; the rank
/// is inferred from the column count (3, 5, or 11).
pub fn read_two_point(path: &Path, pairs: &PairStructure) -> Result<TwoPointField> {
    let file = std::fs::File::open(path)?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let width = r.headers()?.len();
    let rank = match width {
        3 => Rank::Scalar,
        5 => Rank::Vector,
        11 => Rank::Matrix,
        _ => {
            return Err(NlvcError::InvalidInput(format!(
                "two-point field files have 3, 5, or 11 columns, got {width}"
            )))
        }
    };
    let mut field = TwoPointField::zeros(rank, pairs.n_pairs());
    let mut expect = pairs.iter_pairs();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(NlvcError::InvalidInput(format!(
                "field row {row}: expected {width} columns, got {}",
                rec.len()
            )));
        }
        let (t, i, j) = expect.next().ok_or_else(|| {
            NlvcError::InvalidInput(format!(
                "field row {row}: more rows than directed pairs ({})",
                pairs.n_pairs()
            ))
        })?;
        let ri: usize = rec[0].parse().map_err(|_| {
            NlvcError::InvalidInput(format!("field row {row}: bad index {:?}", &rec[0]))
        })?;
        let rj: usize = rec[1].parse().map_err(|_| {
            NlvcError::InvalidInput(format!("field row {row}: bad index {:?}", &rec[1]))
        })?;
        if (ri, rj) != (i, j) {
            return Err(NlvcError::InvalidInput(format!(
                "field row {row}: pair ({ri},{rj}) does not match structure pair ({i},{j}); \
                 rows must cover all directed pairs in order"
            )));
        }
        let vals = parse_floats(&rec, 2, row)?;
        match &mut field {
            TwoPointField::Scalar(v) => v[t] = vals[0],
            TwoPointField::Vector(v) => v[t] = Point3::new(vals[0], vals[1], vals[2]),
            TwoPointField::Matrix(v) => v[t] = Mat3(vals.try_into().expect("9 components")),
        }
    }
    if expect.next().is_some() {
        return Err(NlvcError::InvalidInput(format!(
            "two-point field file ended early: fewer rows than directed pairs ({})",
            pairs.n_pairs()
        )));
    }
    field.validate(pairs)?;
    Ok(field)
}
