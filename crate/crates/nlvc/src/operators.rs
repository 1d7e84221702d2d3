//! Point divergences, adjoints, gradient, curl pair, Laplacian, curl-curl,
//! and the interaction operators, all as quadrature sums over the directed
//! pair structure. Matrix-free application is the source of truth; sparse
//! assembly exists only for the two constrained solves.
//!
//! Conventions: interior operators produce values at interior nodes (zero
//! entries elsewhere); interaction operators produce values at layer nodes.
//! Discrete inner products are volume-weighted: ⟨f,g⟩ = Σ f_i g_i V_i over
//! the stated node set and ⟨ψ,φ⟩ = Σ ψ_ij φ_ij V_i V_j over directed pairs.
//! Per-row summation order is fixed (ascending neighbor id), so serial and
//! row-parallel evaluation are bit-identical.

use crate::error::{NlvcError, Result};
use crate::fields::{OnePointField, ScalarField, TwoPointField, VectorField};
use crate::geometry::{NodeSet, PairStructure};
use crate::kernels::KernelSpec;
use crate::linalg::{CsrMatrix, Mat3, Point3};
use rayon::prelude::*;

/// Kernel, node set, and pair structure bound together; every operator
/// application goes through one of its methods. Kernel values are computed
/// on the fly from node positions (never tabulated), so memory stays at
/// one copy of the pair structure.
#[derive(Debug)]
pub struct OperatorContext<'a> {
    pub nodes: &'a NodeSet,
    pub pairs: &'a PairStructure,
    pub kernel: KernelSpec,
}

/// Which rows of the output a point operator fills.
#[derive(Clone, Copy, PartialEq, Eq)]
enum RowSet {
    Omega,
    All,
    Gamma,
}

impl<'a> OperatorContext<'a> {
    pub fn new(
        nodes: &'a NodeSet,
        pairs: &'a PairStructure,
        kernel: KernelSpec,
    ) -> Result<OperatorContext<'a>> {
        kernel.validate(nodes.mode)?;
        if pairs.n_nodes() != nodes.len() {
            return Err(NlvcError::InvalidInput(format!(
                "pair structure covers {} nodes, node set has {}",
                pairs.n_nodes(),
                nodes.len()
            )));
        }
        if pairs.delta != kernel.delta {
            return Err(NlvcError::InvalidInput(format!(
                "pair structure horizon {} differs from kernel horizon {}",
                pairs.delta, kernel.delta
            )));
        }
        Ok(OperatorContext { nodes, pairs, kernel })
    }

    #[inline]
    pub fn alpha(&self, i: usize, j: usize) -> Point3 {
        self.kernel
            .alpha_of_separation(self.nodes.positions[j] - self.nodes.positions[i])
    }

    #[inline]
    fn active(&self, rows: RowSet, i: usize) -> bool {
        match rows {
            RowSet::Omega => self.nodes.is_omega(i),
            RowSet::All => true,
            RowSet::Gamma => !self.nodes.is_omega(i),
        }
    }

    /// Row-parallel scalar accumulation: out_i = Σ_j term(i, t) V_j for the
    /// selected rows, summed in ascending-j order.
    fn reduce_scalar(
        &self,
        rows: RowSet,
        term: impl Fn(usize, usize, usize) -> f64 + Sync,
    ) -> ScalarField {
        let values = (0..self.nodes.len())
            .into_par_iter()
            .map(|i| {
                if !self.active(rows, i) {
                    return 0.0;
                }
                let mut acc = 0.0;
                for t in self.pairs.range(i) {
                    let j = self.pairs.neighbors[t] as usize;
                    acc += term(i, t, j) * self.nodes.volumes[j];
                }
                acc
            })
            .collect();
        ScalarField { values }
    }

    /// Row-parallel vector accumulation, same structure as [`reduce_scalar`].
    fn reduce_vector(
        &self,
        rows: RowSet,
        term: impl Fn(usize, usize, usize) -> Point3 + Sync,
    ) -> VectorField {
        let values = (0..self.nodes.len())
            .into_par_iter()
            .map(|i| {
                if !self.active(rows, i) {
                    return Point3::ZERO;
                }
                let mut acc = Point3::ZERO;
                for t in self.pairs.range(i) {
                    let j = self.pairs.neighbors[t] as usize;
                    acc += term(i, t, j) * self.nodes.volumes[j];
                }
                acc
            })
            .collect();
        VectorField { values }
    }

    /// Point divergence of a two-point field:
    /// (Dψ)_i = Σ_j (ψ_ij + ψ_ji) ⊙ α_ij V_j at interior nodes, where ⊙ is
    /// scalar·vector for rank 0, dot for rank 1, and matrix·vector for
    /// rank 2; the output is a vector field for ranks 0 and 2 and a scalar
    /// field for rank 1.
    pub fn apply_div(&self, rank: u8, psi: &TwoPointField) -> Result<OnePointField> {
        psi.validate_len(self.pairs)?;
        let rev = &self.pairs.reverse;
        match (rank, psi) {
            (0, TwoPointField::Scalar(v)) => {
                let out = self.reduce_vector(RowSet::Omega, |i, t, j| {
                    self.alpha(i, j) * (v[t] + v[rev[t] as usize])
                });
                Ok(OnePointField::Vector(out))
            }
            (1, TwoPointField::Vector(v)) => {
                let out = self.reduce_scalar(RowSet::Omega, |i, t, j| {
                    (v[t] + v[rev[t] as usize]).dot(self.alpha(i, j))
                });
                Ok(OnePointField::Scalar(out))
            }
            (2, TwoPointField::Matrix(v)) => {
                let out = self.reduce_vector(RowSet::Omega, |i, t, j| {
                    (v[t] + v[rev[t] as usize]).matvec(self.alpha(i, j))
                });
                Ok(OnePointField::Vector(out))
            }
            _ => Err(NlvcError::InvalidInput(format!(
                "divergence rank {rank} does not accept a {:?}-rank field",
                psi.rank()
            ))),
        }
    }

    /// Adjoint difference operators, one per rank:
    /// rank 0: (v_j − v_i)·α_ij (scalar pairs from a vector field);
    /// rank 1: (v_j − v_i) α_ij (vector pairs from a scalar field);
    /// rank 2: (v_j − v_i) ⊗ α_ij (matrix pairs from a vector field).
    /// The gradient is the negative of rank 1; see [`Self::apply_grad`].
    pub fn apply_adjoint(&self, rank: u8, v: &OnePointField) -> Result<TwoPointField> {
        match (rank, v) {
            (0, OnePointField::Vector(f)) => {
                f.validate_len(self.nodes.len())?;
                let mut out = Vec::with_capacity(self.pairs.n_pairs());
                for (_, i, j) in self.pairs.iter_pairs() {
                    out.push((f.get(j) - f.get(i)).dot(self.alpha(i, j)));
                }
                Ok(TwoPointField::Scalar(out))
            }
            (1, OnePointField::Scalar(f)) => {
                f.validate_len(self.nodes.len())?;
                let mut out = Vec::with_capacity(self.pairs.n_pairs());
                for (_, i, j) in self.pairs.iter_pairs() {
                    out.push(self.alpha(i, j) * (f.get(j) - f.get(i)));
                }
                Ok(TwoPointField::Vector(out))
            }
            (2, OnePointField::Vector(f)) => {
                f.validate_len(self.nodes.len())?;
                let mut out = Vec::with_capacity(self.pairs.n_pairs());
                for (_, i, j) in self.pairs.iter_pairs() {
                    out.push((f.get(j) - f.get(i)).outer(self.alpha(i, j)));
                }
                Ok(TwoPointField::Matrix(out))
            }
            _ => Err(NlvcError::InvalidInput(format!(
                "adjoint rank {rank} does not accept this one-point field rank"
            ))),
        }
    }

    /// Nonlocal gradient (Gφ)_ij = (φ_i − φ_j) α_ij, the negative rank-1
    /// adjoint; pair-symmetric.
    pub fn apply_grad(&self, phi: &ScalarField) -> Result<TwoPointField> {
        phi.validate_len(self.nodes.len())?;
        let mut out = Vec::with_capacity(self.pairs.n_pairs());
        for (_, i, j) in self.pairs.iter_pairs() {
            out.push(self.alpha(i, j) * (phi.get(i) - phi.get(j)));
        }
        Ok(TwoPointField::Vector(out))
    }

    /// Point curl (Cu)_i = Σ_j α_ij × (u_ij + u_ji) V_j at interior nodes.
    pub fn apply_curl(&self, u: &TwoPointField) -> Result<VectorField> {
        self.curl_rows(u, RowSet::Omega)
    }

    /// [`Self::apply_curl`] evaluated at every node; the layer rows supply
    /// the right-hand side of the whole-domain stream solve.
    pub fn apply_curl_all(&self, u: &TwoPointField) -> Result<VectorField> {
        self.curl_rows(u, RowSet::All)
    }

    fn curl_rows(&self, u: &TwoPointField, rows: RowSet) -> Result<VectorField> {
        u.validate_len(self.pairs)?;
        let v = u.as_vector()?;
        let rev = &self.pairs.reverse;
        Ok(self.reduce_vector(rows, |i, t, j| {
            self.alpha(i, j).cross(v[t] + v[rev[t] as usize])
        }))
    }

    /// Curl adjoint (C*w)_ij = α_ij × (w_j − w_i); pair-symmetric because
    /// both factors flip sign under the swap.
    pub fn apply_curl_adjoint(&self, w: &VectorField) -> Result<TwoPointField> {
        w.validate_len(self.nodes.len())?;
        let mut out = Vec::with_capacity(self.pairs.n_pairs());
        for (_, i, j) in self.pairs.iter_pairs() {
            out.push(self.alpha(i, j).cross(w.get(j) - w.get(i)));
        }
        Ok(TwoPointField::Vector(out))
    }

    /// Scalar Laplacian (Lu)_i = 2 Σ_j (u_j − u_i)(α_ij·α_ij) V_j at
    /// interior nodes; equal to the rank-1 divergence of the rank-1 adjoint.
    /// L is negative-semidefinite; the constrained systems use −L.
    pub fn apply_laplacian(&self, u: &ScalarField) -> Result<ScalarField> {
        self.laplacian_rows(u, RowSet::Omega)
    }

    /// [`Self::apply_laplacian`] evaluated at every node (interior and
    /// layer); the layer rows realize the flux operator, since
    /// (−Lu)_i = −(N(Gu))_i there. Used by the flux-constrained solve.
    pub fn apply_laplacian_all(&self, u: &ScalarField) -> Result<ScalarField> {
        self.laplacian_rows(u, RowSet::All)
    }

    fn laplacian_rows(&self, u: &ScalarField, rows: RowSet) -> Result<ScalarField> {
        u.validate_len(self.nodes.len())?;
        let vals = &u.values;
        Ok(self.reduce_scalar(rows, |i, _, j| {
            let d = self.nodes.positions[j] - self.nodes.positions[i];
            let gamma = self.kernel.gamma_of_separation(d);
            2.0 * (vals[j] - vals[i]) * gamma
        }))
    }

    /// Curl-curl composition (CC*w)_i = −2 Σ_j α_ij × ((w_j − w_i) × α_ij) V_j
    /// = 2 Σ_j ((α·(w_j−w_i))α − (w_j−w_i)|α|²) V_j at interior nodes,
    /// evaluated directly from the right-hand expression.
    pub fn apply_curlcurl(&self, w: &VectorField) -> Result<VectorField> {
        self.curlcurl_rows(w, RowSet::Omega)
    }

    /// [`Self::apply_curlcurl`] evaluated at every node; used by the
    /// deflated stream solve over the whole node set.
    pub fn apply_curlcurl_all(&self, w: &VectorField) -> Result<VectorField> {
        self.curlcurl_rows(w, RowSet::All)
    }

    fn curlcurl_rows(&self, w: &VectorField, rows: RowSet) -> Result<VectorField> {
        w.validate_len(self.nodes.len())?;
        let vals = &w.values;
        Ok(self.reduce_vector(rows, |i, _, j| {
            let a = self.alpha(i, j);
            let dw = vals[j] - vals[i];
            (a * a.dot(dw) - dw * a.dot(a)) * 2.0
        }))
    }

    /// Scalar interaction operator (Nν)_i = −Σ_j (ν_ij + ν_ji)·α_ij V_j at
    /// layer nodes (the nonlocal flux through the layer).
    pub fn interaction_n(&self, nu: &TwoPointField) -> Result<ScalarField> {
        nu.validate_len(self.pairs)?;
        let v = nu.as_vector()?;
        let rev = &self.pairs.reverse;
        Ok(self.reduce_scalar(RowSet::Gamma, |i, t, j| {
            -(v[t] + v[rev[t] as usize]).dot(self.alpha(i, j))
        }))
    }

    /// Tangential interaction operator (Tν)_i = Σ_j (ν_ij + ν_ji) × α_ij V_j
    /// at layer nodes.
    pub fn interaction_t(&self, nu: &TwoPointField) -> Result<VectorField> {
        nu.validate_len(self.pairs)?;
        let v = nu.as_vector()?;
        let rev = &self.pairs.reverse;
        Ok(self.reduce_vector(RowSet::Gamma, |i, t, j| {
            (v[t] + v[rev[t] as usize]).cross(self.alpha(i, j))
        }))
    }

    // ---- volume-weighted inner products and norms -------------------------

    fn dot_rows(&self, rows: RowSet, term: impl Fn(usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.nodes.len() {
            if self.active(rows, i) {
                acc += term(i) * self.nodes.volumes[i];
            }
        }
        acc
    }

    pub fn dot_omega(&self, f: &ScalarField, g: &ScalarField) -> f64 {
        self.dot_rows(RowSet::Omega, |i| f.get(i) * g.get(i))
    }

    pub fn dot_omega_vec(&self, f: &VectorField, g: &VectorField) -> f64 {
        self.dot_rows(RowSet::Omega, |i| f.get(i).dot(g.get(i)))
    }

    pub fn dot_gamma(&self, f: &ScalarField, g: &ScalarField) -> f64 {
        self.dot_rows(RowSet::Gamma, |i| f.get(i) * g.get(i))
    }

    pub fn dot_gamma_vec(&self, f: &VectorField, g: &VectorField) -> f64 {
        self.dot_rows(RowSet::Gamma, |i| f.get(i).dot(g.get(i)))
    }

    pub fn dot_all(&self, f: &ScalarField, g: &ScalarField) -> f64 {
        self.dot_rows(RowSet::All, |i| f.get(i) * g.get(i))
    }

    pub fn dot_all_vec(&self, f: &VectorField, g: &VectorField) -> f64 {
        self.dot_rows(RowSet::All, |i| f.get(i).dot(g.get(i)))
    }

    /// Volume sum Σ f_i V_i over interior nodes.
    pub fn integral_omega(&self, f: &ScalarField) -> f64 {
        self.dot_rows(RowSet::Omega, |i| f.get(i))
    }

    /// Volume sum Σ f_i V_i over layer nodes.
    pub fn integral_gamma(&self, f: &ScalarField) -> f64 {
        self.dot_rows(RowSet::Gamma, |i| f.get(i))
    }

    /// Directed-pair inner product Σ ψ_ij φ_ij V_i V_j (componentwise for
    /// vector ranks, Frobenius for matrix ranks). Ranks must match.
    pub fn dot_pairs(&self, a: &TwoPointField, b: &TwoPointField) -> Result<f64> {
        if a.rank() != b.rank() {
            return Err(NlvcError::InvalidInput(
                "pair inner product requires fields of equal rank".into(),
            ));
        }
        a.validate_len(self.pairs)?;
        b.validate_len(self.pairs)?;
        let mut acc = 0.0;
        match (a, b) {
            (TwoPointField::Scalar(x), TwoPointField::Scalar(y)) => {
                for (t, i, j) in self.pairs.iter_pairs() {
                    acc += x[t] * y[t] * self.nodes.volumes[i] * self.nodes.volumes[j];
                }
            }
            (TwoPointField::Vector(x), TwoPointField::Vector(y)) => {
                for (t, i, j) in self.pairs.iter_pairs() {
                    acc += x[t].dot(y[t]) * self.nodes.volumes[i] * self.nodes.volumes[j];
                }
            }
            (TwoPointField::Matrix(x), TwoPointField::Matrix(y)) => {
                for (t, i, j) in self.pairs.iter_pairs() {
                    let f: f64 = x[t].0.iter().zip(y[t].0.iter()).map(|(p, q)| p * q).sum();
                    acc += f * self.nodes.volumes[i] * self.nodes.volumes[j];
                }
            }
            _ => unreachable!("rank equality checked above"),
        }
        Ok(acc)
    }

    pub fn norm_pairs(&self, a: &TwoPointField) -> Result<f64> {
        Ok(self.dot_pairs(a, a)?.sqrt())
    }

    pub fn norm_omega(&self, f: &ScalarField) -> f64 {
        self.dot_omega(f, f).sqrt()
    }

    pub fn norm_omega_vec(&self, f: &VectorField) -> f64 {
        self.dot_omega_vec(f, f).sqrt()
    }

    pub fn norm_all(&self, f: &ScalarField) -> f64 {
        self.dot_all(f, f).sqrt()
    }

    pub fn norm_all_vec(&self, f: &VectorField) -> f64 {
        self.dot_all_vec(f, f).sqrt()
    }

    // ---- sparse assembly for the constrained solves -----------------------

    /// Assemble −L over interior unknowns (layer values folded to the
    /// right-hand side): diagonal 2 Σ_{j} γ_ij V_j over the full stencil,
    /// off-diagonal −2 γ_ij V_j for interior neighbors.
    pub fn assemble_laplacian(&self) -> Result<AssembledLaplacian> {
        let (omega, to_unknown) = self.interior_numbering()?;
        let mut triplets: Vec<(u32, u32, f64)> = Vec::new();
        for (row, &gi) in omega.iter().enumerate() {
            let i = gi as usize;
            let mut diag = 0.0;
            for t in self.pairs.range(i) {
                let j = self.pairs.neighbors[t] as usize;
                let d = self.nodes.positions[j] - self.nodes.positions[i];
                let gv = 2.0 * self.kernel.gamma_of_separation(d) * self.nodes.volumes[j];
                diag += gv;
                if let Some(col) = to_unknown[j] {
                    triplets.push((row as u32, col, -gv));
                }
            }
            triplets.push((row as u32, row as u32, diag));
        }
        let n = omega.len();
        Ok(AssembledLaplacian {
            matrix: CsrMatrix::from_triplets(n, triplets),
            omega,
            to_unknown,
        })
    }

    /// Assemble CC* over interior unknowns as a 3n scalar matrix of 3×3
    /// blocks: off-diagonal block 2(α⊗α − γ𝕀)V_j for interior neighbors,
    /// diagonal block 2 Σ_j (γ𝕀 − α⊗α) V_j over the full stencil.
    pub fn assemble_curlcurl(&self) -> Result<AssembledCurlCurl> {
        let (omega, to_unknown) = self.interior_numbering()?;
        let mut triplets: Vec<(u32, u32, f64)> = Vec::new();
        let mut push_block = |row: usize, col: usize, m: &Mat3| {
            for r in 0..3 {
                for c in 0..3 {
                    triplets.push((
                        (3 * row + r) as u32,
                        (3 * col + c) as u32,
                        m.0[3 * r + c],
                    ));
                }
            }
        };
        for (row, &gi) in omega.iter().enumerate() {
            let i = gi as usize;
            let mut diag = Mat3::ZERO;
            for t in self.pairs.range(i) {
                let j = self.pairs.neighbors[t] as usize;
                let a = self.alpha(i, j);
                let m = (a.outer(a) - Mat3::IDENTITY * a.dot(a)) * (2.0 * self.nodes.volumes[j]);
                diag += -m;
                if let Some(col) = to_unknown[j] {
                    push_block(row, col as usize, &m);
                }
            }
            push_block(row, row, &diag);
        }
        let n = 3 * omega.len();
        Ok(AssembledCurlCurl {
            matrix: CsrMatrix::from_triplets(n, triplets),
            omega,
            to_unknown,
        })
    }

    fn interior_numbering(&self) -> Result<(Vec<u32>, Vec<Option<u32>>)> {
        let mut omega = Vec::new();
        let mut to_unknown = vec![None; self.nodes.len()];
        for i in 0..self.nodes.len() {
            if self.nodes.is_omega(i) {
                to_unknown[i] = Some(omega.len() as u32);
                omega.push(i as u32);
            }
        }
        if omega.is_empty() {
            return Err(NlvcError::InvalidInput(
                "cannot assemble over an empty interior".into(),
            ));
        }
        Ok((omega, to_unknown))
    }
}

/// −L restricted to interior unknowns, with helpers to fold layer data into
/// a right-hand side and to move between global fields and unknown vectors.
pub struct AssembledLaplacian {
    pub matrix: CsrMatrix,
    /// Unknown index → global node id.
    pub omega: Vec<u32>,
    /// Global node id → unknown index (None for layer nodes).
    pub to_unknown: Vec<Option<u32>>,
}

impl AssembledLaplacian {
    /// Right-hand-side contribution of prescribed layer values g: the
    /// full system (−Lu)|_Ω = f with u|_Γ = g becomes
    /// matrix·u_Ω = f_Ω + fold(g), where fold(g)_i = 2 Σ_{j∈Γ} γ_ij V_j g_j.
    pub fn fold_rhs(&self, ctx: &OperatorContext, g: &ScalarField) -> Result<Vec<f64>> {
        g.validate(ctx.nodes.len())?;
        let mut out = vec![0.0; self.omega.len()];
        for (row, &gi) in self.omega.iter().enumerate() {
            let i = gi as usize;
            let mut acc = 0.0;
            for t in ctx.pairs.range(i) {
                let j = ctx.pairs.neighbors[t] as usize;
                if !ctx.nodes.is_omega(j) {
                    let d = ctx.nodes.positions[j] - ctx.nodes.positions[i];
                    acc += 2.0
                        * ctx.kernel.gamma_of_separation(d)
                        * ctx.nodes.volumes[j]
                        * g.get(j);
                }
            }
            out[row] = acc;
        }
        Ok(out)
    }

    /// Gather the interior entries of a global field.
    pub fn restrict(&self, f: &ScalarField) -> Vec<f64> {
        self.omega.iter().map(|&gi| f.get(gi as usize)).collect()
    }

    /// Scatter unknowns back to a global field, taking layer values from g.
    pub fn expand(&self, x: &[f64], g: &ScalarField) -> ScalarField {
        let mut out = g.clone();
        for (row, &gi) in self.omega.iter().enumerate() {
            out.values[gi as usize] = x[row];
        }
        out
    }
}

/// CC* restricted to interior unknowns (3 scalar unknowns per node).
pub struct AssembledCurlCurl {
    pub matrix: CsrMatrix,
    pub omega: Vec<u32>,
    pub to_unknown: Vec<Option<u32>>,
}

impl AssembledCurlCurl {
    /// Right-hand-side contribution of prescribed layer values g:
    /// fold(g)_i = 2 Σ_{j∈Γ} (γ𝕀 − α⊗α) g_j V_j, so that
    /// matrix·w_Ω = f_Ω + fold(g) realizes (CC*w)|_Ω = f with w|_Γ = g.
    pub fn fold_rhs(&self, ctx: &OperatorContext, g: &VectorField) -> Result<Vec<f64>> {
        g.validate(ctx.nodes.len())?;
        let mut out = vec![0.0; 3 * self.omega.len()];
        for (row, &gi) in self.omega.iter().enumerate() {
            let i = gi as usize;
            let mut acc = Point3::ZERO;
            for t in ctx.pairs.range(i) {
                let j = ctx.pairs.neighbors[t] as usize;
                if !ctx.nodes.is_omega(j) {
                    let a = ctx.alpha(i, j);
                    let gj = g.get(j);
                    acc += (gj * a.dot(a) - a * a.dot(gj)) * (2.0 * ctx.nodes.volumes[j]);
                }
            }
            out[3 * row] = acc.x1;
            out[3 * row + 1] = acc.x2;
            out[3 * row + 2] = acc.x3;
        }
        Ok(out)
    }

    pub fn restrict(&self, f: &VectorField) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.omega.len());
        for &gi in &self.omega {
            let v = f.get(gi as usize);
            out.extend([v.x1, v.x2, v.x3]);
        }
        out
    }

    pub fn expand(&self, x: &[f64], g: &VectorField) -> VectorField {
        let mut out = g.clone();
        for (row, &gi) in self.omega.iter().enumerate() {
            out.values[gi as usize] = Point3::new(x[3 * row], x[3 * row + 1], x[3 * row + 2]);
        }
        out
    }
}
