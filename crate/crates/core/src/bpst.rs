//! Bernstein–Bézier splines over a triangulation.
//!
//! Each triangle carries the `(d+1)(d+2)/2` Bernstein polynomials of degree `d`
//! in its barycentric coordinates. Global `C^r` smoothness is imposed through a
//! linear constraint matrix `Ψ` on the stacked Bézier coefficients; the constraint
//! is eliminated by the orthonormal null-space map `Q₂` from a pivoted QR of `Ψᵀ`.
//! The thin-plate energy `∫ β_xx² + 2β_xy² + β_yy²` is assembled exactly, one
//! block per triangle, from Bernstein product integrals.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::BasisError;
use crate::linalg::{Matrix, PivotedQr, SparseMatrix};
use crate::math::{self, factorial, powi};
use crate::mesh::{Point, TriMesh};

/// Sparse evaluation of the basis at one point: the values of the
/// `n_local` functions of the containing triangle, starting at `offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisRow {
    pub triangle: usize,
    pub offset: usize,
    pub values: Vec<f64>,
}

impl BasisRow {
    pub fn dot(&self, coef: &[f64]) -> f64 {
        math::dot(&self.values, &coef[self.offset..self.offset + self.values.len()])
    }

    pub fn to_dense(&self, n_basis: usize) -> Vec<f64> {
        let mut v = vec![0.0; n_basis];
        v[self.offset..self.offset + self.values.len()].copy_from_slice(&self.values);
        v
    }
}

/// Multi-indices `(i, j, k)`, `i + j + k = degree`, in the order
/// `(d,0,0), (d-1,1,0), (d-1,0,1), …, (0,0,d)`.
pub fn multi_indices(degree: u32) -> Vec<[u32; 3]> {
    let mut out = Vec::with_capacity(((degree + 1) * (degree + 2) / 2) as usize);
    for i in (0..=degree).rev() {
        for j in (0..=degree - i).rev() {
            out.push([i, j, degree - i - j]);
        }
    }
    out
}

/// Position of `(i, j, k)` within [`multi_indices`] of degree `i + j + k`.
pub fn local_index(alpha: [u32; 3]) -> usize {
    let d = alpha[0] + alpha[1] + alpha[2];
    let i = alpha[0];
    // entries preceding block i: sum over i' > i of (d - i' + 1)
    let before: u32 = (i + 1..=d).map(|ip| d - ip + 1).sum();
    (before + (d - i - alpha[1])) as usize
}

fn multinomial(alpha: [u32; 3]) -> f64 {
    factorial(alpha[0] + alpha[1] + alpha[2]) / (factorial(alpha[0]) * factorial(alpha[1]) * factorial(alpha[2]))
}

fn bernstein_values(degree: u32, b: [f64; 3]) -> Vec<f64> {
    multi_indices(degree)
        .into_iter()
        .map(|a| multinomial(a) * powi(b[0], a[0]) * powi(b[1], a[1]) * powi(b[2], a[2]))
        .collect()
}

/// Degree-`d` Bernstein basis on every triangle of a mesh.
#[derive(Debug, Clone)]
pub struct BivariateBasis {
    mesh: TriMesh,
    degree: u32,
    smoothness: u32,
    n_local: usize,
}

impl BivariateBasis {
    pub fn new(mesh: TriMesh, degree: u32, smoothness: u32) -> Result<Self, BasisError> {
        if degree == 0 {
            return Err(BasisError::ZeroDegree);
        }
        if smoothness >= degree {
            return Err(BasisError::SmoothnessTooHigh { degree, smoothness });
        }
        let n_local = ((degree + 1) * (degree + 2) / 2) as usize;
        Ok(Self { mesh, degree, smoothness, n_local })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn smoothness(&self) -> u32 {
        self.smoothness
    }

    /// Basis functions per triangle.
    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn n_basis(&self) -> usize {
        self.n_local * self.mesh.triangles().len()
    }

    /// `(triangle, (i, j, k))` for global basis index `m`.
    pub fn basis_index(&self, m: usize) -> (usize, [u32; 3]) {
        (m / self.n_local, multi_indices(self.degree)[m % self.n_local])
    }

    /// Evaluates `B(u)`; only the containing triangle's entries are nonzero.
    pub fn eval_basis(&self, u: Point) -> Result<BasisRow, BasisError> {
        let loc = self.mesh.locate(u).ok_or(BasisError::OutsideDomain { x: u[0], y: u[1] })?;
        Ok(self.eval_local(loc.triangle, loc.b))
    }

    /// Values of triangle `t`'s polynomials at barycentric `b` (which may lie outside `t`).
    pub fn eval_local(&self, t: usize, b: [f64; 3]) -> BasisRow {
        BasisRow { triangle: t, offset: t * self.n_local, values: bernstein_values(self.degree, b) }
    }

    /// Cartesian gradients `∇b₁, ∇b₂, ∇b₃` of the barycentric coordinates of triangle `t`.
    pub fn barycentric_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.mesh.triangle_vertices(t);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let g1 = [(b[1] - c[1]) / det, (c[0] - b[0]) / det];
        let g2 = [(c[1] - a[1]) / det, (a[0] - c[0]) / det];
        [g1, g2, [-g1[0] - g2[0], -g1[1] - g2[1]]]
    }

    /// Gradients of triangle `t`'s basis polynomials at barycentric `b`.
    pub fn gradient_local(&self, t: usize, b: [f64; 3]) -> Vec<[f64; 2]> {
        let d = self.degree;
        let g = self.barycentric_gradients(t);
        let lower = bernstein_values(d - 1, b);
        multi_indices(d)
            .into_iter()
            .map(|alpha| {
                let mut grad = [0.0; 2];
                for l in 0..3 {
                    if alpha[l] == 0 {
                        continue;
                    }
                    let mut beta = alpha;
                    beta[l] -= 1;
                    let v = d as f64 * lower[local_index(beta)];
                    grad[0] += v * g[l][0];
                    grad[1] += v * g[l][1];
                }
                grad
            })
            .collect()
    }

    /// Spline value `B(u)ᵀγ` for full-length coefficients `γ`.
    pub fn evaluate(&self, gamma: &[f64], u: Point) -> Result<f64, BasisError> {
        Ok(self.eval_basis(u)?.dot(gamma))
    }

    /// Spline gradient at `u` for full-length coefficients `γ`.
    pub fn evaluate_gradient(&self, gamma: &[f64], u: Point) -> Result<[f64; 2], BasisError> {
        let loc = self.mesh.locate(u).ok_or(BasisError::OutsideDomain { x: u[0], y: u[1] })?;
        let grads = self.gradient_local(loc.triangle, loc.b);
        let off = loc.triangle * self.n_local;
        let mut out = [0.0; 2];
        for (g, c) in grads.iter().zip(&gamma[off..off + self.n_local]) {
            out[0] += g[0] * c;
            out[1] += g[1] * c;
        }
        Ok(out)
    }

    /// Smoothness conditions `Ψγ = 0`: for every interior edge and `s = 0..=r`,
    /// the Bézier ordinates of the second triangle in layer `s` off the edge must
    /// equal the de Casteljau extension of the first triangle's polynomial.
    pub fn build_smoothness_constraints(&self) -> SparseMatrix {
        let d = self.degree;
        let mut psi = SparseMatrix::new(self.n_basis());
        let tris = self.mesh.triangles();
        for edge in self.mesh.interior_edges() {
            let (t1, t2) = (edge.first, edge.second.expect("interior edge"));
            let [va, vb] = edge.vertices;
            let slot = |tri: [usize; 3], v: usize| tri.iter().position(|&x| x == v).unwrap();
            let (tri1, tri2) = (tris[t1], tris[t2]);
            let (a1, b1) = (slot(tri1, va), slot(tri1, vb));
            let o1 = 3 - a1 - b1;
            let (a2, b2) = (slot(tri2, va), slot(tri2, vb));
            let o2 = 3 - a2 - b2;
            let off_vertex = self.mesh.vertices()[tri2[o2]];
            let lam = self.mesh.barycentric(t1, off_vertex);
            let (lo, la, lb) = (lam[o1], lam[a1], lam[b1]);

            for m in 0..=self.smoothness {
                for ea in 0..=(d - m) {
                    let eb = d - m - ea;
                    let mut e2 = [0u32; 3];
                    e2[o2] = m;
                    e2[a2] = ea;
                    e2[b2] = eb;
                    let mut row = vec![(t2 * self.n_local + local_index(e2), 1.0)];
                    for alpha in multi_indices(m) {
                        let (ao, aa, ab) = (alpha[0], alpha[1], alpha[2]);
                        let w = multinomial(alpha) * powi(lo, ao) * powi(la, aa) * powi(lb, ab);
                        if w == 0.0 {
                            continue;
                        }
                        let mut e1 = [0u32; 3];
                        e1[o1] = ao;
                        e1[a1] = ea + aa;
                        e1[b1] = eb + ab;
                        row.push((t1 * self.n_local + local_index(e1), -w));
                    }
                    psi.push_row(row);
                }
            }
        }
        psi
    }

    /// Thin-plate energy matrix, one dense block per triangle.
    pub fn build_energy_penalty(&self) -> BlockDiagonal {
        let nl = self.n_local;
        let nt = self.mesh.triangles().len();
        if self.degree < 2 {
            return BlockDiagonal { block_size: nl, blocks: vec![Matrix::zeros(nl, nl); nt] };
        }
        let d = self.degree;
        let lower = multi_indices(d - 2);
        let gram_unit = lower_gram(d - 2);
        let blocks = (0..nt)
            .map(|t| {
                let area = self.mesh.triangle_area(t);
                let g = self.barycentric_gradients(t);
                let dxx = second_derivative_operator(d, &lower, &g, 0, 0);
                let dxy = second_derivative_operator(d, &lower, &g, 0, 1);
                let dyy = second_derivative_operator(d, &lower, &g, 1, 1);
                let mut block = Matrix::zeros(nl, nl);
                for (op, weight) in [(&dxx, 1.0), (&dxy, 2.0), (&dyy, 1.0)] {
                    let gd = gram_unit.matmul(op);
                    let prod = op.transpose().matmul(&gd);
                    for i in 0..nl {
                        for j in 0..nl {
                            block[(i, j)] += weight * 2.0 * area * prod[(i, j)];
                        }
                    }
                }
                // exact symmetry
                for i in 0..nl {
                    for j in 0..i {
                        let s = 0.5 * (block[(i, j)] + block[(j, i)]);
                        block[(i, j)] = s;
                        block[(j, i)] = s;
                    }
                }
                block
            })
            .collect();
        BlockDiagonal { block_size: nl, blocks }
    }
}

/// Maps degree-`d` Bézier ordinates to the degree-`d−2` ordinates of the
/// second derivative along Cartesian axes `(p, q)`.
fn second_derivative_operator(d: u32, lower: &[[u32; 3]], g: &[[f64; 2]; 3], p: usize, q: usize) -> Matrix {
    let n_high = ((d + 1) * (d + 2) / 2) as usize;
    let mut op = Matrix::zeros(lower.len(), n_high);
    let scale = (d * (d - 1)) as f64;
    for (row, beta) in lower.iter().enumerate() {
        for l in 0..3 {
            for m in 0..3 {
                let mut alpha = *beta;
                alpha[l] += 1;
                alpha[m] += 1;
                op[(row, local_index(alpha))] += scale * g[l][p] * g[m][q];
            }
        }
    }
    op
}

/// `∫_T B_α B_β dA / (2 area)` for degree-`n` Bernstein polynomials.
fn lower_gram(n: u32) -> Matrix {
    let idx = multi_indices(n);
    let k = idx.len();
    let mut g = Matrix::zeros(k, k);
    let nf = factorial(n);
    let denom = factorial(2 * n + 2);
    for (i, a) in idx.iter().enumerate() {
        for (j, b) in idx.iter().enumerate() {
            let mut num = nf * nf;
            for l in 0..3 {
                num *= factorial(a[l] + b[l]) / (factorial(a[l]) * factorial(b[l]));
            }
            g[(i, j)] = num / denom;
        }
    }
    g
}

/// Block-diagonal symmetric matrix with equal square blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonal {
    block_size: usize,
    blocks: Vec<Matrix>,
}

impl BlockDiagonal {
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.block_size * self.blocks.len()
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.dim();
        let mut m = Matrix::zeros(n, n);
        for (b, blk) in self.blocks.iter().enumerate() {
            let o = b * self.block_size;
            for i in 0..self.block_size {
                for j in 0..self.block_size {
                    m[(o + i, o + j)] = blk[(i, j)];
                }
            }
        }
        m
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.blocks
            .iter()
            .enumerate()
            .map(|(b, blk)| blk.quad_form(&x[b * self.block_size..(b + 1) * self.block_size]))
            .sum()
    }

    /// `Qᵀ P Q` for a dense `Q` with `dim()` rows.
    pub fn congruence(&self, q: &Matrix) -> Matrix {
        assert_eq!(q.rows(), self.dim());
        let k = q.cols();
        let bs = self.block_size;
        let mut out = Matrix::zeros(k, k);
        for (b, blk) in self.blocks.iter().enumerate() {
            let rows: Vec<&[f64]> = (0..bs).map(|i| q.row(b * bs + i)).collect();
            // tmp = blk · Q_b   (bs × k)
            let mut tmp = vec![vec![0.0; k]; bs];
            for i in 0..bs {
                for j in 0..bs {
                    let a = blk[(i, j)];
                    if a == 0.0 {
                        continue;
                    }
                    for (t, &qv) in tmp[i].iter_mut().zip(rows[j]) {
                        *t += a * qv;
                    }
                }
            }
            for i in 0..bs {
                let qi = rows[i];
                for (r, &qir) in qi.iter().enumerate() {
                    if qir == 0.0 {
                        continue;
                    }
                    let orow = out.row_mut(r);
                    for (o, &t) in orow.iter_mut().zip(&tmp[i]) {
                        *o += qir * t;
                    }
                }
            }
        }
        for i in 0..k {
            for j in 0..i {
                let s = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }
}

/// Orthonormal basis `Q₂` of `null(Ψ)` from a column-pivoted QR of `Ψᵀ`.
/// Rows of `Ψ` are normalized first; the null space is unchanged.
pub fn null_space_transform(psi: &SparseMatrix) -> (Matrix, usize) {
    let n = psi.ncols();
    if psi.nrows() == 0 {
        return (Matrix::identity(n), 0);
    }
    let cols: Vec<Vec<f64>> = psi
        .iter_rows()
        .map(|r| {
            let mut c = vec![0.0; n];
            for &(j, v) in r {
                c[j] += v;
            }
            let s = math::norm2(&c);
            if s > 0.0 {
                c.iter_mut().for_each(|x| *x /= s);
            }
            c
        })
        .collect();
    let qr = PivotedQr::factor_columns(n, cols);
    let rank = qr.rank();
    (qr.q_columns_from(rank), rank)
}

/// Smoothness constraints, their null-space map and the energy penalty.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub psi: SparseMatrix,
    pub q2: Matrix,
    pub rank: usize,
    pub penalty: BlockDiagonal,
}

impl ConstraintSystem {
    pub fn build(basis: &BivariateBasis) -> Self {
        let psi = basis.build_smoothness_constraints();
        let (q2, rank) = null_space_transform(&psi);
        let penalty = basis.build_energy_penalty();
        Self { psi, q2, rank, penalty }
    }

    /// Dimension of the reparametrized coefficient `γ*`.
    pub fn n_free(&self) -> usize {
        self.q2.cols()
    }

    /// `γ = Q₂ γ*`
    pub fn expand(&self, gamma_star: &[f64]) -> Vec<f64> {
        self.q2.mul_vec(gamma_star)
    }

    /// `Q₂ᵀ P Q₂`
    pub fn reduced_penalty(&self) -> Matrix {
        self.penalty.congruence(&self.q2)
    }
}
