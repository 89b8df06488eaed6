//! Failure-informed subspace (FIS) construction.
//!
//! `H = E[∇ln f ∇ln fᵀ]` is estimated by self-normalized importance sampling,
//! eigendecomposed, and truncated at the smallest rank `r` whose discarded
//! eigenvalue mass satisfies `½ Σ_{i>r} λ_i ≤ ε`.

use nalgebra::{DMatrix, DMatrixView, SymmetricEigen, QR};

use crate::error::{Error, Result};

/// Orthonormal eigenbasis of `H`, split into the leading `rank` columns
/// (the FIS) and the complementary subspace (CS).
#[derive(Debug, Clone, PartialEq)]
pub struct FisBasis {
    eigvals: Vec<f64>,
    rank: usize,
    vectors: DMatrix<f64>,
}

impl FisBasis {
    /// Wraps an orthonormal `d × d` matrix whose first `rank` columns span
    /// the FIS. Orthonormality is the caller's responsibility.
    pub fn new(eigvals: Vec<f64>, rank: usize, vectors: DMatrix<f64>) -> Result<Self> {
        let d = vectors.nrows();
        if vectors.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: vectors.ncols() });
        }
        if eigvals.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: eigvals.len() });
        }
        if rank == 0 || rank > d {
            return Err(Error::DimensionMismatch { expected: d, got: rank });
        }
        Ok(Self { eigvals, rank, vectors })
    }

    /// Canonical basis with the first `rank` coordinates as the FIS.
    pub fn canonical(dim: usize, rank: usize) -> Self {
        assert!(rank >= 1 && rank <= dim, "rank must lie in 1..=dim");
        Self { eigvals: vec![0.0; dim], rank, vectors: DMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    /// All `d` basis vectors as columns, FIS first.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn phi_r(&self) -> DMatrixView<'_, f64> {
        self.vectors.columns(0, self.rank)
    }

    pub fn phi_perp(&self) -> DMatrixView<'_, f64> {
        self.vectors.columns(self.rank, self.dim() - self.rank)
    }
}

fn normalized_sqrt_weights(weights: &[f64]) -> Result<Vec<f64>> {
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidLsfValue(*w));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllWeightsZero);
    }
    Ok(weights.iter().map(|w| (w / total).sqrt()).collect())
}

/// Gradients scaled column-wise by `√(w_i / Σw)`, so that `B Bᵀ = Ĥ`.
fn scaled_gradients(grads: &DMatrix<f64>, weights: &[f64]) -> Result<DMatrix<f64>> {
    if grads.ncols() != weights.len() {
        return Err(Error::DimensionMismatch { expected: grads.ncols(), got: weights.len() });
    }
    if let Some(v) = grads.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidLsfValue(*v));
    }
    let sw = normalized_sqrt_weights(weights)?;
    let mut b = grads.clone();
    for (mut col, s) in b.column_iter_mut().zip(&sw) {
        col *= *s;
    }
    Ok(b)
}

/// Self-normalized estimate `Ĥ = Σ w_i g_i g_iᵀ / Σ w_i` from gradients
/// stored as the columns of a `d × N` matrix.
pub fn estimate_h(grads: &DMatrix<f64>, weights: &[f64]) -> Result<DMatrix<f64>> {
    let b = scaled_gradients(grads, weights)?;
    let h = &b * b.transpose();
    Ok(symmetrize(h))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Smallest `r ≥ 1` with `½ Σ_{i>r} λ_i ≤ eps`, or `d` if none qualifies.
pub fn select_rank(eigvals: &[f64], eps: f64) -> usize {
    let d = eigvals.len();
    let mut tail = 0.0;
    let mut rank = d.max(1);
    for r in (1..d).rev() {
        tail += eigvals[r];
        if 0.5 * tail <= eps {
            rank = r;
        } else {
            break;
        }
    }
    rank
}

/// Flips each column so that its largest-magnitude entry is positive.
fn fix_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let pivot = col.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
}

fn sorted_eigen(h: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = h.nrows();
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 0).ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |row, col| eig.eigenvectors[(row, order[col])]);
    Ok((vals, vecs))
}

fn clip_negative(vals: &mut [f64]) {
    for v in vals.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Full eigendecomposition of a symmetric `H` and rank selection.
pub fn compute_fis_basis(h: &DMatrix<f64>, eps: f64) -> Result<FisBasis> {
    compute_fis_basis_capped(h, eps, usize::MAX)
}

fn compute_fis_basis_capped(h: &DMatrix<f64>, eps: f64, max_rank: usize) -> Result<FisBasis> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), got: h.ncols() });
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure);
    }
    let (mut vals, mut vecs) = sorted_eigen(symmetrize(h.clone()))?;
    clip_negative(&mut vals);
    fix_signs(&mut vecs);
    let rank = select_rank(&vals, eps).min(max_rank.max(1));
    FisBasis::new(vals, rank, vecs)
}

/// FIS basis straight from weighted gradient samples (columns of `grads`).
///
/// The rank is capped at `min(d, N − 1)`. When there are fewer gradients
/// than dimensions the spectrum is obtained from the `N × N` Gram matrix
/// and the range is completed to a full orthonormal basis by Householder QR.
pub fn fis_basis_from_gradients(grads: &DMatrix<f64>, weights: &[f64], eps: f64) -> Result<FisBasis> {
    let (d, n) = grads.shape();
    let cap = d.min(n.saturating_sub(1)).max(1);
    if n >= d {
        let h = estimate_h(grads, weights)?;
        return compute_fis_basis_capped(&h, eps, cap);
    }

    let b = scaled_gradients(grads, weights)?;
    let gram = symmetrize(b.transpose() * &b);
    let (mu, v) = sorted_eigen(gram)?;
    let top = mu.first().copied().unwrap_or(0.0);
    let kept: Vec<usize> = (0..n).take_while(|&i| top > 0.0 && mu[i] > 1e-12 * top).collect();
    if kept.is_empty() {
        return FisBasis::new(vec![0.0; d], 1, DMatrix::identity(d, d));
    }

    let k = kept.len();
    let mut range = DMatrix::zeros(d, k);
    for (j, &i) in kept.iter().enumerate() {
        let col = &b * v.column(i) / mu[i].sqrt();
        range.set_column(j, &col);
    }
    let mut q = DMatrix::identity(d, d);
    QR::new(range.clone()).q_tr_mul(&mut q);
    let mut basis = q.transpose();
    // Householder columns agree with the range vectors up to sign; keep the
    // cleaner orthonormal ones and fix signs afterwards.
    fix_signs(&mut basis);

    let mut vals = vec![0.0; d];
    for (j, &i) in kept.iter().enumerate() {
        vals[j] = mu[i];
    }
    let rank = select_rank(&vals, eps).min(cap);
    FisBasis::new(vals, rank, basis)
}

/// Local coordinates `(Φ_rᵀθ, Φ_⊥ᵀθ)` of the columns of `theta`.
pub fn project(theta: &DMatrix<f64>, basis: &FisBasis) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = basis.dim();
    if theta.nrows() != d {
        return Err(Error::DimensionMismatch { expected: d, got: theta.nrows() });
    }
    let local = basis.vectors.tr_mul(theta);
    let r = basis.rank;
    Ok((local.rows(0, r).into_owned(), local.rows(r, d - r).into_owned()))
}

/// `θ = Φ_r θ̃_r + Φ_⊥ θ̃_⊥`.
pub fn reconstruct(theta_r: &DMatrix<f64>, theta_perp: &DMatrix<f64>, basis: &FisBasis) -> Result<DMatrix<f64>> {
    let r = basis.rank;
    let d = basis.dim();
    if theta_r.nrows() != r {
        return Err(Error::DimensionMismatch { expected: r, got: theta_r.nrows() });
    }
    if theta_perp.nrows() != d - r {
        return Err(Error::DimensionMismatch { expected: d - r, got: theta_perp.nrows() });
    }
    if theta_r.ncols() != theta_perp.ncols() {
        return Err(Error::DimensionMismatch { expected: theta_r.ncols(), got: theta_perp.ncols() });
    }
    Ok(basis.phi_r() * theta_r + basis.phi_perp() * theta_perp)
}
