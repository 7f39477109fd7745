//! Eigenspace primitives: top-K symmetric eigenvectors, Procrustes alignment,
//! weighted aggregation with QR re-orthonormalization, and the projection
//! distance between subspaces.

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgen::SbmSpec;

/// Tolerance on `‖UᵀU - I‖_F` accepted by [`Eigenspace::new`].
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Smallest `|R_jj|` accepted when orthonormalizing an aggregate.
pub const RANK_TOL: f64 = 1e-8;

/// An `n × k` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenspace {
    basis: DMatrix<f64>,
}

impl Eigenspace {
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(basis, ORTHONORMAL_TOL)
    }

    pub fn with_tolerance(basis: DMatrix<f64>, tol: f64) -> Result<Self> {
        if basis.ncols() == 0 || basis.ncols() > basis.nrows() {
            return Err(Error::Dimension(format!(
                "eigenspace must be n x k with 1 <= k <= n, got {}x{}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        let err = orthonormality_error(&basis);
        if !(err <= tol) {
            return Err(Error::InvalidParameter(format!(
                "basis is not orthonormal: ||U^T U - I||_F = {err:e}"
            )));
        }
        Ok(Self { basis })
    }

    pub(crate) fn new_unchecked(basis: DMatrix<f64>) -> Self {
        Self { basis }
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn into_basis(self) -> DMatrix<f64> {
        self.basis
    }

    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    /// `U Uᵀ`, the `n × n` orthogonal projector.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Right-multiply by a rotation.
    pub fn rotate(&self, r: &Rotation) -> Eigenspace {
        Eigenspace::new_unchecked(&self.basis * &r.z)
    }

    fn same_shape(&self, other: &Eigenspace) -> Result<()> {
        if self.n() != other.n() || self.k() != other.k() {
            return Err(Error::Dimension(format!(
                "eigenspaces are {}x{} and {}x{}",
                self.n(),
                self.k(),
                other.n(),
                other.k()
            )));
        }
        Ok(())
    }
}

/// `k × k` orthogonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    z: DMatrix<f64>,
}

impl Rotation {
    pub fn new(z: DMatrix<f64>) -> Result<Self> {
        if !z.is_square() {
            return Err(Error::Dimension("rotation must be square".into()));
        }
        let err = orthonormality_error(&z);
        if !(err <= ORTHONORMAL_TOL) {
            return Err(Error::InvalidParameter(format!(
                "rotation is not orthogonal: ||Z^T Z - I||_F = {err:e}"
            )));
        }
        Ok(Self { z })
    }

    pub fn identity(k: usize) -> Self {
        Self {
            z: DMatrix::identity(k, k),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.z
    }
}

/// `‖MᵀM - I‖_F`.
pub fn orthonormality_error(m: &DMatrix<f64>) -> f64 {
    let k = m.ncols();
    (m.transpose() * m - DMatrix::<f64>::identity(k, k)).norm()
}

/// Which eigenvalues count as "leading".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EigenOrder {
    /// Largest `|λ|` first.
    #[default]
    Magnitude,
    /// Largest `λ` first.
    Algebraic,
}

/// Result of [`top_k_eigvecs`].
#[derive(Debug, Clone)]
pub struct TopEigen {
    pub space: Eigenspace,
    /// Eigenvalues matching the columns of `space`.
    pub values: Vec<f64>,
    /// The k-th and (k+1)-th eigenvalues tie under the ordering, so the
    /// returned subspace is not unique.
    pub degenerate: bool,
}

/// Leading `k` eigenvectors of a symmetric matrix.
///
/// Columns are ordered by the chosen key, descending. Each column is signed
/// so that its largest-magnitude entry (lowest index on ties) is positive.
pub fn top_k_eigvecs(s: &DMatrix<f64>, k: usize, order: EigenOrder) -> Result<TopEigen> {
    let n = s.nrows();
    if !s.is_square() {
        return Err(Error::Dimension(format!(
            "matrix is {}x{}, expected square",
            s.nrows(),
            s.ncols()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k={k} out of range for n={n}")));
    }
    let eig = SymmetricEigen::new(s.clone());
    let key = |v: f64| match order {
        EigenOrder::Magnitude => v.abs(),
        EigenOrder::Algebraic => v,
    };
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        key(eig.eigenvalues[b])
            .total_cmp(&key(eig.eigenvalues[a]))
            .then(a.cmp(&b))
    });

    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let degenerate = k < n && (key(eig.eigenvalues[idx[k - 1]]) - key(eig.eigenvalues[idx[k]])).abs() <= 1e-12 * scale;

    let mut basis = DMatrix::zeros(n, k);
    let mut values = Vec::with_capacity(k);
    for (c, &i) in idx.iter().take(k).enumerate() {
        let mut col = eig.eigenvectors.column(i).into_owned();
        fix_sign(col.as_mut_slice());
        basis.set_column(c, &col);
        values.push(eig.eigenvalues[i]);
    }
    Ok(TopEigen {
        space: Eigenspace::new_unchecked(basis),
        values,
        degenerate,
    })
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Orthogonal `Z` minimizing `‖u_l Z - u_0‖_F`: with `u_lᵀ u_0 = V Σ Wᵀ`,
/// `Z = V Wᵀ`.
pub fn procrustes_align(u_l: &Eigenspace, u_0: &Eigenspace) -> Result<Rotation> {
    u_l.same_shape(u_0)?;
    let m = u_l.basis.transpose() * &u_0.basis;
    let svd = SVD::new(m, true, true);
    let (v, w_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    Ok(Rotation { z: v * w_t })
}

/// `QR(Σ_l w_l U_l Z_l)`, with columns of Q signed so that `R` has a
/// positive diagonal.
pub fn weighted_aggregate(spaces: &[Eigenspace], rotations: &[Rotation], w: &[f64]) -> Result<Eigenspace> {
    if spaces.is_empty() {
        return Err(Error::InvalidParameter("no eigenspaces to aggregate".into()));
    }
    if spaces.len() != rotations.len() || spaces.len() != w.len() {
        return Err(Error::Dimension(format!(
            "{} spaces, {} rotations, {} weights",
            spaces.len(),
            rotations.len(),
            w.len()
        )));
    }
    if w.iter().any(|&x| !(x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(
            "weights must be nonnegative and sum to 1".into(),
        ));
    }
    let (n, k) = (spaces[0].n(), spaces[0].k());
    let mut sum = DMatrix::zeros(n, k);
    for ((u, z), &wl) in spaces.iter().zip(rotations).zip(w) {
        u.same_shape(&spaces[0])?;
        if z.z.nrows() != k {
            return Err(Error::Dimension("rotation size differs from k".into()));
        }
        sum += (&u.basis * &z.z) * wl;
    }
    orthonormalize(sum)
}

/// Thin QR with sign-normalized factors; errors on a near-zero `R_jj`.
pub fn orthonormalize(m: DMatrix<f64>) -> Result<Eigenspace> {
    let k = m.ncols();
    let qr = m.qr();
    let r = qr.r();
    let mut q = qr.q();
    let scale = r.diagonal().amax().max(1.0);
    for j in 0..k {
        let rjj = r[(j, j)];
        if rjj.abs() < RANK_TOL * scale {
            return Err(Error::RankDeficientAggregate {
                column: j,
                value: rjj.abs(),
            });
        }
        if rjj < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(Eigenspace::new_unchecked(q))
}

/// `‖UUᵀ - VVᵀ‖₂`, the sine of the largest principal angle.
///
/// Evaluated as the largest singular value of `(I - VVᵀ)U`, which equals
/// `√(1 - σ_min(UᵀV)²)` but keeps full relative accuracy for nearly equal
/// subspaces.
pub fn projection_distance(u: &Eigenspace, v: &Eigenspace) -> Result<f64> {
    u.same_shape(v)?;
    let resid = &u.basis - &v.basis * (v.basis.transpose() * &u.basis);
    let s = resid.singular_values();
    Ok(s.max().clamp(0.0, 1.0))
}

/// The cosine form `√(1 - σ_min(UᵀV)²)`.
pub fn projection_distance_cosine(u: &Eigenspace, v: &Eigenspace) -> Result<f64> {
    u.same_shape(v)?;
    let s = (u.basis.transpose() * &v.basis).singular_values();
    let smin = s.min().clamp(0.0, 1.0);
    Ok((1.0 - smin * smin).max(0.0).sqrt())
}

/// Population eigenspace of an SBM layer, `Θ Δ⁻¹` with `Δ² = ΘᵀΘ`.
///
/// Spans the leading eigenspace of `Θ B Θᵀ` whenever `B` has full rank, and
/// depends on the membership only.
pub fn ground_truth_eigenspace(spec: &SbmSpec) -> Result<Eigenspace> {
    let sizes = spec.theta().community_sizes();
    if let Some(c) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyCommunity(c));
    }
    let k = spec.k();
    let sv = spec.b().singular_values();
    let tol = 1e-10 * sv.max().max(f64::MIN_POSITIVE);
    let rank = sv.iter().filter(|&&s| s > tol).count();
    if rank < k {
        return Err(Error::RankDeficientConnectivity { rank, k });
    }
    Ok(membership_eigenspace(spec.theta().labels(), &sizes))
}

pub(crate) fn membership_eigenspace(labels: &[usize], sizes: &[usize]) -> Eigenspace {
    let inv: Vec<f64> = sizes.iter().map(|&s| 1.0 / (s as f64).sqrt()).collect();
    let basis = DMatrix::from_fn(
        labels.len(),
        sizes.len(),
        |i, c| {
            if labels[i] == c {
                inv[c]
            } else {
                0.0
            }
        },
    );
    Eigenspace::new_unchecked(basis)
}
