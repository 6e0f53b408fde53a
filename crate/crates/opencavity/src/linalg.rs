//! Dense complex linear algebra shared by the physics modules: biorthogonal
//! eigenpairs of non-Hermitian matrices, a scaling-and-squaring matrix
//! exponential, and the Lyapunov steady-state solver.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Eigh, Inverse, UPLO};

use crate::{C64, Error, Result};

/// Largest absolute entry.
pub fn max_abs(m: &Array2<C64>) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Maximum absolute row sum (induced ∞-norm).
pub fn inf_norm(m: &Array2<C64>) -> f64 {
    m.rows()
        .into_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0f64, f64::max)
}

/// Maximum absolute column sum (induced 1-norm).
pub fn one_norm(m: &Array2<C64>) -> f64 {
    m.columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0f64, f64::max)
}

/// Conjugate transpose.
pub fn adjoint(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

/// Factor a Hermitian positive semi-definite matrix as Q = B B†, with
/// B = V diag(√λ) from the eigendecomposition. Eigenvalues at rounding level
/// below zero are clamped; genuinely negative ones are an error.
pub fn psd_factor(q: &Array2<C64>) -> Result<Array2<C64>> {
    let (vals, vecs) = q
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Linalg(format!("PSD factorization: {e}")))?;
    let lmax = vals.iter().fold(0.0_f64, |m, &l| m.max(l));
    let tol = 1e-12 * lmax.max(f64::MIN_POSITIVE);
    // Complex eigh hands LAPACK the row-major buffer, i.e. the transpose;
    // for a Hermitian matrix that is the conjugate, so the true eigenvectors
    // are the conjugated columns of the returned matrix.
    let mut b = vecs.mapv(|z| z.conj());
    for (j, &l) in vals.iter().enumerate() {
        if l < -tol {
            return Err(Error::Linalg(format!(
                "matrix is not positive semi-definite: eigenvalue {l:.3e}"
            )));
        }
        b.column_mut(j).mapv_inplace(|z| z * l.max(0.0).sqrt());
    }
    Ok(b)
}

pub fn identity(n: usize) -> Array2<C64> {
    Array2::eye(n)
}

/// Eigen-decomposition of a general complex matrix with biorthonormal
/// left/right vector pairs: `values[k]` with right column `right[:,k]` (unit
/// Euclidean norm) and left column `left[:,k]` scaled so that
/// `left[:,k]† · right[:,k] = 1`.
pub struct EigenPairs {
    pub values: Array1<C64>,
    pub right: Array2<C64>,
    pub left: Array2<C64>,
    /// `|l̂_k† r_k|` with *unit-norm* left vectors: the reciprocal eigenvalue
    /// condition number. Small values signal a nearly defective pair.
    pub residue_norms: Array1<f64>,
    /// Groups of indices whose eigenvalues lie within `cluster_tol` of a
    /// chain neighbor. Non-empty means the per-vector decomposition inside
    /// each group is basis-dependent; only the group projector is meaningful.
    pub clusters: Vec<Vec<usize>>,
}

/// Decompose `h` into biorthogonal eigenpairs, ordered by ascending real part
/// (ties broken by imaginary part). Eigenvalue groups closer than
/// `cluster_tol` are flagged and their right vectors re-orthonormalized as a
/// block so the global inversion that produces the left vectors stays stable.
pub fn eigen_biorthogonal(h: &Array2<C64>, cluster_tol: f64) -> Result<EigenPairs> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let (vals, vecs) = h.eig()?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        vals[i]
            .re
            .total_cmp(&vals[j].re)
            .then(vals[i].im.total_cmp(&vals[j].im))
    });

    let values = Array1::from_iter(order.iter().map(|&i| vals[i]));
    let mut right = Array2::<C64>::zeros((n, n));
    for (k, &i) in order.iter().enumerate() {
        let col = vecs.column(i);
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for r in 0..n {
            right[[r, k]] = col[r] / norm;
        }
    }

    // Chain clustering on the sorted eigenvalues.
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut current = vec![0usize];
    for k in 1..n {
        if (values[k] - values[k - 1]).norm() < cluster_tol {
            current.push(k);
        } else {
            if current.len() > 1 {
                clusters.push(current.clone());
            }
            current = vec![k];
        }
    }
    if current.len() > 1 {
        clusters.push(current);
    }

    // Within a flagged cluster the individual eigenvectors may be nearly
    // parallel; orthonormalize the block (two Gram-Schmidt passes) so the
    // subspace basis is well conditioned.
    for cluster in &clusters {
        for (pos, &k) in cluster.iter().enumerate() {
            for _pass in 0..2 {
                for &j in &cluster[..pos] {
                    let proj: C64 = (0..n).map(|r| right[[r, j]].conj() * right[[r, k]]).sum();
                    for r in 0..n {
                        let sub = proj * right[[r, j]];
                        right[[r, k]] -= sub;
                    }
                }
            }
            let norm = (0..n)
                .map(|r| right[[r, k]].norm_sqr())
                .sum::<f64>()
                .sqrt();
            if norm < 1e-14 {
                return Err(Error::Linalg(
                    "defective eigenvalue cluster: eigenvectors do not span the cluster subspace"
                        .into(),
                ));
            }
            for r in 0..n {
                right[[r, k]] /= norm;
            }
        }
    }

    // Left vectors from the inverse of the right-vector matrix: rows of R⁻¹
    // are exactly the biorthonormal left vectors (L_k† R_j = δ_kj).
    let rinv = right.inv().map_err(|e| {
        Error::Linalg(format!(
            "right eigenvector matrix is numerically singular (defective spectrum?): {e}"
        ))
    })?;
    let mut left = Array2::<C64>::zeros((n, n));
    let mut residue_norms = Array1::<f64>::zeros(n);
    for k in 0..n {
        let row_norm = rinv.row(k).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for r in 0..n {
            left[[r, k]] = rinv[[k, r]].conj();
        }
        residue_norms[k] = 1.0 / row_norm;
    }

    Ok(EigenPairs {
        values,
        right,
        left,
        residue_norms,
        clusters,
    })
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    const THETA_13: f64 = 5.371920351148152;
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];

    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.mapv(|z| z / C64::new(2f64.powi(s), 0.0));

    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let eye = identity(n);

    let u_inner = &a6.mapv(|z| z * B[13]) + &a4.mapv(|z| z * B[11]) + &a2.mapv(|z| z * B[9]);
    let u_poly = a6.dot(&u_inner)
        + &a6.mapv(|z| z * B[7])
        + &a4.mapv(|z| z * B[5])
        + &a2.mapv(|z| z * B[3])
        + &eye.mapv(|z| z * B[1]);
    let u = a.dot(&u_poly);

    let v_inner = &a6.mapv(|z| z * B[12]) + &a4.mapv(|z| z * B[10]) + &a2.mapv(|z| z * B[8]);
    let v = a6.dot(&v_inner)
        + &a6.mapv(|z| z * B[6])
        + &a4.mapv(|z| z * B[4])
        + &a2.mapv(|z| z * B[2])
        + &eye.mapv(|z| z * B[0]);

    let vmu = &v - &u;
    let vpu = &v + &u;
    let mut result = vmu
        .inv()
        .expect("Padé denominator is nonsingular for scaled input")
        .dot(&vpu);
    for _ in 0..s {
        result = result.dot(&result);
    }
    result
}

/// Solve the steady-state Lyapunov equation `H C − C H† = −i Q` for the
/// second-moment matrix C of linear mode dynamics `ȧ = −iHa + F` with noise
/// source Q. Requires every eigenvalue of H to be damped (negative imaginary
/// part). Returns the Hermitized solution and the max-abs residual after one
/// round of iterative refinement.
pub fn lyapunov_steady(h: &Array2<C64>, q: &Array2<C64>) -> Result<(Array2<C64>, f64)> {
    let n = h.nrows();
    if q.nrows() != n || q.ncols() != n || h.ncols() != n {
        return Err(Error::Dimension(
            "Lyapunov: H and Q must be square with matching size".into(),
        ));
    }
    let eig = eigen_biorthogonal(h, 1e-8)?;
    for &l in eig.values.iter() {
        if l.im >= 0.0 {
            return Err(Error::NoSteadyState(format!(
                "eigenvalue {l} of the effective Hamiltonian is not damped"
            )));
        }
    }

    let solve_once = |rhs: &Array2<C64>| -> Array2<C64> {
        // Project onto eigenbasis: X_jk = −i (L† rhs L)_jk / (λ_j − λ̄_k).
        let lh = adjoint(&eig.left);
        let m = lh.dot(rhs).dot(&eig.left);
        let mut x = Array2::<C64>::zeros((n, n));
        for j in 0..n {
            for k in 0..n {
                let denom = eig.values[j] - eig.values[k].conj();
                x[[j, k]] = -C64::i() * m[[j, k]] / denom;
            }
        }
        let rh = adjoint(&eig.right);
        eig.right.dot(&x).dot(&rh)
    };

    let residual_of = |c: &Array2<C64>| -> Array2<C64> {
        let hc = h.dot(c);
        let ch = c.dot(&adjoint(h));
        &hc - &ch + &q.mapv(|z| z * C64::i())
    };

    let mut c = solve_once(q);
    // One refinement pass cleans up conditioning loss from the eigenbasis
    // round trip.
    for _ in 0..2 {
        let r = residual_of(&c);
        if max_abs(&r) < 1e-13 * (1.0 + max_abs(q)) {
            break;
        }
        // Correction δ obeys H δ − δ H† = −r, which is the base equation
        // with source q_eff = −i r.
        let q_eff = r.mapv(|z| z * (-C64::i()));
        let delta = solve_once(&q_eff);
        c = &c + &delta;
    }
    // Hermitize.
    let c_h = adjoint(&c);
    let c = (&c + &c_h).mapv(|z| z * 0.5);
    let res = max_abs(&residual_of(&c));
    Ok((c, res))
}
