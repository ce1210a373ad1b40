//! Shared numerical kernels: graph-Laplacian least squares, orthonormal
//! complement bases, symmetric square roots, and nonnegative least squares.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::data::DesignOperators;
use crate::error::{Error, Result};

/// Iterative solver for the (singular, consistent) Laplacian system
/// `(grad' grad) theta = rhs`, returning the minimum-norm solution, i.e.
/// zero mean on each connected component.
pub struct LaplacianSystem<'a> {
    ops: &'a DesignOperators,
    pub tol: f64,
    pub max_iter: usize,
}

impl<'a> LaplacianSystem<'a> {
    pub fn new(ops: &'a DesignOperators) -> Self {
        LaplacianSystem {
            ops,
            tol: 1e-10,
            max_iter: 10 * ops.n_items().max(4),
        }
    }

    pub fn with_tol(ops: &'a DesignOperators, tol: f64) -> Self {
        let mut sys = Self::new(ops);
        sys.tol = tol;
        sys
    }

    /// Solves for the least-squares score vector. The right-hand side is
    /// projected onto the per-component mean-zero subspace first (it already
    /// lies there when rhs = grad' y).
    pub fn solve_score(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        assert_eq!(rhs.len(), self.ops.n_items());
        let mut b = rhs.clone();
        self.ops.center_per_component(&mut b);
        // Jacobi-preconditioned CG; the preconditioner keeps the iterates in
        // the mean-zero subspace only approximately, so re-center at the end.
        let deg = self.ops.degrees();
        let precond = |v: &DVector<f64>| -> DVector<f64> {
            let mut out = v.clone();
            for i in 0..out.len() {
                if deg[i] > 0.0 {
                    out[i] /= deg[i];
                }
            }
            self.ops_center(out)
        };
        let apply = |v: &DVector<f64>| self.ops.laplacian_apply(v);
        let target = self.tol * (1.0 + b.norm());

        let mut x = DVector::zeros(b.len());
        let mut r = b.clone();
        if r.norm() <= target {
            return Ok(x);
        }
        let mut z = precond(&r);
        let mut p = z.clone();
        let mut rz = r.dot(&z);
        for _ in 0..self.max_iter {
            let ap = apply(&p);
            let pap = p.dot(&ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            x.axpy(alpha, &p, 1.0);
            r.axpy(-alpha, &ap, 1.0);
            if r.norm() <= target {
                let mut out = x;
                self.ops.center_per_component(&mut out);
                return Ok(out);
            }
            z = precond(&r);
            let rz_new = r.dot(&z);
            let beta = rz_new / rz;
            rz = rz_new;
            p = &z + beta * &p;
        }
        Err(Error::NonConvergence {
            what: "laplacian solve",
            iterations: self.max_iter,
            residual: r.norm(),
        })
    }

    fn ops_center(&self, mut v: DVector<f64>) -> DVector<f64> {
        self.ops.center_per_component(&mut v);
        v
    }

    /// Applies the residual projector (I - H) where H is the projection onto
    /// the column space of the gradient operator. Never forms H.
    pub fn project_out_gradient(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let theta = self.solve_score(&self.ops.apply_grad_transpose(v))?;
        Ok(v - self.ops.apply_grad(&theta))
    }
}

/// Draws `k` Gaussian directions from a fixed internal stream, projects out
/// the joint column space of the gradient and annotator operators, and
/// orthonormalizes. Projection and orthonormalization are each applied twice
/// to fight roundoff. The result satisfies Q'Q = I, grad' Q = 0,
/// annot' Q = 0, and is a deterministic function of the design, so repeated
/// calls span the same subspace.
pub fn complement_basis(ops: &DesignOperators, k: usize) -> Result<DMatrix<f64>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x51de_ba5e);
    let (m, n_items, n_ann) = (ops.n_edges(), ops.n_items(), ops.n_annotators());
    if m < 2 * n_ann + n_items {
        return Err(Error::DimensionRequirement {
            edges: m,
            annotators: n_ann,
            items: n_items,
        });
    }

    // Joint Gram [grad, annot]'[grad, annot]. Its kernel is spanned by the
    // per-component constant score vectors, so augmenting with rank-one
    // terms on those directions gives a positive-definite matrix whose
    // Cholesky solve realizes the pseudo-inverse action exactly.
    let d = n_items + n_ann;
    let mut gram = DMatrix::zeros(d, d);
    for e in 0..m {
        let (l, r, a) = (ops.left()[e], ops.right()[e], ops.annotator()[e]);
        gram[(l, l)] += 1.0;
        gram[(r, r)] += 1.0;
        gram[(l, r)] -= 1.0;
        gram[(r, l)] -= 1.0;
        gram[(l, n_items + a)] += 1.0;
        gram[(r, n_items + a)] -= 1.0;
        gram[(n_items + a, l)] += 1.0;
        gram[(n_items + a, r)] -= 1.0;
    }
    let counts = ops.annotator_edge_counts();
    for (a, &c) in counts.iter().enumerate() {
        gram[(n_items + a, n_items + a)] = c as f64;
    }
    let labels = ops.component_labels();
    let mut comp_sizes = vec![0usize; ops.n_components()];
    for &c in labels {
        comp_sizes[c] += 1;
    }
    for i in 0..n_items {
        for j in 0..n_items {
            if labels[i] == labels[j] {
                gram[(i, j)] += 1.0 / comp_sizes[labels[i]] as f64;
            }
        }
    }
    let chol = gram.cholesky().ok_or_else(|| {
        Error::RankDeficiency(
            "joint design Gram is rank-deficient beyond the component constants".into(),
        )
    })?;

    let project = |col: &DVector<f64>| -> DVector<f64> {
        let mut rhs = DVector::zeros(d);
        rhs.rows_mut(0, n_items)
            .copy_from(&ops.apply_grad_transpose(col));
        rhs.rows_mut(n_items, n_ann)
            .copy_from(&ops.apply_annot_transpose(col));
        let z = chol.solve(&rhs);
        let mut out = col.clone();
        out -= ops.apply_grad(&DVector::from(z.rows(0, n_items).clone_owned()));
        out -= ops.apply_annot(&DVector::from(z.rows(n_items, n_ann).clone_owned()));
        out
    };

    let mut basis = DMatrix::from_fn(m, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    for pass in 0..2 {
        for c in 0..k {
            let col = project(&basis.column(c).clone_owned());
            basis.set_column(c, &col);
        }
        let qr = basis.qr();
        let r = qr.r();
        let min_diag = (0..k).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if min_diag < 1e-10 {
            return Err(Error::RankDeficiency(format!(
                "complement basis pass {pass}: QR diagonal {min_diag:.3e}"
            )));
        }
        basis = qr.q();
    }

    verify_complement(ops, &basis)?;
    Ok(basis)
}

/// Checks the three orthogonality conditions entrywise.
fn verify_complement(ops: &DesignOperators, q: &DMatrix<f64>) -> Result<()> {
    const TOL: f64 = 1e-8;
    let k = q.ncols();
    let qtq = q.tr_mul(q);
    let mut max_err = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            max_err = max_err.max((qtq[(i, j)] - target).abs());
        }
    }
    if max_err > TOL {
        return Err(Error::RankDeficiency(format!(
            "complement basis not orthonormal: max |Q'Q - I| = {max_err:.3e}"
        )));
    }
    for c in 0..k {
        let col = q.column(c).clone_owned();
        let g = ops.apply_grad_transpose(&col);
        let a = ops.apply_annot_transpose(&col);
        let worst = g.amax().max(a.amax());
        if worst > TOL {
            return Err(Error::RankDeficiency(format!(
                "complement basis column {c} not orthogonal to design: max entry {worst:.3e}"
            )));
        }
    }
    Ok(())
}

/// Cyclic-Jacobi eigendecomposition for symmetric matrices: returns
/// (eigenvalues, eigenvectors) with M = V diag(l) V'. Slower than a QR
/// iteration but keeps V diagonalizing M to machine precision even for
/// tightly clustered spectra, which is what the knockoff Gram checks need.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let mut a = (m + m.transpose()) * 0.5;
    let mut v = DMatrix::identity(n, n);
    let scale = a.amax().max(1e-300);
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[(p, q)].abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-18 * scale {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    (a.diagonal(), v)
}

/// Minimum-norm solve of a symmetric PSD system through the Jacobi
/// decomposition, clipping eigenvalues below `rel_cut` times the largest.
pub(crate) fn pinv_solve(m: &DMatrix<f64>, rhs: &DVector<f64>, rel_cut: f64) -> DVector<f64> {
    let (vals, vecs) = symmetric_eigen(m);
    let cut = rel_cut * vals.amax().max(1e-300);
    let coeffs = vecs.tr_mul(rhs);
    let scaled = DVector::from_fn(vals.len(), |i, _| {
        if vals[i] > cut {
            coeffs[i] / vals[i]
        } else {
            0.0
        }
    });
    &vecs * scaled
}

/// Symmetric square-root factor: returns C with C'C equal to the positive
/// part of M. Eigenvalues below the clip tolerance are clipped to zero;
/// eigenvalues below the negative tolerance are an error.
pub fn psd_square_root(m: &DMatrix<f64>, clip_tol: Option<f64>) -> Result<DMatrix<f64>> {
    assert_eq!(m.nrows(), m.ncols());
    let (vals, vecs) = symmetric_eigen(m);
    let scale = vals.amax();
    let clip = clip_tol.unwrap_or(1e-10 * scale.max(1e-300));
    let min_eig = vals.min();
    if min_eig < -clip {
        return Err(Error::IndefiniteMatrix {
            min_eig,
            clip_tol: clip,
        });
    }
    let n = m.nrows();
    let mut c = vecs.transpose();
    for i in 0..n {
        let root = if vals[i] > clip { vals[i].sqrt() } else { 0.0 };
        for j in 0..n {
            c[(i, j)] *= root;
        }
    }
    Ok(c)
}

/// Nonnegative least squares: x >= 0 minimizing |G x - b|^2, solved on the
/// normal equations by a Lawson-Hanson style active-set loop.
pub fn nnls(g: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let gram = g.tr_mul(g);
    let h = g.tr_mul(b);
    nnls_gram(&gram, &h)
}

/// Active-set solver for min (1/2) x' M x - h' x with x >= 0, M PSD.
/// KKT at exit: gradient M x - h is >= -tol on zero coordinates and
/// |gradient| <= tol on positive coordinates.
pub(crate) fn nnls_gram(m: &DMatrix<f64>, h: &DVector<f64>) -> Result<DVector<f64>> {
    let n = h.len();
    let scale = h.amax().max(m.amax()).max(1.0);
    let tol = 1e-11 * scale;
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let max_outer = 3 * n + 30;

    for _ in 0..max_outer {
        let w = h - m * &x;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if !passive[j] && w[j] > tol {
                if best.map_or(true, |(_, v)| w[j] > v) {
                    best = Some((j, w[j]));
                }
            }
        }
        let Some((enter, _)) = best else {
            return Ok(x);
        };
        passive[enter] = true;

        // Inner loop: solve the unconstrained subproblem on the passive set
        // and clip along the segment toward it while any coordinate would
        // turn negative.
        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let z = solve_passive(m, h, &idx)?;
            if z.iter().all(|&v| v > 0.0) {
                for (pos, &j) in idx.iter().enumerate() {
                    x[j] = z[pos];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (pos, &j) in idx.iter().enumerate() {
                if z[pos] <= 0.0 {
                    let step = x[j] / (x[j] - z[pos]);
                    alpha = alpha.min(step);
                }
            }
            let alpha = alpha.clamp(0.0, 1.0);
            for (pos, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z[pos] - x[j]);
                if x[j] <= tol.max(1e-300) || (z[pos] <= 0.0 && x[j] < 1e-12 * scale) {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    Err(Error::NonConvergence {
        what: "nonnegative least squares",
        iterations: max_outer,
        residual: (h - m * &x).amax(),
    })
}

/// Solves the unconstrained subproblem restricted to `idx`, with an
/// eigenvalue pseudo-inverse fallback when the Cholesky factorization fails.
fn solve_passive(m: &DMatrix<f64>, h: &DVector<f64>, idx: &[usize]) -> Result<DVector<f64>> {
    let k = idx.len();
    let mut sub = DMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    for (a, &i) in idx.iter().enumerate() {
        rhs[a] = h[i];
        for (b, &j) in idx.iter().enumerate() {
            sub[(a, b)] = m[(i, j)];
        }
    }
    if let Some(chol) = sub.clone().cholesky() {
        return Ok(chol.solve(&rhs));
    }
    Ok(pinv_solve(&sub, &rhs, 1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ComparisonDataset, ComparisonRecord};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rec(a: &str, l: &str, r: &str, y: f64) -> ComparisonRecord {
        ComparisonRecord {
            annotator: a.into(),
            left: l.into(),
            right: r.into(),
            response: y,
        }
    }

    fn random_ops(n_items: usize, n_ann: usize, edges_per_ann: usize, seed: u64) -> DesignOperators {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut recs = Vec::new();
        for a in 0..n_ann {
            for _ in 0..edges_per_ann {
                let i = rng.random_range(0..n_items);
                let mut j = rng.random_range(0..n_items);
                while j == i {
                    j = rng.random_range(0..n_items);
                }
                recs.push(rec(
                    &format!("a{a}"),
                    &format!("i{i}"),
                    &format!("i{j}"),
                    if rng.random_bool(0.5) { 1.0 } else { -1.0 },
                ));
            }
        }
        let ds = ComparisonDataset::from_records(recs).unwrap();
        DesignOperators::from_dataset(&ds).unwrap()
    }

    #[test]
    fn solve_score_two_items() {
        let ds = ComparisonDataset::from_records(vec![rec("a1", "i1", "i2", 1.0)]).unwrap();
        let ops = DesignOperators::from_dataset(&ds).unwrap();
        let sys = LaplacianSystem::new(&ops);
        let theta = sys.solve_score(&DVector::from_vec(vec![1.0, -1.0])).unwrap();
        assert_abs_diff_eq!(theta[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(theta[1], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn solve_score_zero_rhs() {
        let ops = random_ops(5, 2, 8, 1);
        let sys = LaplacianSystem::new(&ops);
        let theta = sys.solve_score(&DVector::zeros(5)).unwrap();
        assert_eq!(theta, DVector::zeros(5));
    }

    #[test]
    fn solve_score_matches_dense_pseudo_inverse() {
        let ops = random_ops(8, 4, 20, 7);
        let sys = LaplacianSystem::new(&ops);
        let lap = ops.grad_dense().tr_mul(&ops.grad_dense());
        let eig = nalgebra::SymmetricEigen::new(lap);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let mut rhs = DVector::from_fn(8, |_, _| rng.sample::<f64, _>(StandardNormal));
            ops.center_per_component(&mut rhs);
            let cut = 1e-9 * eig.eigenvalues.amax();
            let coeffs = eig.eigenvectors.tr_mul(&rhs);
            let scaled = DVector::from_fn(8, |i, _| {
                if eig.eigenvalues[i] > cut {
                    coeffs[i] / eig.eigenvalues[i]
                } else {
                    0.0
                }
            });
            let dense = &eig.eigenvectors * scaled;
            let theta = sys.solve_score(&rhs).unwrap();
            assert!((theta - dense).amax() < 1e-8);
        }
    }

    #[test]
    fn solve_score_is_linear() {
        let ops = random_ops(8, 4, 20, 11);
        let sys = LaplacianSystem::new(&ops);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mk = |rng: &mut ChaCha8Rng| {
            let mut v = DVector::from_fn(8, |_, _| rng.sample::<f64, _>(StandardNormal));
            ops.center_per_component(&mut v);
            v
        };
        for _ in 0..4 {
            let r1 = mk(&mut rng);
            let r2 = mk(&mut rng);
            let (a, b) = (1.7, -0.4);
            let lhs = sys.solve_score(&(a * &r1 + b * &r2)).unwrap();
            let rhs = a * sys.solve_score(&r1).unwrap() + b * sys.solve_score(&r2).unwrap();
            assert!((lhs - rhs).amax() < 1e-8);
        }
    }

    #[test]
    fn complement_basis_boundary_violation() {
        // |E| = 2|U| + |V| - 1 must be rejected with the inequality message.
        let mut recs = Vec::new();
        // 3 items, 2 annotators -> need |E| >= 7; build 6 edges.
        for k in 0..6 {
            recs.push(rec(
                if k < 3 { "a1" } else { "a2" },
                &format!("i{}", k % 3),
                &format!("i{}", (k + 1) % 3),
                1.0,
            ));
        }
        let ds = ComparisonDataset::from_records(recs).unwrap();
        let ops = DesignOperators::from_dataset(&ds).unwrap();
        let err = complement_basis(&ops, 2).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("|E| >= 2|U| + |V|"), "{msg}");
    }

    #[test]
    fn complement_basis_conditions_hold() {
        let ops = random_ops(16, 50, 4, 13);
        assert!(ops.n_edges() >= 2 * 50 + 16);
        let q = complement_basis(&ops, 50).unwrap();
        // verify_complement already ran; spot-check one column anyway.
        let col = q.column(0).clone_owned();
        assert!(ops.apply_grad_transpose(&col).amax() < 1e-8);
        assert!(ops.apply_annot_transpose(&col).amax() < 1e-8);
    }

    #[test]
    fn complement_basis_projector_is_reproducible() {
        // The basis is a deterministic function of the design, so repeated
        // calls span the same subspace: the projectors agree.
        let ops = random_ops(6, 8, 8, 17);
        let q1 = complement_basis(&ops, 8).unwrap();
        let q2 = complement_basis(&ops, 8).unwrap();
        let p1 = &q1 * q1.transpose();
        let p2 = &q2 * q2.transpose();
        assert!((p1 - p2).amax() < 1e-6);
    }

    #[test]
    fn psd_square_root_identity_and_diagonal() {
        let c = psd_square_root(&DMatrix::identity(3, 3), None).unwrap();
        assert!((c.tr_mul(&c) - DMatrix::identity(3, 3)).amax() < 1e-12);
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let c = psd_square_root(&m, None).unwrap();
        assert!((c.tr_mul(&c) - m).amax() < 1e-12);
    }

    #[test]
    fn psd_square_root_random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = DMatrix::from_fn(10, 10, |_, _| rng.sample::<f64, _>(StandardNormal));
        let m = b.tr_mul(&b);
        let c = psd_square_root(&m, None).unwrap();
        assert!((c.tr_mul(&c) - &m).amax() < 1e-10 * m.amax());
    }

    #[test]
    fn psd_square_root_rejects_indefinite() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -0.5]));
        assert!(matches!(
            psd_square_root(&m, None),
            Err(Error::IndefiniteMatrix { .. })
        ));
    }

    #[test]
    fn psd_square_root_clip_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let b = DMatrix::from_fn(6, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let m = b.tr_mul(&b); // rank-4 PSD with zero eigenvalues
        let c1 = psd_square_root(&m, None).unwrap();
        let m1 = c1.tr_mul(&c1);
        let c2 = psd_square_root(&m1, None).unwrap();
        let m2 = c2.tr_mul(&c2);
        assert!((m2 - m1).amax() < 1e-10 * m.amax());
    }

    #[test]
    fn nnls_clamps_identity() {
        let g = DMatrix::identity(2, 2);
        let x = nnls(&g, &DVector::from_vec(vec![1.0, -1.0])).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn nnls_zero_rhs() {
        let g = DMatrix::identity(3, 3);
        let x = nnls(&g, &DVector::zeros(3)).unwrap();
        assert_eq!(x, DVector::zeros(3));
    }

    #[test]
    fn nnls_matches_exhaustive_active_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..5 {
            let g = DMatrix::from_fn(20, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
            let b = DVector::from_fn(20, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = nnls(&g, &b).unwrap();
            let obj = (&g * &x - &b).norm_squared();

            // Enumerate all 2^5 supports; solve each unconstrained and keep
            // feasible candidates.
            let mut best = b.norm_squared(); // empty support
            for mask in 1u32..32 {
                let idx: Vec<usize> = (0..5).filter(|j| mask & (1 << j) != 0).collect();
                let sub = g.select_columns(idx.iter());
                let gram = sub.tr_mul(&sub);
                let rhs = sub.tr_mul(&b);
                let Some(chol) = gram.cholesky() else { continue };
                let z = chol.solve(&rhs);
                if z.iter().all(|&v| v >= -1e-12) {
                    let obj_z = (&sub * &z - &b).norm_squared();
                    if obj_z < best {
                        best = obj_z;
                    }
                }
            }
            assert!(obj <= best + 1e-8, "obj {obj} vs oracle {best}");
            // KKT conditions.
            let grad = g.tr_mul(&(&g * &x - &b));
            for j in 0..5 {
                if x[j] > 0.0 {
                    assert!(grad[j].abs() < 1e-8);
                } else {
                    assert!(grad[j] > -1e-8);
                }
            }
        }
    }
}
