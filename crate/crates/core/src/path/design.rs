//! Design-side state shared by the path engines.
//!
//! Every engine consumes only Gram blocks and cross products of the design
//! with the response, so a path is a function of (X'X, X'Y) alone. The same
//! struct covers the raw design, the knockoff-extended design, and reduced
//! designs with no score block.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::data::DesignOperators;
use crate::error::{Error, Result};
use crate::knockoff::KnockoffFeatures;

/// Gram/cross form of a design `[grad, G]` where `G` carries the gamma
/// coordinates (annotator columns, possibly followed by their knockoffs).
pub struct PathDesign {
    n_theta: usize,
    n_gamma: usize,
    gram_tt: DMatrix<f64>,
    gram_tg: DMatrix<f64>,
    /// Transposed copy of `gram_tg`, kept for fast gemv in the hot loop.
    gram_gt: DMatrix<f64>,
    gram_gg: DMatrix<f64>,
    cross_t: DVector<f64>,
    cross_g: DVector<f64>,
    /// Profiled Gram G'(I-H)G and cross G'(I-H)Y.
    sigma: DMatrix<f64>,
    b: DVector<f64>,
    /// Cholesky factor of the Laplacian augmented by per-component rank-one
    /// terms; solves against it realize the Laplacian pseudo-inverse for
    /// right-hand sides orthogonal to the component constants.
    theta_solver: Option<Cholesky<f64, Dyn>>,
    components: Vec<usize>,
    component_sizes: Vec<usize>,
    y_norm: f64,
}

impl PathDesign {
    /// Raw design: gamma coordinates are the annotator columns.
    pub fn from_operators(ops: &DesignOperators, y: &DVector<f64>) -> Result<Self> {
        Self::build(ops, None, y)
    }

    /// Knockoff-extended design: gamma coordinates are the annotator columns
    /// followed by their knockoff copies (2|U| in total).
    pub fn from_extended(
        ops: &DesignOperators,
        ko: &KnockoffFeatures,
        y: &DVector<f64>,
    ) -> Result<Self> {
        Self::build(ops, Some(&ko.a_tilde), y)
    }

    fn build(
        ops: &DesignOperators,
        a_tilde: Option<&DMatrix<f64>>,
        y: &DVector<f64>,
    ) -> Result<Self> {
        let m = ops.n_edges();
        assert_eq!(y.len(), m);
        let nt = ops.n_items();
        let nu = ops.n_annotators();
        let ng = if a_tilde.is_some() { 2 * nu } else { nu };
        if let Some(at) = a_tilde {
            assert_eq!(at.nrows(), m);
            assert_eq!(at.ncols(), nu);
        }

        // Laplacian grad'grad accumulated from edges.
        let mut gram_tt = DMatrix::zeros(nt, nt);
        for e in 0..m {
            let (l, r) = (ops.left()[e], ops.right()[e]);
            gram_tt[(l, l)] += 1.0;
            gram_tt[(r, r)] += 1.0;
            gram_tt[(l, r)] -= 1.0;
            gram_tt[(r, l)] -= 1.0;
        }

        // grad'G and annot blocks of G'G.
        let mut gram_tg = DMatrix::zeros(nt, ng);
        let mut gram_gg = DMatrix::zeros(ng, ng);
        let counts = ops.annotator_edge_counts();
        for e in 0..m {
            let (l, r, a) = (ops.left()[e], ops.right()[e], ops.annotator()[e]);
            gram_tg[(l, a)] += 1.0;
            gram_tg[(r, a)] -= 1.0;
            if let Some(at) = a_tilde {
                for j in 0..nu {
                    let v = at[(e, j)];
                    gram_tg[(l, nu + j)] += v;
                    gram_tg[(r, nu + j)] -= v;
                    gram_gg[(a, nu + j)] += v;
                }
            }
        }
        for (a, &c) in counts.iter().enumerate() {
            gram_gg[(a, a)] = c as f64;
        }
        if let Some(at) = a_tilde {
            let att = at.tr_mul(at);
            gram_gg.view_mut((nu, nu), (nu, nu)).copy_from(&att);
            for a in 0..nu {
                for j in 0..nu {
                    gram_gg[(nu + j, a)] = gram_gg[(a, nu + j)];
                }
            }
        }

        let mut cross_t = ops.apply_grad_transpose(y);
        let mut cross_g = DVector::zeros(ng);
        cross_g
            .rows_mut(0, nu)
            .copy_from(&ops.apply_annot_transpose(y));
        if let Some(at) = a_tilde {
            cross_g.rows_mut(nu, nu).copy_from(&at.tr_mul(y));
        }

        // Augment the Laplacian with per-component rank-one terms; the
        // factor then solves the pseudo-inverse exactly on the mean-zero
        // subspace.
        let components = ops.component_labels().to_vec();
        let n_components = ops.n_components();
        let mut component_sizes = vec![0usize; n_components];
        for &c in &components {
            component_sizes[c] += 1;
        }
        let mut aug = gram_tt.clone();
        for i in 0..nt {
            for j in 0..nt {
                if components[i] == components[j] {
                    aug[(i, j)] += 1.0 / component_sizes[components[i]] as f64;
                }
            }
        }
        let theta_solver = Cholesky::new(aug).ok_or_else(|| {
            Error::RankDeficiency("augmented Laplacian is not positive definite".into())
        })?;

        center(&mut cross_t, &components, &component_sizes);

        let mut design = PathDesign {
            n_theta: nt,
            n_gamma: ng,
            gram_gt: gram_tg.transpose(),
            gram_tt,
            gram_tg,
            gram_gg,
            cross_t,
            cross_g,
            sigma: DMatrix::zeros(0, 0),
            b: DVector::zeros(0),
            theta_solver: Some(theta_solver),
            components,
            component_sizes,
            y_norm: y.norm(),
        };
        design.profile();
        Ok(design)
    }

    /// Reduced design with no score block: gamma coordinates are the columns
    /// of `x` directly.
    pub fn from_columns(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        assert_eq!(x.nrows(), y.len());
        let gram_gg = x.tr_mul(x);
        let cross_g = x.tr_mul(y);
        PathDesign {
            n_theta: 0,
            n_gamma: x.ncols(),
            gram_tt: DMatrix::zeros(0, 0),
            gram_tg: DMatrix::zeros(0, x.ncols()),
            gram_gt: DMatrix::zeros(x.ncols(), 0),
            sigma: gram_gg.clone(),
            b: cross_g.clone(),
            gram_gg,
            cross_g,
            cross_t: DVector::zeros(0),
            theta_solver: None,
            components: Vec::new(),
            component_sizes: Vec::new(),
            y_norm: y.norm(),
        }
    }

    /// Profiles the score block out: sigma = G'G - (grad'G)' L^+ (grad'G)
    /// and b = G'Y - (grad'G)' L^+ grad'Y.
    fn profile(&mut self) {
        let z = self.theta_solve(&self.cross_t);
        self.b = &self.cross_g - &self.gram_gt * &z;
        let mut sigma = self.gram_gg.clone();
        for j in 0..self.n_gamma {
            let col = self.gram_tg.column(j).clone_owned();
            let zj = self.theta_solve(&col);
            let corr = &self.gram_gt * &zj;
            for i in 0..self.n_gamma {
                sigma[(i, j)] -= corr[i];
            }
        }
        // Symmetrize: the column-wise solves introduce asymmetric roundoff.
        self.sigma = (&sigma + sigma.transpose()) * 0.5;
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_gamma(&self) -> usize {
        self.n_gamma
    }

    pub fn y_norm(&self) -> f64 {
        self.y_norm
    }

    /// Profiled Gram matrix of the gamma block.
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Profiled correlation of the gamma block with the response.
    pub fn profiled_cross(&self) -> &DVector<f64> {
        &self.b
    }

    pub(crate) fn gram_tt(&self) -> &DMatrix<f64> {
        &self.gram_tt
    }

    pub(crate) fn gram_tg(&self) -> &DMatrix<f64> {
        &self.gram_tg
    }

    pub(crate) fn gram_gt(&self) -> &DMatrix<f64> {
        &self.gram_gt
    }

    pub(crate) fn gram_gg(&self) -> &DMatrix<f64> {
        &self.gram_gg
    }

    pub(crate) fn cross_t(&self) -> &DVector<f64> {
        &self.cross_t
    }

    pub(crate) fn cross_g(&self) -> &DVector<f64> {
        &self.cross_g
    }

    /// Minimum-norm solve against the Laplacian block: returns the
    /// per-component mean-zero theta with (grad'grad) theta = rhs.
    pub fn theta_solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let Some(solver) = &self.theta_solver else {
            return DVector::zeros(0);
        };
        let mut r = rhs.clone();
        center(&mut r, &self.components, &self.component_sizes);
        let mut x = solver.solve(&r);
        center(&mut x, &self.components, &self.component_sizes);
        x
    }

    /// The least-squares score for the current response, gamma held at zero.
    pub fn initial_theta(&self) -> DVector<f64> {
        self.theta_solve(&self.cross_t)
    }

    /// Score block profiled at a given gamma.
    pub fn theta_at(&self, gamma: &DVector<f64>) -> DVector<f64> {
        if self.n_theta == 0 {
            return DVector::zeros(0);
        }
        let rhs = &self.cross_t - &self.gram_tg * gamma;
        self.theta_solve(&rhs)
    }

    /// Power-iteration estimate of |X'X|_2 for the full design (score and
    /// gamma blocks jointly).
    pub fn spectral_norm_estimate(&self) -> f64 {
        let n = self.n_theta + self.n_gamma;
        let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.01 * (i as f64 % 17.0));
        v /= v.norm();
        let mut lam = 0.0;
        for _ in 0..120 {
            let mut w = DVector::zeros(n);
            let (vt, vg) = (v.rows(0, self.n_theta), v.rows(self.n_theta, self.n_gamma));
            if self.n_theta > 0 {
                let top = &self.gram_tt * vt + &self.gram_tg * vg;
                w.rows_mut(0, self.n_theta).copy_from(&top);
            }
            let bottom = &self.gram_gt * vt + &self.gram_gg * vg;
            w.rows_mut(self.n_theta, self.n_gamma).copy_from(&bottom);
            let norm = w.norm();
            if norm == 0.0 {
                return 0.0;
            }
            lam = norm;
            v = w / norm;
        }
        lam
    }

    /// Swaps gamma coordinate `j` with coordinate `half + j` in every block,
    /// i.e. exchanges an original column with its knockoff copy.
    pub fn swap_gamma_pair(&self, j: usize, half: usize) -> Self {
        let a = j;
        let b = half + j;
        let mut out = PathDesign {
            n_theta: self.n_theta,
            n_gamma: self.n_gamma,
            gram_tt: self.gram_tt.clone(),
            gram_tg: self.gram_tg.clone(),
            gram_gt: self.gram_gt.clone(),
            gram_gg: self.gram_gg.clone(),
            cross_t: self.cross_t.clone(),
            cross_g: self.cross_g.clone(),
            sigma: self.sigma.clone(),
            b: self.b.clone(),
            theta_solver: self.theta_solver.clone(),
            components: self.components.clone(),
            component_sizes: self.component_sizes.clone(),
            y_norm: self.y_norm,
        };
        out.gram_tg.swap_columns(a, b);
        out.gram_gt.swap_rows(a, b);
        out.gram_gg.swap_columns(a, b);
        out.gram_gg.swap_rows(a, b);
        out.sigma.swap_columns(a, b);
        out.sigma.swap_rows(a, b);
        out.cross_g.swap_rows(a, b);
        out.b.swap_rows(a, b);
        out
    }
}

fn center(v: &mut DVector<f64>, components: &[usize], sizes: &[usize]) {
    if sizes.is_empty() {
        return;
    }
    let mut sums = vec![0.0; sizes.len()];
    for (i, &c) in components.iter().enumerate() {
        sums[c] += v[i];
    }
    for (i, &c) in components.iter().enumerate() {
        v[i] -= sums[c] / sizes[c] as f64;
    }
}
