//! Fixed-size 3x3 real linear algebra on top of `nalgebra`: sorted SVD,
//! clustered symmetric eigenspaces, eigenanalysis of orthogonal matrices and
//! the calculus of sets of mutually orthogonal subspaces of R^3.

use std::cmp::Ordering;

use nalgebra::SymmetricEigen;
use thiserror::Error;

pub type Mat3 = nalgebra::Matrix3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

/// Numerical thresholds shared by the whole decision procedure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Absolute slack on coefficient comparisons.
    pub eps: f64,
    /// Singular values below `eps_rank * largest singular value in the graph` count as zero.
    pub eps_rank: f64,
    /// Eigenvalues closer than `eps_cluster * largest |eigenvalue|` are merged (chain clustering).
    pub eps_cluster: f64,
    /// Two directions coincide when the cosine of their angle is at least `1 - eps_orth`.
    pub eps_orth: f64,
    /// An orthogonal matrix with `|sin(theta)|` above this has non-real eigenvalues.
    pub eps_imag: f64,
    /// Relative residual allowed when checking a computed diagonalization.
    pub eps_residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps: 1e-9,
            eps_rank: 1e-8,
            eps_cluster: 1e-7,
            eps_orth: 1e-9,
            eps_imag: 1e-7,
            eps_residual: 1e-7,
        }
    }
}

impl Tolerances {
    pub fn with_eps(eps: f64) -> Tolerances {
        Tolerances {
            eps,
            ..Tolerances::default()
        }
    }

    pub fn validate(&self) -> Result<(), Mat3Error> {
        let all = [
            ("eps", self.eps),
            ("eps_rank", self.eps_rank),
            ("eps_cluster", self.eps_cluster),
            ("eps_orth", self.eps_orth),
            ("eps_imag", self.eps_imag),
            ("eps_residual", self.eps_residual),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(Mat3Error::InvalidTolerance { name, value: v });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Mat3Error {
    #[error("matrix is not orthogonal (|O^T O - I| = {defect:e})")]
    NotOrthogonal { defect: f64 },
    #[error("subspace set spans only {dim} dimensions")]
    NotSpanning { dim: usize },
    #[error("tolerance {name} = {value} must be positive and finite")]
    InvalidTolerance { name: &'static str, value: f64 },
}

/// `m = u * diag(s) * v^T` with `s` sorted descending.
#[derive(Clone, Copy, Debug)]
pub struct Svd3 {
    pub u: Mat3,
    pub s: Vec3,
    pub v: Mat3,
}

pub fn svd3(m: &Mat3) -> Svd3 {
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested V^T").transpose();
    let s = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(Ordering::Equal));
    let mut out = Svd3 {
        u: Mat3::zeros(),
        s: Vec3::zeros(),
        v: Mat3::zeros(),
    };
    for (dst, &src) in order.iter().enumerate() {
        out.u.set_column(dst, &u.column(src));
        out.v.set_column(dst, &v.column(src));
        out.s[dst] = s[src];
    }
    out
}

/// Number of singular values above `eps_rank * scale`.
pub fn rank_eps(m: &Mat3, eps_rank: f64, scale: f64) -> usize {
    if scale <= 0.0 {
        return 0;
    }
    svd3(m).s.iter().filter(|&&x| x > eps_rank * scale).count()
}

pub fn largest_singular_value(m: &Mat3) -> f64 {
    svd3(m).s[0]
}

pub fn orthogonality_defect(o: &Mat3) -> f64 {
    (o.transpose() * o - Mat3::identity()).norm()
}

pub fn is_orthogonal(o: &Mat3, eps_orth: f64) -> bool {
    o.iter().all(|x| x.is_finite()) && orthogonality_defect(o) <= eps_orth
}

/// Nearest orthogonal matrix (polar factor).
pub fn polar(o: &Mat3) -> Mat3 {
    let svd = svd3(o);
    svd.u * svd.v.transpose()
}

fn normalized(v: Vec3) -> Vec3 {
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        v
    }
}

/// Flips `v` so that its largest-magnitude component is positive; ties
/// within 1e-9 resolve to the first index.
pub fn sign_normalize(v: Vec3) -> Vec3 {
    let max = v.amax();
    let lead = (0..3).find(|&i| v[i].abs() >= max - 1e-9).unwrap_or(0);
    if v[lead] < 0.0 {
        -v
    } else {
        v
    }
}

/// A linear subspace of R^3 held as orthonormal spanning vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    basis: Vec<Vec3>,
}

impl Subspace {
    /// Orthonormalizes `vectors` by modified Gram-Schmidt, dropping
    /// directions already spanned (residual norm below 1e-8).
    pub fn span(vectors: &[Vec3]) -> Subspace {
        let mut basis: Vec<Vec3> = Vec::new();
        for v in vectors {
            let mut w = *v;
            for _ in 0..2 {
                for b in &basis {
                    w -= b * b.dot(&w);
                }
            }
            let scale = v.norm();
            if scale > 0.0 && w.norm() > 1e-8 * scale {
                basis.push(normalized(w));
            }
        }
        Subspace { basis }
    }

    pub fn full() -> Subspace {
        Subspace {
            basis: vec![Vec3::x(), Vec3::y(), Vec3::z()],
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec3] {
        &self.basis
    }

    pub fn projector(&self) -> Mat3 {
        self.basis.iter().fold(Mat3::zeros(), |acc, b| acc + b * b.transpose())
    }

    /// True when the angle between `v` and the subspace has cosine at least `1 - eps_orth`.
    pub fn contains_vector(&self, v: &Vec3, eps_orth: f64) -> bool {
        let n = v.norm();
        if n == 0.0 {
            return true;
        }
        (self.projector() * v).norm() >= (1.0 - eps_orth) * n
    }

    pub fn contains(&self, other: &Subspace, eps_orth: f64) -> bool {
        other.basis.iter().all(|b| self.contains_vector(b, eps_orth))
    }

    /// Intersection via principal angles: the eigenvectors of `P_a P_b P_a`
    /// whose eigenvalue (a squared cosine) is at least `(1 - eps_orth)^2`.
    pub fn intersect(&self, other: &Subspace, eps_orth: f64) -> Subspace {
        if self.dim() == 3 {
            return other.clone();
        }
        if other.dim() == 3 {
            return self.clone();
        }
        // A line either lies inside the other subspace or meets it trivially.
        if self.dim() == 1 {
            return if other.contains(self, eps_orth) {
                self.clone()
            } else {
                Subspace::span(&[])
            };
        }
        if other.dim() == 1 {
            return if self.contains(other, eps_orth) {
                other.clone()
            } else {
                Subspace::span(&[])
            };
        }
        let pa = self.projector();
        let m = pa * other.projector() * pa;
        let m = (m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(m);
        let threshold = (1.0 - eps_orth).powi(2);
        let mut dirs: Vec<(f64, Vec3)> = (0..3)
            .filter(|&i| eig.eigenvalues[i] >= threshold)
            .map(|i| (eig.eigenvalues[i], pa * eig.eigenvectors.column(i)))
            .collect();
        dirs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
        let vecs: Vec<Vec3> = dirs.into_iter().map(|(_, v)| v).collect();
        Subspace::span(&vecs)
    }

    pub fn rotated(&self, o: &Mat3) -> Subspace {
        Subspace {
            basis: self.basis.iter().map(|b| o * b).collect(),
        }
    }

    /// Deterministic orthonormal basis: repeatedly take the coordinate axis
    /// with the largest remaining projection (lowest index on ties).
    fn canonical_basis(&self) -> Vec<Vec3> {
        let mut p = self.projector();
        let mut out = Vec::with_capacity(self.dim());
        for _ in 0..self.dim() {
            let norms: Vec<f64> = (0..3).map(|i| p.column(i).norm()).collect();
            let best = norms.iter().cloned().fold(0.0, f64::max);
            let axis = (0..3).find(|&i| norms[i] >= best - 1e-12).unwrap_or(0);
            let v = sign_normalize(normalized(p.column(axis).into_owned()));
            p -= v * v.transpose();
            out.push(v);
        }
        out
    }
}

/// A set of mutually orthogonal subspaces of R^3.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthoSubspaceSet {
    subspaces: Vec<Subspace>,
}

impl OrthoSubspaceSet {
    pub fn full() -> OrthoSubspaceSet {
        OrthoSubspaceSet {
            subspaces: vec![Subspace::full()],
        }
    }

    pub fn empty() -> OrthoSubspaceSet {
        OrthoSubspaceSet { subspaces: vec![] }
    }

    /// `{span(e1), span(e2), span(e3)}`.
    pub fn coordinate_lines() -> OrthoSubspaceSet {
        OrthoSubspaceSet::from_subspaces((0..3).map(|i| Subspace::span(&[Vec3::ith(i, 1.0)])).collect())
    }

    /// Empty subspaces are dropped; orthogonality is the caller's promise.
    pub fn from_subspaces(subspaces: Vec<Subspace>) -> OrthoSubspaceSet {
        OrthoSubspaceSet {
            subspaces: subspaces.into_iter().filter(|s| s.dim() > 0).collect(),
        }
    }

    /// Builds a set and checks mutual orthogonality to `eps_orth`.
    pub fn new(subspaces: Vec<Subspace>, eps_orth: f64) -> Option<OrthoSubspaceSet> {
        let set = OrthoSubspaceSet::from_subspaces(subspaces);
        for (i, a) in set.subspaces.iter().enumerate() {
            for b in &set.subspaces[i + 1..] {
                for x in a.basis() {
                    for y in b.basis() {
                        if x.dot(y).abs() > eps_orth.sqrt() {
                            return None;
                        }
                    }
                }
            }
        }
        if set.dim() > 3 {
            return None;
        }
        Some(set)
    }

    pub fn subspaces(&self) -> &[Subspace] {
        &self.subspaces
    }

    pub fn len(&self) -> usize {
        self.subspaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subspaces.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.subspaces.iter().map(Subspace::dim).sum()
    }

    pub fn spans_r3(&self) -> bool {
        self.dim() == 3
    }

    /// All pairwise intersections, dropping the trivial ones.
    pub fn intersect(&self, other: &OrthoSubspaceSet, eps_orth: f64) -> OrthoSubspaceSet {
        let mut out = Vec::new();
        for a in &self.subspaces {
            for b in &other.subspaces {
                let c = a.intersect(b, eps_orth);
                if c.dim() > 0 {
                    out.push(c);
                }
            }
        }
        OrthoSubspaceSet { subspaces: out }
    }

    /// Applies `o` to every spanning vector, without checking orthogonality.
    pub fn rotated(&self, o: &Mat3) -> OrthoSubspaceSet {
        OrthoSubspaceSet {
            subspaces: self.subspaces.iter().map(|s| s.rotated(o)).collect(),
        }
    }

    pub fn rotate_set(&self, o: &Mat3, eps_orth: f64) -> Result<OrthoSubspaceSet, Mat3Error> {
        if !is_orthogonal(o, eps_orth) {
            return Err(Mat3Error::NotOrthogonal {
                defect: orthogonality_defect(o),
            });
        }
        Ok(self.rotated(o))
    }

    /// Some subspace of `self` contains `v`.
    pub fn contains_vector(&self, v: &Vec3, eps_orth: f64) -> bool {
        self.subspaces.iter().any(|s| s.contains_vector(v, eps_orth))
    }

    /// Every subspace of `self` lies inside some subspace of `coarser`.
    pub fn refines(&self, coarser: &OrthoSubspaceSet, eps_orth: f64) -> bool {
        self.subspaces
            .iter()
            .all(|s| coarser.subspaces.iter().any(|c| c.contains(s, eps_orth)))
    }

    /// Equality as mutual containment.
    pub fn same_as(&self, other: &OrthoSubspaceSet, eps_orth: f64) -> bool {
        self.refines(other, eps_orth) && other.refines(self, eps_orth)
    }

    /// Canonical ordered orthonormal basis drawn from the subspaces.
    ///
    /// Each subspace is completed from coordinate axes by largest projection,
    /// every vector is sign-normalized, and the triple is sorted by source
    /// dimension (descending) and then lexicographically descending.
    pub fn choose_basis(&self) -> Result<[Vec3; 3], Mat3Error> {
        if !self.spans_r3() {
            return Err(Mat3Error::NotSpanning { dim: self.dim() });
        }
        let mut tagged: Vec<(usize, Vec3)> = self
            .subspaces
            .iter()
            .flat_map(|s| s.canonical_basis().into_iter().map(move |v| (s.dim(), v)))
            .collect();
        tagged.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| lex_desc(&a.1, &b.1)));
        Ok([tagged[0].1, tagged[1].1, tagged[2].1])
    }
}

fn lex_desc(a: &Vec3, b: &Vec3) -> Ordering {
    for i in 0..3 {
        if (a[i] - b[i]).abs() > 1e-9 {
            return b[i].partial_cmp(&a[i]).unwrap_or(Ordering::Equal);
        }
    }
    Ordering::Equal
}

/// Maximal eigenspaces of a symmetric matrix after chain-clustering
/// eigenvalues whose consecutive gaps are at most `eps_cluster * max|lambda|`.
pub fn sym_eigenspaces(s: &Mat3, tol: &Tolerances) -> OrthoSubspaceSet {
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut pairs: Vec<(f64, Vec3)> = (0..3)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
    let scale = pairs.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return OrthoSubspaceSet::full();
    }
    let gap = tol.eps_cluster * scale;
    let mut clusters: Vec<Vec<Vec3>> = vec![vec![pairs[0].1]];
    for w in 1..3 {
        if pairs[w - 1].0 - pairs[w].0 <= gap {
            clusters.last_mut().expect("non-empty").push(pairs[w].1);
        } else {
            clusters.push(vec![pairs[w].1]);
        }
    }
    OrthoSubspaceSet::from_subspaces(clusters.iter().map(|c| Subspace::span(c)).collect())
}

/// Left (`left = true`) or right singular subspaces of `m`, grouped the way
/// the eigenspaces of `m m^T` (resp. `m^T m`) are, but clustered on the
/// singular values themselves: values at most `eps_rank * scale` count as
/// zero, and the rest chain-cluster with gap `eps_cluster * s_max`. This keeps
/// the grouping consistent with the rank classification of the same matrix.
pub fn singular_subspaces(m: &Mat3, tol: &Tolerances, scale: f64, left: bool) -> OrthoSubspaceSet {
    let svd = svd3(m);
    let basis = if left { svd.u } else { svd.v };
    let zero = tol.eps_rank * scale;
    let s: Vec<f64> = svd.s.iter().map(|&x| if x <= zero { 0.0 } else { x }).collect();
    if s[0] == 0.0 {
        return OrthoSubspaceSet::full();
    }
    let gap = tol.eps_cluster * s[0];
    let mut clusters: Vec<Vec<Vec3>> = vec![vec![basis.column(0).into_owned()]];
    for i in 1..3 {
        let merge = if s[i] == 0.0 {
            s[i - 1] == 0.0
        } else {
            s[i - 1] - s[i] <= gap
        };
        if merge {
            clusters
                .last_mut()
                .expect("non-empty")
                .push(basis.column(i).into_owned());
        } else {
            clusters.push(vec![basis.column(i).into_owned()]);
        }
    }
    OrthoSubspaceSet::from_subspaces(clusters.iter().map(|c| Subspace::span(c)).collect())
}

/// Real eigenspaces of an orthogonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthoEigen {
    pub plus: Subspace,
    pub minus: Subspace,
}

impl OrthoEigen {
    pub fn as_set(&self) -> OrthoSubspaceSet {
        OrthoSubspaceSet::from_subspaces(vec![self.plus.clone(), self.minus.clone()])
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrthoEigenError {
    #[error("orthogonal matrix has non-real eigenvalues (|sin theta| = {sin_theta:e})")]
    NonRealEigenvalues { sin_theta: f64 },
    #[error(transparent)]
    NotOrthogonal(#[from] Mat3Error),
}

/// An orthogonal 3x3 matrix has eigenvalues `{det} u {e^{+i theta}, e^{-i theta}}`.
/// Returns the +1 and -1 eigenspaces when `|sin theta| <= eps_imag`.
pub fn ortho_eigen(o: &Mat3, tol: &Tolerances) -> Result<OrthoEigen, OrthoEigenError> {
    if !is_orthogonal(o, tol.eps_orth) {
        return Err(Mat3Error::NotOrthogonal {
            defect: orthogonality_defect(o),
        }
        .into());
    }
    let anti = (o - o.transpose()) * 0.5;
    let sin_theta = anti.norm() / std::f64::consts::SQRT_2;
    if sin_theta > tol.eps_imag {
        return Err(OrthoEigenError::NonRealEigenvalues { sin_theta });
    }
    let eig = SymmetricEigen::new((o + o.transpose()) * 0.5);
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for i in 0..3 {
        let v = eig.eigenvectors.column(i).into_owned();
        if eig.eigenvalues[i] > 0.0 {
            plus.push(v);
        } else {
            minus.push(v);
        }
    }
    Ok(OrthoEigen {
        plus: Subspace::span(&plus),
        minus: Subspace::span(&minus),
    })
}

/// Rotation by `angle` about the unit `axis` (right-hand rule).
pub fn axis_angle_matrix(axis: &Vec3, angle: f64) -> Mat3 {
    nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(*axis), angle).into_inner()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const S2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn swap12() -> Mat3 {
        Mat3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0)
    }

    fn line(x: f64, y: f64, z: f64) -> Subspace {
        Subspace::span(&[Vec3::new(x, y, z)])
    }

    fn assert_vec_eq(a: &Vec3, b: &Vec3) {
        assert!((a - b).norm() < 1e-12, "{a:?} != {b:?}");
    }

    #[test]
    fn svd_examples() {
        let s = svd3(&Mat3::identity());
        assert_vec_eq(&s.s, &Vec3::new(1.0, 1.0, 1.0));
        let xy = Mat3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_vec_eq(&svd3(&xy).s, &Vec3::new(1.0, 1.0, 0.0));
        let d = Mat3::from_diagonal(&Vec3::new(-2.0, 3.0, -1.0));
        let s = svd3(&d);
        assert_vec_eq(&s.s, &Vec3::new(3.0, 2.0, 1.0));
        assert!((s.u * Mat3::from_diagonal(&s.s) * s.v.transpose() - d).norm() < 1e-12);
    }

    #[test]
    fn svd_of_rank_deficient_matrix_has_orthogonal_factors() {
        let m = Vec3::new(1.0, 2.0, 3.0) * Vec3::new(0.5, -1.0, 0.0).transpose();
        let s = svd3(&m);
        assert!(orthogonality_defect(&s.u) < 1e-12);
        assert!(orthogonality_defect(&s.v) < 1e-12);
        assert!((s.u * Mat3::from_diagonal(&s.s) * s.v.transpose() - m).norm() < 1e-12);
    }

    #[test]
    fn rank_examples() {
        let d = Mat3::from_diagonal(&Vec3::new(-2.0, 3.0, -1.0));
        assert_eq!(rank_eps(&d, 1e-8, 3.0), 3);
        let xy = Mat3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(rank_eps(&xy, 1e-8, 1.0), 2);
        assert_eq!(rank_eps(&Mat3::zeros(), 1e-8, 0.0), 0);
        assert_eq!(rank_eps(&Mat3::zeros(), 1e-8, 1.0), 0);
    }

    #[test]
    fn eigenspace_examples() {
        let s = sym_eigenspaces(&Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 0.0)), &tol());
        assert_eq!(s.len(), 2);
        assert_eq!(s.subspaces()[0].dim(), 2);
        assert!(s.subspaces()[1].contains_vector(&Vec3::z(), 1e-12));

        let s = sym_eigenspaces(&Mat3::from_diagonal(&Vec3::new(9.0, 4.0, 1.0)), &tol());
        assert_eq!(s.len(), 3);
        assert!(s.same_as(&OrthoSubspaceSet::coordinate_lines(), 1e-12));

        assert_eq!(sym_eigenspaces(&Mat3::zeros(), &tol()), OrthoSubspaceSet::full());
    }

    #[test]
    fn eigenvalue_clustering_boundary() {
        let t = tol();
        // The eigenvalues of a diagonal matrix are its entries exactly, so the
        // gaps below are known without rounding from an eigensolver.
        let inside = 1.0 + t.eps_cluster / 2.0;
        let s = sym_eigenspaces(&Mat3::from_diagonal(&Vec3::new(1.0, inside, 0.0)), &t);
        assert_eq!(s.subspaces().iter().map(Subspace::dim).collect::<Vec<_>>(), vec![2, 1]);
        let outside = 1.0 + 4.0 * t.eps_cluster;
        let s = sym_eigenspaces(&Mat3::from_diagonal(&Vec3::new(1.0, outside, 0.0)), &t);
        assert_eq!(s.len(), 3);
        // Chain clustering is transitive: two sub-threshold gaps merge all three.
        let g = 0.8 * t.eps_cluster;
        let s = sym_eigenspaces(&Mat3::from_diagonal(&Vec3::new(1.0, 1.0 - g, 1.0 - 2.0 * g)), &t);
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn intersect_examples() {
        let e = 1e-9;
        let x = OrthoSubspaceSet::coordinate_lines();
        assert!(OrthoSubspaceSet::full().intersect(&x, e).same_as(&x, e));

        let a = OrthoSubspaceSet::from_subspaces(vec![Subspace::span(&[Vec3::x(), Vec3::y()]), line(0.0, 0.0, 1.0)]);
        let b = OrthoSubspaceSet::from_subspaces(vec![line(1.0, 0.0, 0.0), Subspace::span(&[Vec3::y(), Vec3::z()])]);
        assert!(a.intersect(&b, e).same_as(&x, e));

        let a = OrthoSubspaceSet::from_subspaces(vec![Subspace::span(&[Vec3::x(), Vec3::y()])]);
        let b = OrthoSubspaceSet::from_subspaces(vec![line(1.0, 1.0, 0.0)]);
        let c = a.intersect(&b, e);
        assert_eq!(c.len(), 1);
        assert!(c.subspaces()[0].contains_vector(&Vec3::new(S2, S2, 0.0), 1e-12));
    }

    #[test]
    fn rotate_set_examples() {
        let e1 = OrthoSubspaceSet::from_subspaces(vec![line(1.0, 0.0, 0.0)]);
        assert_eq!(e1.rotate_set(&Mat3::identity(), 1e-9).unwrap(), e1);
        let r = e1.rotate_set(&swap12(), 1e-9).unwrap();
        assert!(r.subspaces()[0].contains_vector(&Vec3::y(), 1e-12));
        let t = axis_angle_matrix(&Vec3::z(), std::f64::consts::FRAC_PI_4);
        let r = e1.rotate_set(&t, 1e-9).unwrap();
        assert!(r.subspaces()[0].contains_vector(&Vec3::new(1.0, 1.0, 0.0), 1e-12));
        assert!(e1.rotate_set(&(2.0 * Mat3::identity()), 1e-9).is_err());
    }

    #[test]
    fn spans_examples() {
        assert!(OrthoSubspaceSet::full().spans_r3());
        let two = OrthoSubspaceSet::from_subspaces(vec![line(1.0, 0.0, 0.0), line(0.0, 1.0, 0.0)]);
        assert!(!two.spans_r3());
        assert!(OrthoSubspaceSet::coordinate_lines().spans_r3());
    }

    #[test]
    fn choose_basis_examples() {
        let shuffled =
            OrthoSubspaceSet::from_subspaces(vec![line(0.0, 1.0, 0.0), line(-1.0, 0.0, 0.0), line(0.0, 0.0, 1.0)]);
        let b = shuffled.choose_basis().unwrap();
        assert_vec_eq(&b[0], &Vec3::x());
        assert_vec_eq(&b[1], &Vec3::y());
        assert_vec_eq(&b[2], &Vec3::z());

        let b = OrthoSubspaceSet::full().choose_basis().unwrap();
        assert_vec_eq(&b[0], &Vec3::x());
        assert_vec_eq(&b[2], &Vec3::z());

        let split = OrthoSubspaceSet::from_subspaces(vec![
            line(0.0, 0.0, 1.0),
            Subspace::span(&[Vec3::new(S2, S2, 0.0), Vec3::new(S2, -S2, 0.0)]),
        ]);
        let b = split.choose_basis().unwrap();
        assert_vec_eq(&b[0], &Vec3::x());
        assert_vec_eq(&b[1], &Vec3::y());
        assert_vec_eq(&b[2], &Vec3::z());

        let diag =
            OrthoSubspaceSet::from_subspaces(vec![line(0.0, 0.0, 1.0), line(-1.0, 1.0, 0.0), line(1.0, 1.0, 0.0)]);
        let b = diag.choose_basis().unwrap();
        assert_vec_eq(&b[0], &Vec3::new(S2, S2, 0.0));
        assert_vec_eq(&b[1], &Vec3::new(S2, -S2, 0.0));
        assert_vec_eq(&b[2], &Vec3::z());

        assert!(matches!(
            OrthoSubspaceSet::from_subspaces(vec![line(1.0, 0.0, 0.0)]).choose_basis(),
            Err(Mat3Error::NotSpanning { dim: 1 })
        ));
    }

    #[test]
    fn ortho_eigen_examples() {
        let t = tol();
        let id = ortho_eigen(&Mat3::identity(), &t).unwrap();
        assert_eq!(id.plus.dim(), 3);
        assert_eq!(id.minus.dim(), 0);

        let sw = ortho_eigen(&swap12(), &t).unwrap();
        assert_eq!(sw.plus.dim(), 2);
        assert!(sw.plus.contains_vector(&Vec3::new(1.0, 1.0, 0.0), 1e-12));
        assert!(sw.plus.contains_vector(&Vec3::z(), 1e-12));
        assert!(sw.minus.contains_vector(&Vec3::new(1.0, -1.0, 0.0), 1e-12));
        for x in sw.plus.basis() {
            assert!((swap12() * x - x).norm() < 1e-12);
        }
        for x in sw.minus.basis() {
            assert!((swap12() * x + x).norm() < 1e-12);
        }

        let quarter = axis_angle_matrix(&Vec3::z(), std::f64::consts::FRAC_PI_2);
        assert!(matches!(
            ortho_eigen(&quarter, &t),
            Err(OrthoEigenError::NonRealEigenvalues { .. })
        ));
        let half = axis_angle_matrix(&Vec3::z(), std::f64::consts::PI);
        let h = ortho_eigen(&half, &t).unwrap();
        assert_eq!((h.plus.dim(), h.minus.dim()), (1, 2));
        assert!(matches!(
            ortho_eigen(&(2.0 * Mat3::identity()), &t),
            Err(OrthoEigenError::NotOrthogonal(_))
        ));
    }

    fn arb_mat() -> impl Strategy<Value = Mat3> {
        proptest::array::uniform9(-10.0f64..10.0).prop_map(|a| Mat3::from_row_slice(&a))
    }

    fn arb_rotation() -> impl Strategy<Value = Mat3> {
        (proptest::array::uniform3(-1.0f64..1.0), 0.0f64..std::f64::consts::PI).prop_filter_map(
            "nonzero axis",
            |(a, t)| {
                let v = Vec3::from(a);
                (v.norm() > 1e-3).then(|| axis_angle_matrix(&v, t))
            },
        )
    }

    fn arb_set() -> impl Strategy<Value = OrthoSubspaceSet> {
        (arb_rotation(), 0usize..5).prop_map(|(o, shape)| {
            let c: Vec<Vec3> = (0..3).map(|i| o.column(i).into_owned()).collect();
            let subs = match shape {
                0 => vec![Subspace::span(&c)],
                1 => vec![Subspace::span(&c[..2]), Subspace::span(&c[2..])],
                2 => c.iter().map(|v| Subspace::span(&[*v])).collect(),
                3 => vec![Subspace::span(&c[..1]), Subspace::span(&c[1..2])],
                _ => vec![Subspace::span(&c[1..])],
            };
            OrthoSubspaceSet::from_subspaces(subs)
        })
    }

    proptest! {
        #[test]
        fn svd_reconstructs(m in arb_mat()) {
            let s = svd3(&m);
            let r = s.u * Mat3::from_diagonal(&s.s) * s.v.transpose();
            prop_assert!((r - m).norm() <= 1e-12 * m.norm().max(1.0));
            prop_assert!(s.s[0] >= s.s[1] && s.s[1] >= s.s[2] && s.s[2] >= 0.0);
            prop_assert!(orthogonality_defect(&s.u) < 1e-12);
            prop_assert!(orthogonality_defect(&s.v) < 1e-12);
        }

        #[test]
        fn intersect_identity_and_commutativity(a in arb_set(), b in arb_set()) {
            let e = 1e-9;
            prop_assert!(OrthoSubspaceSet::full().intersect(&a, e).same_as(&a, e));
            prop_assert!(a.intersect(&b, e).same_as(&b.intersect(&a, e), e));
            prop_assert!(a.intersect(&b, e).refines(&a, e));
        }

        #[test]
        fn intersect_associative(a in arb_set(), b in arb_set(), c in arb_set()) {
            let e = 1e-9;
            let l = a.intersect(&b, e).intersect(&c, e);
            let r = a.intersect(&b.intersect(&c, e), e);
            prop_assert!(l.same_as(&r, e));
        }

        #[test]
        fn rotation_preserves_spanning(s in arb_set(), o in arb_rotation()) {
            prop_assert_eq!(s.rotate_set(&o, 1e-9).unwrap().spans_r3(), s.spans_r3());
        }

        #[test]
        fn ortho_eigen_residual(o in arb_rotation(), flip in any::<bool>(), pi in any::<bool>()) {
            let mut o = o;
            if pi {
                // snap to a half-turn about the same axis so eigenvalues are real
                let axis = nalgebra::Rotation3::from_matrix(&o).axis().map(|a| a.into_inner()).unwrap_or(Vec3::x());
                o = axis_angle_matrix(&axis, std::f64::consts::PI);
            }
            if flip { o = -o; }
            match ortho_eigen(&o, &tol()) {
                Ok(e) => {
                    for x in e.plus.basis() { prop_assert!((o * x - x).norm() <= 1e-9); }
                    for x in e.minus.basis() { prop_assert!((o * x + x).norm() <= 1e-9); }
                    prop_assert_eq!(e.plus.dim() + e.minus.dim(), 3);
                }
                Err(OrthoEigenError::NonRealEigenvalues { .. }) => prop_assert!(!pi),
                Err(err) => prop_assert!(false, "{}", err),
            }
        }

        #[test]
        fn choose_basis_is_orthonormal_and_inside(s in arb_set()) {
            if s.spans_r3() {
                let b = s.choose_basis().unwrap();
                let m = Mat3::from_columns(&b);
                prop_assert!(orthogonality_defect(&m) < 1e-9);
                for v in &b { prop_assert!(s.contains_vector(v, 1e-9)); }
            }
        }
    }
}
