//! Biorthogonal eigensystems of Liouvillians and exceptional-point tooling.
//!
//! Indices are zero-based throughout; index 0 is the eigenvalue with the
//! largest real part, which for a valid Liouvillian is the steady state.

use crate::error::{Error, Result};
use crate::linalg::{dot, eig_general, eig_hermitian, inverse, solve, CMatrix, CVector, C64, ONE};
use crate::Extended;

/// Condition number above which the spectral basis is treated as unusable.
pub const CONDITION_LIMIT: f64 = 1e6;

/// Eigenvalues with paired right and left eigenvectors, ⟨⟨χ_n|φ_m⟩⟩ = δ_nm.
#[derive(Clone, Debug)]
pub struct BiorthogonalSpectrum {
    pub values: Vec<C64>,
    pub right: Vec<CVector>,
    pub left: Vec<CVector>,
    /// max_n ‖χ_n‖; grows without bound as an exceptional point is approached.
    pub condition: f64,
    pub ep_clusters: Vec<EpCluster>,
    pub warnings: Vec<String>,
}

/// A group of coalescing eigenpairs.
#[derive(Clone, Debug, PartialEq)]
pub struct EpCluster {
    pub members: Vec<usize>,
    pub value: C64,
    pub order: usize,
    /// 1 − smallest pairwise eigenvector angle-sine among the members.
    pub coalescence: f64,
    /// Eigenvector followed by the generalised vector, when computed.
    pub jordan_chain: Option<Vec<CVector>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpTolerances {
    pub eig_tol: f64,
    pub vec_tol: f64,
}

impl EpTolerances {
    pub fn default_for(values: &[C64]) -> Self {
        let scale = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        Self { eig_tol: 1e-7 * scale.max(1e-300), vec_tol: 1e-4 }
    }
}

impl BiorthogonalSpectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, n: usize) -> f64 {
        self.values[n].re
    }

    pub fn y(&self, n: usize) -> f64 {
        self.values[n].im
    }

    /// υ_nm = x_n − x_m.
    pub fn upsilon(&self, n: usize, m: usize) -> f64 {
        self.x(n) - self.x(m)
    }

    /// β_nm = y_n − y_m.
    pub fn beta(&self, n: usize, m: usize) -> f64 {
        self.y(n) - self.y(m)
    }

    pub fn has_ep(&self) -> bool {
        !self.ep_clusters.is_empty()
    }

    pub fn is_ill_conditioned(&self) -> bool {
        !(self.condition <= CONDITION_LIMIT)
    }

    /// Whether the plain eigenbasis may be used for spectral sums.
    pub fn is_usable(&self) -> bool {
        !self.has_ep() && !self.is_ill_conditioned()
    }

    /// max |⟨⟨χ_n|φ_m⟩⟩ − δ_nm|.
    pub fn biorthogonality_error(&self) -> f64 {
        let n = self.len();
        let mut e: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let want = if a == b { ONE } else { C64::new(0.0, 0.0) };
                e = e.max((dot(&self.left[a], &self.right[b]) - want).norm());
            }
        }
        e
    }

    /// Σ_n |φ_n⟩⟩⟨⟨χ_n|.
    pub fn resolution(&self) -> CMatrix {
        let n = self.len();
        let mut acc = CMatrix::zeros(n, n);
        for k in 0..n {
            acc = &acc + &CMatrix::outer(&self.right[k], &self.left[k]);
        }
        acc
    }

    /// Σ_n L_n |φ_n⟩⟩⟨⟨χ_n|.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.len();
        let mut acc = CMatrix::zeros(n, n);
        for k in 0..n {
            acc = &acc + &CMatrix::outer(&self.right[k], &self.left[k]).scale(self.values[k]);
        }
        acc
    }

    /// Right-eigenvector matrix with columns φ_n.
    pub fn right_matrix(&self) -> CMatrix {
        CMatrix::from_columns(&self.right)
    }

    /// Attaches order-2 Jordan chains to every flagged cluster.
    pub fn attach_chains(&mut self, l: &CMatrix) -> Result<()> {
        let clusters = std::mem::take(&mut self.ep_clusters);
        let mut out = Vec::with_capacity(clusters.len());
        for cl in clusters {
            out.push(jordan_chain(l, &cl)?);
        }
        self.ep_clusters = out;
        Ok(())
    }
}

fn angle_sine(u: &[C64], v: &[C64]) -> f64 {
    let nu = dot(u, u).re.sqrt();
    let nv = dot(v, v).re.sqrt();
    if nu == 0.0 || nv == 0.0 {
        return 1.0;
    }
    let ov = dot(u, v).norm() / (nu * nv);
    (1.0 - (ov * ov).min(1.0)).sqrt()
}

/// Sort: descending real part (values within `tol` share a bucket), then ascending imaginary part.
fn spectral_order(values: &[C64], tol: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].re.total_cmp(&values[a].re));
    let mut out = Vec::with_capacity(idx.len());
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end - 1]].re - values[idx[end]].re <= tol {
            end += 1;
        }
        let mut bucket = idx[start..end].to_vec();
        bucket.sort_by(|&a, &b| values[a].im.total_cmp(&values[b].im));
        out.extend(bucket);
        start = end;
    }
    out
}

/// Groups indices whose eigenvalues lie within `tol` of each other (transitively).
fn value_groups(values: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b.max(a)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut roots: Vec<usize> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match roots.iter().position(|&x| x == r) {
            Some(k) => groups[k].push(i),
            None => {
                roots.push(r);
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// Right vectors from L, left vectors from L†, paired and scaled so ⟨⟨χ_n|φ_m⟩⟩ = δ_nm.
pub fn biorthogonal_spectrum(l: &CMatrix) -> Result<BiorthogonalSpectrum> {
    let n = l.require_square()?;
    let er = eig_general(l)?;
    let el = eig_general(&l.adjoint())?;
    let scale = er.values.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let order = spectral_order(&er.values, 1e-9 * scale);
    let values: Vec<C64> = order.iter().map(|&k| er.values[k]).collect();
    let right: Vec<CVector> = order.iter().map(|&k| er.vector(k)).collect();

    let mut taken = vec![false; n];
    let mut left = Vec::with_capacity(n);
    for &lam in &values {
        let (j, _) = (0..n)
            .filter(|&j| !taken[j])
            .map(|j| (j, (el.values[j].conj() - lam).norm()))
            .fold((usize::MAX, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        taken[j] = true;
        left.push(el.vector(j));
    }

    let tols = EpTolerances::default_for(&values);
    let mut warnings = Vec::new();
    let groups = value_groups(&values, tols.eig_tol);
    for g in groups.iter().filter(|g| g.len() > 1) {
        let mut min_sine: f64 = 1.0;
        for (a, &i) in g.iter().enumerate() {
            for &j in &g[a + 1..] {
                min_sine = min_sine.min(angle_sine(&right[i], &right[j]));
            }
        }
        if 1.0 - min_sine > 0.99 {
            warnings.push(format!(
                "eigenvectors {:?} nearly coalesce (angle-sine {min_sine:.2e})",
                g
            ));
            continue;
        }
        // Degenerate but diagonalisable: biorthogonalise the block.
        let x = CMatrix::from_columns(&g.iter().map(|&i| left[i].clone()).collect::<Vec<_>>());
        let phi = CMatrix::from_columns(&g.iter().map(|&i| right[i].clone()).collect::<Vec<_>>());
        let overlap = x.adjoint().matmul(&phi);
        match inverse(&overlap) {
            Ok(inv) => {
                let fixed = x.matmul(&inv.adjoint());
                for (k, &i) in g.iter().enumerate() {
                    left[i] = fixed.column(k);
                }
            }
            Err(_) => warnings.push(format!("singular overlap in degenerate block {:?}", g)),
        }
    }

    let mut condition: f64 = 0.0;
    for k in 0..n {
        let s = dot(&left[k], &right[k]);
        if s.norm() == 0.0 {
            condition = f64::INFINITY;
            continue;
        }
        left[k] = left[k].scale(ONE / s.conj());
        condition = condition.max(left[k].norm());
    }
    if condition > CONDITION_LIMIT {
        warnings.push(format!("ill-conditioned eigenbasis (condition {condition:.3e})"));
    }

    let mut s = BiorthogonalSpectrum { values, right, left, condition, ep_clusters: Vec::new(), warnings };
    s.ep_clusters = detect_eps(&s, tols.eig_tol, tols.vec_tol);
    Ok(s)
}

/// Clusters of (nearly) equal eigenvalues whose eigenvectors coalesce.
///
/// Degenerate eigenvalues with independent eigenvectors are not reported.
pub fn detect_eps(s: &BiorthogonalSpectrum, eig_tol: f64, vec_tol: f64) -> Vec<EpCluster> {
    let mut out = Vec::new();
    for g in value_groups(&s.values, eig_tol) {
        if g.len() < 2 {
            continue;
        }
        // connect members whose vectors are nearly parallel
        let mut comp: Vec<usize> = (0..g.len()).collect();
        let mut min_sine = vec![1.0f64; g.len()];
        for a in 0..g.len() {
            for b in a + 1..g.len() {
                let sn = angle_sine(&s.right[g[a]], &s.right[g[b]]);
                if sn < vec_tol {
                    let (ca, cb) = (comp[a], comp[b]);
                    for cmp in comp.iter_mut() {
                        if *cmp == cb {
                            *cmp = ca;
                        }
                    }
                }
                min_sine[a] = min_sine[a].min(sn);
                min_sine[b] = min_sine[b].min(sn);
            }
        }
        let mut seen = Vec::new();
        for a in 0..g.len() {
            if seen.contains(&comp[a]) {
                continue;
            }
            seen.push(comp[a]);
            let members: Vec<usize> =
                (0..g.len()).filter(|&b| comp[b] == comp[a]).map(|b| g[b]).collect();
            if members.len() < 2 {
                continue;
            }
            let value = members.iter().map(|&i| s.values[i]).sum::<C64>() / members.len() as f64;
            let ms = (0..g.len())
                .filter(|&b| comp[b] == comp[a])
                .map(|b| min_sine[b])
                .fold(1.0, f64::min);
            out.push(EpCluster {
                order: members.len(),
                members,
                value,
                coalescence: (1.0 - ms).clamp(0.0, 1.0),
                jordan_chain: None,
            });
        }
    }
    out
}

/// Builds the order-2 Jordan chain {φ, φ'} with (L − λ)φ' = φ for a flagged cluster.
pub fn jordan_chain(l: &CMatrix, cluster: &EpCluster) -> Result<EpCluster> {
    if cluster.order != 2 {
        return Err(Error::Unsupported(format!(
            "Jordan chains of order {} (only order 2 is supported)",
            cluster.order
        )));
    }
    let n = l.require_square()?;
    let mut a = l.clone();
    for i in 0..n {
        a[(i, i)] -= cluster.value;
    }
    let ata = a.adjoint().matmul(&a);
    let eh = eig_hermitian(&ata)?;
    let scale = ata.max_abs().max(1e-300);
    if eh.values[1].re < 1e-12 * scale {
        return Err(Error::Invalid("cluster is not defective: (L − λ) has a 2-dimensional kernel".into()));
    }
    let phi = eh.vector(0);
    let mut m = ata.clone();
    m = &m + &CMatrix::outer(&phi, &phi);
    let rhs = a.adjoint().mat_vec(&phi);
    let rhs_m = CMatrix::from_columns(&[rhs]);
    let x = solve(&m, &rhs_m)?.column(0);
    let res = a.mat_vec(&x).max_diff(&phi);
    if res > 1e-6 * (1.0 + x.norm()) {
        return Err(Error::Invalid(format!("inconsistent Jordan chain system (residual {res:.3e})")));
    }
    let mut out = cluster.clone();
    out.jordan_chain = Some(vec![phi, x]);
    Ok(out)
}

/// Δ = 2√(γx² − ω²) and χ = |2ω/√(γx² − ω²)| for the spin-flip family.
pub fn splitting_susceptibility(omega: f64, gamma_x: f64) -> (C64, Extended) {
    let root = C64::new(gamma_x * gamma_x - omega * omega, 0.0).sqrt();
    let split = root * 2.0;
    let chi = if root.norm() == 0.0 {
        Extended::Divergent
    } else {
        Extended::Finite((2.0 * omega / root).norm())
    };
    (split, chi)
}

/// Υ = |φ_n⟩⟩⟨⟨χ_m|, an eigenmatrix of [L, ·] with eigenvalue L_n − L_m.
pub fn pi_eigenmatrix(s: &BiorthogonalSpectrum, n: usize, m: usize) -> (CMatrix, C64) {
    (CMatrix::outer(&s.right[n], &s.left[m]), s.values[n] - s.values[m])
}
