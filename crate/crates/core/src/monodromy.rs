//! Generalized monodromy data: formal monodromies, Stokes matrices, links
//! and handle matrices, with the relation map, the group action, a gauge
//! slice for the quotient, and the tangent-rank check of the relation map.

pub mod sample;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, Matrix};
use crate::par::{self, ExecMode};
use crate::scalar::{Scalar, C64};
use crate::stokes::SingularDirectionTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonodromyError {
    #[error("malformed monodromy data: {0}")]
    Shape(String),
    #[error("Stokes matrix {k} at point {point} has entry ({row},{col}) outside its pattern")]
    SupportViolation { point: usize, k: usize, row: usize, col: usize },
    #[error("{what} is singular")]
    Singular { what: String },
    #[error("relation residual {residual:e} exceeds tolerance {tol:e}")]
    NotOnVariety { residual: f64, tol: f64 },
    #[error("monodromy data is reducible")]
    NotIrreducible,
    #[error("no gauge-fixing pattern applies: the scanned entries vanish")]
    DegenerateOrbit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointData<F: Scalar> {
    pub table: SingularDirectionTable,
    /// Diagonal of the formal monodromy.
    pub gamma_hat: Vec<F>,
    /// `St_{d_1}, ..., St_{d_s}`.
    pub stokes: Vec<Matrix<F>>,
    pub link: Matrix<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonodromyData<F: Scalar> {
    pub r: usize,
    pub points: Vec<PointData<F>>,
    /// `(A_k, B_k)` for `k = 1..g`.
    pub handles: Vec<(Matrix<F>, Matrix<F>)>,
}

/// `(sigma, sigma^(1), ..., sigma^(n))`: a change of basis at the base point
/// and a diagonal rescaling of the formal basis at each point.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement<F: Scalar> {
    pub sigma: Matrix<F>,
    pub tori: Vec<Vec<F>>,
}

/// Entries `(row, col)` allowed to differ from the identity in the Stokes
/// matrix across direction `k` (0-based) of `table`.
pub fn stokes_pattern(table: &SingularDirectionTable, k: usize) -> Vec<(usize, usize)> {
    table.directions[k].pairs.iter().map(|&(j1, j2)| (j2, j1)).collect()
}

impl<F: Scalar> PointData<F> {
    pub fn fuchsian(gamma_hat: Vec<F>, link: Matrix<F>) -> Self {
        let r = gamma_hat.len();
        Self {
            table: SingularDirectionTable {
                point: 0,
                m: 1,
                r,
                directions: Vec::new(),
                base_angle: None,
            },
            gamma_hat,
            stokes: Vec::new(),
            link,
        }
    }

    /// `gamma_hat St_s ... St_1`.
    pub fn top(&self) -> Matrix<F> {
        let mut acc = Matrix::diag(&self.gamma_hat);
        for st in self.stokes.iter().rev() {
            acc = acc.mul(st);
        }
        acc
    }

    /// `L^{-1} Top L`, the loop monodromy seen from the base point.
    pub fn local_monodromy(&self) -> Result<Matrix<F>, MonodromyError> {
        let inv = self.link.inverse().ok_or_else(|| MonodromyError::Singular { what: "link".into() })?;
        Ok(inv.mul(&self.top()).mul(&self.link))
    }
}

impl<F: Scalar> MonodromyData<F> {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn genus(&self) -> usize {
        self.handles.len()
    }

    pub fn validate(&self, tol: f64) -> Result<(), MonodromyError> {
        let r = self.r;
        let square = |m: &Matrix<F>| m.rows() == r && m.cols() == r;
        for (i, p) in self.points.iter().enumerate() {
            if p.gamma_hat.len() != r || !square(&p.link) {
                return Err(MonodromyError::Shape(format!("point {i} has wrong dimensions")));
            }
            if p.gamma_hat.iter().any(|x| x.negligible(0.0) && x.is_zero()) {
                return Err(MonodromyError::Singular { what: format!("formal monodromy at point {i}") });
            }
            if p.stokes.len() != p.table.len() {
                return Err(MonodromyError::Shape(format!(
                    "point {i} has {} Stokes matrices for {} directions",
                    p.stokes.len(),
                    p.table.len()
                )));
            }
            for (k, st) in p.stokes.iter().enumerate() {
                if !square(st) {
                    return Err(MonodromyError::Shape(format!("Stokes matrix {k} at point {i}")));
                }
                let pattern = stokes_pattern(&p.table, k);
                for row in 0..r {
                    for col in 0..r {
                        let expect_one = row == col;
                        let allowed = pattern.contains(&(row, col));
                        let x = &st[(row, col)];
                        let ok = if expect_one {
                            x.near(&F::one(), tol)
                        } else {
                            allowed || x.negligible(tol)
                        };
                        if !ok {
                            return Err(MonodromyError::SupportViolation { point: i, k, row, col });
                        }
                    }
                }
            }
            if p.link.inverse_tol(tol).is_none() {
                return Err(MonodromyError::Singular { what: format!("link at point {i}") });
            }
        }
        for (k, (a, b)) in self.handles.iter().enumerate() {
            if !square(a) || !square(b) {
                return Err(MonodromyError::Shape(format!("handle {k}")));
            }
            if a.inverse_tol(tol).is_none() || b.inverse_tol(tol).is_none() {
                return Err(MonodromyError::Singular { what: format!("handle {k}") });
            }
        }
        Ok(())
    }

    pub fn top_monodromy(&self, i: usize) -> Matrix<F> {
        self.points[i].top()
    }

    /// `B^{-1} A^{-1} B A` for handle `k`.
    pub fn handle_commutator(&self, k: usize) -> Result<Matrix<F>, MonodromyError> {
        let (a, b) = &self.handles[k];
        let ai = a.inverse().ok_or_else(|| MonodromyError::Singular { what: format!("A_{}", k + 1) })?;
        let bi = b.inverse().ok_or_else(|| MonodromyError::Singular { what: format!("B_{}", k + 1) })?;
        Ok(bi.mul(&ai).mul(b).mul(a))
    }

    /// `prod_{i=n..1} L_i^{-1} Top_i L_i  prod_{k=g..1} B_k^{-1} A_k^{-1} B_k A_k`.
    pub fn mu(&self) -> Result<Matrix<F>, MonodromyError> {
        let mut acc = Matrix::identity(self.r);
        for p in self.points.iter().rev() {
            acc = acc.mul(&p.local_monodromy()?);
        }
        for k in (0..self.genus()).rev() {
            acc = acc.mul(&self.handle_commutator(k)?);
        }
        Ok(acc)
    }

    /// `mu - I` and its largest entry.
    pub fn relation_residual(&self) -> Result<(Matrix<F>, f64), MonodromyError> {
        let diff = self.mu()?.sub(&Matrix::identity(self.r));
        let norm = diff.max_abs();
        Ok((diff, norm))
    }

    /// Generators whose common invariant subspaces are the subrepresentations.
    pub fn generators(&self) -> Result<Vec<Matrix<F>>, MonodromyError> {
        let mut gens = Vec::with_capacity(self.n() + 2 * self.genus());
        for p in &self.points {
            gens.push(p.local_monodromy()?);
        }
        for (a, b) in &self.handles {
            gens.push(a.clone());
            gens.push(b.clone());
        }
        Ok(gens)
    }

    /// `L'_i = s^(i) L_i s^{-1}`, `St' = s^(i) St s^(i)^{-1}`,
    /// `A' = s A s^{-1}`, `B' = s B s^{-1}`; formal monodromies are unchanged.
    pub fn act(&self, g: &GroupElement<F>) -> Result<Self, MonodromyError> {
        if g.tori.len() != self.n() {
            return Err(MonodromyError::Shape("group element has the wrong number of tori".into()));
        }
        let s_inv = g.sigma.inverse().ok_or_else(|| MonodromyError::Singular { what: "sigma".into() })?;
        let points = self
            .points
            .iter()
            .zip(&g.tori)
            .map(|(p, t)| {
                let d = Matrix::diag(t);
                let d_inv = Matrix::diag(&t.iter().map(|x| F::one() / x.clone()).collect::<Vec<_>>());
                PointData {
                    table: p.table.clone(),
                    gamma_hat: p.gamma_hat.clone(),
                    stokes: p.stokes.iter().map(|st| d.mul(st).mul(&d_inv)).collect(),
                    link: d.mul(&p.link).mul(&s_inv),
                }
            })
            .collect();
        let handles = self
            .handles
            .iter()
            .map(|(a, b)| (g.sigma.mul(a).mul(&s_inv), g.sigma.mul(b).mul(&s_inv)))
            .collect();
        Ok(Self {
            r: self.r,
            points,
            handles,
        })
    }

    /// Burnside: irreducible iff the generated algebra is all of `Mat_r`.
    pub fn is_irreducible(&self, tol: f64) -> Result<bool, MonodromyError> {
        if self.r == 1 {
            return Ok(true);
        }
        Ok(algebra_dimension(&self.generators()?, tol) == self.r * self.r)
    }

    /// Canonical representative of the orbit: `L_1 = I`, the remaining
    /// links row-normalized (first significant entry of each row is 1), and
    /// the leftover diagonal torus fixed on a spanning tree of off-diagonal
    /// entries (Stokes data at point 1, then links, then handles).
    pub fn normalize(&self, tol: f64) -> Result<Self, MonodromyError> {
        if self.n() == 0 {
            return Err(MonodromyError::Shape("normalization needs at least one point".into()));
        }
        if !self.is_irreducible(tol)? {
            return Err(MonodromyError::NotIrreducible);
        }
        let r = self.r;
        let n = self.n();
        let ones = || vec![F::one(); r];
        // Step 1: L_1 = I.
        let step1 = self.act(&GroupElement {
            sigma: self.points[0].link.clone(),
            tori: vec![ones(); n],
        })?;
        // Step 2: the diagonal torus acting as (D, D, 1, ..., 1).
        let d = torus_from_edges(r, &step1.torus_edges(tol)).ok_or(MonodromyError::DegenerateOrbit)?;
        let mut tori = vec![ones(); n];
        tori[0] = d.clone();
        let step2 = step1.act(&GroupElement {
            sigma: Matrix::diag(&d),
            tori,
        })?;
        // Step 3: row scalings of L_2..L_n.
        let mut tori = vec![ones(); n];
        for (i, p) in step2.points.iter().enumerate().skip(1) {
            for (row, t) in tori[i].iter_mut().enumerate() {
                let lead = leading_column(&p.link, row, tol).ok_or(MonodromyError::DegenerateOrbit)?;
                *t = F::one() / p.link[(row, lead)].clone();
            }
        }
        step2.act(&GroupElement {
            sigma: Matrix::identity(r),
            tori,
        })
    }

    /// Weighted edges `(a, b, v)`: quantities scaling by `D_a / D_b` under
    /// the residual torus once `L_1 = I`.
    fn torus_edges(&self, tol: f64) -> Vec<(usize, usize, F)> {
        let r = self.r;
        let mut edges = Vec::new();
        let p1 = &self.points[0];
        for (k, st) in p1.stokes.iter().enumerate() {
            for (row, col) in stokes_pattern(&p1.table, k) {
                edges.push((row, col, st[(row, col)].clone()));
            }
        }
        for p in self.points.iter().skip(1) {
            for row in 0..r {
                let Some(lead) = leading_column(&p.link, row, tol) else { continue };
                let pivot = p.link[(row, lead)].clone();
                for col in 0..r {
                    if col != lead {
                        // L'_{row,col} / L'_{row,lead} scales by D_lead / D_col.
                        edges.push((lead, col, p.link[(row, col)].clone() / pivot.clone()));
                    }
                }
            }
        }
        for (a, b) in &self.handles {
            for m in [a, b] {
                for row in 0..r {
                    for col in 0..r {
                        if row != col {
                            edges.push((row, col, m[(row, col)].clone()));
                        }
                    }
                }
            }
        }
        edges.retain(|(_, _, v)| !v.negligible(tol.max(1e-300)) && !v.is_zero());
        edges
    }

    /// Free coordinates: Stokes pattern entries, link entries, handle entries.
    pub fn coordinates(&self) -> Vec<F> {
        let mut out = Vec::new();
        for p in &self.points {
            for (k, st) in p.stokes.iter().enumerate() {
                for (row, col) in stokes_pattern(&p.table, k) {
                    out.push(st[(row, col)].clone());
                }
            }
            out.extend(p.link.entries().iter().cloned());
        }
        for (a, b) in &self.handles {
            out.extend(a.entries().iter().cloned());
            out.extend(b.entries().iter().cloned());
        }
        out
    }

    /// Inverse of [`MonodromyData::coordinates`].
    pub fn with_coordinates(&self, x: &[F]) -> Self {
        let r = self.r;
        let mut it = x.iter().cloned();
        let next_matrix = |it: &mut dyn Iterator<Item = F>| Matrix::from_rows((0..r).map(|_| it.take(r).collect()).collect());
        let mut out = self.clone();
        for p in &mut out.points {
            for k in 0..p.stokes.len() {
                for (row, col) in stokes_pattern(&p.table, k) {
                    p.stokes[k][(row, col)] = it.next().expect("coordinate count");
                }
            }
            p.link = next_matrix(&mut it);
        }
        for h in &mut out.handles {
            h.0 = next_matrix(&mut it);
            h.1 = next_matrix(&mut it);
        }
        out
    }

    pub fn to_c64(&self) -> MonodromyData<C64> {
        MonodromyData {
            r: self.r,
            points: self
                .points
                .iter()
                .map(|p| PointData {
                    table: p.table.clone(),
                    gamma_hat: p.gamma_hat.iter().map(Scalar::to_c64).collect(),
                    stokes: p.stokes.iter().map(Matrix::to_c64).collect(),
                    link: p.link.to_c64(),
                })
                .collect(),
            handles: self.handles.iter().map(|(a, b)| (a.to_c64(), b.to_c64())).collect(),
        }
    }

    /// Largest entrywise difference across all components.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for (p, q) in self.points.iter().zip(&other.points) {
            for (a, b) in p.gamma_hat.iter().zip(&q.gamma_hat) {
                worst = worst.max((a.clone() - b.clone()).magnitude());
            }
            for (a, b) in p.stokes.iter().zip(&q.stokes) {
                worst = worst.max(a.max_abs_diff(b));
            }
            worst = worst.max(p.link.max_abs_diff(&q.link));
        }
        for ((a1, b1), (a2, b2)) in self.handles.iter().zip(&other.handles) {
            worst = worst.max(a1.max_abs_diff(a2)).max(b1.max_abs_diff(b2));
        }
        worst
    }
}

fn leading_column<F: Scalar>(m: &Matrix<F>, row: usize, tol: f64) -> Option<usize> {
    let scale = (0..m.cols()).map(|c| m[(row, c)].magnitude()).fold(0.0, f64::max);
    (0..m.cols()).find(|&c| {
        let x = &m[(row, c)];
        !x.is_zero() && x.magnitude() > tol * scale
    })
}

/// Torus `D` (with `D_0 = 1`) making the first spanning-tree edges equal 1:
/// `D_a / D_b * v = 1`.
fn torus_from_edges<F: Scalar>(r: usize, edges: &[(usize, usize, F)]) -> Option<Vec<F>> {
    let mut parent: Vec<usize> = (0..r).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut x = x;
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut tree: Vec<(usize, usize, F)> = Vec::new();
    for (a, b, v) in edges {
        if a == b {
            continue;
        }
        let (ra, rb) = (find(&mut parent, *a), find(&mut parent, *b));
        if ra != rb {
            parent[ra] = rb;
            tree.push((*a, *b, v.clone()));
        }
        if tree.len() + 1 == r {
            break;
        }
    }
    if tree.len() + 1 != r {
        return None;
    }
    let mut d: Vec<Option<F>> = vec![None; r];
    d[0] = Some(F::one());
    // Propagate along the tree until every index is set.
    let mut changed = true;
    while changed {
        changed = false;
        for (a, b, v) in &tree {
            match (&d[*a], &d[*b]) {
                (None, Some(db)) => {
                    d[*a] = Some(db.clone() / v.clone());
                    changed = true;
                }
                (Some(da), None) => {
                    d[*b] = Some(da.clone() * v.clone());
                    changed = true;
                }
                _ => {}
            }
        }
    }
    d.into_iter().collect()
}

/// Dimension of the unital algebra generated by `gens`.
pub fn algebra_dimension<F: Scalar>(gens: &[Matrix<F>], tol: f64) -> usize {
    let Some(first) = gens.first() else { return 1 };
    let r = first.rows();
    let mut basis: Vec<Matrix<F>> = Vec::new();
    let mut rows: Vec<Vec<F>> = Vec::new();
    let mut queue = vec![Matrix::identity(r)];
    let normalize = |m: Matrix<F>| {
        if F::EXACT {
            m
        } else {
            let s = m.max_abs();
            if s > 0.0 {
                m.scale(&F::from_parts(1.0 / s, 0.0))
            } else {
                m
            }
        }
    };
    while let Some(m) = queue.pop() {
        if basis.len() == r * r {
            break;
        }
        let mut trial = rows.clone();
        trial.push(m.to_vec());
        if Matrix::from_rows(trial.clone()).rank(tol) > basis.len() {
            rows = trial;
            for g in gens {
                queue.push(normalize(m.mul(g)));
            }
            basis.push(m);
        }
    }
    basis.len()
}

impl<F: Scalar> GroupElement<F> {
    pub fn identity(r: usize, n: usize) -> Self {
        Self {
            sigma: Matrix::identity(r),
            tori: vec![vec![F::one(); r]; n],
        }
    }

    /// `(c I, (c, ..., c))`, which acts trivially.
    pub fn scalar(c: F, r: usize, n: usize) -> Self {
        Self {
            sigma: Matrix::identity(r).scale(&c),
            tori: vec![vec![c; r]; n],
        }
    }

    /// `self * other`: acting by the product equals acting by `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            sigma: self.sigma.mul(&other.sigma),
            tori: self
                .tori
                .iter()
                .zip(&other.tori)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x.clone() * y.clone()).collect())
                .collect(),
        }
    }
}

/// Dimension counts: the moduli formula, the monodromy-side count
/// `dim S - (r^2 - 1) - (dim G - 1)`, and `dim S` itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub moduli: i64,
    pub monodromy: i64,
    #[serde(rename = "S")]
    pub s: i64,
}

pub fn expected_dimension(g: usize, r: usize, m: &[usize]) -> Dimensions {
    let (g, r, n) = (g as i64, r as i64, m.len() as i64);
    let sum_m: i64 = m.iter().map(|&x| x as i64).sum();
    let moduli = 2 * r * r * (g - 1) + sum_m * r * (r - 1) + 2;
    let s = (sum_m - n) * r * (r - 1) + (n + 2 * g) * r * r;
    let dim_g = r * r + n * r;
    Dimensions {
        moduli,
        monodromy: s - (r * r - 1) - (dim_g - 1),
        s,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankOptions {
    /// Relative finite-difference step.
    pub step: f64,
    /// Singular values below `threshold * sigma_max` count as zero.
    pub threshold: f64,
    /// Largest relation residual accepted as "on the variety".
    pub residual_tol: f64,
    pub mode: ExecMode,
}

impl Default for RankOptions {
    fn default() -> Self {
        Self {
            step: 1e-6,
            threshold: 1e-8,
            residual_tol: 1e-8,
            mode: ExecMode::Parallel,
        }
    }
}

/// Central-difference Jacobian of `mu` over the free coordinates, with
/// formal monodromies held fixed. Columns are independent and computed
/// through [`par::map`].
pub fn dmu_jacobian(data: &MonodromyData<C64>, opts: &RankOptions) -> Result<Matrix<C64>, MonodromyError> {
    let x0 = data.coordinates();
    let r2 = data.r * data.r;
    let cols: Vec<Result<Vec<C64>, MonodromyError>> = par::map_range(opts.mode, x0.len(), |c| {
        let h = opts.step * x0[c].norm().max(1.0);
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[c] += h;
        xm[c] -= h;
        let fp = data.with_coordinates(&xp).mu()?;
        let fm = data.with_coordinates(&xm).mu()?;
        Ok(fp.sub(&fm).to_vec().into_iter().map(|v| v / (2.0 * h)).collect())
    });
    let cols = cols.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(Matrix::from_fn(r2, x0.len(), |i, j| cols[j][i]))
}

/// Numerical rank of `d mu` at a point of the variety.
pub fn tangent_rank_dmu(data: &MonodromyData<C64>, opts: &RankOptions) -> Result<usize, MonodromyError> {
    let (_, residual) = data.relation_residual()?;
    if residual > opts.residual_tol {
        return Err(MonodromyError::NotOnVariety {
            residual,
            tol: opts.residual_tol,
        });
    }
    if data.r == 1 {
        // sl_1 = 0, and det mu is constant on the variety.
        return Ok(0);
    }
    let j = dmu_jacobian(data, opts)?;
    Ok(linalg::numerical_rank(&j, opts.threshold))
}
