//! Sparse quasi-Newton updates.
//!
//! A [`SparsityPattern`] fixes the set `F` of entries allowed to be nonzero
//! and with it the submanifold `S = {P ≻ 0 | P_ij = 0 for (i,j) ∉ F}`. For a
//! chordal pattern the θ_V-projection onto `S` has a closed form through the
//! maximum-determinant completion of a partial matrix, which is computed
//! here clique by clique.
//!
//! Vertex indices are 0-based throughout the API; the text pattern format
//! is 1-based.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{solve_theta_determinant, v_bregman_divergence};
use crate::linalg::{CholeskyFactor, PDMatrix, SymMatrix};
use crate::potentials::Potential;
use crate::updates::{dfp_update, v_bfgs_update, SecantPair};

/// Symmetric set of off-diagonal positions; the diagonal is always present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    adjacency: Vec<BTreeSet<usize>>,
}

impl SparsityPattern {
    /// Builds a pattern from 0-based pairs. Diagonal pairs are accepted and
    /// ignored; each off-diagonal pair is added in both orientations.
    pub fn new<I>(n: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n == 0 {
            return Err(Error::InvalidParameter("pattern dimension must be positive".into()));
        }
        let mut adjacency = vec![BTreeSet::new(); n];
        for (i, j) in pairs {
            if i >= n || j >= n {
                return Err(Error::InvalidParameter(format!(
                    "pattern entry ({i}, {j}) out of range for n = {n}"
                )));
            }
            if i != j {
                adjacency[i].insert(j);
                adjacency[j].insert(i);
            }
        }
        Ok(Self { n, adjacency })
    }

    pub fn full(n: usize) -> Self {
        Self::banded(n, n.saturating_sub(1))
    }

    pub fn diagonal(n: usize) -> Self {
        Self::banded(n, 0)
    }

    /// Entries with `|i − j| ≤ bandwidth`.
    pub fn banded(n: usize, bandwidth: usize) -> Self {
        let mut adjacency = vec![BTreeSet::new(); n];
        for i in 0..n {
            for j in (i + 1)..n.min(i + bandwidth + 1) {
                adjacency[i].insert(j);
                adjacency[j].insert(i);
            }
        }
        Self { n, adjacency }
    }

    pub fn tridiagonal(n: usize) -> Self {
        Self::banded(n, 1)
    }

    /// Parses the text format: first line `n`, then one `i j` pair per line
    /// (1-based, upper triangle). Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::InvalidParameter("empty pattern file".into()))?;
        let n: usize = first
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("line 1: expected dimension, got `{first}`")))?;
        let mut pairs = Vec::new();
        for (lineno, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed: Option<Vec<usize>> = fields.iter().map(|f| f.parse().ok()).collect();
            match parsed.as_deref() {
                Some(&[i, j]) if i >= 1 && j >= 1 && i <= n && j <= n => pairs.push((i - 1, j - 1)),
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "line {lineno}: expected two indices in 1..={n}, got `{line}`"
                    )))
                }
            }
        }
        Self::new(n, pairs)
    }

    /// Inverse of [`SparsityPattern::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for (i, j) in self.edges() {
            out.push_str(&format!("{} {}\n", i + 1, j + 1));
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i == j || self.adjacency[i].contains(&j)
    }

    pub fn neighbors(&self, i: usize) -> &BTreeSet<usize> {
        &self.adjacency[i]
    }

    /// Off-diagonal positions `(i, j)`, `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, adj) in self.adjacency.iter().enumerate() {
            out.extend(adj.range(i + 1..).map(|&j| (i, j)));
        }
        out
    }

    /// Number of free parameters of a symmetric matrix on the pattern.
    pub fn dimension(&self) -> usize {
        self.n + self.edges().len()
    }

    /// Frobenius-orthonormal basis of the symmetric matrices supported on
    /// the pattern: `E_ii`, then `(e_i e_jᵀ + e_j e_iᵀ)/√2` per edge.
    pub fn basis(&self) -> Vec<SymMatrix> {
        let n = self.n;
        let mut out = Vec::with_capacity(self.dimension());
        for i in 0..n {
            let mut m = DMatrix::zeros(n, n);
            m[(i, i)] = 1.0;
            out.push(SymMatrix::new(m).expect("square"));
        }
        for (i, j) in self.edges() {
            let mut m = DMatrix::zeros(n, n);
            m[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
            m[(j, i)] = std::f64::consts::FRAC_1_SQRT_2;
            out.push(SymMatrix::new(m).expect("square"));
        }
        out
    }

    /// `max |M_ij|` over positions outside the pattern.
    pub fn off_pattern_max(&self, m: &DMatrix<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if !self.contains(i, j) {
                    worst = worst.max(m[(i, j)].abs());
                }
            }
        }
        worst
    }
}

impl fmt::Display for SparsityPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Chordal structure of a pattern: a perfect elimination ordering and the
/// maximal cliques ordered so that the running intersection property holds
/// towards later cliques.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliqueTree {
    n: usize,
    elimination_order: Vec<usize>,
    cliques: Vec<Vec<usize>>,
    separators: Vec<Vec<usize>>,
    residuals: Vec<Vec<usize>>,
    parents: Vec<Option<usize>>,
}

impl CliqueTree {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Perfect elimination ordering of the pattern graph.
    pub fn elimination_order(&self) -> &[usize] {
        &self.elimination_order
    }

    /// Maximal cliques `C_1, …, C_ℓ`, each sorted.
    pub fn cliques(&self) -> &[Vec<usize>] {
        &self.cliques
    }

    /// `S_r = C_r ∩ (C_{r+1} ∪ … ∪ C_ℓ)`.
    pub fn separators(&self) -> &[Vec<usize>] {
        &self.separators
    }

    /// `U_r = C_r \ S_r`. The residuals partition the vertex set.
    pub fn residuals(&self) -> &[Vec<usize>] {
        &self.residuals
    }

    /// For each clique, a later clique containing its separator (`None` when
    /// the separator is empty).
    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }
}

/// Maximum cardinality search, ties broken by the smallest index. Returns
/// the visit order; its reverse is a perfect elimination ordering exactly
/// when the graph is chordal.
fn maximum_cardinality_search(p: &SparsityPattern) -> Vec<usize> {
    let n = p.n();
    let mut weight = vec![0usize; n];
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !visited[v])
            .max_by(|&a, &b| weight[a].cmp(&weight[b]).then(b.cmp(&a)))
            .expect("unvisited vertex");
        visited[v] = true;
        order.push(v);
        for &w in p.neighbors(v) {
            if !visited[w] {
                weight[w] += 1;
            }
        }
    }
    order
}

/// A chordless cycle of length at least 4, as a vertex list.
fn chordless_cycle(p: &SparsityPattern) -> Option<Vec<usize>> {
    let n = p.n();
    for v in 0..n {
        let nb: Vec<usize> = p.neighbors(v).iter().copied().collect();
        for (a, &u) in nb.iter().enumerate() {
            for &w in &nb[a + 1..] {
                if p.contains(u, w) {
                    continue;
                }
                // Shortest u–w path avoiding v and its other neighbours is
                // induced, and closes into a chordless cycle through v.
                let mut blocked = vec![false; n];
                blocked[v] = true;
                for &x in &nb {
                    blocked[x] = x != u && x != w;
                }
                let mut prev = vec![usize::MAX; n];
                let mut queue = VecDeque::from([u]);
                prev[u] = u;
                while let Some(x) = queue.pop_front() {
                    if x == w {
                        break;
                    }
                    for &t in p.neighbors(x) {
                        if !blocked[t] && prev[t] == usize::MAX {
                            prev[t] = x;
                            queue.push_back(t);
                        }
                    }
                }
                if prev[w] != usize::MAX {
                    let mut path = vec![w];
                    let mut x = w;
                    while x != u {
                        x = prev[x];
                        path.push(x);
                    }
                    path.reverse();
                    let mut cycle = vec![v];
                    cycle.extend(path);
                    return Some(cycle);
                }
            }
        }
    }
    None
}

/// Recognizes a chordal pattern and builds its clique tree, or reports a
/// chordless cycle of length at least 4 (0-based vertices).
pub fn is_chordal(pattern: &SparsityPattern) -> Result<CliqueTree> {
    let n = pattern.n();
    let mut peo = maximum_cardinality_search(pattern);
    peo.reverse();
    let mut position = vec![0usize; n];
    for (k, &v) in peo.iter().enumerate() {
        position[v] = k;
    }
    let later = |v: usize| -> Vec<usize> {
        let mut l: Vec<usize> = pattern
            .neighbors(v)
            .iter()
            .copied()
            .filter(|&w| position[w] > position[v])
            .collect();
        l.sort_unstable();
        l
    };

    for &v in &peo {
        let lv = later(v);
        if let Some(&first) = lv.iter().min_by_key(|&&w| position[w]) {
            if lv.iter().any(|&w| w != first && !pattern.contains(first, w)) {
                let cycle = chordless_cycle(pattern).unwrap_or_default();
                return Err(Error::NotChordal { cycle });
            }
        }
    }

    // Candidate cliques K_v = {v} ∪ later(v); K_v can only be contained in
    // K_u for u earlier in the ordering.
    let candidates: Vec<Vec<usize>> = peo
        .iter()
        .map(|&v| {
            let mut k = later(v);
            k.push(v);
            k.sort_unstable();
            k
        })
        .collect();
    let is_subset = |a: &[usize], b: &[usize]| a.iter().all(|x| b.binary_search(x).is_ok());
    let mut cliques: Vec<Vec<usize>> = Vec::new();
    for (k, cand) in candidates.iter().enumerate() {
        let dominated = candidates[..k]
            .iter()
            .any(|other| other.len() > cand.len() && is_subset(cand, other));
        if !dominated {
            cliques.push(cand.clone());
        }
    }

    let l = cliques.len();
    let mut last = vec![0usize; n];
    for (r, c) in cliques.iter().enumerate() {
        for &v in c {
            last[v] = r;
        }
    }
    let mut separators = Vec::with_capacity(l);
    let mut residuals = Vec::with_capacity(l);
    let mut parents = Vec::with_capacity(l);
    for (r, c) in cliques.iter().enumerate() {
        let (sep, res): (Vec<usize>, Vec<usize>) = c.iter().partition(|&&v| last[v] > r);
        let parent = if sep.is_empty() {
            None
        } else {
            let j = (r + 1..l)
                .find(|&j| is_subset(&sep, &cliques[j]))
                .ok_or_else(|| Error::InvalidParameter("running intersection property violated".into()))?;
            Some(j)
        };
        separators.push(sep);
        residuals.push(res);
        parents.push(parent);
    }

    Ok(CliqueTree {
        n,
        elimination_order: peo,
        cliques,
        separators,
        residuals,
        parents,
    })
}

/// One elementary factor `L_r = I + E_S·C_r·E_Uᵀ` with
/// `C_r = X_SS⁻¹·X_SU`.
#[derive(Debug, Clone)]
pub struct EliminationFactor {
    pub residual: Vec<usize>,
    pub separator: Vec<usize>,
    pub coupling: DMatrix<f64>,
}

/// The maximum-determinant completion `X` of a partial matrix in factored
/// form `X = L_1ᵀ ⋯ L_{ℓ−1}ᵀ · D · L_{ℓ−1} ⋯ L_1`.
///
/// `D` is block diagonal over the clique residuals. `X⁻¹` vanishes outside
/// the pattern.
#[derive(Debug, Clone)]
pub struct CliqueFactorization {
    n: usize,
    factors: Vec<EliminationFactor>,
    blocks: Vec<(Vec<usize>, CholeskyFactor)>,
}

fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
}

/// Factors the maximum-determinant completion of the entries of `entries`
/// on the pattern described by `tree`. Entries outside the pattern are
/// never read.
pub fn clique_factorize(entries: &DMatrix<f64>, tree: &CliqueTree) -> Result<CliqueFactorization> {
    let n = tree.n();
    if entries.nrows() != n || entries.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: entries.nrows(),
        });
    }
    let mut factors = Vec::new();
    let mut blocks = Vec::new();
    let l = tree.cliques.len();
    for r in 0..l {
        let clique = &tree.cliques[r];
        let sep = &tree.separators[r];
        let res = &tree.residuals[r];
        let block = SymMatrix::new(submatrix(entries, clique, clique))?;
        CholeskyFactor::factorize(&block).map_err(|_| Error::CliqueBlockNotPD { clique: r })?;
        if sep.is_empty() {
            let d = CholeskyFactor::factorize(&SymMatrix::new(submatrix(entries, res, res))?)
                .map_err(|_| Error::CliqueBlockNotPD { clique: r })?;
            blocks.push((res.clone(), d));
            continue;
        }
        let x_ss = CholeskyFactor::factorize(&SymMatrix::new(submatrix(entries, sep, sep))?)
            .map_err(|_| Error::CliqueBlockNotPD { clique: r })?;
        let x_su = submatrix(entries, sep, res);
        let mut coupling = DMatrix::zeros(sep.len(), res.len());
        for k in 0..res.len() {
            coupling.set_column(k, &x_ss.solve(&x_su.column(k).into_owned())?);
        }
        let schur = submatrix(entries, res, res) - x_su.transpose() * &coupling;
        let d =
            CholeskyFactor::factorize(&SymMatrix::new(schur)?).map_err(|_| Error::CliqueBlockNotPD { clique: r })?;
        blocks.push((res.clone(), d));
        factors.push(EliminationFactor {
            residual: res.clone(),
            separator: sep.clone(),
            coupling,
        });
    }
    Ok(CliqueFactorization { n, factors, blocks })
}

impl CliqueFactorization {
    pub fn n(&self) -> usize {
        self.n
    }

    /// The elementary factors with a nonempty separator, in clique order.
    pub fn factors(&self) -> &[EliminationFactor] {
        &self.factors
    }

    /// `log det X = log det D`.
    pub fn log_det(&self) -> f64 {
        self.blocks.iter().map(|(_, f)| f.log_det()).sum()
    }

    /// The completed matrix `X`.
    pub fn completion(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.n, self.n);
        for (idx, f) in &self.blocks {
            let d = f.reconstruct();
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    x[(i, j)] = d[(a, b)];
                }
            }
        }
        // X ← L_rᵀ X L_r, innermost factor first.
        for f in self.factors.iter().rev() {
            let xs = x.select_columns(&f.separator);
            let add_cols = &xs * &f.coupling;
            for (k, &u) in f.residual.iter().enumerate() {
                let mut col = x.column_mut(u);
                col += add_cols.column(k);
            }
            let ys = x.select_rows(&f.separator);
            let add_rows = f.coupling.transpose() * &ys;
            for (k, &u) in f.residual.iter().enumerate() {
                let mut row = x.row_mut(u);
                row += add_rows.row(k);
            }
        }
        symmetrize(&mut x);
        x
    }

    /// `X⁻¹ = L_1⁻¹ ⋯ L_{ℓ−1}⁻¹ · D⁻¹ · L_{ℓ−1}⁻ᵀ ⋯ L_1⁻ᵀ` with
    /// `L_r⁻¹ = I − E_S·C_r·E_Uᵀ`. Positions outside the pattern come out
    /// as exact zeros or rounding-level values.
    pub fn inverse(&self) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(self.n, self.n);
        for (idx, f) in &self.blocks {
            let d = f.inverse();
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    z[(i, j)] = d[(a, b)];
                }
            }
        }
        for f in self.factors.iter().rev() {
            let zu = z.select_rows(&f.residual);
            let sub_rows = &f.coupling * &zu;
            for (k, &s) in f.separator.iter().enumerate() {
                let mut row = z.row_mut(s);
                row -= sub_rows.row(k);
            }
            let wu = z.select_columns(&f.residual);
            let sub_cols = &wu * f.coupling.transpose();
            for (k, &s) in f.separator.iter().enumerate() {
                let mut col = z.column_mut(s);
                col -= sub_cols.column(k);
            }
        }
        symmetrize(&mut z);
        z
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn check_tree(pattern: &SparsityPattern, tree: &CliqueTree, n: usize) -> Result<()> {
    if pattern.n() != n || tree.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if pattern.n() != n { pattern.n() } else { tree.n() },
        });
    }
    Ok(())
}

/// θ_V-projection of `bbar` onto the sparse submanifold `S`: the unique
/// `B* ∈ S` whose θ_V-coordinate agrees with `θ_V(bbar)` on the pattern.
///
/// With `X` the max-det completion of `ν(det B̄)·B̄⁻¹` restricted to the
/// pattern, `B* = ν(z*)·X⁻¹` where `z*` solves `det X = ν(z)ⁿ/z`.
pub fn theta_v_project_sparse(
    bbar: &PDMatrix,
    pattern: &SparsityPattern,
    tree: &CliqueTree,
    pot: &Potential,
) -> Result<PDMatrix> {
    let n = bbar.n();
    check_tree(pattern, tree, n)?;
    pot.ensure_admissible(n)?;
    let w = bbar.inverse() * pot.nu_at_log(bbar.log_det());
    let x = clique_factorize(&w, tree)?;
    let u = solve_theta_determinant(pot, n, x.log_det())?;
    PDMatrix::new(x.inverse() * pot.nu_at_log(u))
}

/// Which alternating-projection scheme [`sparse_update`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparseAlgorithm {
    /// DFP step (η-projection onto the secant manifold), then θ_V-projection onto `S`.
    EtaThenTheta,
    /// V-BFGS step (θ_V-projection onto the secant manifold), then θ_V-projection onto `S`.
    ThetaThenTheta,
}

impl SparseAlgorithm {
    pub fn number(self) -> u8 {
        match self {
            Self::EtaThenTheta => 1,
            Self::ThetaThenTheta => 2,
        }
    }

    pub fn from_number(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Self::EtaThenTheta),
            2 => Ok(Self::ThetaThenTheta),
            _ => Err(Error::InvalidParameter(format!(
                "sparse algorithm must be 1 or 2, got {k}"
            ))),
        }
    }
}

/// What the divergence trace of [`sparse_update`] measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    /// `D_V(B^(t), B̄^(t))` between the iterate and its secant step.
    SecantGap,
    /// `D_V(B*, B^(t))` against a point `B*` of `M ∩ S`.
    ToReference,
    /// `D_V(B^(t+1), B^(t))` between successive iterates.
    Successive,
}

/// Reference point for the Algorithm 2 trace.
#[derive(Debug, Clone, Copy)]
pub enum TraceReference<'a> {
    /// Use the small-`n` oracle when `n ≤ 4` and it succeeds, otherwise
    /// fall back to successive divergences.
    Auto,
    Successive,
    Fixed(&'a PDMatrix),
}

#[derive(Debug, Clone)]
pub struct SparseUpdate {
    pub matrix: PDMatrix,
    pub trace_kind: TraceKind,
    pub trace: Vec<f64>,
}

/// Runs `iterations` rounds of the chosen alternating-projection scheme
/// from `b` (which should lie in `S`).
///
/// Algorithm 1 records `D_V(B^(t), B̄^(t))` for `t = 0..=T`. Algorithm 2
/// records `D_V(B*, B^(t))` for `t = 0..=T` when a reference is available,
/// otherwise `D_V(B^(t+1), B^(t))` for `t < T`.
#[allow(clippy::too_many_arguments)]
pub fn sparse_update(
    b: &PDMatrix,
    pair: &SecantPair,
    pattern: &SparsityPattern,
    tree: &CliqueTree,
    pot: &Potential,
    algorithm: SparseAlgorithm,
    iterations: usize,
    reference: TraceReference<'_>,
) -> Result<SparseUpdate> {
    let n = b.n();
    check_tree(pattern, tree, n)?;
    pot.ensure_admissible(n)?;
    let mut current = b.clone();
    let mut trace = Vec::with_capacity(iterations + 1);
    match algorithm {
        SparseAlgorithm::EtaThenTheta => {
            for _ in 0..iterations {
                let bar = dfp_update(&current, pair)?;
                trace.push(v_bregman_divergence(&current, &bar, pot)?);
                current = theta_v_project_sparse(&bar, pattern, tree, pot)?;
            }
            let bar = dfp_update(&current, pair)?;
            trace.push(v_bregman_divergence(&current, &bar, pot)?);
            Ok(SparseUpdate {
                matrix: current,
                trace_kind: TraceKind::SecantGap,
                trace,
            })
        }
        SparseAlgorithm::ThetaThenTheta => {
            let owned;
            let fixed = match reference {
                TraceReference::Fixed(r) => Some(r),
                TraceReference::Successive => None,
                TraceReference::Auto if n <= 4 => {
                    owned = crate::oracle::sparse_secant_projection(b, pair, pattern, pot, None).ok();
                    owned.as_ref()
                }
                TraceReference::Auto => None,
            };
            if let Some(r) = fixed {
                trace.push(v_bregman_divergence(r, &current, pot)?);
            }
            for _ in 0..iterations {
                let bar = v_bfgs_update(&current, pair, pot)?;
                let next = theta_v_project_sparse(&bar, pattern, tree, pot)?;
                trace.push(match fixed {
                    Some(r) => v_bregman_divergence(r, &next, pot)?,
                    None => v_bregman_divergence(&next, &current, pot)?,
                });
                current = next;
            }
            Ok(SparseUpdate {
                matrix: current,
                trace_kind: if fixed.is_some() {
                    TraceKind::ToReference
                } else {
                    TraceKind::Successive
                },
                trace,
            })
        }
    }
}
