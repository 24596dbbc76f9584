//! Dense symmetric linear algebra, multivariate normal sampling and
//! graph-structured covariance construction.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::graph::LabeledGraph;

/// Square symmetric matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = s;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &x) in values.iter().enumerate() {
            m.set(i, i, x);
        }
        m
    }

    /// Builds from rows; rejects non-square or asymmetric input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("matrix must be square"));
        }
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                let (a, b) = (rows[i][j], rows[j][i]);
                if !a.is_finite() {
                    return Err(Error::invalid("matrix entries must be finite"));
                }
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::invalid(format!("matrix is not symmetric at ({i}, {j})")));
                }
                m.data[i * dim + j] = if i <= j { a } else { b };
            }
        }
        Ok(m)
    }

    /// Symmetrizes the upper triangle produced by `f(i, j)` for `i <= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Sets entries `(i, j)` and `(j, i)` together.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        self.data[i * self.dim + j] = x;
        self.data[j * self.dim + i] = x;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim.max(1)).map(<[f64]>::to_vec).take(self.dim).collect()
    }

    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        SymMatrix::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        if self.dim != other.dim {
            return Err(Error::invalid("dimension mismatch"));
        }
        Ok(SymMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix { dim: self.dim, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        csv_rows(&self.rows())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<SymMatrix> {
        let rows = read_csv_rows(r)?;
        SymMatrix::from_rows(&rows)
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        let n = self.dim;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(Cholesky { dim: n, l })
    }

    pub fn inverse(&self) -> Result<SymMatrix> {
        Ok(self.cholesky()?.inverse())
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_ok()
    }
}

/// Lower-triangular factor `L` with `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn l(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.dim + j]
    }

    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.dim).map(|i| self.l(i, i).ln()).sum::<f64>()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l(i, k) * y[k];
            }
            y[i] /= self.l(i, i);
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.l(k, i) * y[k];
            }
            y[i] /= self.l(i, i);
        }
        y
    }

    pub fn inverse(&self) -> SymMatrix {
        let n = self.dim;
        let mut inv = SymMatrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in j..n {
                inv.set(i, j, col[i]);
            }
        }
        inv
    }

    /// `L z`.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| (0..=i).map(|k| self.l(i, k) * z[k]).sum()).collect()
    }
}

/// Lower factor and log-determinant; failure names the pivot.
pub fn cholesky_logdet(m: &SymMatrix) -> Result<(Cholesky, f64)> {
    let c = m.cholesky()?;
    let ld = c.logdet();
    Ok((c, ld))
}

/// Eigenvalues by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(m: &SymMatrix) -> Vec<f64> {
    let n = m.dim;
    let mut a = m.data.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `n × p` matrix of observations, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * p {
            return Err(Error::invalid("dataset size does not match n × p"));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("dataset entries must be finite"));
        }
        Ok(Dataset { n, p, values })
    }

    pub fn empty(p: usize) -> Self {
        Dataset { n: 0, p, values: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.p + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.p..(row + 1) * self.p]
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.p];
        for r in 0..self.n {
            for (c, x) in self.row(r).iter().enumerate() {
                m[c] += x;
            }
        }
        m.iter_mut().for_each(|x| *x /= self.n.max(1) as f64);
        m
    }

    /// `XᵀX`.
    pub fn gram(&self) -> SymMatrix {
        let mut u = SymMatrix::zeros(self.p);
        for r in 0..self.n {
            let row = self.row(r);
            for i in 0..self.p {
                for j in i..self.p {
                    let x = u.get(i, j) + row[i] * row[j];
                    u.set(i, j, x);
                }
            }
        }
        u
    }

    /// Keeps only the first `n` rows.
    pub fn truncated(&self, n: usize) -> Dataset {
        let n = n.min(self.n);
        Dataset { n, p: self.p, values: self.values[..n * self.p].to_vec() }
    }

    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<f64>> = (0..self.n).map(|r| self.row(r).to_vec()).collect();
        csv_rows(&rows)
    }

    /// Headerless CSV, one observation per row.
    pub fn read_csv<R: Read>(r: R) -> Result<Dataset> {
        let rows = read_csv_rows(r)?;
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Parse("ragged dataset rows".into()));
        }
        Dataset::new(rows.len(), p, rows.into_iter().flatten().collect())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes()).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn csv_rows(rows: &[Vec<f64>]) -> String {
    let mut s = String::new();
    for r in rows {
        let cells: Vec<String> = r.iter().map(|x| format!("{x:?}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn read_csv_rows<R: Read>(r: R) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{s}'"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Subtracts each column mean.
pub fn center(d: &Dataset) -> Dataset {
    let means = d.column_means();
    let values = d
        .values
        .chunks(d.p.max(1))
        .take(d.n)
        .flat_map(|row| row.iter().zip(&means).map(|(x, m)| x - m).collect::<Vec<_>>())
        .collect();
    Dataset { n: d.n, p: d.p, values }
}

/// `D M D` with `d_ii = m_ii^(-1/2)`.
pub fn standardize(m: &SymMatrix) -> Result<SymMatrix> {
    let s: Vec<f64> = (0..m.dim)
        .map(|i| {
            let x = m.get(i, i);
            if x > 0.0 {
                Ok(1.0 / x.sqrt())
            } else {
                Err(Error::invalid(format!("diagonal entry {i} is not positive")))
            }
        })
        .collect::<Result<_>>()?;
    Ok(SymMatrix::from_fn(m.dim, |i, j| if i == j { 1.0 } else { m.get(i, j) * s[i] * s[j] }))
}

/// Log of the multivariate gamma function `Γ_q(a)`.
pub fn log_multigamma(q: usize, a: f64) -> Result<f64> {
    if q == 0 {
        return Err(Error::invalid("multivariate gamma needs q >= 1"));
    }
    let smallest = a + (1.0 - q as f64) / 2.0;
    if !(smallest > 0.0) {
        return Err(Error::invalid(format!("multivariate gamma argument {a} out of domain for q={q}")));
    }
    let qf = q as f64;
    let mut s = qf * (qf - 1.0) / 4.0 * std::f64::consts::PI.ln();
    for j in 1..=q {
        s += ln_gamma(a + (1.0 - j as f64) / 2.0);
    }
    Ok(s)
}

/// Unit-diagonal precision with `-r` on edges, inverted and standardized.
pub fn cov_from_graph(g: &LabeledGraph, r: f64) -> Result<SymMatrix> {
    let mut k = SymMatrix::identity(g.p());
    for (u, v) in g.edges() {
        k.set(u, v, -r);
    }
    standardize(&k.inverse()?)
}

/// Shifts `k0` by `γI` so its smallest eigenvalue is at least `margin`, then
/// returns the shifted precision and `γ`.
pub fn eigshift_precision(k0: &SymMatrix, margin: f64) -> Result<(SymMatrix, f64)> {
    if !(margin > 0.0) {
        return Err(Error::invalid("margin must be positive"));
    }
    let lmin = jacobi_eigenvalues(k0).first().copied().unwrap_or(1.0);
    let gamma = if lmin > 0.0 { 0.0 } else { margin - lmin };
    let mut k = k0.clone();
    for i in 0..k.dim {
        let x = k.get(i, i) + gamma;
        k.set(i, i, x);
    }
    Ok((k, gamma))
}

/// Covariance for `g` from an arbitrary pattern-respecting precision `k0`.
pub fn cov_from_graph_eigshift(g: &LabeledGraph, k0: &SymMatrix, margin: f64) -> Result<SymMatrix> {
    let p = g.p();
    if k0.dim() != p {
        return Err(Error::invalid("precision dimension does not match graph"));
    }
    for i in 0..p {
        if !(k0.get(i, i) > 0.0) {
            return Err(Error::invalid("precision diagonal must be positive"));
        }
        for j in i + 1..p {
            if !g.has_edge(i, j) && k0.get(i, j) != 0.0 {
                return Err(Error::invalid(format!("non-edge ({i}, {j}) has a non-zero precision entry")));
            }
        }
    }
    let (k, _) = eigshift_precision(k0, margin)?;
    standardize(&k.inverse()?)
}

/// Star partial correlations are jointly valid iff their squares sum below 1.
pub fn star_validity(partials: &[f64]) -> bool {
    partials.iter().map(|c| c * c).sum::<f64>() < 1.0
}

/// `n` draws from `N(0, sigma)`, deterministic per seed.
pub fn sample_mvn(sigma: &SymMatrix, n: usize, seed: u64) -> Result<Dataset> {
    let chol = sigma.cholesky()?;
    let p = sigma.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * p);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        for x in z.iter_mut() {
            *x = StandardNormal.sample(&mut rng);
        }
        values.extend(chol.mul_lower(&z));
    }
    Ok(Dataset { n, p, values })
}

/// Correlations of the three-node V-shape with hub 1 from its two
/// standardized precision entries.
pub fn vshape_correlations(c12: f64, c13: f64) -> Result<(f64, f64, f64)> {
    let (a, b) = (c12 * c12, c13 * c13);
    if !(a < 1.0 && b < 1.0 && a + b < 1.0) {
        return Err(Error::invalid("partials do not give a positive-definite precision"));
    }
    let r12 = -c12 / (1.0 - b).sqrt();
    let r13 = -c13 / (1.0 - a).sqrt();
    let r23 = c12 * c13 / ((1.0 - a) * (1.0 - b)).sqrt();
    Ok((r12, r13, r23))
}

/// Partial correlations implied by a covariance matrix.
pub fn partial_correlations(sigma: &SymMatrix) -> Result<SymMatrix> {
    let c = standardize(&sigma.inverse()?)?;
    Ok(SymMatrix::from_fn(c.dim(), |i, j| if i == j { 1.0 } else { -c.get(i, j) }))
}
