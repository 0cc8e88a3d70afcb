//! P1 finite elements for `-div(a grad p) = g` on the unit square with
//! homogeneous Dirichlet data and a lognormal-type random coefficient.

use std::fmt::Write as _;

use log::debug;

use crate::error::{Error, Result};
use crate::estimator::{replicate_rmse, CompensatedSum, Integrand, Qoi};
use crate::scalar::Real;

/// Sparse matrix in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn identity(n: usize) -> Self {
        Self { n, row_ptr: (0..=n).collect(), cols: (0..n).collect(), values: vec![T::one(); n] }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::new();
        let mut values: Vec<T> = Vec::new();
        let mut last = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                let k = values.len() - 1;
                values[k] = values[k] + v;
            } else {
                cols.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, cols, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.row(i).find(|&(c, _)| c == j).map_or(T::zero(), |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).fold(T::zero(), |acc, (c, v)| acc + v * x[c]);
        }
    }

    /// `x^T A x`.
    pub fn energy(&self, x: &[T]) -> T {
        let mut sum = CompensatedSum::default();
        for (i, &xi) in x.iter().enumerate() {
            self.row(i).for_each(|(c, v)| sum.add(xi * v * x[c]));
        }
        sum.value()
    }

    /// `max |A_ij - A_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }
}

// Fixed sparsity pattern plus, per triangle, the slots its unit-coefficient
// element matrix scatters into.
#[derive(Clone, Debug)]
struct Pattern<T> {
    matrix: CsrMatrix<T>,
    scatter: Vec<Vec<(usize, T)>>,
}

impl<T: Real> Pattern<T> {
    fn build(mesh_triangles: &[[usize; 3]], local: &[[[T; 3]; 3]], dof_of: &[Option<usize>], n: usize) -> Self {
        let mut triplets = Vec::new();
        for tri in mesh_triangles {
            for &a in tri {
                for &b in tri {
                    if let (Some(r), Some(c)) = (dof_of[a], dof_of[b]) {
                        triplets.push((r, c, T::zero()));
                    }
                }
            }
        }
        let matrix = CsrMatrix::from_triplets(n, triplets);
        let slot = |r: usize, c: usize| {
            let lo = matrix.row_ptr[r];
            lo + matrix.cols[lo..matrix.row_ptr[r + 1]].binary_search(&c).expect("entry in pattern")
        };
        let scatter = mesh_triangles
            .iter()
            .zip(local)
            .map(|(tri, ke)| {
                let mut entries = Vec::with_capacity(9);
                for (i, &a) in tri.iter().enumerate() {
                    for (j, &b) in tri.iter().enumerate() {
                        if let (Some(r), Some(c)) = (dof_of[a], dof_of[b]) {
                            entries.push((slot(r, c), ke[i][j]));
                        }
                    }
                }
                entries
            })
            .collect();
        Self { matrix, scatter }
    }

    fn assemble(&self, coeffs: &[T]) -> CsrMatrix<T> {
        let mut m = self.matrix.clone();
        m.values.iter_mut().for_each(|v| *v = T::zero());
        for (entries, &a) in self.scatter.iter().zip(coeffs) {
            for &(k, v) in entries {
                m.values[k] = m.values[k] + a * v;
            }
        }
        m
    }
}

/// Uniform triangulation of `[0,1]^2` with `N` cells per side, every cell
/// split along its lower-left to upper-right diagonal.
#[derive(Clone, Debug)]
pub struct Mesh<T> {
    n: usize,
    nodes: Vec<[T; 2]>,
    triangles: Vec<[usize; 3]>,
    dof_of: Vec<Option<usize>>,
    dofs: Vec<usize>,
    interior: Pattern<T>,
    unit: CsrMatrix<T>,
}

impl<T: Real> Mesh<T> {
    /// Mesh with `n >= 1` cells per side. The center point is a node only
    /// for even `n`.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("mesh needs at least one cell per side".into()));
        }
        let h = T::one() / T::from_usize_lossy(n);
        let idx = |i: usize, j: usize| i + j * (n + 1);
        let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                nodes.push([T::from_usize_lossy(i) * h, T::from_usize_lossy(j) * h]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
        let mut dof_of = vec![None; nodes.len()];
        let mut dofs = Vec::new();
        for j in 1..n {
            for i in 1..n {
                dof_of[idx(i, j)] = Some(dofs.len());
                dofs.push(idx(i, j));
            }
        }
        let local: Vec<[[T; 3]; 3]> = triangles.iter().map(|t| unit_element(&nodes, t)).collect();
        let interior = Pattern::build(&triangles, &local, &dof_of, dofs.len());
        let all: Vec<Option<usize>> = (0..nodes.len()).map(Some).collect();
        let unit = Pattern::build(&triangles, &local, &all, nodes.len()).assemble(&vec![T::one(); triangles.len()]);
        Ok(Self { n, nodes, triangles, dof_of, dofs, interior, unit })
    }

    pub fn cells_per_side(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> &[[T; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Interior (unknown) nodes in degree-of-freedom order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.dofs
    }

    pub fn dof_of(&self, node: usize) -> Option<usize> {
        self.dof_of[node]
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i + j * (self.n + 1)
    }

    pub fn center_node(&self) -> Option<usize> {
        self.n.is_multiple_of(2).then(|| self.node_index(self.n / 2, self.n / 2))
    }

    pub fn signed_area(&self, t: usize) -> T {
        let [a, b, c] = self.triangles[t].map(|k| self.nodes[k]);
        T::lit(0.5) * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn centroid(&self, t: usize) -> [T; 2] {
        let third = T::one() / T::lit(3.0);
        let [a, b, c] = self.triangles[t].map(|k| self.nodes[k]);
        [(a[0] + b[0] + c[0]) * third, (a[1] + b[1] + c[1]) * third]
    }

    pub fn centroids(&self) -> Vec<[T; 2]> {
        (0..self.triangles.len()).map(|t| self.centroid(t)).collect()
    }

    /// Unit-coefficient stiffness matrix over all nodes, boundary included.
    pub fn unit_stiffness(&self) -> &CsrMatrix<T> {
        &self.unit
    }

    /// Load vector on interior nodes: centroid value of `g` times area/3 per
    /// vertex.
    pub fn load(&self, g: impl Fn([T; 2]) -> T) -> Vec<T> {
        let mut b = vec![T::zero(); self.dofs.len()];
        let third = T::one() / T::lit(3.0);
        for (t, tri) in self.triangles.iter().enumerate() {
            let share = g(self.centroid(t)) * self.signed_area(t) * third;
            for &v in tri {
                if let Some(d) = self.dof_of[v] {
                    b[d] = b[d] + share;
                }
            }
        }
        b
    }

    /// Interior load for the source `g(y) = y_2`.
    pub fn default_load(&self) -> Vec<T> {
        self.load(|y| y[1])
    }

    /// Nodal interpolant of `f` on all nodes.
    pub fn interpolate(&self, f: impl Fn([T; 2]) -> T) -> Vec<T> {
        self.nodes.iter().map(|&y| f(y)).collect()
    }

    /// Plain-text dump: one `y1 y2 value` row per node.
    pub fn nodal_dump(&self, values: &[T]) -> String {
        let mut out = String::new();
        for (y, v) in self.nodes.iter().zip(values) {
            let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", y[0], y[1], v);
        }
        out
    }
}

// Element matrix of the P1 Laplacian on one triangle.
fn unit_element<T: Real>(nodes: &[[T; 2]], tri: &[usize; 3]) -> [[T; 3]; 3] {
    let p = tri.map(|k| nodes[k]);
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    // gradient of hat i is (b_i, c_i) / area2
    let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
    let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
    let scale = T::one() / (T::lit(2.0) * area2);
    let mut k = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (b[i] * b[j] + c[i] * c[j]) * scale;
        }
    }
    k
}

/// Stiffness on interior nodes for piecewise-constant coefficients
/// (one value per triangle) and the default `y_2` load.
pub fn assemble<T: Real>(mesh: &Mesh<T>, coeffs: &[T]) -> Result<(CsrMatrix<T>, Vec<T>)> {
    Ok((assemble_stiffness(mesh, coeffs)?, mesh.default_load()))
}

pub fn assemble_stiffness<T: Real>(mesh: &Mesh<T>, coeffs: &[T]) -> Result<CsrMatrix<T>> {
    if coeffs.len() != mesh.triangles.len() {
        return Err(Error::Assembly(format!("{} coefficients for {} triangles", coeffs.len(), mesh.triangles.len())));
    }
    if let Some(t) = coeffs.iter().position(|a| !(*a > T::zero() && a.is_finite())) {
        return Err(Error::Assembly(format!("coefficient {} on triangle {t} is not positive", coeffs[t])));
    }
    Ok(mesh.interior.assemble(coeffs))
}

/// Result of a preconditioned conjugate-gradient solve.
#[derive(Clone, Debug, PartialEq)]
pub struct CgOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// Final relative residual `|b - Ax| / |b|`.
    pub residual: T,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut s = CompensatedSum::default();
    a.iter().zip(b).for_each(|(&x, &y)| s.add(x * y));
    s.value()
}

/// Jacobi-preconditioned CG to relative residual `rel_tol`, at most
/// `10 * dim` iterations.
pub fn pcg<T: Real>(a: &CsrMatrix<T>, b: &[T], rel_tol: T) -> Result<CgOutcome<T>> {
    let n = a.dim();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![T::zero(); n];
    if bnorm == T::zero() {
        return Ok(CgOutcome { x, iterations: 0, residual: T::zero() });
    }
    let inv_diag: Vec<T> = a.diagonal().iter().map(|&d| T::one() / d).collect();
    let mut r = b.to_vec();
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&r, &d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![T::zero(); n];
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    let cap = 10 * n.max(1);
    for it in 1..=cap {
        a.matvec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] = x[i] + alpha * p[i];
            r[i] = r[i] - alpha * ap[i];
        }
        let res = dot(&r, &r).sqrt() / bnorm;
        history.push(res.to_f64().unwrap_or(f64::NAN));
        if res <= rel_tol {
            return Ok(CgOutcome { x, iterations: it, residual: res });
        }
        if !res.is_finite() {
            break;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Solver { iterations: history.len(), residual: history.last().copied().unwrap_or(f64::NAN), history })
}

/// Finite element solution on all nodes (zero on the boundary).
#[derive(Clone, Debug, PartialEq)]
pub struct PdeSolution<T> {
    pub values: Vec<T>,
    pub iterations: usize,
    pub residual: T,
}

pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Solves the interior system and scatters onto all nodes.
pub fn solve<T: Real>(mesh: &Mesh<T>, stiffness: &CsrMatrix<T>, load: &[T], rel_tol: T) -> Result<PdeSolution<T>> {
    let out = pcg(stiffness, load, rel_tol)?;
    let mut values = vec![T::zero(); mesh.nodes.len()];
    for (d, &node) in mesh.dofs.iter().enumerate() {
        values[node] = out.x[d];
    }
    Ok(PdeSolution { values, iterations: out.iterations, residual: out.residual })
}

/// Value at the domain center.
pub fn qoi_point<T: Real>(values: &[T], mesh: &Mesh<T>) -> Result<T> {
    let c = mesh
        .center_node()
        .ok_or_else(|| Error::Config(format!("N = {} is odd, the center is not a mesh node", mesh.n)))?;
    Ok(values[c])
}

/// `sqrt(sum_r |grad(mean - v_r)|^2 / (R - 1))`, with the gradient norm of
/// each deviation taken exactly through the unit stiffness matrix.
pub fn qoi_h1_rmse<T: Real>(fields: &[Vec<T>], mesh: &Mesh<T>) -> Result<T> {
    if fields.len() < 2 {
        return Err(Error::Domain(format!("field RMSE needs R >= 2, got {}", fields.len())));
    }
    let n = mesh.nodes.len();
    if let Some(f) = fields.iter().find(|f| f.len() != n) {
        return Err(Error::Domain(format!("field has {} values, mesh has {n} nodes", f.len())));
    }
    let mean = mean_field(fields);
    let mut sum = CompensatedSum::default();
    let mut d = vec![T::zero(); n];
    for f in fields {
        for i in 0..n {
            d[i] = mean[i] - f[i];
        }
        sum.add(mesh.unit.energy(&d));
    }
    let r = T::from_usize_lossy(fields.len());
    Ok((sum.value() / (r - T::one())).sqrt())
}

fn mean_field<T: Real>(fields: &[Vec<T>]) -> Vec<T> {
    let n = fields[0].len();
    let r = T::from_usize_lossy(fields.len());
    (0..n)
        .map(|i| {
            let mut s = CompensatedSum::default();
            fields.iter().for_each(|f| s.add(f[i]));
            s.value() / r
        })
        .collect()
}

/// Exponent range of the coefficient. Above the upper bound the contrast
/// exceeds the reciprocal machine epsilon and the discrete system is
/// numerically singular; below the lower bound `exp` underflows.
pub const LOG_COEFF_MAX: f64 = 36.0;
pub const LOG_COEFF_MIN: f64 = -700.0;

/// Truncated random field `a(y, x) = a_* + a_0 exp(sum_j x_j xi_j(y))` with
/// `xi_j(y) = zeta j^{-rho_star} sin(pi y_1) sin(pi y_2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomFieldSpec<T> {
    pub s: usize,
    pub zeta: T,
    pub rho_star: T,
    pub a_star: T,
    pub a_0: T,
}

impl<T: Real> RandomFieldSpec<T> {
    pub fn new(s: usize, zeta: T, rho_star: T) -> Result<Self> {
        Self::with_offset(s, zeta, rho_star, T::zero(), T::one())
    }

    pub fn with_offset(s: usize, zeta: T, rho_star: T, a_star: T, a_0: T) -> Result<Self> {
        if s == 0 {
            return Err(Error::Config("s >= 1 required".into()));
        }
        if !(zeta > T::zero()) {
            return Err(Error::Config("zeta > 0 required".into()));
        }
        if !(rho_star > T::one()) {
            return Err(Error::Config("rho_star > 1 required".into()));
        }
        if !(a_star >= T::zero() && a_0 > T::zero()) {
            return Err(Error::Config("a_star >= 0 and a_0 > 0 required".into()));
        }
        Ok(Self { s, zeta, rho_star, a_star, a_0 })
    }

    /// Spatial mode shared by all terms.
    pub fn mode(y: [T; 2]) -> T {
        (T::PI() * y[0]).sin() * (T::PI() * y[1]).sin()
    }

    /// `S = zeta * sum_j x_j j^{-rho_star}`.
    pub fn amplitude(&self, x: &[T]) -> T {
        let mut s = CompensatedSum::default();
        for (j, &xj) in x.iter().enumerate() {
            s.add(xj * T::from_usize_lossy(j + 1).powf(-self.rho_star));
        }
        self.zeta * s.value()
    }

    pub fn coeff_from_amplitude(&self, y: [T; 2], amplitude: T) -> T {
        self.coeff_flagged(Self::mode(y), amplitude).0
    }

    /// Coefficient for a mode value, with the exponent clamped to
    /// `[LOG_COEFF_MIN, LOG_COEFF_MAX]`; the flag reports clamping.
    pub fn coeff_flagged(&self, mode: T, amplitude: T) -> (T, bool) {
        let e = amplitude * mode;
        let (lo, hi) = (T::lit(LOG_COEFF_MIN), T::lit(LOG_COEFF_MAX));
        let clamped = e.max(lo).min(hi);
        (self.a_star + self.a_0 * clamped.exp(), clamped != e)
    }

    pub fn coeff(&self, y: [T; 2], x: &[T]) -> T {
        self.coeff_from_amplitude(y, self.amplitude(x))
    }
}

/// Parameter-to-solution map as a vector-valued integrand: the output is the
/// nodal solution on all mesh nodes.
#[derive(Clone, Debug)]
pub struct PdeIntegrand<T> {
    field: RandomFieldSpec<T>,
    mesh: Mesh<T>,
    modes: Vec<T>,
    load: Vec<T>,
    rel_tol: T,
}

impl<T: Real> PdeIntegrand<T> {
    pub fn new(field: RandomFieldSpec<T>, mesh: Mesh<T>) -> Self {
        let modes = mesh.centroids().into_iter().map(RandomFieldSpec::mode).collect();
        let load = mesh.default_load();
        Self { field, mesh, modes, load, rel_tol: T::lit(DEFAULT_REL_TOL) }
    }

    pub fn with_rel_tol(mut self, rel_tol: T) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn field(&self) -> &RandomFieldSpec<T> {
        &self.field
    }

    pub fn solve_at(&self, x: &[T]) -> Result<PdeSolution<T>> {
        let amp = self.field.amplitude(x);
        let mut saturated = false;
        let coeffs: Vec<T> = self
            .modes
            .iter()
            .map(|&m| {
                let (a, flag) = self.field.coeff_flagged(m, amp);
                saturated |= flag;
                a
            })
            .collect();
        if saturated {
            debug!("coefficient exponent clamped at amplitude {:e}", amp.to_f64().unwrap_or(f64::NAN));
        }
        let k = assemble_stiffness(&self.mesh, &coeffs)?;
        solve(&self.mesh, &k, &self.load, self.rel_tol)
    }
}

impl<T: Real> Integrand<T> for PdeIntegrand<T> {
    fn dim(&self) -> usize {
        self.field.s
    }

    fn output_len(&self) -> usize {
        self.mesh.nodes.len()
    }

    fn eval(&self, x: &[T], out: &mut [T]) -> Result<()> {
        out.copy_from_slice(&self.solve_at(x)?.values);
        Ok(())
    }
}

/// Center-value QoI over nodal outputs.
#[derive(Clone, Debug)]
pub struct PointQoi {
    node: usize,
}

impl PointQoi {
    pub fn new<T: Real>(mesh: &Mesh<T>) -> Result<Self> {
        let node = mesh
            .center_node()
            .ok_or_else(|| Error::Config(format!("N = {} is odd, the center is not a mesh node", mesh.n)))?;
        Ok(Self { node })
    }
}

impl<T: Real> Qoi<T> for PointQoi {
    fn name(&self) -> &str {
        "point"
    }

    fn rmse(&self, replicates: &[Vec<T>]) -> Result<T> {
        let v: Vec<T> = replicates.iter().map(|r| r[self.node]).collect();
        replicate_rmse(&v)
    }

    fn mean(&self, replicates: &[Vec<T>]) -> T {
        let mut s = CompensatedSum::default();
        replicates.iter().for_each(|r| s.add(r[self.node]));
        s.value() / T::from_usize_lossy(replicates.len())
    }
}

/// Gradient-norm QoI over nodal outputs. Its mean is the gradient norm of
/// the replicate-averaged field.
#[derive(Clone, Debug)]
pub struct H1Qoi<T> {
    mesh: Mesh<T>,
}

impl<T: Real> H1Qoi<T> {
    pub fn new(mesh: Mesh<T>) -> Self {
        Self { mesh }
    }
}

impl<T: Real> Qoi<T> for H1Qoi<T> {
    fn name(&self) -> &str {
        "h1"
    }

    fn rmse(&self, replicates: &[Vec<T>]) -> Result<T> {
        qoi_h1_rmse(replicates, &self.mesh)
    }

    fn mean(&self, replicates: &[Vec<T>]) -> T {
        self.mesh.unit.energy(&mean_field(replicates)).max(T::zero()).sqrt()
    }
}
