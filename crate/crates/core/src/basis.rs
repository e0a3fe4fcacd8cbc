//! Clamped B-spline Galerkin basis on [0, r_max] with Gauss quadrature against r dr.

use faer::Mat;
use serde::{Deserialize, Serialize};

/// Discretization parameters for the radial direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub r_max: f64,
    pub elements: usize,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_gauss")]
    pub gauss: usize,
}

fn default_degree() -> usize {
    5
}

fn default_gauss() -> usize {
    10
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            r_max: 40.0,
            elements: 240,
            degree: 5,
            gauss: 10,
        }
    }
}

impl GridConfig {
    pub fn refined(&self) -> GridConfig {
        GridConfig {
            elements: self.elements * 2,
            ..*self
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Quadrature nodes on (0, r_max) with weights for the measure r dr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub r: Vec<f64>,
    pub n: usize,
    pub r_max: f64,
    pub quad_weights: Vec<f64>,
}

impl RadialGrid {
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.quad_weights).map(|(a, w)| a * w).sum()
    }
}

/// Clamped uniform B-spline basis with precomputed values at every quadrature node.
#[derive(Debug, Clone)]
pub struct SplineBasis {
    pub cfg: GridConfig,
    knots: Vec<f64>,
    pub grid: RadialGrid,
    /// first nonzero basis index at each node
    span_first: Vec<usize>,
    vals: Vec<f64>,
    ders: Vec<f64>,
}

/// Index range of the basis functions used for angular harmonic j.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Space {
    pub first: usize,
    pub end: usize,
}

impl Space {
    pub fn dim(&self) -> usize {
        self.end - self.first
    }
}

impl SplineBasis {
    pub fn new(cfg: GridConfig) -> SplineBasis {
        let p = cfg.degree;
        let ne = cfg.elements;
        let h = cfg.r_max / ne as f64;
        let mut knots = vec![0.0; p];
        for i in 0..=ne {
            knots.push(i as f64 * h);
        }
        knots.extend(std::iter::repeat(cfg.r_max).take(p));
        let (gx, gw) = gauss_legendre(cfg.gauss);
        let nq = ne * cfg.gauss;
        let mut r = Vec::with_capacity(nq);
        let mut qw = Vec::with_capacity(nq);
        let mut span_first = Vec::with_capacity(nq);
        let mut vals = Vec::with_capacity(nq * (p + 1));
        let mut ders = Vec::with_capacity(nq * (p + 1));
        let mut basis = SplineBasis {
            cfg,
            knots,
            grid: RadialGrid {
                r: vec![],
                n: 0,
                r_max: cfg.r_max,
                quad_weights: vec![],
            },
            span_first: vec![],
            vals: vec![],
            ders: vec![],
        };
        for e in 0..ne {
            let a = e as f64 * h;
            for (x, w) in gx.iter().zip(&gw) {
                let rr = a + 0.5 * h * (x + 1.0);
                r.push(rr);
                qw.push(0.5 * h * w * rr);
                let span = e + p;
                let (v, d) = basis.eval_span(span, rr);
                span_first.push(span - p);
                vals.extend_from_slice(&v);
                ders.extend_from_slice(&d);
            }
        }
        basis.grid = RadialGrid {
            n: r.len(),
            r,
            r_max: cfg.r_max,
            quad_weights: qw,
        };
        basis.span_first = span_first;
        basis.vals = vals;
        basis.ders = ders;
        basis
    }

    pub fn n_funcs(&self) -> usize {
        self.cfg.elements + self.cfg.degree
    }

    /// Basis for harmonic j: Dirichlet at r_max, and at the origin unless j = 0.
    pub fn space(&self, j: i64) -> Space {
        Space {
            first: if j == 0 { 0 } else { 1 },
            end: self.n_funcs() - 1,
        }
    }

    fn span_of(&self, r: f64) -> usize {
        let h = self.cfg.r_max / self.cfg.elements as f64;
        let e = ((r / h).floor() as isize).clamp(0, self.cfg.elements as isize - 1) as usize;
        e + self.cfg.degree
    }

    /// Nonzero basis values and first derivatives on the knot span containing r.
    fn eval_span(&self, span: usize, r: f64) -> (Vec<f64>, Vec<f64>) {
        let p = self.cfg.degree;
        let u = &self.knots;
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = r - u[span + 1 - j];
            right[j] = u[span + j] - r;
            let mut saved = 0.0;
            for k in 0..j {
                ndu[j][k] = right[k + 1] + left[j - k];
                let tmp = ndu[k][j - 1] / ndu[j][k];
                ndu[k][j] = saved + right[k + 1] * tmp;
                saved = left[j - k] * tmp;
            }
            ndu[j][j] = saved;
        }
        let vals: Vec<f64> = (0..=p).map(|j| ndu[j][p]).collect();
        let mut ders = vec![0.0; p + 1];
        if p > 0 {
            for k in 0..=p {
                let mut d = 0.0;
                if k >= 1 {
                    d += ndu[k - 1][p - 1] / ndu[p][k - 1];
                }
                if k < p {
                    d -= ndu[k][p - 1] / ndu[p][k];
                }
                ders[k] = d * p as f64;
            }
        }
        (vals, ders)
    }

    /// Value and derivative of sum c_i B_i at an arbitrary r, with c indexed by the full basis.
    pub fn eval_function(&self, c: &[f64], r: f64) -> (f64, f64) {
        let r = r.clamp(0.0, self.cfg.r_max);
        let span = self.span_of(r);
        let (v, d) = self.eval_span(span, r);
        let first = span - self.cfg.degree;
        let mut f = 0.0;
        let mut df = 0.0;
        for k in 0..v.len() {
            f += c[first + k] * v[k];
            df += c[first + k] * d[k];
        }
        (f, df)
    }

    /// Values of sum c_i B_i at the quadrature nodes.
    pub fn at_nodes(&self, c: &[f64]) -> Vec<f64> {
        let p1 = self.cfg.degree + 1;
        (0..self.grid.n)
            .map(|q| {
                let f = self.span_first[q];
                (0..p1).map(|k| c[f + k] * self.vals[q * p1 + k]).sum()
            })
            .collect()
    }

    /// Derivative of sum c_i B_i at the quadrature nodes.
    pub fn deriv_at_nodes(&self, c: &[f64]) -> Vec<f64> {
        let p1 = self.cfg.degree + 1;
        (0..self.grid.n)
            .map(|q| {
                let f = self.span_first[q];
                (0..p1).map(|k| c[f + k] * self.ders[q * p1 + k]).sum()
            })
            .collect()
    }

    /// Expand coefficients on a subspace into the full basis.
    pub fn embed(&self, sp: Space, c: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_funcs()];
        full[sp.first..sp.end].copy_from_slice(c);
        full
    }

    /// Gram-type matrix: sum over nodes of w * (a_d * B_i' B_l' + f B_i B_l) between two spaces.
    fn assemble(&self, row: Space, col: Space, deriv: f64, f: &dyn Fn(usize) -> f64) -> Mat<f64> {
        let p1 = self.cfg.degree + 1;
        let mut m = Mat::<f64>::zeros(row.dim(), col.dim());
        for q in 0..self.grid.n {
            let w = self.grid.quad_weights[q];
            let fq = f(q);
            let first = self.span_first[q];
            for a in 0..p1 {
                let i = first + a;
                if i < row.first || i >= row.end {
                    continue;
                }
                let va = self.vals[q * p1 + a];
                let da = self.ders[q * p1 + a];
                for b in 0..p1 {
                    let l = first + b;
                    if l < col.first || l >= col.end {
                        continue;
                    }
                    let v = deriv * da * self.ders[q * p1 + b] + fq * va * self.vals[q * p1 + b];
                    m[(i - row.first, l - col.first)] += w * v;
                }
            }
        }
        m
    }

    /// Mass matrix of the space for harmonic j.
    pub fn mass(&self, j: i64) -> Mat<f64> {
        let sp = self.space(j);
        self.assemble(sp, sp, 0.0, &|_| 1.0)
    }

    /// Stiffness of -d_rr - r^-1 d_r + j^2/r^2 in weak form.
    pub fn stiffness(&self, j: i64) -> Mat<f64> {
        let sp = self.space(j);
        let j2 = (j * j) as f64;
        let r = &self.grid.r;
        self.assemble(sp, sp, 1.0, &|q| j2 / (r[q] * r[q]))
    }

    /// Multiplication operator by f (sampled at nodes) between the spaces of harmonics ja and jb.
    pub fn potential(&self, ja: i64, jb: i64, f: &[f64]) -> Mat<f64> {
        self.assemble(self.space(ja), self.space(jb), 0.0, &|q| f[q])
    }

    /// Load vector sum over nodes of w g B_i on the space of harmonic j.
    pub fn load(&self, j: i64, g: &[f64]) -> Vec<f64> {
        let sp = self.space(j);
        let p1 = self.cfg.degree + 1;
        let mut out = vec![0.0; sp.dim()];
        for q in 0..self.grid.n {
            let wg = self.grid.quad_weights[q] * g[q];
            let first = self.span_first[q];
            for a in 0..p1 {
                let i = first + a;
                if i >= sp.first && i < sp.end {
                    out[i - sp.first] += wg * self.vals[q * p1 + a];
                }
            }
        }
        out
    }

    /// L2(r dr) projection of samples f(r) onto the space of harmonic j.
    pub fn project(&self, j: i64, f: &dyn Fn(f64) -> f64) -> Vec<f64> {
        let g: Vec<f64> = self.grid.r.iter().map(|&r| f(r)).collect();
        let rhs = self.load(j, &g);
        let m = self.mass(j);
        let llt = m.llt(faer::Side::Lower).expect("mass matrix is positive definite");
        let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = faer::linalg::solvers::Solve::solve(&llt, &b);
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }
}
