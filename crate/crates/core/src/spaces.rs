//! Discretized Sobolev–Slobodetsky, `W^{1,p}` and Hölder norms on uniform
//! midpoint grids.
//!
//! Every discretized Sobolev norm is a weighted ℓ^p norm of a linear image
//! `M f` of the grid values. [`NormOperator`] stores `M` and its row weights;
//! the dual-norm kernel works with it directly.

use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub const DEFAULT_GRID_1D: usize = 256;
pub const DEFAULT_GRID_2D: usize = 32;

/// Uniform midpoint grid on an interval or a rectangle.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDomain {
    m: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    shape: Vec<usize>,
    points: Vec<f64>,
    cell: f64,
}

impl GridDomain {
    pub fn interval(a: f64, b: f64, g: usize) -> Result<Self> {
        Self::boxed(vec![a], vec![b], vec![g])
    }

    pub fn unit_interval(g: usize) -> Result<Self> {
        Self::interval(0.0, 1.0, g)
    }

    /// `g × g` grid on `[0,1]²`.
    pub fn unit_square(g: usize) -> Result<Self> {
        Self::boxed(vec![0.0, 0.0], vec![1.0, 1.0], vec![g, g])
    }

    pub fn rectangle(lower: [f64; 2], upper: [f64; 2], shape: [usize; 2]) -> Result<Self> {
        Self::boxed(lower.to_vec(), upper.to_vec(), shape.to_vec())
    }

    fn boxed(lower: Vec<f64>, upper: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        let m = shape.len();
        for k in 0..m {
            if !(lower[k].is_finite() && upper[k].is_finite() && lower[k] < upper[k]) {
                return domain(format!(
                    "grid bounds must be finite with lower < upper, got [{}, {}]",
                    lower[k], upper[k]
                ));
            }
        }
        let n: usize = shape.iter().product();
        if n < 2 {
            return domain(format!("grid needs at least 2 points, got {n}"));
        }
        let hs: Vec<f64> = (0..m)
            .map(|k| (upper[k] - lower[k]) / shape[k] as f64)
            .collect();
        let mut points = Vec::with_capacity(n * m);
        match m {
            1 => {
                for i in 0..shape[0] {
                    points.push(lower[0] + (i as f64 + 0.5) * hs[0]);
                }
            }
            2 => {
                for i in 0..shape[0] {
                    for j in 0..shape[1] {
                        points.push(lower[0] + (i as f64 + 0.5) * hs[0]);
                        points.push(lower[1] + (j as f64 + 0.5) * hs[1]);
                    }
                }
            }
            _ => return domain(format!("only m = 1 or 2 is supported, got {m}")),
        }
        Ok(Self {
            m,
            cell: hs.iter().product(),
            lower,
            upper,
            shape,
            points,
        })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.m..(i + 1) * self.m]
    }

    /// Quadrature weight of grid point `i` (all cells have equal volume).
    pub fn weight(&self, _i: usize) -> f64 {
        self.cell
    }

    pub fn weights(&self) -> Vec<f64> {
        vec![self.cell; self.len()]
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| b - a)
            .product()
    }

    pub fn diam(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.shape[axis] as f64
    }

    pub fn is_unit_interval(&self) -> bool {
        self.m == 1 && self.lower[0] == 0.0 && self.upper[0] == 1.0
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.point(i), self.point(j));
        if self.m == 1 {
            (a[0] - b[0]).abs()
        } else {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.m
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// Linear (m=1) or bilinear (m=2) interpolation weights of `x` over grid
    /// nodes, constant beyond the outermost nodes.
    pub fn interpolation(&self, x: &[f64]) -> Result<Vec<(usize, f64)>> {
        if !self.contains(x) {
            return domain(format!("point {x:?} lies outside the grid domain"));
        }
        let axis = |k: usize| -> (usize, usize, f64) {
            let n = self.shape[k];
            let t = (x[k] - self.lower[k]) / self.spacing(k) - 0.5;
            if t <= 0.0 {
                (0, 0, 0.0)
            } else if t >= (n - 1) as f64 {
                (n - 1, n - 1, 0.0)
            } else {
                let i = (t.floor() as usize).min(n - 2);
                (i, i + 1, t - i as f64)
            }
        };
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(4);
        let mut push = |idx: usize, w: f64| {
            if w == 0.0 {
                return;
            }
            if let Some(e) = out.iter_mut().find(|e| e.0 == idx) {
                e.1 += w;
            } else {
                out.push((idx, w));
            }
        };
        if self.m == 1 {
            let (i0, i1, t) = axis(0);
            push(i0, 1.0 - t);
            push(i1, t);
        } else {
            let (i0, i1, t) = axis(0);
            let (j0, j1, u) = axis(1);
            let n1 = self.shape[1];
            push(i0 * n1 + j0, (1.0 - t) * (1.0 - u));
            push(i0 * n1 + j1, (1.0 - t) * u);
            push(i1 * n1 + j0, t * (1.0 - u));
            push(i1 * n1 + j1, t * u);
        }
        Ok(out)
    }

    /// Index of the grid node equal to `x`, if any.
    pub fn node_index(&self, x: &[f64]) -> Option<usize> {
        let w = self.interpolation(x).ok()?;
        match w.as_slice() {
            [(i, w)] if *w == 1.0 && self.point(*i) == x => Some(*i),
            _ => None,
        }
    }
}

/// Smoothness `s` and integrability `p` of a Sobolev norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevParams {
    pub s: f64,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_sp: Option<f64>,
}

impl SobolevParams {
    pub fn new(s: f64, p: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0) {
            return domain(format!("s must lie in (0, 1], got {s}"));
        }
        if !(p >= 2.0 && p.is_finite()) {
            return domain(format!("p must be a finite real >= 2, got {p}"));
        }
        Ok(Self { s, p, c_sp: None })
    }

    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// Checks compatibility with `domain`: `W^{1,p}` needs the unit interval,
    /// fractional orders need `p > m/s`.
    pub fn validate_for(&self, domain: &GridDomain) -> Result<()> {
        Self::new(self.s, self.p)?;
        if self.s == 1.0 {
            if !domain.is_unit_interval() {
                return crate::error::domain("s = 1 requires the unit interval");
            }
        } else if !(self.p > domain.dim() as f64 / self.s) {
            return crate::error::domain(format!(
                "imbedding condition p > m/s fails: p = {}, m = {}, s = {}",
                self.p,
                domain.dim(),
                self.s
            ));
        }
        Ok(())
    }
}

/// Grid values of a real function.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<GridDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return domain_err_len(grid.len(), values.len());
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return domain(format!("non-finite grid value at index {i}"));
        }
        Ok(Self {
            domain: grid,
            values,
        })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: Arc<GridDomain>, f: F) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self::new(grid, values)
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            domain: self.domain.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Value at `x` by the grid's interpolation rule.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self
            .domain
            .interpolation(x)?
            .iter()
            .map(|&(i, w)| w * self.values[i])
            .sum())
    }

    /// Writes `x,value` (or `x0,x1,value`) rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.domain.dim() == 1 {
            w.write_record(["x", "value"])?;
        } else {
            w.write_record(["x0", "x1", "value"])?;
        }
        for i in 0..self.domain.len() {
            let mut rec: Vec<String> = self.domain.point(i).iter().map(|v| num(*v)).collect();
            rec.push(num(self.values[i]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses the output of [`GridFunction::write_csv`], reconstructing the
    /// uniform midpoint grid from the coordinates.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let m = match header.iter().collect::<Vec<_>>().as_slice() {
            ["x", "value"] => 1,
            ["x0", "x1", "value"] => 2,
            other => return Err(Error::Parse(format!("unexpected grid header {other:?}"))),
        };
        let mut coords: Vec<Vec<f64>> = vec![Vec::new(); m];
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != m + 1 {
                return Err(Error::Parse(format!("expected {} fields, got {}", m + 1, rec.len())));
            }
            for k in 0..m {
                coords[k].push(parse_num(&rec[k])?);
            }
            values.push(parse_num(&rec[m])?);
        }
        let axes: Vec<Vec<f64>> = if m == 1 {
            vec![coords[0].clone()]
        } else {
            vec![distinct_sorted(&coords[0]), distinct_sorted(&coords[1])]
        };
        let mut lower = Vec::with_capacity(m);
        let mut upper = Vec::with_capacity(m);
        let mut shape = Vec::with_capacity(m);
        for axis in &axes {
            let (a, b, n) = infer_axis(axis)?;
            lower.push(a);
            upper.push(b);
            shape.push(n);
        }
        let domain = GridDomain::boxed(lower, upper, shape)
            .map_err(|e| Error::Parse(format!("grid coordinates: {e}")))?;
        if domain.len() != values.len() {
            return Err(Error::Parse("grid rows do not form a full rectangle".into()));
        }
        for i in 0..domain.len() {
            for k in 0..m {
                let want = domain.point(i)[k];
                let tol = 1e-9 * (domain.upper[k] - domain.lower[k]).max(1.0);
                if !((coords[k][i] - want).abs() <= tol) {
                    return Err(Error::Parse(format!("row {i} is out of grid order")));
                }
            }
        }
        GridFunction::new(Arc::new(domain), values).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn domain_err_len<T>(points: usize, coeffs: usize) -> Result<T> {
    Err(Error::LengthMismatch { points, coeffs })
}

fn distinct_sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    s
}

/// Recovers `(a, b, n)` from midpoints `a + (i + ½)h`.
fn infer_axis(xs: &[f64]) -> Result<(f64, f64, usize)> {
    let n = xs.len();
    if n < 2 {
        if n == 1 {
            return Err(Error::Parse("a grid axis needs at least 2 coordinates".into()));
        }
        return Err(Error::Parse("empty grid".into()));
    }
    let h = (xs[n - 1] - xs[0]) / (n - 1) as f64;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Parse("grid coordinates must increase".into()));
    }
    for (i, x) in xs.iter().enumerate() {
        let want = xs[0] + i as f64 * h;
        if !((x - want).abs() <= 1e-7 * h) {
            return Err(Error::Parse(format!("grid coordinate {i} is not uniformly spaced")));
        }
    }
    Ok((xs[0] - 0.5 * h, xs[n - 1] + 0.5 * h, n))
}

/// CSV numeral with 12 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.11e}")
}

pub(crate) fn parse_num(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("not a number: {s:?}")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Parse(format!("non-finite number: {s:?}")))
    }
}

/// Weighted ℓ^p norm `(Σ w_i |v_i|^p)^{1/p}`, summed in index order.
pub fn weighted_lp_norm(values: &[f64], weights: &[f64], p: f64) -> f64 {
    let mut acc = 0.0;
    for (v, w) in values.iter().zip(weights) {
        acc += w * v.abs().powf(p);
    }
    acc.powf(1.0 / p)
}

/// Visits the entries of the extended function on `X ∪ X²`: first every
/// grid point, then every ordered pair of distinct points.
fn visit_barf<F: FnMut(f64, f64)>(f: &GridFunction, s: f64, mut visit: F) {
    let d = f.domain.as_ref();
    let m = d.dim() as i32;
    let n = d.len();
    for i in 0..n {
        visit(f.values[i], d.weight(i));
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dist = d.distance(i, j);
            let v = (f.values[i] - f.values[j]) / dist.powf(s);
            let w = d.weight(i) * d.weight(j) / dist.powi(m);
            visit(v, w);
        }
    }
}

/// The extended function `f̄` on `X ∪ X²` with its quadrature weights.
#[derive(Clone, Debug, PartialEq)]
pub struct BarfVector {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    /// Number of leading entries belonging to the point block.
    pub point_block: usize,
}

impl BarfVector {
    pub fn lp_norm(&self, p: f64) -> f64 {
        weighted_lp_norm(&self.values, &self.weights, p)
    }
}

pub fn barf_transform(f: &GridFunction, s: f64) -> Result<BarfVector> {
    if !(s > 0.0 && s < 1.0) {
        return domain(format!("s must lie in (0, 1), got {s}"));
    }
    let n = f.domain.len();
    let mut values = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    visit_barf(f, s, |v, w| {
        values.push(v);
        weights.push(w);
    });
    Ok(BarfVector {
        values,
        weights,
        point_block: n,
    })
}

/// Midpoint-rule Sobolev–Slobodetsky norm; the diagonal `x = y` is excluded.
pub fn sobolev_norm(f: &GridFunction, params: &SobolevParams) -> Result<f64> {
    if params.s >= 1.0 {
        return domain("sobolev_norm needs s < 1; use w1p_norm for s = 1");
    }
    SobolevParams::new(params.s, params.p)?;
    let p = params.p;
    let mut acc = 0.0;
    visit_barf(f, params.s, |v, w| acc += w * v.abs().powf(p));
    Ok(acc.powf(1.0 / p))
}

fn derivative(f: &GridFunction) -> Vec<f64> {
    let v = &f.values;
    let n = v.len();
    let h = f.domain.spacing(0);
    (0..n)
        .map(|i| {
            if i == 0 {
                (v[1] - v[0]) / h
            } else if i == n - 1 {
                (v[n - 1] - v[n - 2]) / h
            } else {
                (v[i + 1] - v[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// `(∫|f|^p + ∫|f'|^p)^{1/p}` on `[0,1]` with finite-difference derivatives.
pub fn w1p_norm(f: &GridFunction, p: f64) -> Result<f64> {
    if !f.domain.is_unit_interval() {
        return domain("w1p_norm is defined on the unit interval only");
    }
    if !(p >= 1.0 && p.is_finite()) {
        return domain(format!("p must be a finite real >= 1, got {p}"));
    }
    let h = f.domain.spacing(0);
    let df = derivative(f);
    let acc: f64 = f
        .values
        .iter()
        .chain(&df)
        .map(|v| h * v.abs().powf(p))
        .sum();
    Ok(acc.powf(1.0 / p))
}

/// `max(sup|f|, sup_{x≠y} |f(x)−f(y)|/|x−y|^s)` over grid points.
pub fn holder_norm(f: &GridFunction, s: f64) -> Result<f64> {
    if !(s > 0.0 && s <= 1.0) {
        return domain(format!("s must lie in (0, 1], got {s}"));
    }
    let d = f.domain.as_ref();
    let mut best = f.max_abs();
    for i in 0..d.len() {
        for j in (i + 1)..d.len() {
            let q = (f.values[i] - f.values[j]).abs() / d.distance(i, j).powf(s);
            best = best.max(q);
        }
    }
    Ok(best)
}

/// Volume of the Euclidean unit ball in ℝ^m.
fn unit_ball_volume(m: usize) -> f64 {
    match m {
        1 => 2.0,
        2 => std::f64::consts::PI,
        _ => unreachable!("grid domains have m <= 2"),
    }
}

/// Upper bound on `‖f‖_{s',p}` for `f` with Hölder norm `C` of order `s > s'`:
/// `C(1 + m·V_m·|X|·diam^{(s−s')p} / ((s−s')p))^{1/p}`.
pub fn holder_embedding_bound(
    c: f64,
    s: f64,
    s_prime: f64,
    p: f64,
    domain: &GridDomain,
) -> Result<f64> {
    if !(s_prime < s) {
        return crate::error::domain(format!("need s' < s, got s' = {s_prime}, s = {s}"));
    }
    if !(p > 1.0 && p.is_finite()) {
        return crate::error::domain(format!("p must lie in (1, inf), got {p}"));
    }
    if !(c >= 0.0) {
        return crate::error::domain(format!("Hölder norm must be nonnegative, got {c}"));
    }
    let m = domain.dim();
    let e = (s - s_prime) * p;
    let inner = 1.0 + m as f64 * unit_ball_volume(m) * domain.volume() * domain.diam().powf(e) / e;
    Ok(c * inner.powf(1.0 / p))
}

/// Sparse representation of a discretized norm `‖f‖ = (Σ_r w_r |(Mf)_r|^p)^{1/p}`.
#[derive(Clone, Debug)]
pub struct NormOperator {
    cols: usize,
    row_ptr: Vec<usize>,
    idx: Vec<usize>,
    coef: Vec<f64>,
    weights: Vec<f64>,
    p: f64,
}

impl NormOperator {
    fn new(cols: usize, p: f64) -> Self {
        Self {
            cols,
            row_ptr: vec![0],
            idx: Vec::new(),
            coef: Vec::new(),
            weights: Vec::new(),
            p,
        }
    }

    fn push_row(&mut self, weight: f64, entries: &[(usize, f64)]) {
        for &(i, c) in entries {
            self.idx.push(i);
            self.coef.push(c);
        }
        self.row_ptr.push(self.idx.len());
        self.weights.push(weight);
    }

    pub fn rows(&self) -> usize {
        self.weights.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.idx[a..b].iter().copied().zip(self.coef[a..b].iter().copied())
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.rows())
            .map(|r| self.row(r).map(|(i, c)| c * f[i]).sum())
            .collect()
    }

    /// `Mᵀ λ`.
    pub fn apply_transpose(&self, lambda: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, l) in lambda.iter().enumerate() {
            for (i, c) in self.row(r) {
                out[i] += c * l;
            }
        }
        out
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        weighted_lp_norm(&self.apply(f), &self.weights, self.p)
    }

    /// `out = Mᵀ diag(d) M v`, in one pass over the rows.
    pub fn gram_apply(&self, d: &[f64], v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for r in 0..self.rows() {
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let idx = &self.idx[a..b];
            let coef = &self.coef[a..b];
            let mut t = 0.0;
            for k in 0..idx.len() {
                t += coef[k] * v[idx[k]];
            }
            t *= d[r];
            for k in 0..idx.len() {
                out[idx[k]] += coef[k] * t;
            }
        }
    }
}

/// `sup_x ‖k_x‖` over the grid nodes of the dual of the discretized space;
/// a lower bound on the embedding constant `c_{s,p}`.
pub fn embedding_constant_estimate(params: &SobolevParams, domain: Arc<GridDomain>) -> Result<f64> {
    let k = crate::kernel::DualSobolevKernel::<f64>::new(
        domain,
        *params,
        crate::kernel::SolverSettings::default(),
    )?;
    k.embedding_constant()
}

/// The operator of the Sobolev norm selected by `params` on `domain`.
///
/// Fractional orders use one row per unordered pair with doubled weight;
/// `s = 1` uses the finite-difference derivative rows of [`w1p_norm`].
pub fn norm_operator(domain: &GridDomain, params: &SobolevParams) -> Result<NormOperator> {
    params.validate_for(domain)?;
    let n = domain.len();
    let mut op = NormOperator::new(n, params.p);
    for i in 0..n {
        op.push_row(domain.weight(i), &[(i, 1.0)]);
    }
    if params.s == 1.0 {
        let h = domain.spacing(0);
        op.push_row(h, &[(0, -1.0 / h), (1, 1.0 / h)]);
        for i in 1..n - 1 {
            op.push_row(h, &[(i - 1, -0.5 / h), (i + 1, 0.5 / h)]);
        }
        op.push_row(h, &[(n - 2, -1.0 / h), (n - 1, 1.0 / h)]);
    } else {
        let m = domain.dim() as i32;
        for i in 0..n {
            for j in (i + 1)..n {
                let dist = domain.distance(i, j);
                let c = 1.0 / dist.powf(params.s);
                let w = 2.0 * domain.weight(i) * domain.weight(j) / dist.powi(m);
                op.push_row(w, &[(i, c), (j, -c)]);
            }
        }
    }
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(g: usize) -> Arc<GridDomain> {
        Arc::new(GridDomain::unit_interval(g).unwrap())
    }

    #[test]
    fn grid_basics() {
        let d = GridDomain::unit_interval(4).unwrap();
        assert_eq!(d.point(0), &[0.125]);
        assert!((d.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(GridDomain::unit_interval(1).is_err());
        let sq = GridDomain::unit_square(3).unwrap();
        assert_eq!(sq.len(), 9);
        assert!((sq.diam() - 2f64.sqrt()).abs() < 1e-15);
        assert!((sq.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let d = GridDomain::unit_interval(10).unwrap();
        let w = d.interpolation(&[0.52]).unwrap();
        let v: f64 = w.iter().map(|&(i, c)| c * d.point(i)[0]).sum();
        assert!((v - 0.52).abs() < 1e-14);
        assert_eq!(d.interpolation(&[0.0]).unwrap(), vec![(0, 1.0)]);
        assert!(d.interpolation(&[1.5]).is_err());
        assert_eq!(d.node_index(&[0.05]), Some(0));
    }

    #[test]
    fn constant_and_zero() {
        let d = unit(64);
        let params = SobolevParams::new(0.5, 4.0).unwrap();
        let one = GridFunction::from_fn(d.clone(), |_| 1.0).unwrap();
        assert!((sobolev_norm(&one, &params).unwrap() - 1.0).abs() < 1e-12);
        let zero = GridFunction::from_fn(d, |_| 0.0).unwrap();
        assert_eq!(sobolev_norm(&zero, &params).unwrap(), 0.0);
    }

    #[test]
    fn s_one_rejected_by_sobolev_norm() {
        let f = GridFunction::from_fn(unit(8), |x| x[0]).unwrap();
        assert!(sobolev_norm(&f, &SobolevParams::new(1.0, 2.0).unwrap()).is_err());
    }

    #[test]
    fn imbedding_condition_enforced_by_operator() {
        let f = GridFunction::from_fn(unit(8), |x| x[0]).unwrap();
        let weak = SobolevParams::new(0.4, 2.0).unwrap();
        assert!(norm_operator(&unit(8), &weak).is_err());
        assert!(sobolev_norm(&f, &weak).unwrap() > 0.0);
    }

    #[test]
    fn operator_matches_direct_norm() {
        let d = unit(40);
        let params = SobolevParams::new(0.6, 3.0).unwrap();
        let f = GridFunction::from_fn(d.clone(), |x| (3.0 * x[0]).sin()).unwrap();
        let op = norm_operator(&d, &params).unwrap();
        let a = op.norm(f.values());
        let b = sobolev_norm(&f, &params).unwrap();
        assert!((a - b).abs() < 1e-12 * b);
    }

    #[test]
    fn w1p_operator_matches() {
        let d = unit(50);
        let params = SobolevParams::new(1.0, 2.0).unwrap();
        let f = GridFunction::from_fn(d.clone(), |x| x[0] * x[0]).unwrap();
        let op = norm_operator(&d, &params).unwrap();
        assert!((op.norm(f.values()) - w1p_norm(&f, 2.0).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn csv_round_trip() {
        let d = unit(7);
        let f = GridFunction::from_fn(d, |x| x[0].exp()).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = GridFunction::read_csv(buf.as_slice()).unwrap();
        assert_eq!(g.domain().len(), 7);
        for (a, b) in f.values().iter().zip(g.values()) {
            assert!((a - b).abs() < 1e-10);
        }

        let sq = Arc::new(GridDomain::unit_square(3).unwrap());
        let f = GridFunction::from_fn(sq, |x| x[0] - x[1]).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = GridFunction::read_csv(buf.as_slice()).unwrap();
        assert_eq!(g.domain().shape(), &[3, 3]);
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(GridFunction::read_csv("x,value\n0.1,1\n".as_bytes()).is_err());
        assert!(GridFunction::read_csv("x,value\n0.1,1\n0.2,nan\n".as_bytes()).is_err());
        assert!(GridFunction::read_csv("a,b\n".as_bytes()).is_err());
        assert!(GridFunction::read_csv("x,value\n0.1,1\n0.2,1\n0.5,1\n".as_bytes()).is_err());
    }
}
