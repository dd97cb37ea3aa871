//! Normalized radial-basis expansion y*(s) over arc length, with closed-form
//! first and second derivatives.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, GdmpError, Result};
use crate::sampling::SpatialPath;

/// Gaussian kernels with uniform or explicit centers and a shared width.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfBasis {
    centers: Vec<f64>,
    width: f64,
    s_f: f64,
}

/// Normalized activations and their derivatives at one abscissa.
#[derive(Debug, Clone)]
pub struct Activations {
    pub phi: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl RbfBasis {
    pub fn new(centers: Vec<f64>, width: f64, s_f: f64) -> Result<Self> {
        if centers.len() < 2 {
            return Err(invalid("a basis needs at least 2 centers"));
        }
        if !(s_f.is_finite() && s_f > 0.0) {
            return Err(invalid(format!("domain end must be positive, got {s_f}")));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(invalid(format!("basis width must be positive, got {width}")));
        }
        for w in centers.windows(2) {
            if !(w[1] > w[0]) {
                return Err(invalid("centers must be strictly increasing"));
            }
        }
        let tol = 1e-12 * s_f;
        if centers[0] < -tol || *centers.last().unwrap() > s_f + tol {
            return Err(invalid("centers must lie inside the domain"));
        }
        Ok(RbfBasis { centers, width, s_f })
    }

    /// `n` centers spread uniformly on [0, s_f]; h = (width_scale·spacing)².
    pub fn uniform(n: usize, s_f: f64, width_scale: f64) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("n_basis must be at least 2, got {n}")));
        }
        if !(width_scale.is_finite() && width_scale > 0.0) {
            return Err(invalid(format!("width scale must be positive, got {width_scale}")));
        }
        let spacing = s_f / (n - 1) as f64;
        let centers = (0..n).map(|i| i as f64 * spacing).collect();
        Self::new(centers, (width_scale * spacing).powi(2), s_f)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn s_f(&self) -> f64 {
        self.s_f
    }

    /// Normalized activations φ_i(s) only.
    pub fn phi(&self, s: f64) -> Vec<f64> {
        let h = self.width;
        let e: Vec<f64> = self.centers.iter().map(|c| -(s - c).powi(2) / (2.0 * h)).collect();
        let top = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let b: Vec<f64> = e.iter().map(|x| (x - top).exp()).collect();
        let sum: f64 = b.iter().sum();
        b.into_iter().map(|x| x / sum).collect()
    }

    /// φ_i, φ_i′ and φ_i″ by the quotient rule. The kernels are rescaled by
    /// their largest value first; every ratio is invariant to that factor.
    pub fn activations(&self, s: f64) -> Activations {
        let h = self.width;
        let n = self.centers.len();
        let top = self
            .centers
            .iter()
            .map(|c| -(s - c).powi(2) / (2.0 * h))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut b = vec![0.0; n];
        let mut b1 = vec![0.0; n];
        let mut b2 = vec![0.0; n];
        let (mut sum0, mut sum1, mut sum2) = (0.0, 0.0, 0.0);
        for (i, c) in self.centers.iter().enumerate() {
            let r = s - c;
            let v = (-(r * r) / (2.0 * h) - top).exp();
            b[i] = v;
            b1[i] = -r / h * v;
            b2[i] = (r * r / (h * h) - 1.0 / h) * v;
            sum0 += b[i];
            sum1 += b1[i];
            sum2 += b2[i];
        }
        let inv = 1.0 / sum0;
        let mut phi = vec![0.0; n];
        let mut d1 = vec![0.0; n];
        let mut d2 = vec![0.0; n];
        for i in 0..n {
            phi[i] = b[i] * inv;
            d1[i] = b1[i] * inv - b[i] * sum1 * inv * inv;
            d2[i] = b2[i] * inv - 2.0 * b1[i] * sum1 * inv * inv - b[i] * sum2 * inv * inv
                + 2.0 * b[i] * sum1 * sum1 * inv * inv * inv;
        }
        Activations { phi, d1, d2 }
    }
}

/// Value, tangent and curvature vector of a curve at one abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub pos: DVector<f64>,
    pub d1: DVector<f64>,
    pub d2: DVector<f64>,
}

/// y*(s) = Σ_i ω_i φ_i(s) on [0, s_f], clamped outside.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricCurve {
    basis: RbfBasis,
    /// N×d; column k holds the weights of output dimension k.
    weights: DMatrix<f64>,
    delta: f64,
    start: DVector<f64>,
    goal: DVector<f64>,
}

impl ParametricCurve {
    pub fn new(basis: RbfBasis, weights: DMatrix<f64>, delta: f64) -> Result<Self> {
        if weights.nrows() != basis.len() || weights.ncols() == 0 {
            return Err(invalid(format!(
                "weights are {}x{}, expected {} rows",
                weights.nrows(),
                weights.ncols(),
                basis.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("weights must be finite"));
        }
        let d = weights.ncols();
        let mut curve = ParametricCurve {
            basis,
            weights,
            delta,
            start: DVector::zeros(d),
            goal: DVector::zeros(d),
        };
        curve.start = curve.combine(&curve.basis.phi(0.0));
        curve.goal = curve.combine(&curve.basis.phi(curve.basis.s_f));
        Ok(curve)
    }

    fn combine(&self, coef: &[f64]) -> DVector<f64> {
        let d = self.weights.ncols();
        DVector::from_fn(d, |k, _| {
            coef.iter().enumerate().map(|(i, c)| c * self.weights[(i, k)]).sum()
        })
    }

    pub fn basis(&self) -> &RbfBasis {
        &self.basis
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn s_f(&self) -> f64 {
        self.basis.s_f
    }

    /// Spatial period of the samples this curve was fitted to.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// y*(0).
    pub fn start(&self) -> &DVector<f64> {
        &self.start
    }

    /// y*(s_f).
    pub fn goal(&self) -> &DVector<f64> {
        &self.goal
    }

    fn check(s: f64) -> Result<()> {
        if s.is_finite() {
            Ok(())
        } else {
            Err(invalid(format!("curve abscissa must be finite, got {s}")))
        }
    }

    /// Value and derivatives at `s`. Outside the domain the value and tangent
    /// of the nearest end are returned with zero curvature.
    pub fn point(&self, s: f64) -> Result<CurvePoint> {
        Self::check(s)?;
        let inside = (0.0..=self.basis.s_f).contains(&s);
        let sc = s.clamp(0.0, self.basis.s_f);
        let a = self.basis.activations(sc);
        let d2 = if inside { self.combine(&a.d2) } else { DVector::zeros(self.dim()) };
        Ok(CurvePoint { pos: self.combine(&a.phi), d1: self.combine(&a.d1), d2 })
    }

    pub fn eval(&self, s: f64) -> Result<DVector<f64>> {
        Self::check(s)?;
        Ok(self.combine(&self.basis.phi(s.clamp(0.0, self.basis.s_f))))
    }

    pub fn eval_d1(&self, s: f64) -> Result<DVector<f64>> {
        Ok(self.point(s)?.d1)
    }

    pub fn eval_d2(&self, s: f64) -> Result<DVector<f64>> {
        Ok(self.point(s)?.d2)
    }

    pub fn to_doc(&self) -> CurveDoc {
        CurveDoc {
            n_basis: self.basis.len(),
            centers: self.basis.centers.clone(),
            width: self.basis.width,
            s_f: self.basis.s_f,
            weights: (0..self.dim()).map(|k| self.weights.column(k).iter().copied().collect()).collect(),
            delta: self.delta,
            goal: self.goal.iter().copied().collect(),
            start: self.start.iter().copied().collect(),
        }
    }

    pub fn from_doc(doc: &CurveDoc) -> Result<Self> {
        if doc.centers.len() != doc.n_basis {
            return Err(invalid("n_basis does not match the number of centers"));
        }
        let basis = RbfBasis::new(doc.centers.clone(), doc.width, doc.s_f)?;
        let d = doc.weights.len();
        if d == 0 || doc.weights.iter().any(|w| w.len() != doc.n_basis) {
            return Err(invalid("weights must be a d x n_basis array"));
        }
        let weights = DMatrix::from_fn(doc.n_basis, d, |i, k| doc.weights[k][i]);
        Self::new(basis, weights, doc.delta)
    }
}

/// Serialized form of a [`ParametricCurve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveDoc {
    pub n_basis: usize,
    pub centers: Vec<f64>,
    pub width: f64,
    pub s_f: f64,
    pub weights: Vec<Vec<f64>>,
    pub delta: f64,
    pub goal: Vec<f64>,
    pub start: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CurveFit {
    pub curve: ParametricCurve,
    pub rms_residual: f64,
    pub max_residual: f64,
}

/// Fits the spatial samples of `path` over their arc lengths.
pub fn fit_curve(path: &SpatialPath, n_basis: usize, width_scale: f64, ridge: f64) -> Result<CurveFit> {
    fit_samples(&path.arclengths, &path.points, path.length(), n_basis, width_scale, ridge, path.delta)
}

/// Regularized least-squares fit of `values` at abscissae `s` on [0, s_f].
pub fn fit_samples(
    s: &[f64],
    values: &[DVector<f64>],
    s_f: f64,
    n_basis: usize,
    width_scale: f64,
    ridge: f64,
    delta: f64,
) -> Result<CurveFit> {
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(invalid(format!("ridge must be non-negative, got {ridge}")));
    }
    if s.len() != values.len() || values.is_empty() {
        return Err(invalid("abscissae and values must be non-empty and aligned"));
    }
    if n_basis > s.len() {
        return Err(invalid(format!("n_basis {n_basis} exceeds the {} available samples", s.len())));
    }
    let basis = RbfBasis::uniform(n_basis, s_f, width_scale)?;
    let d = values[0].len();
    let m = s.len();
    let mut phi = DMatrix::zeros(m, n_basis);
    for (r, &sk) in s.iter().enumerate() {
        for (c, v) in basis.phi(sk).into_iter().enumerate() {
            phi[(r, c)] = v;
        }
    }
    let targets = DMatrix::from_fn(m, d, |r, k| values[r][k]);
    let gram = phi.tr_mul(&phi) + DMatrix::identity(n_basis, n_basis) * ridge;
    let rhs = phi.tr_mul(&targets);
    let weights = solve_normal(gram, &rhs, ridge)?;

    let fitted = &phi * &weights;
    let mut sq = 0.0;
    let mut worst = 0.0f64;
    for r in 0..m {
        let e = (fitted.row(r) - targets.row(r)).norm();
        sq += e * e;
        worst = worst.max(e);
    }
    let curve = ParametricCurve::new(basis, weights, delta)?;
    Ok(CurveFit { curve, rms_residual: (sq / m as f64).sqrt(), max_residual: worst })
}

/// Cholesky on the normal matrix, falling back to column-pivoted QR when the
/// factorization fails or is badly conditioned.
fn solve_normal(gram: DMatrix<f64>, rhs: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    if let Some(chol) = gram.clone().cholesky() {
        let diag = chol.l_dirty().diagonal();
        let hi = diag.iter().cloned().fold(0.0f64, f64::max);
        let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if lo > 0.0 && (hi / lo).powi(2) < 1e12 {
            return Ok(chol.solve(rhs));
        }
    }
    let qr = gram.col_piv_qr();
    let r = qr.r();
    let r00 = r[(0, 0)].abs();
    let rnn = r.diagonal().iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    if ridge == 0.0 && !(rnn > 1e-13 * r00) {
        return Err(GdmpError::SingularFit(format!(
            "normal matrix is rank deficient (pivot ratio {:.3e})",
            rnn / r00
        )));
    }
    qr.solve(rhs).ok_or_else(|| GdmpError::SingularFit("normal matrix is singular".into()))
}
