//! Bayes linear adjustment of latent expectations by observed quantities,
//! with the adjusted expectation of each latent optionally constrained to
//! `[0, 1]`.
//!
//! The unconstrained adjustment is the best linear predictor of each `Z_k`
//! from `Y` under squared error. When that predictor's fitted value at the
//! observed `y` leaves `[0, 1]`, the bound it crossed is the active
//! constraint, and the equality-constrained problem has a closed form via a
//! rank-one modification of `Var(Y)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};

/// Prior means and covariances for an adjustment, plus the observed data.
#[derive(Debug, Clone, PartialEq)]
pub struct BlInputs {
    /// `E[Z]`, length m.
    pub ez: DVector<f64>,
    /// `Var(Z)`, m x m.
    pub vz: DMatrix<f64>,
    /// `E[Y]`, length n.
    pub ey: DVector<f64>,
    /// `Var(Y)`, n x n.
    pub vy: DMatrix<f64>,
    /// `Cov(Z, Y)`, m x n.
    pub czy: DMatrix<f64>,
    /// Observed `y`, length n.
    pub y: DVector<f64>,
}

impl BlInputs {
    pub fn latent_count(&self) -> usize {
        self.ez.len()
    }

    pub fn observation_count(&self) -> usize {
        self.ey.len()
    }

    pub fn check_dimensions(&self) -> Result<()> {
        let (m, n) = (self.ez.len(), self.ey.len());
        let ok = self.vz.shape() == (m, m)
            && self.vy.shape() == (n, n)
            && self.czy.shape() == (m, n)
            && self.y.len() == n;
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "m={m}, n={n}: vz {:?}, vy {:?}, czy {:?}, y {}",
                self.vz.shape(),
                self.vy.shape(),
                self.czy.shape(),
                self.y.len()
            )))
        }
    }

    /// Expected squared error `E[(Z_k - h0 - h.Y)^2]` of a linear predictor.
    pub fn objective(&self, k: usize, coef: &BlCoefficients) -> f64 {
        let ez = self.ez[k];
        let ezz = self.vz[(k, k)] + ez * ez;
        let ezy = self.czy.row(k).transpose() + &self.ey * ez;
        let eyy = &self.vy + &self.ey * self.ey.transpose();
        let h = &coef.h;
        ezz - 2.0 * coef.h0 * ez - 2.0 * h.dot(&ezy)
            + 2.0 * coef.h0 * h.dot(&self.ey)
            + coef.h0 * coef.h0
            + h.dot(&(&eyy * h))
    }
}

/// Intercept and data weights of the linear predictor for one latent.
#[derive(Debug, Clone, PartialEq)]
pub struct BlCoefficients {
    pub h0: f64,
    pub h: DVector<f64>,
}

impl BlCoefficients {
    pub fn fitted(&self, y: &DVector<f64>) -> f64 {
        self.h0 + self.h.dot(y)
    }
}

/// Which bound, if any, was active for a latent's adjusted expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClipFlag {
    #[default]
    None,
    Upper,
    Lower,
}

/// Adjusted beliefs about the latent vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub clip_flags: Vec<ClipFlag>,
}

/// Output of the unconstrained adjustment.
#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedUpdate {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Row k holds the data weights `h^k`.
    pub weights: DMatrix<f64>,
    /// `h0^k = E[Z_k] - h^k . E[Y]`.
    pub intercepts: DVector<f64>,
}

impl UnconstrainedUpdate {
    pub fn coefficients(&self, k: usize) -> BlCoefficients {
        BlCoefficients {
            h0: self.intercepts[k],
            h: self.weights.row(k).transpose(),
        }
    }
}

const JITTER_LADDER: [f64; 2] = [1e-10, 1e-8];

/// Factorisation of a (nearly) symmetric positive-definite matrix.
enum Factor {
    Cholesky(Cholesky<f64, Dyn>),
    Lu(LU<f64, Dyn, Dyn>),
}

impl Factor {
    /// Cholesky with diagonal jitter `s * trace / n` for each rung of the
    /// ladder; falls back to LU of the most jittered matrix when the matrix
    /// is invertible but indefinite.
    fn new(v: &DMatrix<f64>, what: &str) -> Result<Self> {
        let n = v.nrows();
        let trace = v.trace();
        if !trace.is_finite() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Singular(format!("{what} has non-finite entries")));
        }
        let base = if trace > 0.0 { trace / n as f64 } else { 0.0 };
        let mut last = v.clone();
        for scale in JITTER_LADDER {
            let mut jittered = v.clone();
            for i in 0..n {
                jittered[(i, i)] += scale * base;
            }
            if let Some(ch) = jittered.clone().cholesky() {
                return Ok(Factor::Cholesky(ch));
            }
            last = jittered;
        }
        let lu = last.lu();
        let max_pivot = (0..n).map(|i| lu.u()[(i, i)].abs()).fold(0.0, f64::max);
        let min_pivot = (0..n).map(|i| lu.u()[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if n == 0 || !(min_pivot > max_pivot * 1e-14) {
            return Err(Error::Singular(format!("{what} is singular after regularisation")));
        }
        Ok(Factor::Lu(lu))
    }

    fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Factor::Cholesky(ch) if ch.l_dirty().nrows() < 2 * SOLVE_BLOCK => ch.solve(rhs),
            Factor::Cholesky(ch) => blocked_cholesky_solve(&ch.l(), rhs),
            Factor::Lu(lu) => lu.solve(rhs).expect("pivots checked at factorisation"),
        }
    }
}

const SOLVE_BLOCK: usize = 64;

/// Solves `L L^T X = B` by block substitution so that nearly all of the work
/// is matrix-matrix products.
fn blocked_cholesky_solve(l: &DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let starts: Vec<usize> = (0..n).step_by(SOLVE_BLOCK).collect();
    let width = |s: usize| SOLVE_BLOCK.min(n - s);
    let mut x = rhs.clone();
    for &s in &starts {
        let b = width(s);
        if s > 0 {
            let update = l.view((s, 0), (b, s)) * x.rows(0, s);
            x.rows_mut(s, b).zip_apply(&update, |v, u| *v -= u);
        }
        let diag = l.view((s, s), (b, b)).into_owned();
        let mut block = x.rows(s, b).into_owned();
        diag.solve_lower_triangular_mut(&mut block);
        x.rows_mut(s, b).copy_from(&block);
    }
    for &s in starts.iter().rev() {
        let b = width(s);
        let tail = s + b;
        if tail < n {
            let update = l.view((tail, s), (n - tail, b)).transpose() * x.rows(tail, n - tail);
            x.rows_mut(s, b).zip_apply(&update, |v, u| *v -= u);
        }
        let diag = l.view((s, s), (b, b)).into_owned();
        let mut block = x.rows(s, b).into_owned();
        diag.tr_solve_lower_triangular_mut(&mut block);
        x.rows_mut(s, b).copy_from(&block);
    }
    x
}

/// Unconstrained adjustment with the data-weight matrix precomputed, so the
/// adjusted expectation can be evaluated for many candidate `y` vectors.
pub struct LinearAdjuster {
    ez: DVector<f64>,
    ey: DVector<f64>,
    weights: DMatrix<f64>,
}

impl LinearAdjuster {
    pub fn new(
        ez: &DVector<f64>,
        ey: &DVector<f64>,
        vy: &DMatrix<f64>,
        czy: &DMatrix<f64>,
    ) -> Result<Self> {
        let weights = if ey.is_empty() {
            DMatrix::zeros(ez.len(), 0)
        } else {
            Factor::new(vy, "Var(Y)")?.solve(&czy.transpose()).transpose()
        };
        Ok(Self {
            ez: ez.clone(),
            ey: ey.clone(),
            weights,
        })
    }

    pub fn unconstrained_means(&self, y: &DVector<f64>) -> DVector<f64> {
        if self.ey.is_empty() {
            return self.ez.clone();
        }
        &self.ez + &self.weights * (y - &self.ey)
    }

    /// Adjusted expectations with the active bound substituted where the
    /// unconstrained value leaves `[0, 1]`; the equality-constrained fit
    /// attains the bound exactly.
    pub fn constrained_means(&self, y: &DVector<f64>) -> DVector<f64> {
        self.unconstrained_means(y).map(|v| match clip_of(v) {
            ClipFlag::None => v,
            ClipFlag::Upper => 1.0,
            ClipFlag::Lower => 0.0,
        })
    }
}

fn clip_of(v: f64) -> ClipFlag {
    if v > 1.0 {
        ClipFlag::Upper
    } else if v < 0.0 {
        ClipFlag::Lower
    } else {
        ClipFlag::None
    }
}

fn symmetrize(c: &DMatrix<f64>) -> DMatrix<f64> {
    (c + c.transpose()) * 0.5
}

/// Standard Bayes linear adjustment of `E[Z]` and `Var(Z)` by `y`.
pub fn unconstrained_update(inputs: &BlInputs) -> Result<UnconstrainedUpdate> {
    inputs.check_dimensions()?;
    let m = inputs.latent_count();
    if inputs.observation_count() == 0 {
        return Ok(UnconstrainedUpdate {
            mean: inputs.ez.clone(),
            cov: inputs.vz.clone(),
            weights: DMatrix::zeros(m, 0),
            intercepts: inputs.ez.clone(),
        });
    }
    let adjuster = LinearAdjuster::new(&inputs.ez, &inputs.ey, &inputs.vy, &inputs.czy)?;
    let mean = adjuster.unconstrained_means(&inputs.y);
    let correction = &adjuster.weights * inputs.czy.transpose();
    let cov = symmetrize(&(&inputs.vz - correction));
    let intercepts = &inputs.ez - &adjuster.weights * &inputs.ey;
    Ok(UnconstrainedUpdate {
        mean,
        cov,
        weights: adjuster.weights,
        intercepts,
    })
}

/// Closed-form minimiser of the expected squared error for `Z_k` subject to
/// the fitted value at the observed `y` equalling `c`.
pub fn solve_equality_qp(inputs: &BlInputs, k: usize, c: f64) -> Result<BlCoefficients> {
    inputs.check_dimensions()?;
    if k >= inputs.latent_count() {
        return Err(Error::Dimension(format!("latent index {k} out of range")));
    }
    let d = &inputs.y - &inputs.ey;
    let factor = Factor::new(&modified_var(inputs, &d), "Var(Y) + d d^T")?;
    let rhs = DMatrix::from_column_slice(
        d.len(),
        1,
        (inputs.czy.row(k).transpose() + &d * (c - inputs.ez[k])).as_slice(),
    );
    let h = factor.solve(&rhs).column(0).into_owned();
    let h0 = c - h.dot(&inputs.y);
    Ok(BlCoefficients { h0, h })
}

fn modified_var(inputs: &BlInputs, d: &DVector<f64>) -> DMatrix<f64> {
    &inputs.vy + d * d.transpose()
}

/// Adjustment with each latent's fitted expectation constrained to `[0, 1]`.
///
/// Latents whose unconstrained expectation is inside the interval keep the
/// unconstrained coefficients and covariance entries untouched. The others
/// are refit against the crossed bound, and their covariance rows are
/// recomputed as the expected product of the two predictors' residuals.
pub fn constrained_update(inputs: &BlInputs) -> Result<BeliefState> {
    let un = unconstrained_update(inputs)?;
    let flags: Vec<ClipFlag> = un.mean.iter().map(|&v| clip_of(v)).collect();
    let clipped: Vec<usize> = (0..flags.len()).filter(|&k| flags[k] != ClipFlag::None).collect();
    if clipped.is_empty() {
        return Ok(BeliefState {
            mean: un.mean,
            cov: un.cov,
            clip_flags: flags,
        });
    }

    let n = inputs.observation_count();
    let d = &inputs.y - &inputs.ey;
    let factor = Factor::new(&modified_var(inputs, &d), "Var(Y) + d d^T")?;
    let targets: Vec<f64> = clipped
        .iter()
        .map(|&k| if flags[k] == ClipFlag::Upper { 1.0 } else { 0.0 })
        .collect();
    let mut rhs = DMatrix::zeros(n, clipped.len());
    for (j, (&k, &c)) in clipped.iter().zip(&targets).enumerate() {
        let col = inputs.czy.row(k).transpose() + &d * (c - inputs.ez[k]);
        rhs.set_column(j, &col);
    }
    let solved = factor.solve(&rhs);

    let mut weights = un.weights;
    let mut intercepts = un.intercepts;
    let mut mean = un.mean;
    for (j, (&k, &c)) in clipped.iter().zip(&targets).enumerate() {
        let h = solved.column(j);
        weights.set_row(k, &h.transpose());
        intercepts[k] = c - h.dot(&inputs.y);
        mean[k] = c;
    }

    // Residual bias E[Z_l - h0_l - h_l.Y] for every latent.
    let bias = &inputs.ez - &intercepts - &weights * &inputs.ey;
    let mut cov = un.cov;
    let refit = weights.select_rows(&clipped);
    let wvw = (&refit * &inputs.vy) * weights.transpose();
    let wc = &weights * inputs.czy.transpose();
    for (j, &k) in clipped.iter().enumerate() {
        for l in 0..inputs.latent_count() {
            let value = inputs.vz[(k, l)] - wc[(k, l)] - wc[(l, k)] + wvw[(j, l)] + bias[k] * bias[l];
            cov[(k, l)] = value;
            cov[(l, k)] = value;
        }
    }
    Ok(BeliefState {
        mean,
        cov: symmetrize(&cov),
        clip_flags: flags,
    })
}
