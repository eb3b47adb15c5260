//! Continuous-time modes: sampled dynamics of a linear SDE, moments of the
//! Gaussian bridge between two samples, and bounds on the probability that
//! the path stays in the safe set between samples.

use crate::abstraction::{
    build_imdp_with, AbstractionError, BuildOptions, Discretization, HybridSystem, Imdp, Mode, Region,
};
use crate::geometry::{minkowski_sum, post_image, GeometryError, HyperRectangle, Parallelotope};
use crate::kernel::{max_f, Domain, KernelError, MaxMethod, ModeDynamics, Whitening};
use crate::linalg::{expm, identity, inverse, is_symmetric, mat_vec, sqrt_psd, sym_eigen, Mat};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BridgeError {
    #[error("sampling time must be positive, got {0}")]
    InvalidStep(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("sampled covariance is singular")]
    SingularCovariance,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// `dx = F x dt + G dW` with `Cov(dW) = Cov_w dt`, sampled every `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct CtModeDynamics {
    pub drift: Mat,
    pub diffusion: Mat,
    pub dt: f64,
}

impl CtModeDynamics {
    pub fn new(drift: Mat, diffusion: Mat, dt: f64) -> Result<Self, BridgeError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(BridgeError::InvalidStep(dt));
        }
        if drift.nrows() != drift.ncols() || diffusion.nrows() != drift.nrows() {
            return Err(BridgeError::DimensionMismatch(format!(
                "F is {}x{}, G is {}x{}",
                drift.nrows(),
                drift.ncols(),
                diffusion.nrows(),
                diffusion.ncols()
            )));
        }
        Ok(Self { drift, diffusion, dt })
    }

    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    /// `G Cov_w G^T`.
    pub fn rate(&self, noise_cov: &Mat) -> Mat {
        &self.diffusion * noise_cov * self.diffusion.transpose()
    }
}

const SIMPSON_TOL: f64 = 1e-10;
const SIMPSON_DEPTH: usize = 40;

fn simpson<F: Fn(f64) -> Vec<f64>>(f: &F, a: f64, b: f64, fa: &[f64], fm: &[f64], fb: &[f64], whole: &[f64], tol: f64, depth: usize) -> Vec<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let h = (b - a) / 12.0;
    let left: Vec<f64> = (0..fa.len()).map(|i| h * (fa[i] + 4.0 * flm[i] + fm[i])).collect();
    let right: Vec<f64> = (0..fa.len()).map(|i| h * (fm[i] + 4.0 * frm[i] + fb[i])).collect();
    let err = (0..fa.len()).map(|i| (left[i] + right[i] - whole[i]).abs()).fold(0.0, f64::max);
    if depth == 0 || err <= 15.0 * tol {
        return (0..fa.len()).map(|i| left[i] + right[i] + (left[i] + right[i] - whole[i]) / 15.0).collect();
    }
    let l = simpson(f, a, m, fa, &flm, fm, &left, 0.5 * tol, depth - 1);
    let r = simpson(f, m, b, fm, &frm, fb, &right, 0.5 * tol, depth - 1);
    l.iter().zip(&r).map(|(x, y)| x + y).collect()
}

/// Adaptive Simpson quadrature of a vector-valued integrand.
fn integrate<F: Fn(f64) -> Vec<f64>>(f: F, a: f64, b: f64, tol: f64) -> Vec<f64> {
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole: Vec<f64> = (0..fa.len()).map(|i| (b - a) / 6.0 * (fa[i] + 4.0 * fm[i] + fb[i])).collect();
    simpson(&f, a, b, &fa, &fm, &fb, &whole, tol, SIMPSON_DEPTH)
}

/// `Σ(t) = ∫_0^t e^{Fs} Q e^{F^T s} ds` by adaptive Simpson quadrature.
pub fn accumulated_covariance(drift: &Mat, rate: &Mat, t: f64) -> Mat {
    let m = drift.nrows();
    let v = integrate(
        |s| {
            let e = expm(&(drift * s));
            (&e * rate * e.transpose()).as_slice().to_vec()
        },
        0.0,
        t,
        SIMPSON_TOL,
    );
    let s = Mat::from_column_slice(m, m, &v);
    0.5 * (&s + s.transpose())
}

/// Same integral through the block exponential
/// `exp([[-F, Q], [0, F^T]] t)`.
pub fn accumulated_covariance_van_loan(drift: &Mat, rate: &Mat, t: f64) -> Mat {
    let m = drift.nrows();
    let mut block = Mat::zeros(2 * m, 2 * m);
    block.view_mut((0, 0), (m, m)).copy_from(&(-drift));
    block.view_mut((0, m), (m, m)).copy_from(rate);
    block.view_mut((m, m), (m, m)).copy_from(&drift.transpose());
    let e = expm(&(block * t));
    let e12 = e.view((0, m), (m, m)).into_owned();
    let e22 = e.view((m, m), (m, m)).into_owned();
    let s = e22.transpose() * e12;
    0.5 * (&s + s.transpose())
}

fn positive_definite(m: &Mat) -> bool {
    let (vals, _) = sym_eigen(m);
    vals.last().is_some_and(|&v| v > 1e-300)
}

/// Discrete-time dynamics at the sampling instants, in the
/// `(F, G, Cov_w)` encoding with `G = Cov_d^{1/2}` and `Cov_w = I`.
pub fn sample_dynamics(ct: &CtModeDynamics, noise_cov: &Mat) -> Result<ModeDynamics, BridgeError> {
    let f = expm(&(&ct.drift * ct.dt));
    let cov = accumulated_covariance(&ct.drift, &ct.rate(noise_cov), ct.dt);
    if !positive_definite(&cov) {
        return Err(BridgeError::SingularCovariance);
    }
    let m = ct.dim();
    Ok(ModeDynamics::new(f, sqrt_psd(&cov), identity(m))?)
}

/// Number of points of the time grid used for suprema over `[0, dt]`.
pub const TIME_GRID: usize = 200;
/// Factor applied to suprema read off the time grid.
pub const GRID_SAFETY: f64 = 1.05;

/// `∫_0^1 sqrt(ln(4/u + 1)) du`, the Dudley integral rescaled to the unit
/// interval.
pub fn dudley_constant() -> f64 {
    // u = e^{-v} removes the endpoint singularity.
    integrate(|v: f64| vec![((4.0 * v.exp() + 1.0).ln()).sqrt() * (-v).exp()], 0.0, 60.0, 1e-13)[0]
}

/// Bridge of one continuous mode over a sampling interval, with the
/// per-mode constants of the safety lower bound precomputed.
#[derive(Debug, Clone)]
pub struct BridgeModel {
    pub drift: Mat,
    pub rate: Mat,
    pub dt: f64,
    exp_dt: Mat,
    sigma_dt_inv: Mat,
    /// Mean maps `(A1(t), A2(t))` with `E_b(t) = A1 x1 + A2 x2` on the grid.
    maps: Vec<(Mat, Mat)>,
    /// Per component: grid supremum of `d_i / dt`, times the safety factor.
    pub k: Vec<f64>,
    /// Per component: grid supremum of the bridge variance, times the
    /// safety factor.
    pub xi: Vec<f64>,
    /// Per component: `12 ∫_0^{K dt / 2} sqrt(ln(2 K dt / z + 1)) dz`.
    pub dudley: Vec<f64>,
    /// Diagonal stable drift with diagonal noise: each bridge mean component
    /// moves monotonically towards the origin.
    pub diagonal_stable: bool,
}

impl BridgeModel {
    pub fn new(ct: &CtModeDynamics, noise_cov: &Mat) -> Result<Self, BridgeError> {
        let m = ct.dim();
        let rate = ct.rate(noise_cov);
        let dt = ct.dt;
        let sigma_dt = accumulated_covariance(&ct.drift, &rate, dt);
        let sigma_dt_inv = inverse(&sigma_dt).filter(|_| positive_definite(&sigma_dt)).ok_or(BridgeError::SingularCovariance)?;
        let exp_dt = expm(&(&ct.drift * dt));
        let h = dt / (TIME_GRID - 1) as f64;
        let ts: Vec<f64> = (0..TIME_GRID).map(|k| k as f64 * h).collect();
        // exp(F k h) for every grid lag.
        let lags: Vec<Mat> = (0..TIME_GRID).map(|k| expm(&(&ct.drift * (k as f64 * h)))).collect();
        let sigmas: Vec<Mat> = ts.iter().map(|&t| accumulated_covariance(&ct.drift, &rate, t)).collect();
        // C(t) = Cov(x(t), x(dt)) = Σ(t) e^{F^T (dt - t)}
        let cross: Vec<Mat> = (0..TIME_GRID).map(|k| &sigmas[k] * lags[TIME_GRID - 1 - k].transpose()).collect();
        let gains: Vec<Mat> = cross.iter().map(|c| c * &sigma_dt_inv).collect();
        let maps: Vec<(Mat, Mat)> = (0..TIME_GRID).map(|k| (&lags[k] - &gains[k] * &exp_dt, gains[k].clone())).collect();
        let var: Vec<Mat> = (0..TIME_GRID).map(|k| &sigmas[k] - &gains[k] * cross[k].transpose()).collect();

        let mut dmax = vec![0.0f64; m];
        let mut vmax = vec![0.0f64; m];
        for a in 0..TIME_GRID {
            for i in 0..m {
                vmax[i] = vmax[i].max(var[a][(i, i)]);
            }
            for b in a + 1..TIME_GRID {
                // Centred bridge covariance between t_a <= t_b.
                let c = &sigmas[a] * lags[b - a].transpose() - &gains[a] * cross[b].transpose();
                for i in 0..m {
                    let d2 = var[a][(i, i)] + var[b][(i, i)] - 2.0 * c[(i, i)];
                    dmax[i] = dmax[i].max(d2.max(0.0).sqrt());
                }
            }
        }
        let cd = dudley_constant();
        let k: Vec<f64> = dmax.iter().map(|d| GRID_SAFETY * d / dt).collect();
        let xi: Vec<f64> = vmax.iter().map(|v| GRID_SAFETY * v).collect();
        let dudley = k.iter().map(|k| 12.0 * 0.5 * k * dt * cd).collect();
        let off_diag_zero = |a: &Mat| (0..m).all(|i| (0..m).all(|j| i == j || a[(i, j)] == 0.0));
        let diagonal_stable =
            off_diag_zero(&ct.drift) && off_diag_zero(&rate) && (0..m).all(|i| ct.drift[(i, i)] < 0.0);
        Ok(Self { drift: ct.drift.clone(), rate, dt, exp_dt, sigma_dt_inv, maps, k, xi, dudley, diagonal_stable })
    }

    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    /// `Σ(t)`, the covariance of `x(t)` given `x(0)`.
    pub fn covariance(&self, t: f64) -> Mat {
        accumulated_covariance(&self.drift, &self.rate, t)
    }

    /// `Cov(x(t), x(dt)) Σ(dt)^{-1}` and `Cov(x(t), x(dt))`.
    fn gain(&self, t: f64) -> (Mat, Mat) {
        let c = self.covariance(t) * expm(&(&self.drift * (self.dt - t))).transpose();
        (&c * &self.sigma_dt_inv, c)
    }

    /// `(A1, A2)` with `E_b(t) = A1 x1 + A2 x2`.
    pub fn mean_maps(&self, t: f64) -> (Mat, Mat) {
        let (g, _) = self.gain(t);
        (expm(&(&self.drift * t)) - &g * &self.exp_dt, g)
    }

    /// Mean and covariance of the bridge from `x1` to `x2` at time `t`.
    pub fn moments(&self, x1: &[f64], x2: &[f64], t: f64) -> (Vec<f64>, Mat) {
        let (g, c) = self.gain(t);
        let a1 = expm(&(&self.drift * t)) - &g * &self.exp_dt;
        let mean: Vec<f64> = mat_vec(&a1, x1).iter().zip(mat_vec(&g, x2)).map(|(a, b)| a + b).collect();
        let cov = self.covariance(t) - &g * c.transpose();
        (mean, 0.5 * (&cov + cov.transpose()))
    }

    /// Grid supremum of the range of the `i`-th mean component over all
    /// endpoint pairs drawn from the cells' vertices.
    fn mean_travel(&self, qi: &Parallelotope, qj: &Parallelotope, i: usize) -> f64 {
        let trace = |vs: &[Vec<f64>], first: bool| -> Vec<Vec<f64>> {
            vs.iter()
                .map(|v| {
                    self.maps
                        .iter()
                        .map(|(a1, a2)| {
                            let a = if first { a1 } else { a2 };
                            (0..v.len()).map(|k| a[(i, k)] * v[k]).sum()
                        })
                        .collect()
                })
                .collect()
        };
        let p = trace(&qi.vertices(), true);
        let r = trace(&qj.vertices(), false);
        let mut best = 0.0f64;
        for pv in &p {
            for rw in &r {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for (a, b) in pv.iter().zip(rw) {
                    lo = lo.min(a + b);
                    hi = hi.max(a + b);
                }
                best = best.max(hi - lo);
            }
        }
        GRID_SAFETY * best
    }
}

/// Smallest 1-norm distance from a cell to the boundary of `x` (0 if the
/// cell is not inside).
pub fn margin(cell: &Parallelotope, x: &HyperRectangle) -> f64 {
    cell.vertices()
        .iter()
        .map(|v| (0..v.len()).map(|k| (v[k] - x.lower[k]).min(x.upper[k] - v[k])).fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
}

fn is_centered(x: &HyperRectangle) -> bool {
    x.lower.iter().zip(&x.upper).all(|(l, u)| (l + u).abs() <= 1e-12 * (u - l).abs().max(1.0))
}

/// Upper bound on the probability that the bridge from a point of `qi` to a
/// point of `qj` stays in `x`, from its value at the midpoint.
pub fn tc_upper(model: &BridgeModel, qi: &Parallelotope, qj: &Parallelotope, x: &HyperRectangle) -> Result<f64, BridgeError> {
    let m = model.dim();
    let half = 0.5 * model.dt;
    let (a1, a2) = model.mean_maps(half);
    let (_, cov) = model.moments(&vec![0.0; m], &vec![0.0; m], half);
    let w = Whitening::from_covariance(&cov)?;
    let rect = x.to_parallelotope().image(&w.transform).bbox();
    let sum = minkowski_sum(&post_image(&qi.to_polytope(), &a1)?, &post_image(&qj.to_polytope(), &a2)?)?;
    let value = if m <= 2 {
        let dom = post_image(&sum, &w.transform)?;
        max_f(Domain::Polytope(&dom), &rect, MaxMethod::Auto)?.value
    } else {
        let dom = sum.bbox().to_parallelotope().image(&w.transform);
        max_f(Domain::Parallelotope(&dom), &rect, MaxMethod::Auto)?.value
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Lower bound on the probability that the bridge from any point of `qi`
/// to any point of `qj` stays in `x`; 0 when the bound is not applicable.
pub fn tc_lower(model: &BridgeModel, qi: &Parallelotope, qj: &Parallelotope, x: &HyperRectangle) -> f64 {
    let m = model.dim();
    let eps = margin(qi, x).max(margin(qj, x));
    let mut total = 0.0;
    for i in 0..m {
        let base = eps / m as f64 - model.dudley[i];
        if base <= 0.0 {
            return 0.0;
        }
        let travel = if model.diagonal_stable && is_centered(x) { 0.0 } else { model.mean_travel(qi, qj, i) };
        let eta = base - travel;
        if eta <= 0.0 {
            return 0.0;
        }
        total += 2.0 * (-eta * eta / (2.0 * model.xi[i])).exp();
    }
    (1.0 - total).max(0.0)
}

/// A continuous-time switched system sampled every `dt`.
#[derive(Debug, Clone)]
pub struct ContinuousSystem {
    /// The sampled discrete-time system.
    pub sampled: HybridSystem,
    pub bridges: Vec<BridgeModel>,
}

impl ContinuousSystem {
    pub fn new(
        modes: Vec<(String, CtModeDynamics, Mat)>,
        safe_set: HyperRectangle,
        regions: Vec<Region>,
    ) -> Result<Self, AbstractionError> {
        let mut sampled = Vec::with_capacity(modes.len());
        let mut bridges = Vec::with_capacity(modes.len());
        for (name, ct, cov) in modes {
            if cov.nrows() != ct.diffusion.ncols() || !is_symmetric(&cov, 1e-12) {
                return Err(AbstractionError::Kernel(KernelError::InvalidNoiseCovariance));
            }
            let dynamics = sample_dynamics(&ct, &cov).map_err(bridge_to_abstraction)?;
            bridges.push(BridgeModel::new(&ct, &cov).map_err(bridge_to_abstraction)?);
            sampled.push(Mode { name, dynamics });
        }
        Ok(Self { sampled: HybridSystem::new(sampled, safe_set, regions)?, bridges })
    }
}

fn bridge_to_abstraction(e: BridgeError) -> AbstractionError {
    match e {
        BridgeError::Kernel(k) => AbstractionError::Kernel(k),
        BridgeError::Geometry(g) => AbstractionError::Geometry(g),
        BridgeError::SingularCovariance => AbstractionError::Kernel(KernelError::NotPositiveDefinite),
        other => AbstractionError::Kernel(KernelError::Unsupported(other.to_string())),
    }
}

/// IMDP whose entries bound the probability of jumping to the target cell
/// and staying in the safe set throughout the step: the discrete interval
/// scaled by the bridge safety bounds.
pub fn ct_safety_imdp(sys: &ContinuousSystem, d: &Discretization, opts: &BuildOptions) -> Result<Imdp, AbstractionError> {
    let h = &sys.sampled;
    let cells: Vec<&Parallelotope> = d.modes.iter().flat_map(|mg| mg.cells.iter().map(|c| &c.original)).collect();
    let x = &h.safe_set;
    let factor = |q: usize, a: usize, t: usize| -> (f64, f64) {
        let model = &sys.bridges[a];
        let lo = tc_lower(model, cells[q], cells[t], x);
        // Failure to bound from above is not an error: 1 is always sound.
        let hi = tc_upper(model, cells[q], cells[t], x).unwrap_or(1.0);
        (lo.min(hi), hi)
    };
    build_imdp_with(h, d, opts, Some(&factor))
}
