//! Training sweeps carried out in the M x M Gram space of the data.
//!
//! After its first solve, W1 lies in the row space of `Yhat^T` and W2 in the
//! column space of `Y`, so they are kept as `W1 = a W1_0 + C Yhat^T` and
//! `W2 = b W2_0 + Y B` with `C` (r x M) and `B` (M x r). Every quantity the
//! sweeps need then follows from `Y^T Y` and `Yhat^T Yhat`, and a sweep costs
//! O(r M^2 + r^2 M) instead of O(r N M).

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{spd_right_solve, spd_solve, DaeError, DaeModel, MappingFn, TrainConfig};

const MAX_HALVINGS: usize = 30;

struct Data<'a> {
    y: &'a DMatrix<f64>,
    yhat: &'a DMatrix<f64>,
    gy: DMatrix<f64>,
    gyh: DMatrix<f64>,
    /// `R^T R = Y^T Y`
    ry: DMatrix<f64>,
    lambda: f64,
    phi: MappingFn,
    ridge: f64,
}

struct State {
    alpha: f64,
    c: DMatrix<f64>,
    /// `W1 Yhat`
    p: DMatrix<f64>,
    beta: f64,
    b: DMatrix<f64>,
    z: DMatrix<f64>,
    /// `||Y - W2 Z||^2`
    fit: f64,
    /// `lambda ||Z - phi(W1 Yhat)||^2`
    pen: f64,
}

impl State {
    fn value(&self) -> f64 {
        self.fit + self.pen
    }
}

fn gaussian(rows: usize, cols: usize, std: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let g: f64 = StandardNormal.sample(rng);
        std * g
    })
}

fn penalty(d: &Data, z: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for (zv, pv) in z.iter().zip(p.iter()) {
        let e = zv - d.phi.forward(*pv);
        s += e * e;
    }
    d.lambda * s
}

/// `||Y - W2 Z||^2` with `W2 = beta W2_0 + Y B`; `w2z0` is `W2_0 Z` when
/// `beta != 0`.
fn fit(d: &Data, beta: f64, b: &DMatrix<f64>, z: &DMatrix<f64>, w2z0: Option<&DMatrix<f64>>) -> f64 {
    let m = z.ncols();
    let bz = b * z;
    if beta == 0.0 {
        let dm = DMatrix::<f64>::identity(m, m) - bz;
        let gd = &d.gy * &dm;
        gd.component_mul(&dm).sum()
    } else {
        let w2z = w2z0.expect("W2_0 Z required") * beta + d.y * bz;
        (d.y - w2z).norm_squared()
    }
}

fn check(v: f64, sweep: usize, stage: &'static str, last: f64) -> Result<(), DaeError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(DaeError::NonFinite { sweep, stage, last })
    }
}

fn step_w1(d: &Data, s: &mut State, clamps: &mut usize) {
    let (a, n_clamped) = d.phi.invert(&s.z);
    *clamps += n_clamped;
    let eps = d.ridge * d.gyh.trace() / d.yhat.nrows() as f64;
    let c_new = spd_right_solve(&a, &d.gyh, eps);
    let p_new = &c_new * &d.gyh;
    let j0 = s.value();
    let mut t = 1.0;
    for _ in 0..=MAX_HALVINGS {
        let p = &s.p * (1.0 - t) + &p_new * t;
        let pen = penalty(d, &s.z, &p);
        if s.fit + pen <= j0 {
            s.alpha *= 1.0 - t;
            s.c = &s.c * (1.0 - t) + &c_new * t;
            s.p = p;
            s.pen = pen;
            return;
        }
        t *= 0.5;
    }
}

fn step_w2(d: &Data, s: &mut State, w2_0: &DMatrix<f64>) {
    let z = &s.z;
    let eps = d.ridge * z.norm_squared() / z.nrows() as f64;
    // B = Z^T (Z Z^T + eps I)^-1 = (Z^T Z + eps I)^-1 Z^T
    let b_new = if eps > 0.0 {
        spd_solve(&z.tr_mul(z), eps, &z.transpose())
    } else {
        let svd = z.clone().svd(true, true);
        let tol = svd.singular_values.max() * z.nrows().max(z.ncols()) as f64 * f64::EPSILON;
        svd.pseudo_inverse(tol).expect("SVD with both factors")
    };
    let w2z0 = (s.beta != 0.0).then(|| w2_0 * z);
    let j0 = s.value();
    let mut t = 1.0;
    for _ in 0..=MAX_HALVINGS {
        let beta = s.beta * (1.0 - t);
        let b = &s.b * (1.0 - t) + &b_new * t;
        let f = fit(d, beta, &b, z, w2z0.as_ref());
        if f + s.pen <= j0 {
            s.beta = beta;
            s.b = b;
            s.fit = f;
            return;
        }
        t *= 0.5;
    }
}

fn step_z(d: &Data, s: &mut State, w2_0: &DMatrix<f64>) {
    let (r, m) = s.z.shape();
    let phi_p = d.phi.apply(&s.p);
    let z_new = if s.beta == 0.0 {
        // W2^T W2 = U^T U with U = R B, W2^T Y = U^T R
        let u = &d.ry * &s.b;
        let rhs = u.tr_mul(&d.ry) + &phi_p * d.lambda;
        if r <= m {
            spd_solve(&u.tr_mul(&u), d.lambda, &rhs)
        } else {
            // (U^T U + l I)^-1 = (I - U^T (U U^T + l I)^-1 U) / l
            let inner = spd_solve(&(&u * u.transpose()), d.lambda, &(&u * &rhs));
            (rhs - u.tr_mul(&inner)) / d.lambda
        }
    } else {
        let w2 = w2_0 * s.beta + d.y * &s.b;
        let rhs = w2.tr_mul(d.y) + &phi_p * d.lambda;
        spd_solve(&w2.tr_mul(&w2), d.lambda, &rhs)
    };
    let w2z0 = |z: &DMatrix<f64>| (s.beta != 0.0).then(|| w2_0 * z);
    let j0 = s.value();
    let mut t = 1.0;
    for _ in 0..=MAX_HALVINGS {
        let z = &s.z * (1.0 - t) + &z_new * t;
        let f = fit(d, s.beta, &s.b, &z, w2z0(&z).as_ref());
        let pen = penalty(d, &z, &s.p);
        if f + pen <= j0 {
            s.z = z;
            s.fit = f;
            s.pen = pen;
            return;
        }
        t *= 0.5;
    }
}

/// Alternate the W1, W2 and Z solves until the relative change of the
/// objective drops below the tolerance.
///
/// Each block update is the closed-form minimiser of its subproblem. When
/// rounding, the ridge or clamping of `phi^-1` would let the objective rise,
/// the step is shortened towards the previous block value, so the logged
/// objective never increases.
pub fn train(y: &DMatrix<f64>, yhat: &DMatrix<f64>, cfg: &TrainConfig) -> Result<DaeModel, DaeError> {
    cfg.validate()?;
    let (n, m) = y.shape();
    if yhat.shape() != (n, m) {
        return Err(DaeError::Dimension(format!("Y is {:?}, Yhat is {:?}", y.shape(), yhat.shape())));
    }
    if m < 2 {
        return Err(DaeError::TooFewPairs(m));
    }
    if cfg.r >= n {
        return Err(DaeError::Config(format!("hidden size r={} must be below N={n}", cfg.r)));
    }
    let r = cfg.r;
    let gy = y.tr_mul(y);
    let eig = gy.clone().symmetric_eigen();
    let ry = DMatrix::from_fn(m, m, |i, j| eig.eigenvalues[i].max(0.0).sqrt() * eig.eigenvectors[(j, i)]);
    let d = Data {
        y,
        yhat,
        gyh: yhat.tr_mul(yhat),
        gy,
        ry,
        lambda: cfg.lambda,
        phi: cfg.mapping,
        ridge: cfg.ridge,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std = 1.0 / (n as f64).sqrt();
    let w1_0 = gaussian(r, n, std, &mut rng);
    let w2_0 = gaussian(n, r, std, &mut rng);
    let p = &w1_0 * yhat;
    let z = d.phi.apply(&p);
    let fit0 = (y - &w2_0 * &z).norm_squared();
    let mut s = State {
        alpha: 1.0,
        c: DMatrix::zeros(r, m),
        p,
        beta: 1.0,
        b: DMatrix::zeros(m, r),
        z,
        fit: fit0,
        pen: 0.0,
    };
    check(s.value(), 0, "initialisation", f64::NAN)?;

    let mut log = vec![s.value()];
    let mut clamps = 0;
    let mut converged = false;
    for sweep in 1..=cfg.max_sweeps {
        let last = *log.last().expect("log starts non-empty");
        step_w1(&d, &mut s, &mut clamps);
        check(s.value(), sweep, "W1 solve", last)?;
        step_w2(&d, &mut s, &w2_0);
        check(s.value(), sweep, "W2 solve", last)?;
        step_z(&d, &mut s, &w2_0);
        check(s.value(), sweep, "Z solve", last)?;
        let j = s.value();
        log.push(j);
        if j == 0.0 || (last - j).abs() <= cfg.tolerance * last.abs() {
            converged = true;
            break;
        }
    }

    let w1 = &w1_0 * s.alpha + &s.c * yhat.transpose();
    let w2 = &w2_0 * s.beta + y * &s.b;
    Ok(DaeModel {
        w1,
        w2,
        mapping: cfg.mapping,
        lambda: cfg.lambda,
        log,
        clamp_count: clamps,
        converged,
    })
}
