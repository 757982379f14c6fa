//! Leapfrog update kernels for the out-of-plane E / in-plane H polarisation.
//!
//! Field placement on the padded grid (`I`, `K` include the PML):
//! `e` at `(I, K)`, `hx` at `(I, K + 1/2)`, `hz` at `(I + 1/2, K)`.
//! All three arrays share the `I * nzt + K` layout; the last `hx` column and
//! the last `hz` row are unused.

use num_complex::Complex64;
use num_traits::{Float, FromPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FdtdError, FdtdSettings, Grid2D, SourceSpec, Stencil};
use crate::consts::{C0, EPS0, ETA0, MU0};

const C1: f64 = 9.0 / 8.0;
const C2: f64 = 1.0 / 24.0;

/// Field storage precision.
pub(crate) trait Real: Float + FromPrimitive + Into<f64> + Send + Sync + std::fmt::Debug + 'static {
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite coefficient")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Per-axis CPML recursion coefficients, indexed along that axis.
struct PmlAxis<R> {
    be: Vec<R>,
    ce: Vec<R>,
    bh: Vec<R>,
    ch: Vec<R>,
}

impl<R: Real> PmlAxis<R> {
    fn new(n: usize, pad: usize, h: f64, dt: f64, s: &FdtdSettings, freq: f64) -> Self {
        let mut axis = Self {
            be: vec![R::one(); n],
            ce: vec![R::zero(); n],
            bh: vec![R::one(); n],
            ch: vec![R::zero(); n],
        };
        if pad == 0 {
            return axis;
        }
        let depth = pad as f64 * h;
        let sigma_max = -(s.pml_order + 1.0) * s.pml_reflection.ln() / (2.0 * ETA0 * depth);
        let alpha_max = 2.0 * std::f64::consts::PI * freq * EPS0 * s.pml_alpha;
        let coeff = |pos: f64| -> (f64, f64) {
            let lo = pad as f64;
            let hi = (n - 1 - pad) as f64;
            let d = if pos < lo {
                lo - pos
            } else if pos > hi {
                pos - hi
            } else {
                return (1.0, 0.0);
            };
            let rho = (d / pad as f64).min(1.0);
            let sigma = sigma_max * rho.powf(s.pml_order);
            let alpha = alpha_max * (1.0 - rho);
            let b = (-(sigma + alpha) * dt / EPS0).exp();
            let c = if sigma > 0.0 {
                sigma / (sigma + alpha) * (b - 1.0)
            } else {
                0.0
            };
            (b, c)
        };
        for i in 0..n {
            let (b, c) = coeff(i as f64);
            axis.be[i] = R::of(b);
            axis.ce[i] = R::of(c);
            let (b, c) = coeff(i as f64 + 0.5);
            axis.bh[i] = R::of(b);
            axis.ch[i] = R::of(c);
        }
        axis
    }
}

/// One set of leapfrog fields with their CPML memory.
pub(crate) struct Fields<R> {
    pub e: Vec<R>,
    pub hx: Vec<R>,
    pub hz: Vec<R>,
    psi_ex: Vec<R>,
    psi_ez: Vec<R>,
    psi_hx: Vec<R>,
    psi_hz: Vec<R>,
}

impl<R: Real> Fields<R> {
    fn zeros(n: usize) -> Self {
        Self {
            e: vec![R::zero(); n],
            hx: vec![R::zero(); n],
            hz: vec![R::zero(); n],
            psi_ex: vec![R::zero(); n],
            psi_ez: vec![R::zero(); n],
            psi_hx: vec![R::zero(); n],
            psi_hz: vec![R::zero(); n],
        }
    }

    fn max_abs_e(&self) -> f64 {
        self.e.iter().fold(0.0f64, |m, &v| {
            let v: f64 = v.into();
            if v.is_nan() {
                f64::NAN
            } else {
                m.max(v.abs())
            }
        })
    }
}

/// Derivatives of the E update coefficients at one uncertain node, each
/// scaled by the standard deviation of the parameter.
#[derive(Clone, Copy)]
struct NodeSensitivity {
    idx: usize,
    /// (d Ca, d Cb) for a one-sigma change of eps_r
    eps: (f64, f64),
    /// (d Ca, d Cb) for a one-sigma change of sigma
    sig: (f64, f64),
}

/// First-order perturbation fields driven by the uncertain wall cells.
///
/// Every tangent sees each cell perturbed by an independent random sign, so
/// the mean square of the tangents estimates the variance of a field whose
/// cells fluctuate independently. Within a cell the permittivity and
/// conductivity terms are combined with correlation `rho`.
struct Tangents<R> {
    nodes: Vec<NodeSensitivity>,
    /// tangent-major weights of the (eps, sigma) terms
    weights: Vec<(R, R)>,
    /// (eps, sigma) source terms of the step being assembled
    terms: Vec<(R, R)>,
    fields: Vec<Fields<R>>,
}

/// Time step and effective update time constant for the given settings.
pub(crate) fn time_step(h: f64, freq: f64, s: &FdtdSettings) -> Result<(f64, f64), FdtdError> {
    let dt = 1.0 / (freq * s.steps_per_period as f64);
    let yee_limit = h / (C0 * 2f64.sqrt());
    let limit = match s.stencil {
        Stencil::Second => yee_limit,
        Stencil::Fourth => yee_limit / (C1 + C2),
    };
    if dt > limit {
        return Err(FdtdError::Courant { dt, limit });
    }
    let omega = 2.0 * std::f64::consts::PI * freq;
    // time constant that makes the leapfrog derivative exact at the carrier
    let mut u = 2.0 / omega * (0.5 * omega * dt).sin();
    if s.dispersion_compensation {
        // the grid slows the wave by (1 + d); speeding up time by the same
        // factor restores the carrier wavenumber on average over angle
        u *= 1.0 + mean_spatial_dispersion(h, freq, s.stencil);
    }
    Ok((dt, u))
}

fn stencil_symbol(a: f64, stencil: Stencil) -> f64 {
    match stencil {
        Stencil::Second => (0.5 * a).sin(),
        Stencil::Fourth => C1 * (0.5 * a).sin() - C2 * (1.5 * a).sin(),
    }
}

/// Numerical wavenumber of the semi-discrete scheme along direction `theta`,
/// relative to the exact one (time derivative taken exact).
pub fn numerical_wavenumber_ratio(h: f64, freq: f64, stencil: Stencil, theta: f64) -> f64 {
    let k0 = 2.0 * std::f64::consts::PI * freq / C0;
    let target = (0.5 * k0 * h).powi(2);
    let g = |k: f64| {
        let a = stencil_symbol(k * theta.cos() * h, stencil);
        let b = stencil_symbol(k * theta.sin() * h, stencil);
        a * a + b * b - target
    };
    let (mut lo, mut hi) = (0.5 * k0, 1.5 * k0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi) / k0
}

/// Mean relative wavenumber error over propagation angles.
pub fn mean_spatial_dispersion(h: f64, freq: f64, stencil: Stencil) -> f64 {
    let n = 64;
    (0..n)
        .map(|j| {
            let theta = (j as f64 + 0.5) / n as f64 * std::f64::consts::FRAC_PI_4;
            numerical_wavenumber_ratio(h, freq, stencil, theta) - 1.0
        })
        .sum::<f64>()
        / n as f64
}

pub(crate) struct Simulation<R> {
    #[cfg_attr(not(test), allow(dead_code))]
    pub nxt: usize,
    pub nzt: usize,
    pub pad: usize,
    pub h: f64,
    pub dt: f64,
    geo: Geometry,
    ca: Vec<R>,
    cb: Vec<R>,
    cb_raw: Vec<f64>,
    dh: R,
    pub mean: Fields<R>,
    px: PmlAxis<R>,
    pz: PmlAxis<R>,
    tangents: Option<Tangents<R>>,
}

impl<R: Real> Simulation<R> {
    pub fn new(
        grid: &Grid2D,
        src: &SourceSpec,
        s: &FdtdSettings,
        materials: Option<(&[f64], &[f64])>,
        stochastic: bool,
    ) -> Result<Self, FdtdError> {
        let pad = s.pml_cells;
        let nxt = grid.nx + 2 * pad;
        let nzt = grid.nz + 2 * pad;
        let h = grid.cell;
        let (dt, u) = time_step(h, src.frequency, s)?;
        let n = nxt * nzt;
        let (eps_map, sig_map) = materials.unwrap_or((&grid.eps_r, &grid.sigma));

        let mut ca = vec![R::zero(); n];
        let mut cb = vec![R::zero(); n];
        let mut cb_raw = vec![0.0; n];
        let mut nodes = Vec::new();
        for it in 0..nxt {
            let i = it.saturating_sub(pad).min(grid.nx - 1);
            for kt in 0..nzt {
                let k = kt.saturating_sub(pad).min(grid.nz - 1);
                let g = grid.index(i, k);
                let idx = it * nzt + kt;
                let outer = it == 0 || kt == 0 || it == nxt - 1 || kt == nzt - 1;
                if grid.pec[g] || outer {
                    continue;
                }
                let eps = EPS0 * eps_map[g];
                let sig = sig_map[g];
                let d = eps / u + 0.5 * sig;
                ca[idx] = R::of((eps / u - 0.5 * sig) / d);
                cb_raw[idx] = 1.0 / d;
                cb[idx] = R::of(1.0 / (d * h));
                let (se, ss) = (grid.eps_std[g], grid.sigma_std[g]);
                if stochastic && (se > 0.0 || ss > 0.0) {
                    let d2 = d * d;
                    nodes.push(NodeSensitivity {
                        idx,
                        eps: (EPS0 / u * sig / d2 * se, -(EPS0 / u) / d2 * se),
                        sig: (-(eps / u) / d2 * ss, -0.5 / d2 * ss),
                    });
                }
            }
        }

        let tangents = if stochastic && !nodes.is_empty() && s.tangent_count > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(s.tangent_seed);
            let rho = s.rho_corr.clamp(-1.0, 1.0);
            let rest = (1.0 - rho * rho).sqrt();
            let mut sign = || if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let weights = (0..s.tangent_count * nodes.len())
                .map(|_| {
                    let (a, b) = (sign(), sign());
                    (R::of(a), R::of(rho * a + rest * b))
                })
                .collect();
            Some(Tangents {
                terms: vec![(R::zero(), R::zero()); nodes.len()],
                nodes,
                weights,
                fields: (0..s.tangent_count).map(|_| Fields::zeros(n)).collect(),
            })
        } else {
            None
        };

        Ok(Self {
            nxt,
            nzt,
            pad,
            h,
            dt,
            geo: Geometry {
                nxt,
                nzt,
                pad,
                fourth: matches!(s.stencil, Stencil::Fourth),
            },
            ca,
            cb,
            cb_raw,
            dh: R::of(u / (MU0 * h)),
            mean: Fields::zeros(n),
            px: PmlAxis::new(nxt, pad, h, dt, s, src.frequency),
            pz: PmlAxis::new(nzt, pad, h, dt, s, src.frequency),
            tangents,
        })
    }

    pub fn has_stochastic(&self) -> bool {
        self.tangents.is_some()
    }

    /// Advance H by one step, then E by one step with line current
    /// `current` (A) injected at padded node `src`.
    pub fn step(&mut self, src: usize, current: f64) {
        let geo = &self.geo;
        update_h(geo, self.dh, &mut self.mean, &self.px, &self.pz);
        if let Some(tg) = self.tangents.as_mut() {
            for f in &mut tg.fields {
                update_h(geo, self.dh, f, &self.px, &self.pz);
            }
            // perturbation of the E update: dCa E^n + dCb (curl H^{n+1/2} - J)
            let j_src = current / (self.h * self.h);
            for (slot, node) in tg.terms.iter_mut().zip(&tg.nodes) {
                let (i, k) = (node.idx / geo.nzt, node.idx % geo.nzt);
                let curl = curl_h(geo, &self.mean.hx, &self.mean.hz, i, k) / self.h;
                let drive = if node.idx == src { curl - j_src } else { curl };
                let e: f64 = self.mean.e[node.idx].into();
                *slot = (
                    R::of(node.eps.0 * e + node.eps.1 * drive),
                    R::of(node.sig.0 * e + node.sig.1 * drive),
                );
            }
        }
        update_e(geo, &self.ca, &self.cb, &mut self.mean, &self.px, &self.pz);
        let e_src: f64 = self.mean.e[src].into();
        self.mean.e[src] = R::of(e_src - self.cb_raw[src] * current / (self.h * self.h));
        if let Some(tg) = self.tangents.as_mut() {
            let m = tg.nodes.len();
            for (t, f) in tg.fields.iter_mut().enumerate() {
                update_e(geo, &self.ca, &self.cb, f, &self.px, &self.pz);
                let w = &tg.weights[t * m..(t + 1) * m];
                for ((node, &(a, b)), &(te, ts)) in tg.nodes.iter().zip(w).zip(&tg.terms) {
                    f.e[node.idx] = f.e[node.idx] + a * te + b * ts;
                }
            }
        }
    }

    /// Largest |E| over the mean and tangent fields; NaN if any is NaN.
    pub fn max_abs_e(&self) -> f64 {
        let mut m = self.mean.max_abs_e();
        if let Some(tg) = &self.tangents {
            for f in &tg.fields {
                let v = f.max_abs_e();
                m = if v.is_nan() { f64::NAN } else { m.max(v) };
            }
        }
        m
    }

    pub fn e_at(&self, idx: usize) -> f64 {
        self.mean.e[idx].into()
    }

    /// Root-mean-square of the tangent fields at a node.
    pub fn sigma_e(&self, idx: usize) -> f64 {
        self.tangents.as_ref().map_or(0.0, |tg| {
            let ss: f64 = tg
                .fields
                .iter()
                .map(|f| {
                    let v: f64 = f.e[idx].into();
                    v * v
                })
                .sum();
            (ss / tg.fields.len() as f64).sqrt()
        })
    }
}

struct Geometry {
    nxt: usize,
    nzt: usize,
    pad: usize,
    fourth: bool,
}

#[inline(always)]
fn curl_h<R: Real>(g: &Geometry, hx: &[R], hz: &[R], i: usize, k: usize) -> f64 {
    let n = g.nzt;
    let idx = i * n + k;
    let f = |v: R| -> f64 { v.into() };
    let sz = if g.fourth && k >= 2 && k + 2 < n {
        C1 * (f(hx[idx]) - f(hx[idx - 1])) - C2 * (f(hx[idx + 1]) - f(hx[idx - 2]))
    } else {
        f(hx[idx]) - f(hx[idx - 1])
    };
    let sx = if g.fourth && i >= 2 && i + 2 < g.nxt {
        C1 * (f(hz[idx]) - f(hz[idx - n])) - C2 * (f(hz[idx + n]) - f(hz[idx - 2 * n]))
    } else {
        f(hz[idx]) - f(hz[idx - n])
    };
    sz - sx
}

fn update_e<R: Real>(g: &Geometry, ca: &[R], cb: &[R], f: &mut Fields<R>, px: &PmlAxis<R>, pz: &PmlAxis<R>) {
    let n = g.nzt;
    let nx = g.nxt;
    let (c1, c2) = (R::of(C1), R::of(C2));
    let Fields {
        e,
        hx,
        hz,
        psi_ex,
        psi_ez,
        ..
    } = f;
    for i in 1..nx - 1 {
        let row = i * n;
        let x4 = g.fourth && i >= 2 && i + 2 < nx;
        let er = &mut e[row..row + n];
        let car = &ca[row..row + n];
        let cbr = &cb[row..row + n];
        let hxr = &hx[row..row + n];
        let h0 = &hz[row..row + n];
        let hm = &hz[row - n..row];
        // edge columns fall back to the compact z difference
        for k in [1, n - 2] {
            let sx = if x4 {
                c1 * (h0[k] - hm[k]) - c2 * (hz[row + n + k] - hz[row - 2 * n + k])
            } else {
                h0[k] - hm[k]
            };
            er[k] = car[k] * er[k] + cbr[k] * (hxr[k] - hxr[k - 1] - sx);
        }
        if !g.fourth {
            for k in 2..n - 2 {
                let s = (hxr[k] - hxr[k - 1]) - (h0[k] - hm[k]);
                er[k] = car[k] * er[k] + cbr[k] * s;
            }
        } else if x4 {
            let hp = &hz[row + n..row + 2 * n];
            let hm2 = &hz[row - 2 * n..row - n];
            for k in 2..n - 2 {
                let sz = c1 * (hxr[k] - hxr[k - 1]) - c2 * (hxr[k + 1] - hxr[k - 2]);
                let sx = c1 * (h0[k] - hm[k]) - c2 * (hp[k] - hm2[k]);
                er[k] = car[k] * er[k] + cbr[k] * (sz - sx);
            }
        } else {
            for k in 2..n - 2 {
                let sz = c1 * (hxr[k] - hxr[k - 1]) - c2 * (hxr[k + 1] - hxr[k - 2]);
                er[k] = car[k] * er[k] + cbr[k] * (sz - (h0[k] - hm[k]));
            }
        }
    }
    if g.pad == 0 {
        return;
    }
    // CPML corrections in the x strips (d/dx term) and z strips (d/dz term)
    let p = g.pad;
    for i in (1..p).chain(nx - p..nx - 1) {
        let x4 = g.fourth && i >= 2 && i + 2 < nx;
        let (b, c) = (px.be[i], px.ce[i]);
        for k in 1..n - 1 {
            let idx = i * n + k;
            let sx = if x4 {
                c1 * (hz[idx] - hz[idx - n]) - c2 * (hz[idx + n] - hz[idx - 2 * n])
            } else {
                hz[idx] - hz[idx - n]
            };
            psi_ex[idx] = b * psi_ex[idx] + c * sx;
            e[idx] = e[idx] - cb[idx] * psi_ex[idx];
        }
    }
    for i in 1..nx - 1 {
        for k in (1..p).chain(n - p..n - 1) {
            let idx = i * n + k;
            let z4 = g.fourth && k >= 2 && k + 2 < n;
            let sz = if z4 {
                c1 * (hx[idx] - hx[idx - 1]) - c2 * (hx[idx + 1] - hx[idx - 2])
            } else {
                hx[idx] - hx[idx - 1]
            };
            psi_ez[idx] = pz.be[k] * psi_ez[idx] + pz.ce[k] * sz;
            e[idx] = e[idx] + cb[idx] * psi_ez[idx];
        }
    }
}

fn update_h<R: Real>(g: &Geometry, dh: R, f: &mut Fields<R>, px: &PmlAxis<R>, pz: &PmlAxis<R>) {
    let n = g.nzt;
    let nx = g.nxt;
    let (c1, c2) = (R::of(C1), R::of(C2));
    let Fields {
        e,
        hx,
        hz,
        psi_hx,
        psi_hz,
        ..
    } = f;
    // hx at (i, k + 1/2): d/dz of e
    for i in 0..nx {
        let row = i * n;
        let er = &e[row..row + n];
        let hr = &mut hx[row..row + n];
        if g.fourth {
            for k in [0, n - 2] {
                hr[k] = hr[k] + dh * (er[k + 1] - er[k]);
            }
            for k in 1..n - 2 {
                hr[k] = hr[k] + dh * (c1 * (er[k + 1] - er[k]) - c2 * (er[k + 2] - er[k - 1]));
            }
        } else {
            for k in 0..n - 1 {
                hr[k] = hr[k] + dh * (er[k + 1] - er[k]);
            }
        }
    }
    // hz at (i + 1/2, k): -d/dx of e
    for i in 0..nx - 1 {
        let row = i * n;
        let x4 = g.fourth && i >= 1 && i + 2 < nx;
        let hr = &mut hz[row..row + n];
        let e0 = &e[row..row + n];
        let e1 = &e[row + n..row + 2 * n];
        if x4 {
            let em = &e[row - n..row];
            let e2 = &e[row + 2 * n..row + 3 * n];
            for k in 0..n {
                hr[k] = hr[k] - dh * (c1 * (e1[k] - e0[k]) - c2 * (e2[k] - em[k]));
            }
        } else {
            for k in 0..n {
                hr[k] = hr[k] - dh * (e1[k] - e0[k]);
            }
        }
    }
    if g.pad == 0 {
        return;
    }
    let p = g.pad;
    for i in 0..nx {
        for k in (0..p).chain(n - 1 - p..n - 1) {
            let idx = i * n + k;
            let z4 = g.fourth && k >= 1 && k + 2 < n;
            let s = if z4 {
                c1 * (e[idx + 1] - e[idx]) - c2 * (e[idx + 2] - e[idx - 1])
            } else {
                e[idx + 1] - e[idx]
            };
            psi_hx[idx] = pz.bh[k] * psi_hx[idx] + pz.ch[k] * s;
            hx[idx] = hx[idx] + dh * psi_hx[idx];
        }
    }
    for i in (0..p).chain(nx - 1 - p..nx - 1) {
        let x4 = g.fourth && i >= 1 && i + 2 < nx;
        let (b, c) = (px.bh[i], px.ch[i]);
        for k in 0..n {
            let idx = i * n + k;
            let s = if x4 {
                c1 * (e[idx + n] - e[idx]) - c2 * (e[idx + 2 * n] - e[idx - n])
            } else {
                e[idx + n] - e[idx]
            };
            psi_hz[idx] = b * psi_hz[idx] + c * s;
            hz[idx] = hz[idx] - dh * psi_hz[idx];
        }
    }
}

/// Phasor of the steady-state source current, normalised so that transfer
/// functions equal the 2D Green's function in free space.
pub(crate) fn source_norm(src: &SourceSpec) -> Complex64 {
    let omega = 2.0 * std::f64::consts::PI * src.frequency;
    // I(t) = A sin(wt) has phasor -jA; E = -j w mu0 I G
    Complex64::new(0.0, -omega * MU0) * Complex64::new(0.0, -src.amplitude)
}
