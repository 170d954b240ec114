//! Running parameters, the Gaussian block-spin step on translation-invariant
//! quadratic actions, localization, and the chemical-potential fixed point.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::action::{well_geometry, WellGeometry};
use crate::error::{RgError, RgResult};
use crate::lattice_ops::AveragingProfile;
use crate::spectral::FiberLayout;
use crate::symbols::{
    classify_regime, fit_symbol, for_each_fiber, soft_eigenvalue, u_block, Regime,
    RegimeThresholds, SymbolParams, TimeMode,
};
use crate::torus::{coords, linear_index, make_shape, Field, Level, Momentum, TorusShape, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub n: u32,
    pub l: usize,
    pub mu: f64,
    pub v: f64,
    pub d: f64,
    /// `a_n`; absent at `n = 0`, where the action has no block term.
    pub a: Option<f64>,
    pub kappa: f64,
    pub kappa_prime: f64,
    pub eps: f64,
    pub mu0: f64,
    pub v0: f64,
}

impl FlowParams {
    /// `1 / a_n`, zero at `n = 0`.
    pub fn a_inv(&self) -> f64 {
        a_inv(self.n, self.l)
    }
}

/// `a_n = (1 - L^-2) / (1 - L^-2n)`.
pub fn a_n(n: u32, l: usize) -> Option<f64> {
    if n == 0 {
        return None;
    }
    let q = (l as f64).powi(-2);
    Some((1.0 - q) / (1.0 - q.powi(n as i32)))
}

fn a_inv(n: u32, l: usize) -> f64 {
    a_n(n, l).map_or(0.0, |a| 1.0 / a)
}

/// `floor((2/5) ln(1/v0) / ln L)`.
pub fn n_max(v0: f64, l: usize) -> u32 {
    (0.4 * (1.0 / v0).ln() / (l as f64).ln()).floor().max(0.0) as u32
}

/// Whether `mu_* + v0^(5/4) < mu0 < v0^(9/10)`.
pub fn in_admissible_window(mu0: f64, v0: f64, mu_star: f64) -> bool {
    mu_star + v0.powf(1.25) < mu0 && mu0 < v0.powf(0.9)
}

/// Leading-order parameters at step `n`: `mu_n = L^2n mu0`, `v_n = v0 / L^n`.
pub fn flow_params_at(n: u32, mu0: f64, v0: f64, l: usize, eps: f64, d: f64) -> RgResult<FlowParams> {
    if l < 3 || l % 2 == 0 {
        return Err(RgError::Config(format!("L must be odd and >= 3, got {l}")));
    }
    if !(v0 > 0.0 && mu0 >= 0.0) {
        return Err(RgError::Config(format!("need v0 > 0 and mu0 >= 0, got v0={v0}, mu0={mu0}")));
    }
    let lf = l as f64;
    let base = v0.powf(-1.0 / 3.0 + eps);
    Ok(FlowParams {
        n,
        l,
        mu: lf.powi(2 * n as i32) * mu0,
        v: v0 / lf.powi(n as i32),
        d,
        a: a_n(n, l),
        kappa: lf.powf(0.75 * n as f64) * base,
        kappa_prime: lf.powf(0.375 * n as f64) * base,
        eps,
        mu0,
        v0,
    })
}

/// The dominant quadratic kernel at scale `n`:
/// `1 / A_hat(k) = 1/a + sum_l u_n^2(k+l) / (D_hat_n(k+l) - mu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominantForm {
    pub n: u32,
    pub l: usize,
    pub a_inv: f64,
    pub mu: f64,
    pub d: f64,
    pub mode: TimeMode,
    pub profile: AveragingProfile,
}

/// `c_j / (c_j (a_inv + sum_{i != j} u_i^2 / c_i) + u_j^2)`, the resummed
/// value of `1 / (a_inv + sum u^2 / c)` stable at a vanishing `c_j`.
fn resum(a_inv: f64, c: &[C64], u: &[f64]) -> Option<C64> {
    let mut j = 0;
    for i in 0..c.len() {
        if c[i].norm() < c[j].norm() {
            j = i;
        }
    }
    let mut w = C64::new(a_inv, 0.0);
    for i in 0..c.len() {
        if i == j || u[i] == 0.0 {
            continue;
        }
        if c[i].norm() == 0.0 {
            return None;
        }
        w += u[i] * u[i] / c[i];
    }
    let den = c[j] * w + u[j] * u[j];
    if den.norm() == 0.0 || !den.is_finite() {
        return None;
    }
    Some(c[j] / den)
}

impl DominantForm {
    fn symbol_params(&self) -> RgResult<SymbolParams> {
        Ok(SymbolParams {
            shape: make_shape(self.n, self.l, 1, 1)?,
            mu: self.mu,
            d: self.d,
            mode: self.mode,
            profile: self.profile,
        })
    }

    pub fn value(&self, k: Momentum) -> RgResult<C64> {
        let sp = self.symbol_params()?;
        let mut c = Vec::with_capacity(sp.shape.fine_ratio());
        let mut u = Vec::with_capacity(sp.shape.fine_ratio());
        for_each_fiber(&sp.shape, k, |_, p| {
            c.push(sp.heat(p) - sp.mu);
            u.push(sp.u(p));
        });
        resum(self.a_inv, &c, &u).ok_or_else(|| RgError::Singular {
            momentum: k.as_array(),
            detail: "dominant quadratic kernel is degenerate".into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum QuadraticSymbol {
    Dominant(DominantForm),
    /// Values on the unit dual lattice of `shape`, in DFT order.
    Table { shape: TorusShape, values: Vec<C64> },
}

/// `<psi_*, A psi>_0` for a translation-invariant `A` given by its symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticAction {
    pub symbol: QuadraticSymbol,
    pub provenance: String,
}

impl QuadraticAction {
    pub fn dominant(form: DominantForm) -> Self {
        QuadraticAction {
            provenance: format!("dominant kernel at n={}", form.n),
            symbol: QuadraticSymbol::Dominant(form),
        }
    }

    /// Values on the unit dual lattice of `shape`.
    pub fn tabulate(&self, shape: &TorusShape) -> RgResult<Vec<C64>> {
        match &self.symbol {
            QuadraticSymbol::Dominant(f) => {
                let layout = FiberLayout::new(shape);
                (0..layout.unit_count())
                    .map(|a| f.value(layout.unit_momentum(a)))
                    .collect()
            }
            QuadraticSymbol::Table { shape: s, values } => {
                if s.extents(Level::Unit) != shape.extents(Level::Unit) {
                    return Err(RgError::ShapeMismatch("table lives on a different torus".into()));
                }
                Ok(values.clone())
            }
        }
    }

    /// Position-space kernel on the unit torus of `shape`.
    pub fn kernel(&self, shape: &TorusShape) -> RgResult<OffsetKernel> {
        let values = self.tabulate(shape)?;
        let dims = shape.extents(Level::Unit);
        let mut k = values;
        crate::torus::fft4(&mut k, dims, false);
        let inv = 1.0 / k.len() as f64;
        for z in k.iter_mut() {
            *z *= inv;
        }
        Ok(OffsetKernel { dims, values: k })
    }
}

/// One block-spin step of a quadratic action: Gaussian integration against
/// `exp(-(1/L^2) <theta_* - Q psi_*, theta - Q psi>_{-1})` followed by parabolic
/// rescaling. Output lives on the child torus.
///
/// Per coarse momentum `k` the result is `L^2 / (L^2 + sum_l' u_Q^2(k+l') / A_hat(k+l'))`.
pub fn rg_step_quadratic(
    input: &QuadraticAction,
    shape: &TorusShape,
    profile: AveragingProfile,
) -> RgResult<QuadraticAction> {
    shape.require_block_divisible()?;
    let table = input.tabulate(shape)?;
    let l = shape.l;
    let lf = l as f64;
    let unit = shape.extents(Level::Unit);
    let child = shape.child()?;
    let coarse = child.extents(Level::Unit);
    let blocks = [l * l, l, l, l];
    let aliases: usize = blocks.iter().product();
    let layout = FiberLayout::new(shape);
    let mut out = Vec::with_capacity(child.site_count(Level::Unit));
    for ci in 0..child.site_count(Level::Unit) {
        let cc = coords(&coarse, ci);
        let mut c = Vec::with_capacity(aliases);
        let mut u = Vec::with_capacity(aliases);
        for t in 0..aliases {
            let tc = coords(&blocks, t);
            let mut jc = [0usize; 4];
            for a in 0..4 {
                jc[a] = cc[a] + coarse[a] * tc[a];
            }
            let j = linear_index(&unit, jc);
            c.push(table[j]);
            u.push(u_block(layout.unit_momentum(j), l, profile));
        }
        let m = resum(lf * lf, &c, &u).ok_or_else(|| RgError::Singular {
            momentum: FiberLayout::new(&child).unit_momentum(ci).as_array(),
            detail: "degenerate fiber in the Gaussian step".into(),
        })?;
        out.push(lf * lf * m);
    }
    Ok(QuadraticAction {
        symbol: QuadraticSymbol::Table {
            shape: child,
            values: out,
        },
        provenance: format!("block-spin step of [{}]", input.provenance),
    })
}

/// Value of the stepped symbol at a single momentum `K` of the child lattice,
/// for an input symbol given as a function.
pub fn rg_step_at(
    input: impl Fn(Momentum) -> RgResult<C64>,
    big_k: Momentum,
    l: usize,
    profile: AveragingProfile,
) -> RgResult<C64> {
    let lf = l as f64;
    let k = Momentum::new(big_k.k0 / (lf * lf), [big_k.k[0] / lf, big_k.k[1] / lf, big_k.k[2] / lf]);
    let h0 = ((l * l) as i64 - 1) / 2;
    let h = (l as i64 - 1) / 2;
    let mut c = Vec::new();
    let mut u = Vec::new();
    for m0 in -h0..=h0 {
        for m1 in -h..=h {
            for m2 in -h..=h {
                for m3 in -h..=h {
                    let p = Momentum::new(
                        k.k0 + 2.0 * PI * m0 as f64 / (lf * lf),
                        [
                            k.k[0] + 2.0 * PI * m1 as f64 / lf,
                            k.k[1] + 2.0 * PI * m2 as f64 / lf,
                            k.k[2] + 2.0 * PI * m3 as f64 / lf,
                        ],
                    );
                    c.push(input(p)?);
                    u.push(u_block(p, l, profile));
                }
            }
        }
    }
    let m = resum(lf * lf, &c, &u).ok_or_else(|| RgError::Singular {
        momentum: big_k.as_array(),
        detail: "degenerate fiber in the Gaussian step".into(),
    })?;
    Ok(lf * lf * m)
}

/// Translation-invariant kernel `(K psi)(y) = sum_z K(z) psi(y + z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetKernel {
    pub dims: [usize; 4],
    pub values: Vec<C64>,
}

impl OffsetKernel {
    pub fn zeros(dims: [usize; 4]) -> Self {
        OffsetKernel {
            dims,
            values: vec![C64::new(0.0, 0.0); dims.iter().product()],
        }
    }

    pub fn apply(&self, f: &Field) -> RgResult<Field> {
        if f.dims() != self.dims {
            return Err(RgError::ShapeMismatch("kernel and field extents differ".into()));
        }
        let mut out = Field::zeros(f.shape, f.level);
        for (zi, kz) in self.values.iter().enumerate() {
            if kz.norm() == 0.0 {
                continue;
            }
            let z = coords(&self.dims, zi);
            let off = [z[0] as i64, z[1] as i64, z[2] as i64, z[3] as i64];
            let shifted = f.translate(off);
            for (o, s) in out.values.iter_mut().zip(&shifted.values) {
                *o += kz * s;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Localized {
    /// `K_hat(0)`, the kernel sum.
    pub scalar: C64,
    /// `K^nu` acting on the forward differences `d_nu psi`.
    pub parts: [OffsetKernel; 4],
}

/// Splits `K = scalar + sum_nu K^nu d_nu` by walking each offset along the axes in order.
pub fn localize_quadratic(k: &OffsetKernel) -> Localized {
    let dims = k.dims;
    let mut parts = [
        OffsetKernel::zeros(dims),
        OffsetKernel::zeros(dims),
        OffsetKernel::zeros(dims),
        OffsetKernel::zeros(dims),
    ];
    let mut scalar = C64::new(0.0, 0.0);
    for (zi, &kz) in k.values.iter().enumerate() {
        if kz.norm() == 0.0 {
            continue;
        }
        scalar += kz;
        let z = coords(&dims, zi);
        let mut w = [0i64; 4];
        for nu in 0..4 {
            let s = crate::torus::symmetric_mode(z[nu], dims[nu]);
            let (step, sign) = if s >= 0 { (1, 1.0) } else { (-1, -1.0) };
            for _ in 0..s.abs() {
                if step < 0 {
                    w[nu] -= 1;
                }
                let idx = crate::torus::shifted_index(&dims, [0; 4], w);
                parts[nu].values[idx] += sign * kz;
                if step > 0 {
                    w[nu] += 1;
                }
            }
        }
    }
    Localized { scalar, parts }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuFixedPoint {
    pub mu: f64,
    pub iterations: usize,
    /// Sampled Lipschitz constant of the correction near `L^2 mu_n`.
    pub lipschitz: f64,
}

/// Fixed point of `mu -> L^2 mu_n + K'(mu)`.
pub fn renormalize_mu(
    flow: &FlowParams,
    correction: impl Fn(f64) -> RgResult<f64>,
    tol: f64,
    max_iter: usize,
) -> RgResult<MuFixedPoint> {
    let lf = flow.l as f64;
    let start = lf * lf * flow.mu;
    let h = 1e-3 * start.abs().max(1e-12);
    let lipschitz = ((correction(start + h)? - correction(start - h)?) / (2.0 * h)).abs();
    if !(lipschitz < 1.0) {
        return Err(RgError::Numerical(format!(
            "chemical-potential correction is not a contraction (Lipschitz {lipschitz:.3})"
        )));
    }
    let mut mu = start;
    for it in 1..=max_iter {
        let next = start + correction(mu)?;
        if !next.is_finite() {
            return Err(RgError::Numerical("chemical-potential iteration diverged".into()));
        }
        if (next - mu).abs() <= tol {
            return Ok(MuFixedPoint {
                mu: next,
                iterations: it,
                lipschitz,
            });
        }
        mu = next;
    }
    Err(RgError::NoConvergence {
        iterations: max_iter,
        residual: (start + correction(mu)? - mu).abs(),
    })
}

/// Deepest block level whose fine fiber is summed when measuring the correction.
pub const CORRECTION_FIBER_DEPTH: u32 = 1;

/// `K'(mu) = A_dom_{n+1}(0; mu) - A'(0) + mu - L^2 mu_n`, where `A'` is the block-spin
/// step of the scale-`n` dominant kernel. Its fixed point matches the zero-momentum
/// values of the stepped and the scale-`n+1` dominant kernels.
pub fn quadratic_correction(
    flow: &FlowParams,
    mode: TimeMode,
    profile: AveragingProfile,
) -> RgResult<impl Fn(f64) -> RgResult<f64>> {
    // The fine sum has L^(5n) terms per fiber; deeper levels only refine a
    // sum that has already converged, and the closure holds at every depth.
    let here = DominantForm {
        n: flow.n.min(CORRECTION_FIBER_DEPTH),
        l: flow.l,
        a_inv: flow.a_inv(),
        mu: flow.mu,
        d: flow.d,
        mode,
        profile,
    };
    let stepped = rg_step_at(|p| here.value(p), Momentum::zero(), flow.l, profile)?;
    let lf = flow.l as f64;
    let base = lf * lf * flow.mu;
    let next = DominantForm {
        n: here.n + 1,
        a_inv: a_inv(flow.n + 1, flow.l),
        ..here
    };
    Ok(move |mu: f64| {
        let dom = DominantForm { mu, ..next }.value(Momentum::zero())?;
        Ok((dom - stepped).re + mu - base)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowStep {
    pub params: FlowParams,
    /// `L^2n mu0`, the unrenormalized value.
    pub mu_closed_form: f64,
    /// Well geometry from the closed-form `mu_n`.
    pub well: WellGeometry,
    /// `mu_n / mu_{n-1}` along the renormalized trace.
    pub mu_ratio: Option<f64>,
    pub regime: Regime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    StepBound,
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub steps: Vec<FlowStep>,
    pub n_max: u32,
    pub stop: StopReason,
    pub admissible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub mu0: f64,
    pub v0: f64,
    pub l: usize,
    pub eps: f64,
    pub d: f64,
    pub mu_star: f64,
    /// Stop once `mu_n` reaches this value.
    pub threshold: f64,
    pub mode: TimeMode,
    pub profile: AveragingProfile,
}

impl FlowConfig {
    pub fn new(mu0: f64, v0: f64, l: usize) -> Self {
        FlowConfig {
            mu0,
            v0,
            l,
            eps: 0.01,
            d: 1.0,
            mu_star: 0.0,
            threshold: 0.5,
            mode: TimeMode::Discrete,
            profile: AveragingProfile::SHARP,
        }
    }
}

fn regime_at(mu: f64, d: f64, l: usize) -> RgResult<Regime> {
    let sp = SymbolParams {
        shape: make_shape(1, l, 1, 1)?,
        mu,
        d,
        mode: TimeMode::Continuum,
        profile: AveragingProfile::SHARP,
    };
    let fit = fit_symbol(0.1, |k| soft_eigenvalue(k, &sp))?;
    Ok(classify_regime(&fit, &RegimeThresholds::default()))
}

/// Runs the quadratic-level flow from `n = 0` until `n_max` or the `mu` threshold.
pub fn run_flow(cfg: &FlowConfig, shape: &TorusShape) -> RgResult<FlowTrace> {
    let nm = n_max(cfg.v0, cfg.l);
    let admissible = in_admissible_window(cfg.mu0, cfg.v0, cfg.mu_star);
    let mut steps: Vec<FlowStep> = Vec::new();
    let mut mu = cfg.mu0;
    let mut stop = StopReason::StepBound;
    for n in 0..=nm {
        let closed = flow_params_at(n, cfg.mu0, cfg.v0, cfg.l, cfg.eps, cfg.d)?;
        let params = FlowParams { mu, ..closed };
        let well = well_geometry(&closed, shape)?;
        let mu_ratio = steps.last().map(|s| mu / s.params.mu);
        let regime = regime_at(mu, cfg.d, cfg.l)?;
        steps.push(FlowStep {
            params,
            mu_closed_form: closed.mu,
            well,
            mu_ratio,
            regime,
        });
        if mu >= cfg.threshold {
            stop = StopReason::Threshold;
            break;
        }
        if n == nm {
            break;
        }
        let corr = quadratic_correction(&params, cfg.mode, cfg.profile)?;
        mu = renormalize_mu(&params, corr, 1e-14 * mu.max(1e-300), 200)?.mu;
    }
    Ok(FlowTrace {
        steps,
        n_max: nm,
        stop,
        admissible,
    })
}

/// `<psi_*, K psi>_0` by direct summation.
pub fn kernel_pairing(k: &OffsetKernel, psi_star: &Field, psi: &Field) -> RgResult<C64> {
    crate::torus::inner_product(psi_star, &k.apply(psi)?)
}

/// Symbol table of an offset kernel, `K_hat(k) = sum_z K(z) e^{i k z}`.
pub fn kernel_symbol(k: &OffsetKernel) -> Vec<C64> {
    let mut v = k.values.clone();
    crate::torus::fft4(&mut v, k.dims, true);
    v
}
