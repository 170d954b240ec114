//! The model action, the constant-field effective potential, the two quadratic
//! approximations and the spectrum of the dominant quadratic kernel.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::background::{solve_constant, ModelParams};
use crate::error::{RgError, RgResult};
use crate::flow::FlowParams;
use crate::lattice_ops::{fine_average_qn, heat_op, AveragingProfile};
use crate::spectral::{pair_with_symbol, pair_with_table, FiberLayout};
use crate::symbols::{symbol_one_minus_qsq, symbol_one_minus_qsquare, SymbolParams, TimeMode};
use crate::torus::{inner_product, Field, FieldPair, Level, TorusShape, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionValue {
    pub total: C64,
    /// `<psi_* - Q_n phi_*, psi - Q_n phi>_0`
    pub block: C64,
    /// `<phi_*, D_n phi>_n`
    pub heat: C64,
    /// `-mu <phi_*, phi>_n`
    pub chemical: C64,
    /// `(v/2) <phi_* phi, phi_* phi>_n`
    pub quartic: C64,
}

/// Evaluates the action with the block coefficient set to one.
pub fn eval_action(
    psi: &FieldPair,
    phi: &FieldPair,
    params: &ModelParams,
    profile: AveragingProfile,
) -> RgResult<ActionValue> {
    if psi.plain.level != Level::Unit || phi.plain.level != Level::Fine {
        return Err(RgError::LevelMismatch {
            expected: "psi on unit, phi on fine".into(),
            got: format!("psi on {}, phi on {}", psi.plain.level, phi.plain.level),
        });
    }
    let ds = psi.starred.sub(&fine_average_qn(&phi.starred, profile)?);
    let dp = psi.plain.sub(&fine_average_qn(&phi.plain, profile)?);
    let block = inner_product(&ds, &dp)?;
    let heat = inner_product(&phi.starred, &heat_op(&phi.plain, params.d))?;
    let chemical = -params.mu * inner_product(&phi.starred, &phi.plain)?;
    let prod = phi.starred.zip_map(&phi.plain, |a, b| a * b);
    let quartic = 0.5 * params.v * inner_product(&prod, &prod)?;
    Ok(ActionValue {
        total: block + heat + chemical + quartic,
        block,
        heat,
        chemical,
        quartic,
    })
}

/// Per-site effective potential at a constant external field, two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectivePotential {
    /// `(v_n/2)[(|z|^2 - mu_n/v_n)^2 - (mu_n/v_n)^2]`.
    pub closed_form: f64,
    /// Action at the constant background solution, divided by the unit site count.
    pub from_action: f64,
    /// Modulus of the constant background used by the second route.
    pub background: f64,
}

pub fn effective_potential(z: C64, flow: &FlowParams, shape: &TorusShape) -> RgResult<EffectivePotential> {
    let vn = flow.v;
    let mu = flow.mu;
    let s = z.norm_sqr() - mu / vn;
    let closed_form = 0.5 * vn * (s * s - (mu / vn) * (mu / vn));
    let params = ModelParams::new(mu, vn, flow.d)?;
    let roots = solve_constant(z.norm(), &params);
    let rho = roots
        .iter()
        .copied()
        .min_by(|a, b| (a - z.norm()).abs().partial_cmp(&(b - z.norm()).abs()).unwrap())
        .ok_or_else(|| RgError::Numerical("constant background has no real root".into()))?;
    let phase = if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) };
    let phi0 = phase * rho;
    let psi = FieldPair::new(
        Field::constant(*shape, Level::Unit, z.conj()),
        Field::constant(*shape, Level::Unit, z),
    )?;
    let phi = FieldPair::new(
        Field::constant(*shape, Level::Fine, phi0.conj()),
        Field::constant(*shape, Level::Fine, phi0),
    )?;
    let a = eval_action(&psi, &phi, &params, AveragingProfile::SHARP)?;
    Ok(EffectivePotential {
        closed_form,
        from_action: a.total.re / shape.site_count(Level::Unit) as f64,
        background: rho,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellGeometry {
    /// `sqrt(mu_n / v_n)`.
    pub radius: f64,
    /// Minimum of the closed-form potential summed over the unit torus.
    pub depth: f64,
    /// The same minimum per unit site.
    pub depth_per_site: f64,
}

pub fn well_geometry(flow: &FlowParams, shape: &TorusShape) -> RgResult<WellGeometry> {
    if !(flow.mu > 0.0) {
        return Err(RgError::Config(format!("well needs mu > 0, got {}", flow.mu)));
    }
    let ratio = flow.mu / flow.v;
    let per_site = -0.5 * flow.v * ratio * ratio;
    Ok(WellGeometry {
        radius: ratio.sqrt(),
        depth: per_site * shape.site_count(Level::Unit) as f64,
        depth_per_site: per_site,
    })
}

/// `<psi_*, (1 - Q_n S_n(mu) Q_n*) psi>_0` in momentum space.
pub fn quadratic_form_parabolic(
    psi: &FieldPair,
    params: &ModelParams,
    mode: TimeMode,
    profile: AveragingProfile,
) -> RgResult<C64> {
    let sp = params.symbol_params(psi.plain.shape, mode, profile);
    pair_with_symbol(&psi.starred, &psi.plain, |k| symbol_one_minus_qsq(k, &sp))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialQuadratic {
    /// `<[R; Theta], (1 - Q_n box^{-1} Q_n*) [R; Theta]>_0`.
    pub form: C64,
    /// `-(r^2 v / 2) <1, 1>_n`.
    pub constant: f64,
    pub total: C64,
}

/// Quadratic approximation to `A_n / r^2` around the well bottom.
pub fn quadratic_form_radial(
    r_field: &Field,
    theta: &Field,
    params: &ModelParams,
    mode: TimeMode,
    profile: AveragingProfile,
) -> RgResult<RadialQuadratic> {
    r_field.same_layout(theta)?;
    let sp = params.symbol_params(r_field.shape, mode, profile);
    let fields = [r_field, theta];
    let mut form = C64::new(0.0, 0.0);
    let layout = FiberLayout::new(&r_field.shape);
    let mats: Vec<_> = (0..layout.unit_count())
        .map(|a| symbol_one_minus_qsquare(layout.unit_momentum(a), &sp))
        .collect::<RgResult<_>>()?;
    for i in 0..2 {
        for j in 0..2 {
            let table: Vec<C64> = mats.iter().map(|m| m.m[i][j]).collect();
            form += pair_with_table(fields[i], fields[j], &table)?;
        }
    }
    let constant = -0.5 * params.r * params.r * params.v * r_field.shape.site_count(Level::Unit) as f64;
    Ok(RadialQuadratic {
        form,
        constant,
        total: form + constant,
    })
}

/// Spectral report for `Q_n* Q_n + D_n - mu` over all momentum fibers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalue_count: usize,
    /// Minimum distance of the spectrum to `(-inf, 0]`.
    pub min_distance: f64,
    /// Largest `|D^2 - M| / |M|` (Frobenius) over fibers, `D` the principal square root.
    pub sqrt_residual: f64,
    /// Smallest real part among eigenvalues of the square root.
    pub min_sqrt_real: f64,
    /// Eigenvalues of the coupled block at `k = 0`.
    pub zero_momentum: Vec<C64>,
    /// Set when some eigenvalue touches the closed negative axis.
    pub violation: bool,
}

/// Distance from `z` to the closed negative real axis.
pub fn distance_to_negative_axis(z: C64) -> f64 {
    if z.re >= 0.0 {
        z.norm()
    } else {
        z.im.abs()
    }
}

/// Principal square root of an upper-triangular matrix (Bjorck-Hammarling recurrence).
fn triangular_sqrt(t: &DMatrix<C64>) -> DMatrix<C64> {
    let n = t.nrows();
    let mut u = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        u[(i, i)] = t[(i, i)].sqrt();
    }
    for j in 1..n {
        for i in (0..j).rev() {
            let mut s = t[(i, j)];
            for k in i + 1..j {
                s -= u[(i, k)] * u[(k, j)];
            }
            u[(i, j)] = s / (u[(i, i)] + u[(j, j)]);
        }
    }
    u
}

/// Dense per-fiber spectrum. Fiber points where `u_n` vanishes decouple and
/// contribute `D_hat - mu` directly; the rest form a dense block `diag(c) + u u^T`.
pub fn dominant_quadratic_spectrum(params: &SymbolParams) -> RgResult<SpectrumReport> {
    let layout = FiberLayout::new(&params.shape);
    let mut count = 0;
    let mut min_distance = f64::INFINITY;
    let mut sqrt_residual: f64 = 0.0;
    let mut min_sqrt_real = f64::INFINITY;
    let mut zero_momentum = Vec::new();
    for a in 0..layout.unit_count() {
        let mut support = Vec::new();
        for b in 0..layout.fiber_len() {
            let p = layout.momentum(a, b);
            let c = params.heat(p) - params.mu;
            let u = params.u(p);
            if u.abs() > 1e-12 {
                support.push((c, u));
            } else {
                count += 1;
                min_distance = min_distance.min(distance_to_negative_axis(c));
                min_sqrt_real = min_sqrt_real.min(c.sqrt().re);
            }
        }
        let m = support.len();
        if m == 0 {
            continue;
        }
        let mat = DMatrix::<C64>::from_fn(m, m, |i, j| {
            let mut z = C64::new(support[i].1 * support[j].1, 0.0);
            if i == j {
                z += support[i].0;
            }
            z
        });
        let (q, t) = nalgebra::linalg::Schur::try_new(mat.clone(), 1e-14, 10_000)
            .ok_or_else(|| RgError::Numerical("Schur decomposition did not converge".into()))?
            .unpack();
        let eig: Vec<C64> = (0..m).map(|i| t[(i, i)]).collect();
        if eig.iter().any(|z| distance_to_negative_axis(*z) == 0.0) {
            min_distance = 0.0;
        }
        let u = triangular_sqrt(&t);
        let d = &q * &u * q.adjoint();
        let res = (&d * &d - &mat).norm() / mat.norm();
        sqrt_residual = sqrt_residual.max(res);
        for i in 0..m {
            min_distance = min_distance.min(distance_to_negative_axis(eig[i]));
            min_sqrt_real = min_sqrt_real.min(u[(i, i)].re);
        }
        count += m;
        if layout.unit_momentum(a).norm() == 0.0 {
            zero_momentum = eig;
        }
    }
    Ok(SpectrumReport {
        eigenvalue_count: count,
        min_distance,
        sqrt_residual,
        min_sqrt_real,
        zero_momentum,
        violation: !(min_distance > 0.0),
    })
}
