//! Background fields: critical points of the action in the fine fields for given
//! unit-lattice external fields.
//!
//! The equations solved are
//! `Q_n*(Q_n phi - psi) + D_n phi + (v phi_* phi - mu) phi = 0` and the starred
//! companion with `D_n^T`.

use serde::{Deserialize, Serialize};

use crate::error::{RgError, RgResult};
use crate::lattice_ops::{
    fine_average_qn, fine_average_qn_adjoint, heat_op, heat_op_transpose, AveragingProfile,
};
use crate::linalg::gmres;
use crate::spectral::{box_apply, box_solve, resolvent_qstar, solve_pair, solve_scalar};
use crate::symbols::{Mat2, SymbolParams, TimeMode};
use crate::torus::{Field, FieldPair, Level, TorusShape, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu: f64,
    pub v: f64,
    pub d: f64,
    /// Well radius `sqrt(mu / v)`.
    pub r: f64,
}

impl ModelParams {
    pub fn new(mu: f64, v: f64, d: f64) -> RgResult<Self> {
        if !(mu.is_finite() && v.is_finite() && d.is_finite()) {
            return Err(RgError::Config("model parameters must be finite".into()));
        }
        if v < 0.0 || mu < 0.0 {
            return Err(RgError::Config(format!(
                "need mu >= 0 and v >= 0, got mu={mu}, v={v}"
            )));
        }
        if d < 1.0 {
            return Err(RgError::Config(format!("need d >= 1, got {d}")));
        }
        let r = if v > 0.0 { (mu / v).sqrt() } else { f64::INFINITY };
        Ok(ModelParams { mu, v, d, r })
    }

    pub fn symbol_params(
        &self,
        shape: TorusShape,
        mode: TimeMode,
        profile: AveragingProfile,
    ) -> SymbolParams {
        SymbolParams {
            shape,
            mu: self.mu,
            d: self.d,
            mode,
            profile,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSolution {
    pub phi_star: Field,
    pub phi: Field,
    /// Sup norms of the plain and starred equations.
    pub residual: [f64; 2],
    pub iterations: usize,
    pub converged: bool,
}

/// All real roots of `phi + (v phi^2 - mu) phi = psi`, ascending.
pub fn solve_constant(psi: f64, params: &ModelParams) -> Vec<f64> {
    let (mu, v) = (params.mu, params.v);
    let f = |x: f64| x + (v * x * x - mu) * x - psi;
    let df = |x: f64| 1.0 - mu + 3.0 * v * x * x;
    let mut roots: Vec<f64> = Vec::new();
    if v == 0.0 {
        if (1.0 - mu).abs() > 0.0 {
            roots.push(psi / (1.0 - mu));
        }
        return roots;
    }
    // Depressed cubic x^3 + p x + q = 0.
    let p = (1.0 - mu) / v;
    let q = -psi / v;
    let disc = -(4.0 * p * p * p + 27.0 * q * q);
    if disc > 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        for j in 0..3 {
            roots.push(m * (theta - 2.0 * std::f64::consts::PI * j as f64 / 3.0).cos());
        }
    } else if disc == 0.0 {
        if p == 0.0 {
            roots.push(0.0);
        } else {
            roots.push(3.0 * q / p);
            roots.push(-1.5 * q / p);
        }
    } else {
        let s = (q * q / 4.0 + p * p * p / 27.0).sqrt();
        roots.push((-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt());
    }
    for x in roots.iter_mut() {
        for _ in 0..3 {
            let d = df(*x);
            if d != 0.0 {
                let step = f(*x) / d;
                if step.is_finite() {
                    *x -= step;
                }
            }
        }
        if x.abs() < 1e-15 {
            *x = 0.0;
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
    roots
}

/// Residual of the constant-field equation at `phi`.
pub fn constant_residual(phi: f64, psi: f64, params: &ModelParams) -> f64 {
    (phi + (params.v * phi * phi - params.mu) * phi - psi).abs()
}

fn qstar_q(f: &Field, profile: AveragingProfile) -> RgResult<Field> {
    fine_average_qn_adjoint(&fine_average_qn(f, profile)?, profile)
}

/// Left-hand sides `(F, F_*)` of the background equations.
pub fn background_equations(
    psi: &FieldPair,
    phi: &FieldPair,
    params: &ModelParams,
    profile: AveragingProfile,
) -> RgResult<[Field; 2]> {
    let mu = C64::new(params.mu, 0.0);
    let v = params.v;
    let (p, ps) = (&phi.plain, &phi.starred);
    let f1 = fine_average_qn_adjoint(&fine_average_qn(p, profile)?.sub(&psi.plain), profile)?
        .add(&heat_op(p, params.d))
        .sub(&p.scale(mu))
        .add(&ps.zip_map(p, |a, b| v * a * b * b));
    let f2 = fine_average_qn_adjoint(&fine_average_qn(ps, profile)?.sub(&psi.starred), profile)?
        .add(&heat_op_transpose(ps, params.d))
        .sub(&ps.scale(mu))
        .add(&p.zip_map(ps, |a, b| v * a * b * b));
    Ok([f1, f2])
}

fn check_external(psi: &FieldPair) -> RgResult<()> {
    psi.starred.same_layout(&psi.plain)?;
    if psi.plain.level != Level::Unit {
        return Err(RgError::LevelMismatch {
            expected: Level::Unit.to_string(),
            got: psi.plain.level.to_string(),
        });
    }
    Ok(())
}

/// First-order background `phi = S_n(mu) Q_n* psi`, `phi_* = S_n^T(mu) Q_n* psi_*`.
pub fn solve_linearized_parabolic(
    psi: &FieldPair,
    params: &ModelParams,
    profile: AveragingProfile,
) -> RgResult<BackgroundSolution> {
    check_external(psi)?;
    let sp = params.symbol_params(psi.plain.shape, TimeMode::Discrete, profile);
    let phi = resolvent_qstar(&psi.plain, &sp, false)?;
    let phi_star = resolvent_qstar(&psi.starred, &sp, true)?;
    let linear = ModelParams { v: 0.0, ..*params };
    let pair = FieldPair::new(phi_star, phi)?;
    let [f1, f2] = background_equations(psi, &pair, &linear, profile)?;
    Ok(BackgroundSolution {
        residual: [f1.sup_norm(), f2.sup_norm()],
        phi_star: pair.starred,
        phi: pair.plain,
        iterations: 1,
        converged: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialTangential {
    pub x: Field,
    pub h: Field,
    pub residual: f64,
}

/// `[X; H] = box^{-1} Q_n* [R; Theta]`.
pub fn solve_radial_tangential(
    r_field: &Field,
    theta: &Field,
    params: &ModelParams,
    mode: TimeMode,
    profile: AveragingProfile,
) -> RgResult<RadialTangential> {
    r_field.same_layout(theta)?;
    let sp = params.symbol_params(r_field.shape, mode, profile);
    let qr = fine_average_qn_adjoint(r_field, profile)?;
    let qt = fine_average_qn_adjoint(theta, profile)?;
    let [x, h] = box_solve([&qr, &qt], &sp)?;
    let [bx, bh] = box_apply([&x, &h], &sp)?;
    let residual = bx.sub(&qr).sup_norm().max(bh.sub(&qt).sup_norm());
    Ok(RadialTangential { x, h, residual })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeedStrategy {
    Zero,
    Linearized,
    /// Writes `psi = r e^{R + i Theta}`, `psi_* = r e^{R - i Theta}` and seeds
    /// with `r e^{X +- i H}` from the radial/tangential solve.
    RadialTangential,
    Given(FieldPair),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: SeedStrategy,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iter: 50,
            seed: SeedStrategy::Linearized,
        }
    }
}

fn radial_seed(psi: &FieldPair, params: &ModelParams, profile: AveragingProfile) -> RgResult<FieldPair> {
    let r = params.r;
    if !(r.is_finite() && r > 0.0) {
        return Err(RgError::Config(
            "radial/tangential seed needs mu > 0 and v > 0".into(),
        ));
    }
    let lp = psi.plain.map(|z| (z / r).ln());
    let ls = psi.starred.map(|z| (z / r).ln());
    let rf = lp.zip_map(&ls, |a, b| (a + b) * 0.5);
    let th = lp.zip_map(&ls, |a, b| (a - b) / C64::new(0.0, 2.0));
    let rt = solve_radial_tangential(&rf, &th, params, TimeMode::Discrete, profile)?;
    let i = C64::new(0.0, 1.0);
    let phi = rt.x.zip_map(&rt.h, |x, h| r * (x + i * h).exp());
    let phi_star = rt.x.zip_map(&rt.h, |x, h| r * (x - i * h).exp());
    FieldPair::new(phi_star, phi)
}

fn sup2(f: &[Field; 2]) -> f64 {
    f[0].sup_norm().max(f[1].sup_norm())
}

fn mean(f: &Field) -> C64 {
    f.values.iter().sum::<C64>() / f.len() as f64
}

/// Newton iteration on the coupled background equations.
///
/// Linear steps use GMRES with the constant-background fiber solve as a
/// preconditioner; a step that does not reduce the residual is halved, and
/// after repeated failures a plain fixed-point update is taken instead.
/// Returns the best iterate with `converged = false` when `max_iter` is hit.
pub fn solve_nonlinear(
    psi: &FieldPair,
    params: &ModelParams,
    profile: AveragingProfile,
    opts: &NewtonOptions,
) -> RgResult<BackgroundSolution> {
    check_external(psi)?;
    if !(opts.tol > 0.0) {
        return Err(RgError::Config("tolerance must be positive".into()));
    }
    let shape = psi.plain.shape;
    let sp = params.symbol_params(shape, TimeMode::Discrete, profile);
    let mut phi = match &opts.seed {
        SeedStrategy::Zero => FieldPair::zeros(shape, Level::Fine),
        SeedStrategy::Linearized => {
            let lin = solve_linearized_parabolic(psi, params, profile)?;
            FieldPair::new(lin.phi_star, lin.phi)?
        }
        SeedStrategy::RadialTangential => radial_seed(psi, params, profile)?,
        SeedStrategy::Given(p) => {
            p.starred.same_layout(&p.plain)?;
            if p.plain.level != Level::Fine || p.plain.shape != shape {
                return Err(RgError::ShapeMismatch("seed must be a fine field pair on the same torus".into()));
            }
            p.clone()
        }
    };
    let n = shape.site_count(Level::Fine);
    let v = params.v;
    let mut f = background_equations(psi, &phi, params, profile)?;
    let mut res = sup2(&f);
    for it in 1..=opts.max_iter {
        if res <= opts.tol {
            return Ok(BackgroundSolution {
                residual: [f[0].sup_norm(), f[1].sup_norm()],
                phi_star: phi.starred,
                phi: phi.plain,
                iterations: it,
                converged: true,
            });
        }
        let p = phi.plain.clone();
        let ps = phi.starred.clone();
        let diag = ps.zip_map(&p, |a, b| 2.0 * v * a * b);
        let off1 = p.map(|z| v * z * z);
        let off2 = ps.map(|z| v * z * z);
        let mu = C64::new(params.mu, 0.0);
        let jac = |x: &[C64]| -> Vec<C64> {
            let a = Field::from_values(shape, Level::Fine, x[..n].to_vec()).unwrap();
            let b = Field::from_values(shape, Level::Fine, x[n..].to_vec()).unwrap();
            let ja = qstar_q(&a, profile)
                .unwrap()
                .add(&heat_op(&a, params.d))
                .sub(&a.scale(mu))
                .add(&diag.zip_map(&a, |d, y| d * y))
                .add(&off1.zip_map(&b, |o, y| o * y));
            let jb = qstar_q(&b, profile)
                .unwrap()
                .add(&heat_op_transpose(&b, params.d))
                .sub(&b.scale(mu))
                .add(&diag.zip_map(&b, |d, y| d * y))
                .add(&off2.zip_map(&a, |o, y| o * y));
            let mut out = ja.values;
            out.extend(jb.values);
            out
        };
        let m = mean(&diag);
        let s1 = mean(&off1);
        let s2 = mean(&off2);
        let block = |q| {
            let h = sp.heat(q);
            let ht = sp.heat_transpose(q);
            Mat2::new(h - mu + m, s1, s2, ht - mu + m)
        };
        let mut precond_ok = true;
        let precond = |x: &[C64]| -> Vec<C64> {
            if !precond_ok {
                return x.to_vec();
            }
            let a = Field::from_values(shape, Level::Fine, x[..n].to_vec()).unwrap();
            let b = Field::from_values(shape, Level::Fine, x[n..].to_vec()).unwrap();
            match solve_pair([&a, &b], &sp, &block) {
                Ok([ya, yb]) => {
                    let mut out = ya.values;
                    out.extend(yb.values);
                    out
                }
                Err(_) => {
                    precond_ok = false;
                    x.to_vec()
                }
            }
        };
        let mut rhs: Vec<C64> = f[0].values.iter().map(|z| -z).collect();
        rhs.extend(f[1].values.iter().map(|z| -z));
        let mut step = vec![C64::new(0.0, 0.0); 2 * n];
        gmres(jac, precond, &rhs, &mut step, 1e-12, 40, 400);
        let da = Field::from_values(shape, Level::Fine, step[..n].to_vec())?;
        let db = Field::from_values(shape, Level::Fine, step[n..].to_vec())?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let cand = FieldPair::new(
                ps.add(&db.scale(C64::new(t, 0.0))),
                p.add(&da.scale(C64::new(t, 0.0))),
            )?;
            let fc = background_equations(psi, &cand, params, profile)?;
            let rc = sup2(&fc);
            if rc.is_finite() && rc < res {
                phi = cand;
                f = fc;
                res = rc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // Fixed-point update phi <- S(Q* psi - v phi_* phi^2).
            let src1 = fine_average_qn_adjoint(&psi.plain, profile)?
                .sub(&ps.zip_map(&p, |a, b| v * a * b * b));
            let src2 = fine_average_qn_adjoint(&psi.starred, profile)?
                .sub(&p.zip_map(&ps, |a, b| v * a * b * b));
            let cand = FieldPair::new(
                solve_scalar(&src2, &sp, true)?,
                solve_scalar(&src1, &sp, false)?,
            )?;
            let fc = background_equations(psi, &cand, params, profile)?;
            let rc = sup2(&fc);
            if !(rc.is_finite() && rc < res) {
                return Ok(BackgroundSolution {
                    residual: [f[0].sup_norm(), f[1].sup_norm()],
                    phi_star: phi.starred,
                    phi: phi.plain,
                    iterations: it,
                    converged: false,
                });
            }
            phi = cand;
            f = fc;
            res = rc;
        }
    }
    let converged = res <= opts.tol;
    Ok(BackgroundSolution {
        residual: [f[0].sup_norm(), f[1].sup_norm()],
        phi_star: phi.starred,
        phi: phi.plain,
        iterations: opts.max_iter,
        converged,
    })
}
