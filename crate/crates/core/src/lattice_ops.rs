//! Direct-space operators: differences, the heat operator, block averages,
//! their adjoints, and the parabolic scaling maps.
//!
//! All adjoints are taken with respect to the weighted bilinear pairings of
//! [`crate::torus::inner_product`], so `Q*` carries the coarse weight `L^5`
//! and `Q_n*` carries `L^(5n)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{RgError, RgResult};
use crate::norms::Kernel;
use crate::torus::{coords, linear_index, Field, Level, TorusShape, C64};

/// Averaging profile: the centered box indicator convolved with itself
/// `exponent - 1` times. Exponent 1 is the sharp block mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AveragingProfile {
    pub exponent: u32,
}

impl AveragingProfile {
    pub const SHARP: AveragingProfile = AveragingProfile { exponent: 1 };
    pub const SMOOTH: AveragingProfile = AveragingProfile { exponent: 5 };

    pub fn parse(s: &str) -> RgResult<Self> {
        match s {
            "sharp" => Ok(Self::SHARP),
            "smooth" => Ok(Self::SMOOTH),
            other => Err(RgError::Config(format!(
                "profile must be sharp or smooth, got {other}"
            ))),
        }
    }

    /// Centered 1-d weights `(offset, weight)` for a box of `block` sites.
    pub fn weights_1d(&self, block: usize) -> Vec<(i64, f64)> {
        assert!(block % 2 == 1, "blocks have odd side length");
        let half = (block as i64 - 1) / 2;
        let box_w = 1.0 / block as f64;
        let mut cur: Vec<(i64, f64)> = (-half..=half).map(|o| (o, box_w)).collect();
        for _ in 1..self.exponent.max(1) {
            let lo = cur[0].0 - half;
            let hi = cur[cur.len() - 1].0 + half;
            let mut next: Vec<(i64, f64)> = (lo..=hi).map(|o| (o, 0.0)).collect();
            for &(o, w) in &cur {
                for b in -half..=half {
                    next[(o + b - lo) as usize].1 += w * box_w;
                }
            }
            cur = next;
        }
        // Renormalize so the weights sum to one to rounding.
        let s: f64 = cur.iter().map(|x| x.1).sum();
        for x in cur.iter_mut() {
            x.1 /= s;
        }
        cur
    }
}

impl Default for AveragingProfile {
    fn default() -> Self {
        Self::SHARP
    }
}

/// `(f(x + h e_axis) - f(x)) / h`.
pub fn forward_diff(f: &Field, axis: usize) -> Field {
    let h = f.shape.spacing(f.level)[axis];
    let mut off = [0i64; 4];
    off[axis] = 1;
    f.translate(off).sub(f).scale(C64::new(1.0 / h, 0.0))
}

/// `(f(x) - f(x - h e_axis)) / h`; the transpose of `forward_diff` is its negative.
pub fn backward_diff(f: &Field, axis: usize) -> Field {
    let h = f.shape.spacing(f.level)[axis];
    let mut off = [0i64; 4];
    off[axis] = -1;
    f.sub(&f.translate(off)).scale(C64::new(1.0 / h, 0.0))
}

/// Spatial lattice Laplacian `Delta` at the field's spacing.
pub fn laplacian(f: &Field) -> Field {
    let mut out = Field::zeros(f.shape, f.level);
    for axis in 1..4 {
        let d = backward_diff(&forward_diff(f, axis), axis);
        out = out.add(&d);
    }
    out
}

/// `D f = -d df/dt - Delta f` with forward time difference.
pub fn heat_op(f: &Field, d: f64) -> Field {
    forward_diff(f, 0)
        .scale(C64::new(-d, 0.0))
        .sub(&laplacian(f))
}

/// Transpose of [`heat_op`] under the bilinear pairing: `d` times the backward
/// time difference minus `Delta`.
pub fn heat_op_transpose(f: &Field, d: f64) -> Field {
    backward_diff(f, 0)
        .scale(C64::new(d, 0.0))
        .sub(&laplacian(f))
}

fn filter_downsample(
    values: &[C64],
    dims: [usize; 4],
    axis: usize,
    weights: &[(i64, f64)],
    stride: usize,
) -> (Vec<C64>, [usize; 4]) {
    let mut out_dims = dims;
    out_dims[axis] = dims[axis] / stride;
    let total: usize = out_dims.iter().product();
    let n = dims[axis] as i64;
    let mut out = vec![C64::new(0.0, 0.0); total];
    for (i, slot) in out.iter_mut().enumerate() {
        let c = coords(&out_dims, i);
        let base = (c[axis] * stride) as i64;
        let mut src = c;
        let mut acc = C64::new(0.0, 0.0);
        for &(o, w) in weights {
            src[axis] = (base + o).rem_euclid(n) as usize;
            acc += values[linear_index(&dims, src)] * w;
        }
        *slot = acc;
    }
    (out, out_dims)
}

fn filter_upsample(
    values: &[C64],
    dims: [usize; 4],
    axis: usize,
    weights: &[(i64, f64)],
    stride: usize,
) -> (Vec<C64>, [usize; 4]) {
    let mut out_dims = dims;
    out_dims[axis] = dims[axis] * stride;
    let total: usize = out_dims.iter().product();
    let n = out_dims[axis] as i64;
    let mut out = vec![C64::new(0.0, 0.0); total];
    for (i, &v) in values.iter().enumerate() {
        let c = coords(&dims, i);
        let base = (c[axis] * stride) as i64;
        let mut dst = c;
        for &(o, w) in weights {
            dst[axis] = (base + o).rem_euclid(n) as usize;
            out[linear_index(&out_dims, dst)] += v * w;
        }
    }
    (out, out_dims)
}

fn separable_average(values: &[C64], dims: [usize; 4], blocks: [usize; 4], profile: AveragingProfile) -> Vec<C64> {
    let mut cur = values.to_vec();
    let mut d = dims;
    for axis in 0..4 {
        let w = profile.weights_1d(blocks[axis]);
        let (v, nd) = filter_downsample(&cur, d, axis, &w, blocks[axis]);
        cur = v;
        d = nd;
    }
    cur
}

fn separable_transpose(values: &[C64], dims: [usize; 4], blocks: [usize; 4], profile: AveragingProfile) -> Vec<C64> {
    let mut cur = values.to_vec();
    let mut d = dims;
    for axis in 0..4 {
        let w = profile.weights_1d(blocks[axis]);
        let (v, nd) = filter_upsample(&cur, d, axis, &w, blocks[axis]);
        cur = v;
        d = nd;
    }
    cur
}

fn expect_level(f: &Field, level: Level) -> RgResult<()> {
    if f.level != level {
        return Err(RgError::LevelMismatch {
            expected: level.to_string(),
            got: f.level.to_string(),
        });
    }
    Ok(())
}

/// Block-spin average `Q`: unit field to the coarse sublattice of block centers.
pub fn block_average_q(f: &Field, profile: AveragingProfile) -> RgResult<Field> {
    expect_level(f, Level::Unit)?;
    f.shape.require_block_divisible()?;
    let l = f.shape.l;
    let v = separable_average(&f.values, f.dims(), [l * l, l, l, l], profile);
    Field::from_values(f.shape, Level::Coarse, v)
}

/// Adjoint of `Q` from `<,>_{-1}` to `<,>_0`.
pub fn block_average_q_adjoint(theta: &Field, profile: AveragingProfile) -> RgResult<Field> {
    expect_level(theta, Level::Coarse)?;
    theta.shape.require_block_divisible()?;
    let l = theta.shape.l;
    let w = theta.shape.weight(Level::Coarse);
    let v = separable_transpose(&theta.values, theta.dims(), [l * l, l, l, l], profile);
    Ok(Field::from_values(theta.shape, Level::Unit, v)?.scale(C64::new(w, 0.0)))
}

/// Fine average `Q_n`: fine field to unit-lattice box means.
pub fn fine_average_qn(f: &Field, profile: AveragingProfile) -> RgResult<Field> {
    expect_level(f, Level::Fine)?;
    let v = separable_average(&f.values, f.dims(), f.shape.fine_factors(), profile);
    Field::from_values(f.shape, Level::Unit, v)
}

/// Adjoint of `Q_n` from `<,>_n` to `<,>_0`; embeds constants as constants.
pub fn fine_average_qn_adjoint(psi: &Field, profile: AveragingProfile) -> RgResult<Field> {
    expect_level(psi, Level::Unit)?;
    let w = psi.shape.fine_ratio() as f64;
    let v = separable_transpose(&psi.values, psi.dims(), psi.shape.fine_factors(), profile);
    Ok(Field::from_values(psi.shape, Level::Fine, v)?.scale(C64::new(w, 0.0)))
}

/// Direction of the parabolic scaling map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleDirection {
    /// `S`: coarse/fine fields on a torus to unit/fine fields on its child, amplitude `L^(3/2)`.
    Up,
    /// `S^-1`: the inverse, amplitude `L^(-3/2)`.
    Down,
}

/// Parabolic scaling `(S^-1 psi)(y0, y) = L^(-3/2) psi(y0 / L^2, y / L)` and its inverse.
///
/// `Up` maps (coarse or fine at scale n) on `f.shape` to (unit or fine at scale n+1)
/// on the child torus. `Down` maps (unit or fine at scale n+1) on `f.shape` to
/// (coarse or fine at scale n) on the parent torus. Site arrays are identical;
/// only the level tag, shape and amplitude change.
pub fn scale_down(f: &Field, direction: ScaleDirection) -> RgResult<Field> {
    let l = f.shape.l as f64;
    match direction {
        ScaleDirection::Up => {
            let child = f.shape.child()?;
            let level = match f.level {
                Level::Coarse => Level::Unit,
                Level::Fine => Level::Fine,
                Level::Unit => {
                    return Err(RgError::LevelMismatch {
                        expected: "coarse or fine".into(),
                        got: "unit".into(),
                    })
                }
            };
            let out = Field::from_values(child, level, f.values.clone())?;
            Ok(out.scale(C64::new(l.powf(1.5), 0.0)))
        }
        ScaleDirection::Down => {
            let parent = f.shape.parent()?;
            let level = match f.level {
                Level::Unit => Level::Coarse,
                Level::Fine => Level::Fine,
                Level::Coarse => {
                    return Err(RgError::LevelMismatch {
                        expected: "unit or fine".into(),
                        got: "coarse".into(),
                    })
                }
            };
            let out = Field::from_values(parent, level, f.values.clone())?;
            Ok(out.scale(C64::new(l.powf(-1.5), 0.0)))
        }
    }
}

/// Rescales a unit-lattice interaction kernel to the fine lattice at scale `n`.
///
/// Site tuples keep their integer coordinates (fine site `u` has `U = (L^2n u0, L^n u)`
/// in unit coordinates of the `L`-times enlarged torus); values pick up
/// `L^-n (L^5n)^3`. The kernel must fit inside the fine extents of `shape`.
pub fn scale_interaction_kernel(v: &Kernel, shape: &TorusShape) -> RgResult<Kernel> {
    let dims = shape.extents(Level::Fine);
    for (sites, _) in &v.entries {
        for s in sites {
            for a in 0..4 {
                if s[a] >= dims[a] {
                    return Err(RgError::Config(format!(
                        "kernel site {s:?} outside fine torus {dims:?}"
                    )));
                }
            }
        }
    }
    let factor = (shape.l as f64).powi(14 * shape.n as i32);
    let mut out = v.clone();
    for (_, val) in out.entries.iter_mut() {
        *val *= factor;
    }
    Ok(out)
}

/// Local coupling carried by a rescaled on-diagonal kernel: the diagonal value
/// times `L^(-15n)`, so that `(v_n/2) <phi_* phi, phi_* phi>_n` is reproduced.
pub fn induced_local_coupling(v: &Kernel, shape: &TorusShape) -> C64 {
    let diag: Vec<C64> = v
        .entries
        .iter()
        .filter(|(s, _)| s.iter().all(|x| *x == s[0]))
        .map(|(_, z)| *z)
        .collect();
    if diag.is_empty() {
        return C64::new(0.0, 0.0);
    }
    let mean = diag.iter().sum::<C64>() / diag.len() as f64;
    mean * (shape.l as f64).powi(-15 * shape.n as i32)
}

/// Dense matrix of a linear field map, built column by column.
pub fn dense_matrix(
    op: impl Fn(&Field) -> Field,
    shape: TorusShape,
    level: Level,
) -> RgResult<DMatrix<C64>> {
    let n = shape.site_count(level);
    if n > 4096 {
        return Err(RgError::Config(format!(
            "dense matrices are limited to 4096 sites, got {n}"
        )));
    }
    let mut cols: Vec<Field> = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = Field::zeros(shape, level);
        e.values[j] = C64::new(1.0, 0.0);
        cols.push(op(&e));
    }
    let rows = cols.first().map(|c| c.len()).unwrap_or(0);
    Ok(DMatrix::from_fn(rows, n, |i, j| cols[j].values[i]))
}

/// Operator norm of the commutator `[d_axis, Q]` estimated on the momentum grid
/// of the coarse torus: `max_k ||c(k)||_2` with
/// `c_l = u_Q(k+l) (t_coarse(k) - t_unit(k+l))` over the block fiber.
pub fn commutator_norm(shape: &TorusShape, profile: AveragingProfile, axis: usize) -> RgResult<f64> {
    use crate::symbols::box_ratio;
    use std::f64::consts::PI;
    shape.require_block_divisible()?;
    let l = shape.l;
    let blocks = [l * l, l, l, l];
    let cdims = shape.extents(Level::Coarse);
    let hc = shape.spacing(Level::Coarse);
    let ncoarse = shape.site_count(Level::Coarse);
    let fiber: usize = blocks.iter().product();
    let mut best: f64 = 0.0;
    for ic in 0..ncoarse {
        let cc = coords(&cdims, ic);
        let mut kc = [0.0; 4];
        for a in 0..4 {
            let m = crate::torus::symmetric_mode(cc[a], cdims[a]);
            kc[a] = 2.0 * PI * m as f64 / (cdims[a] as f64 * hc[a]);
        }
        let tc = (C64::new(0.0, kc[axis] * hc[axis]).exp() - 1.0) / hc[axis];
        let mut s2 = 0.0;
        for jf in 0..fiber {
            let lc = coords(&blocks, jf);
            let mut p = [0.0; 4];
            let mut u = 1.0;
            for a in 0..4 {
                let m = crate::torus::symmetric_mode(lc[a], blocks[a]);
                p[a] = kc[a] + 2.0 * PI * m as f64 / hc[a];
                u *= box_ratio(p[a], blocks[a], 1.0);
            }
            let u = u.powi(profile.exponent as i32);
            let tu = C64::new(0.0, p[axis]).exp() - 1.0;
            s2 += (u * (tc - tu)).norm_sqr();
        }
        best = best.max(s2.sqrt());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{inner_product, make_shape, Momentum};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
    }

    #[test]
    fn profiles_sum_to_one() {
        for p in [AveragingProfile::SHARP, AveragingProfile::SMOOTH] {
            for b in [3usize, 9] {
                let w = p.weights_1d(b);
                let s: f64 = w.iter().map(|x| x.1).sum();
                assert!((s - 1.0).abs() < 1e-15);
                let n = w.len() as i64;
                assert_eq!(w[0].0, -(n - 1) / 2);
            }
        }
        assert_eq!(AveragingProfile::SMOOTH.weights_1d(3).len(), 11);
    }

    #[test]
    fn differences_kill_constants_and_act_on_waves() {
        let s = make_shape(1, 3, 2, 1).unwrap();
        let c = Field::constant(s, Level::Fine, C64::new(2.0, 1.0));
        assert!(forward_diff(&c, 0).sup_norm() < 1e-12);
        assert!(heat_op(&c, 1.3).sup_norm() < 1e-12);
        let p = crate::torus::dual_lattice(&s, Level::Fine)[5];
        let w = Field::plane_wave(s, Level::Fine, p);
        let h = s.eps_t;
        let lam = (C64::new(0.0, p.k0 * h).exp() - 1.0) / h;
        let got = forward_diff(&w, 0);
        for (g, x) in got.values.iter().zip(&w.values) {
            assert!(close(*g, lam * x, 1e-10));
        }
    }

    #[test]
    fn summation_by_parts() {
        let mut r = rng();
        let s = make_shape(1, 3, 2, 2).unwrap();
        let f = Field::random(s, Level::Fine, 1.0, &mut r);
        let g = Field::random(s, Level::Fine, 1.0, &mut r);
        for axis in 0..4 {
            let lhs = inner_product(&forward_diff(&f, axis), &g).unwrap();
            let rhs = -inner_product(&f, &backward_diff(&g, axis)).unwrap();
            assert!(close(lhs, rhs, 1e-12));
        }
        let lhs = inner_product(&heat_op(&f, 0.7), &g).unwrap();
        let rhs = inner_product(&f, &heat_op_transpose(&g, 0.7)).unwrap();
        assert!(close(lhs, rhs, 1e-12));
    }

    #[test]
    fn heat_symbol_on_plane_wave() {
        let s = make_shape(1, 3, 2, 2).unwrap();
        let p = crate::torus::dual_lattice(&s, Level::Fine)[1234];
        let w = Field::plane_wave(s, Level::Fine, p);
        let d = 1.7;
        let got = heat_op(&w, d);
        let lam = crate::symbols::heat_symbol(
            p,
            s.eps_t,
            s.eps_x,
            d,
            crate::symbols::TimeMode::Discrete,
        );
        for (g, x) in got.values.iter().zip(&w.values) {
            assert!(close(*g, lam * x, 1e-10));
        }
    }

    #[test]
    fn block_mean_of_time_index() {
        let s = make_shape(0, 3, 9, 3).unwrap();
        let f = Field::from_fn(s, Level::Unit, |c| C64::new(c[0] as f64, 0.0));
        let q = block_average_q(&f, AveragingProfile::SHARP).unwrap();
        assert_eq!(q.len(), 1);
        // Block centered at t=0 covers t = -4..4, i.e. 5,6,7,8,0,1,2,3,4 on the torus.
        let want: f64 = [5.0, 6.0, 7.0, 8.0, 0.0, 1.0, 2.0, 3.0, 4.0].iter().sum::<f64>() / 9.0;
        assert!((q.values[0].re - want).abs() < 1e-12);
    }

    #[test]
    fn averages_preserve_constants() {
        let s = make_shape(1, 3, 9, 3).unwrap();
        let c = C64::new(0.3, -1.1);
        for p in [AveragingProfile::SHARP, AveragingProfile::SMOOTH] {
            let u = Field::constant(s, Level::Unit, c);
            let q = block_average_q(&u, p).unwrap();
            assert!(q.values.iter().all(|z| close(*z, c, 1e-14)));
            let f = Field::constant(s, Level::Fine, c);
            let qn = fine_average_qn(&f, p).unwrap();
            assert!(qn.values.iter().all(|z| close(*z, c, 1e-14)));
            let back = fine_average_qn(&fine_average_qn_adjoint(&u, p).unwrap(), p).unwrap();
            assert!(back.values.iter().all(|z| close(*z, c, 1e-13)));
        }
    }

    #[test]
    fn averaging_adjoints() {
        let mut r = rng();
        let s = make_shape(1, 3, 9, 3).unwrap();
        for p in [AveragingProfile::SHARP, AveragingProfile::SMOOTH] {
            let psi = Field::random(s, Level::Unit, 1.0, &mut r);
            let th = Field::random(s, Level::Coarse, 1.0, &mut r);
            let lhs = inner_product(&th, &block_average_q(&psi, p).unwrap()).unwrap();
            let rhs = inner_product(&block_average_q_adjoint(&th, p).unwrap(), &psi).unwrap();
            assert!(close(lhs, rhs, 1e-12));
        }
        let s = make_shape(1, 3, 2, 2).unwrap();
        for p in [AveragingProfile::SHARP, AveragingProfile::SMOOTH] {
            let phi = Field::random(s, Level::Fine, 1.0, &mut r);
            let psi = Field::random(s, Level::Unit, 1.0, &mut r);
            let lhs = inner_product(&psi, &fine_average_qn(&phi, p).unwrap()).unwrap();
            let rhs = inner_product(&fine_average_qn_adjoint(&psi, p).unwrap(), &phi).unwrap();
            assert!(close(lhs, rhs, 1e-12));
        }
    }

    #[test]
    fn averages_commute_with_translations() {
        let mut r = rng();
        let s = make_shape(1, 3, 2, 2).unwrap();
        let f = Field::random(s, Level::Fine, 1.0, &mut r);
        let ff = s.fine_factors();
        let shift_unit = [1i64, 1, 0, 1];
        let shift_fine = [ff[0] as i64, ff[1] as i64, 0, ff[3] as i64];
        for p in [AveragingProfile::SHARP, AveragingProfile::SMOOTH] {
            let a = fine_average_qn(&f.translate(shift_fine), p).unwrap();
            let b = fine_average_qn(&f, p).unwrap().translate(shift_unit);
            assert!(a.sub(&b).sup_norm() < 1e-13);
        }
        let hd = heat_op(&f.translate([3, 1, 2, 0]), 1.0);
        let dh = heat_op(&f, 1.0).translate([3, 1, 2, 0]);
        assert!(hd.sub(&dh).sup_norm() < 1e-10);
    }

    #[test]
    fn fine_average_matches_u_n() {
        let mut r = rng();
        let s = make_shape(1, 3, 2, 2).unwrap();
        let f = Field::random(s, Level::Fine, 1.0, &mut r);
        let qf = fine_average_qn(&f, AveragingProfile::SHARP).unwrap();
        let fh = crate::torus::dft(&f);
        let qh = crate::torus::dft(&qf);
        let layout = crate::spectral::FiberLayout::new(&s);
        let inv = 1.0 / s.fine_ratio() as f64;
        for a in 0..layout.unit_count() {
            let mut want = C64::new(0.0, 0.0);
            for b in 0..layout.fiber_len() {
                let p = layout.momentum(a, b);
                let u = crate::symbols::u_n(p, &s, AveragingProfile::SHARP);
                want += fh[layout.fine_index(a, b)] * u;
            }
            want *= inv;
            assert!(close(qh[a], want, 1e-10), "a={a}");
        }
    }

    #[test]
    fn scaling_identities() {
        let mut r = rng();
        let t = make_shape(0, 3, 9, 3).unwrap();
        let child = t.child().unwrap();
        let a = Field::random(child, Level::Unit, 1.0, &mut r);
        let b = Field::random(child, Level::Unit, 1.0, &mut r);
        let sa = scale_down(&a, ScaleDirection::Down).unwrap();
        let sb = scale_down(&b, ScaleDirection::Down).unwrap();
        let lhs = inner_product(&sa, &sb).unwrap() / 9.0;
        let rhs = inner_product(&a, &b).unwrap();
        assert!(close(lhs, rhs, 1e-13));
        let back = scale_down(&sa, ScaleDirection::Up).unwrap();
        assert!(back.sub(&a).sup_norm() < 1e-14);
    }

    #[test]
    fn composite_average_is_next_fine_average() {
        let mut r = rng();
        let t1 = make_shape(1, 3, 1, 1).unwrap();
        let t0 = t1.parent().unwrap();
        let f = Field::random(t1, Level::Fine, 1.0, &mut r);
        let p = AveragingProfile::SHARP;
        let down = scale_down(&f, ScaleDirection::Down).unwrap();
        let qqn = block_average_q(&fine_average_qn(&down, p).unwrap(), p).unwrap();
        let lhs = scale_down(&qqn, ScaleDirection::Up).unwrap();
        let rhs = fine_average_qn(&f, p).unwrap();
        assert_eq!(t0.n, 0);
        assert!(lhs.sub(&rhs).sup_norm() < 1e-13);
    }

    #[test]
    fn local_kernel_coupling_drops_by_l() {
        let s = make_shape(1, 3, 1, 1).unwrap();
        let k = Kernel::local(4, s.extents(Level::Fine), C64::new(1.0, 0.0));
        let scaled = scale_interaction_kernel(&k, &s).unwrap();
        let v = induced_local_coupling(&scaled, &s);
        assert!((v - C64::new(1.0 / 3.0, 0.0)).norm() < 1e-14);
        let s0 = make_shape(0, 3, 1, 1).unwrap();
        assert_eq!(scale_interaction_kernel(&k, &s0).unwrap(), k);
    }

    #[test]
    fn two_point_kernel_rescaling() {
        let s = make_shape(1, 3, 1, 1).unwrap();
        let entries = vec![
            (vec![[0, 0, 0, 0], [1, 0, 0, 0]], C64::new(0.5, 0.0)),
            (vec![[1, 0, 0, 0], [0, 0, 0, 0]], C64::new(0.5, 0.0)),
        ];
        let k = Kernel::new(2, s.extents(Level::Fine), entries, true).unwrap();
        let scaled = scale_interaction_kernel(&k, &s).unwrap();
        // Independent substitution: V_1(u1,u2) = L^-1 (L^5)^3 V_0(U1,U2), with U the
        // integer coordinates of the fine sites.
        let factor = 3f64.powi(-1) * 3f64.powi(15);
        for (sites, v) in &scaled.entries {
            let v0 = k.get(sites);
            assert!((v - v0 * factor).norm() < 1e-6);
        }
        let big = Kernel::new(2, [10, 3, 3, 3], vec![(vec![[0, 0, 0, 0], [9, 0, 0, 0]], C64::new(1.0, 0.0))], true).unwrap();
        assert!(scale_interaction_kernel(&big, &s).is_err());
    }

    #[test]
    fn smoothing_shrinks_commutator() {
        for n in 0..2u32 {
            let s = make_shape(n, 3, 9, 3).unwrap();
            for axis in 0..4 {
                let sharp = commutator_norm(&s, AveragingProfile::SHARP, axis).unwrap();
                let smooth = commutator_norm(&s, AveragingProfile::SMOOTH, axis).unwrap();
                assert!(smooth < sharp, "axis {axis}: {smooth} vs {sharp}");
            }
        }
    }

    #[test]
    fn dense_matrix_of_average() {
        let s = make_shape(0, 3, 9, 3).unwrap();
        let m = dense_matrix(
            |f| block_average_q(f, AveragingProfile::SHARP).unwrap(),
            s,
            Level::Unit,
        )
        .unwrap();
        assert_eq!((m.nrows(), m.ncols()), (1, 243));
        let row_sum: C64 = m.row(0).iter().sum();
        assert!(close(row_sum, C64::new(1.0, 0.0), 1e-13));
        let _ = Momentum::zero();
    }
}
