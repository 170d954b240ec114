//! Fine-lattice fields in momentum space, grouped into fibers over unit momenta.
//!
//! Fine mode `j` on an axis with unit extent `N` and fine factor `B` is written
//! as `j = a + N m` with `a` a symmetric unit mode and `m` centered in
//! `[-(B-1)/2, (B-1)/2]`. The fine momentum is then `k_a + 2 pi m`, which is
//! exactly the point `k + l` that the symbol layer works with.

use std::f64::consts::PI;

use crate::error::{RgError, RgResult};
use crate::lattice_ops::AveragingProfile;
use crate::symbols::{solve_rank_one, solve_rank_one_2, Mat2, SymbolParams};
use crate::torus::{
    coords, dft, idft, linear_index, symmetric_mode, Field, Level, Momentum, TorusShape, C64,
};

#[derive(Debug, Clone)]
pub struct FiberLayout {
    pub shape: TorusShape,
    unit_dims: [usize; 4],
    fine_dims: [usize; 4],
    unit_modes: Vec<[i64; 4]>,
    block_modes: Vec<[i64; 4]>,
}

impl FiberLayout {
    pub fn new(shape: &TorusShape) -> Self {
        let unit_dims = shape.extents(Level::Unit);
        let fine_dims = shape.extents(Level::Fine);
        let blocks = shape.fine_factors();
        let unit_modes = (0..shape.site_count(Level::Unit))
            .map(|i| {
                let c = coords(&unit_dims, i);
                let mut m = [0i64; 4];
                for a in 0..4 {
                    m[a] = symmetric_mode(c[a], unit_dims[a]);
                }
                m
            })
            .collect();
        let block_modes = (0..shape.fine_ratio())
            .map(|i| {
                let c = coords(&blocks, i);
                let mut m = [0i64; 4];
                for a in 0..4 {
                    m[a] = c[a] as i64 - (blocks[a] as i64 - 1) / 2;
                }
                m
            })
            .collect();
        FiberLayout {
            shape: *shape,
            unit_dims,
            fine_dims,
            unit_modes,
            block_modes,
        }
    }

    pub fn unit_count(&self) -> usize {
        self.unit_modes.len()
    }

    pub fn fiber_len(&self) -> usize {
        self.block_modes.len()
    }

    pub fn unit_momentum(&self, a: usize) -> Momentum {
        let m = self.unit_modes[a];
        let mut p = [0.0; 4];
        for ax in 0..4 {
            p[ax] = 2.0 * PI * m[ax] as f64 / self.unit_dims[ax] as f64;
        }
        Momentum::from_array(p)
    }

    /// `k_a + l_b`.
    pub fn momentum(&self, a: usize, b: usize) -> Momentum {
        let k = self.unit_momentum(a).as_array();
        let m = self.block_modes[b];
        let mut p = [0.0; 4];
        for ax in 0..4 {
            p[ax] = k[ax] + 2.0 * PI * m[ax] as f64;
        }
        Momentum::from_array(p)
    }

    /// Position of mode `k_a + l_b` in the fine DFT array.
    pub fn fine_index(&self, a: usize, b: usize) -> usize {
        let ma = self.unit_modes[a];
        let mb = self.block_modes[b];
        let mut c = [0usize; 4];
        for ax in 0..4 {
            let j = ma[ax] + self.unit_dims[ax] as i64 * mb[ax];
            c[ax] = j.rem_euclid(self.fine_dims[ax] as i64) as usize;
        }
        linear_index(&self.fine_dims, c)
    }

    /// Averaging symbols `u_n(k_a + l)` over the fiber of `a`.
    pub fn fiber_u(&self, a: usize, profile: AveragingProfile) -> Vec<f64> {
        (0..self.fiber_len())
            .map(|b| crate::symbols::u_n(self.momentum(a, b), &self.shape, profile))
            .collect()
    }
}

fn expect_fine(f: &Field) -> RgResult<()> {
    if f.level != Level::Fine {
        return Err(RgError::LevelMismatch {
            expected: Level::Fine.to_string(),
            got: f.level.to_string(),
        });
    }
    Ok(())
}

/// Solves `(Q_n* Q_n + D_n - mu) x = rhs` (or with `D_n^T`) on the fine lattice.
pub fn solve_scalar(rhs: &Field, params: &SymbolParams, transpose: bool) -> RgResult<Field> {
    expect_fine(rhs)?;
    let layout = FiberLayout::new(&rhs.shape);
    let coeffs = dft(rhs);
    let mut out = vec![C64::new(0.0, 0.0); coeffs.len()];
    for a in 0..layout.unit_count() {
        let len = layout.fiber_len();
        let mut c = Vec::with_capacity(len);
        let mut u = Vec::with_capacity(len);
        let mut b = Vec::with_capacity(len);
        for j in 0..len {
            let p = layout.momentum(a, j);
            let h = if transpose {
                params.heat_transpose(p)
            } else {
                params.heat(p)
            };
            c.push(h - params.mu);
            u.push(params.u(p));
            b.push(coeffs[layout.fine_index(a, j)]);
        }
        let x = solve_rank_one(&c, &u, &b).ok_or_else(|| RgError::Singular {
            momentum: layout.unit_momentum(a).as_array(),
            detail: "resolvent fiber is singular".into(),
        })?;
        for (j, xj) in x.into_iter().enumerate() {
            out[layout.fine_index(a, j)] = xj;
        }
    }
    Ok(idft(rhs.shape, Level::Fine, out))
}

/// `S_n(mu) Q_n* psi`, or the transposed resolvent for the starred field.
pub fn resolvent_qstar(psi: &Field, params: &SymbolParams, transpose: bool) -> RgResult<Field> {
    let q = crate::lattice_ops::fine_average_qn_adjoint(psi, params.profile)?;
    solve_scalar(&q, params, transpose)
}

/// Solves `((u u^T) (x) I + C(p)) x = rhs` for a two-component fine field, where `C`
/// is a per-momentum 2x2 block.
pub fn solve_pair(
    rhs: [&Field; 2],
    params: &SymbolParams,
    block: impl Fn(Momentum) -> Mat2,
) -> RgResult<[Field; 2]> {
    expect_fine(rhs[0])?;
    rhs[0].same_layout(rhs[1])?;
    let shape = rhs[0].shape;
    let layout = FiberLayout::new(&shape);
    let c0 = dft(rhs[0]);
    let c1 = dft(rhs[1]);
    let mut o0 = vec![C64::new(0.0, 0.0); c0.len()];
    let mut o1 = o0.clone();
    let len = layout.fiber_len();
    for a in 0..layout.unit_count() {
        let mut cm = Vec::with_capacity(len);
        let mut u = Vec::with_capacity(len);
        let mut b = Vec::with_capacity(len);
        for j in 0..len {
            let p = layout.momentum(a, j);
            let idx = layout.fine_index(a, j);
            cm.push(block(p));
            u.push(params.u(p));
            b.push([c0[idx], c1[idx]]);
        }
        let x = solve_rank_one_2(&cm, &u, &b).ok_or_else(|| RgError::Singular {
            momentum: layout.unit_momentum(a).as_array(),
            detail: "2x2 fiber system is singular".into(),
        })?;
        for (j, xj) in x.into_iter().enumerate() {
            let idx = layout.fine_index(a, j);
            o0[idx] = xj[0];
            o1[idx] = xj[1];
        }
    }
    Ok([idft(shape, Level::Fine, o0), idft(shape, Level::Fine, o1)])
}

/// Applies `(u u^T) (x) I + C(p)` to a two-component fine field.
pub fn apply_pair(
    x: [&Field; 2],
    params: &SymbolParams,
    block: impl Fn(Momentum) -> Mat2,
) -> RgResult<[Field; 2]> {
    expect_fine(x[0])?;
    x[0].same_layout(x[1])?;
    let shape = x[0].shape;
    let layout = FiberLayout::new(&shape);
    let c0 = dft(x[0]);
    let c1 = dft(x[1]);
    let mut o0 = vec![C64::new(0.0, 0.0); c0.len()];
    let mut o1 = o0.clone();
    for a in 0..layout.unit_count() {
        let len = layout.fiber_len();
        let u: Vec<f64> = (0..len).map(|j| params.u(layout.momentum(a, j))).collect();
        let mut s = [C64::new(0.0, 0.0); 2];
        for j in 0..len {
            let idx = layout.fine_index(a, j);
            s[0] += u[j] * c0[idx];
            s[1] += u[j] * c1[idx];
        }
        for j in 0..len {
            let idx = layout.fine_index(a, j);
            let y = block(layout.momentum(a, j)).apply([c0[idx], c1[idx]]);
            o0[idx] = y[0] + u[j] * s[0];
            o1[idx] = y[1] + u[j] * s[1];
        }
    }
    Ok([idft(shape, Level::Fine, o0), idft(shape, Level::Fine, o1)])
}

/// `box^{-1} (rhs)` for the radial/tangential operator.
pub fn box_solve(rhs: [&Field; 2], params: &SymbolParams) -> RgResult<[Field; 2]> {
    solve_pair(rhs, params, |p| params.box_block(p))
}

pub fn box_apply(x: [&Field; 2], params: &SymbolParams) -> RgResult<[Field; 2]> {
    apply_pair(x, params, |p| params.box_block(p))
}

/// Bilinear unit-lattice pairing `<f, M g>_0` for a translation-invariant `M` given by its symbol.
pub fn pair_with_symbol(
    f: &Field,
    g: &Field,
    symbol: impl Fn(Momentum) -> RgResult<C64>,
) -> RgResult<C64> {
    f.same_layout(g)?;
    if f.level != Level::Unit {
        return Err(RgError::LevelMismatch {
            expected: Level::Unit.to_string(),
            got: f.level.to_string(),
        });
    }
    let dims = f.dims();
    let fh = dft(f);
    let gh = dft(g);
    let layout = FiberLayout::new(&f.shape);
    let mut s = C64::new(0.0, 0.0);
    for i in 0..fh.len() {
        let k = layout.unit_momentum(i);
        s += fh[crate::torus::negated_index(&dims, i)] * symbol(k)? * gh[i];
    }
    Ok(s / fh.len() as f64)
}

/// As [`pair_with_symbol`], with the symbol given as one value per unit DFT index.
pub fn pair_with_table(f: &Field, g: &Field, table: &[C64]) -> RgResult<C64> {
    if table.len() != f.len() {
        return Err(RgError::ShapeMismatch(format!(
            "symbol table has {} entries for {} sites",
            table.len(),
            f.len()
        )));
    }
    f.same_layout(g)?;
    let dims = f.dims();
    let fh = dft(f);
    let gh = dft(g);
    let s: C64 = (0..fh.len())
        .map(|i| fh[crate::torus::negated_index(&dims, i)] * table[i] * gh[i])
        .sum();
    Ok(s / fh.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_ops::{fine_average_qn, fine_average_qn_adjoint, heat_op, heat_op_transpose};
    use crate::symbols::TimeMode;
    use crate::torus::make_shape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(shape: TorusShape, mu: f64) -> SymbolParams {
        SymbolParams {
            shape,
            mu,
            d: 1.3,
            mode: TimeMode::Discrete,
            profile: AveragingProfile::SHARP,
        }
    }

    #[test]
    fn layout_is_a_bijection() {
        let s = make_shape(1, 3, 2, 2).unwrap();
        let l = FiberLayout::new(&s);
        let mut seen = vec![false; s.site_count(Level::Fine)];
        for a in 0..l.unit_count() {
            for b in 0..l.fiber_len() {
                let i = l.fine_index(a, b);
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|x| *x));
    }

    #[test]
    fn scalar_solve_residual_in_direct_space() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let s = make_shape(1, 3, 2, 2).unwrap();
        let p = params(s, 0.2);
        let rhs = Field::random(s, Level::Fine, 1.0, &mut r);
        for transpose in [false, true] {
            let x = solve_scalar(&rhs, &p, transpose).unwrap();
            let qq = fine_average_qn_adjoint(&fine_average_qn(&x, p.profile).unwrap(), p.profile)
                .unwrap();
            let dx = if transpose {
                heat_op_transpose(&x, p.d)
            } else {
                heat_op(&x, p.d)
            };
            let lhs = qq.add(&dx).sub(&x.scale(C64::new(p.mu, 0.0)));
            assert!(lhs.sub(&rhs).sup_norm() < 1e-10);
        }
    }

    #[test]
    fn box_solve_round_trip() {
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let s = make_shape(1, 3, 2, 2).unwrap();
        let p = params(s, 0.4);
        let a = Field::random(s, Level::Fine, 1.0, &mut r);
        let b = Field::random(s, Level::Fine, 1.0, &mut r);
        let x = box_solve([&a, &b], &p).unwrap();
        let y = box_apply([&x[0], &x[1]], &p).unwrap();
        assert!(y[0].sub(&a).sup_norm() < 1e-10);
        assert!(y[1].sub(&b).sup_norm() < 1e-10);
    }
}
