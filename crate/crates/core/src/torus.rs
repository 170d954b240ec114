//! Lattice geometry, dense field storage, bilinear inner products and dual lattices.
//!
//! Three levels share one [`TorusShape`]: the unit torus (spacing 1), its fine
//! companion at scale `n` (spacing `L^-2n` in time and `L^-n` in space) and the
//! coarse sublattice of block centers (spacing `L^2`, `L`).

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{RgError, RgResult};

pub type C64 = Complex64;

/// Which lattice a field lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    Unit,
    Fine,
    Coarse,
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Level::Unit => "unit",
            Level::Fine => "fine",
            Level::Coarse => "coarse",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusShape {
    pub n: u32,
    pub l: usize,
    pub nt: usize,
    pub nx: usize,
    pub eps_t: f64,
    pub eps_x: f64,
}

/// Validated constructor.
pub fn make_shape(n: u32, l: usize, nt: usize, nx: usize) -> RgResult<TorusShape> {
    if l < 3 || l % 2 == 0 {
        return Err(RgError::Config(format!(
            "block factor L must be odd and >= 3, got {l}"
        )));
    }
    if nt == 0 || nx == 0 {
        return Err(RgError::Config(format!(
            "torus extents must be positive, got Nt={nt}, Nx={nx}"
        )));
    }
    let lf = l as f64;
    Ok(TorusShape {
        n,
        l,
        nt,
        nx,
        eps_t: lf.powi(-2 * n as i32),
        eps_x: lf.powi(-(n as i32)),
    })
}

impl TorusShape {
    /// Fine points per unit site along time and along each spatial axis.
    pub fn fine_factors(&self) -> [usize; 4] {
        let s = self.l.pow(self.n);
        [s * s, s, s, s]
    }

    /// `L^(5n)`, the size of the fine fiber over a unit momentum.
    pub fn fine_ratio(&self) -> usize {
        self.l.pow(5 * self.n)
    }

    pub fn block_divisible(&self) -> bool {
        self.nt % (self.l * self.l) == 0 && self.nx % self.l == 0
    }

    pub fn require_block_divisible(&self) -> RgResult<()> {
        if self.block_divisible() {
            Ok(())
        } else {
            Err(RgError::Config(format!(
                "block-spin step needs L^2 | Nt and L | Nx (L={}, Nt={}, Nx={})",
                self.l, self.nt, self.nx
            )))
        }
    }

    pub fn extents(&self, level: Level) -> [usize; 4] {
        match level {
            Level::Unit => [self.nt, self.nx, self.nx, self.nx],
            Level::Fine => {
                let f = self.fine_factors();
                [self.nt * f[0], self.nx * f[1], self.nx * f[2], self.nx * f[3]]
            }
            Level::Coarse => [
                self.nt / (self.l * self.l),
                self.nx / self.l,
                self.nx / self.l,
                self.nx / self.l,
            ],
        }
    }

    pub fn spacing(&self, level: Level) -> [f64; 4] {
        match level {
            Level::Unit => [1.0; 4],
            Level::Fine => [self.eps_t, self.eps_x, self.eps_x, self.eps_x],
            Level::Coarse => {
                let l = self.l as f64;
                [l * l, l, l, l]
            }
        }
    }

    /// Inner-product weight per site: 1, `L^-5n` or `L^5`.
    pub fn weight(&self, level: Level) -> f64 {
        let l = self.l as f64;
        match level {
            Level::Unit => 1.0,
            Level::Fine => l.powi(-5 * self.n as i32),
            Level::Coarse => l.powi(5),
        }
    }

    pub fn site_count(&self, level: Level) -> usize {
        self.extents(level).iter().product()
    }

    /// Unit torus one block-spin step up: extents divided by `(L^2, L)`, scale `n+1`.
    pub fn child(&self) -> RgResult<TorusShape> {
        self.require_block_divisible()?;
        make_shape(self.n + 1, self.l, self.nt / (self.l * self.l), self.nx / self.l)
    }

    /// Inverse of [`TorusShape::child`]; requires `n >= 1`.
    pub fn parent(&self) -> RgResult<TorusShape> {
        if self.n == 0 {
            return Err(RgError::Config("scale n=0 has no parent torus".into()));
        }
        make_shape(self.n - 1, self.l, self.nt * self.l * self.l, self.nx * self.l)
    }
}

/// Row-major linear index for extents `dims`.
#[inline]
pub fn linear_index(dims: &[usize; 4], c: [usize; 4]) -> usize {
    ((c[0] * dims[1] + c[1]) * dims[2] + c[2]) * dims[3] + c[3]
}

#[inline]
pub fn coords(dims: &[usize; 4], mut i: usize) -> [usize; 4] {
    let z = i % dims[3];
    i /= dims[3];
    let y = i % dims[2];
    i /= dims[2];
    let x = i % dims[1];
    i /= dims[1];
    [i, x, y, z]
}

/// Periodic index shifted by integer offsets.
#[inline]
pub fn shifted_index(dims: &[usize; 4], c: [usize; 4], off: [i64; 4]) -> usize {
    let mut s = [0usize; 4];
    for a in 0..4 {
        s[a] = (c[a] as i64 + off[a]).rem_euclid(dims[a] as i64) as usize;
    }
    linear_index(dims, s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub shape: TorusShape,
    pub level: Level,
    pub values: Vec<C64>,
}

impl Field {
    pub fn zeros(shape: TorusShape, level: Level) -> Self {
        Field {
            shape,
            level,
            values: vec![C64::new(0.0, 0.0); shape.site_count(level)],
        }
    }

    pub fn constant(shape: TorusShape, level: Level, c: C64) -> Self {
        Field {
            shape,
            level,
            values: vec![c; shape.site_count(level)],
        }
    }

    pub fn from_values(shape: TorusShape, level: Level, values: Vec<C64>) -> RgResult<Self> {
        if values.len() != shape.site_count(level) {
            return Err(RgError::ShapeMismatch(format!(
                "{} values for a {} lattice of {} sites",
                values.len(),
                level,
                shape.site_count(level)
            )));
        }
        Ok(Field {
            shape,
            level,
            values,
        })
    }

    /// Builds a field from a function of the integer site coordinates.
    pub fn from_fn(shape: TorusShape, level: Level, f: impl Fn([usize; 4]) -> C64) -> Self {
        let dims = shape.extents(level);
        let values = (0..shape.site_count(level))
            .map(|i| f(coords(&dims, i)))
            .collect();
        Field {
            shape,
            level,
            values,
        }
    }

    /// Independent uniform real and imaginary parts in `[-amp, amp]`.
    pub fn random(shape: TorusShape, level: Level, amp: f64, rng: &mut impl Rng) -> Self {
        let values = (0..shape.site_count(level))
            .map(|_| C64::new(rng.gen_range(-amp..=amp), rng.gen_range(-amp..=amp)))
            .collect();
        Field {
            shape,
            level,
            values,
        }
    }

    /// Plane wave `exp(i p . x)` in physical coordinates of the field's level.
    pub fn plane_wave(shape: TorusShape, level: Level, p: Momentum) -> Self {
        let h = shape.spacing(level);
        let pa = p.as_array();
        Field::from_fn(shape, level, |c| {
            let phase: f64 = (0..4).map(|a| pa[a] * h[a] * c[a] as f64).sum();
            C64::from_polar(1.0, phase)
        })
    }

    pub fn dims(&self) -> [usize; 4] {
        self.shape.extents(self.level)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_layout(&self, other: &Field) -> RgResult<()> {
        if self.level != other.level {
            return Err(RgError::LevelMismatch {
                expected: self.level.to_string(),
                got: other.level.to_string(),
            });
        }
        if self.shape != other.shape {
            return Err(RgError::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Field {
        Field {
            shape: self.shape,
            level: self.level,
            values: self.values.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(C64, C64) -> C64) -> Field {
        debug_assert_eq!(self.values.len(), other.values.len());
        Field {
            shape: self.shape,
            level: self.level,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: C64) -> Field {
        self.map(|z| z * s)
    }

    pub fn conj(&self) -> Field {
        self.map(|z| z.conj())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Shift by integer site offsets: `(T f)(x) = f(x + off)`.
    pub fn translate(&self, off: [i64; 4]) -> Field {
        let dims = self.dims();
        let values = (0..self.len())
            .map(|i| self.values[shifted_index(&dims, coords(&dims, i), off)])
            .collect();
        Field {
            shape: self.shape,
            level: self.level,
            values,
        }
    }
}

/// Independent pair `(psi_*, psi)`; `starred` is not the complex conjugate of `plain` in general.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPair {
    pub starred: Field,
    pub plain: Field,
}

impl FieldPair {
    pub fn new(starred: Field, plain: Field) -> RgResult<Self> {
        starred.same_layout(&plain)?;
        Ok(FieldPair { starred, plain })
    }

    pub fn zeros(shape: TorusShape, level: Level) -> Self {
        FieldPair {
            starred: Field::zeros(shape, level),
            plain: Field::zeros(shape, level),
        }
    }

    pub fn scale(&self, s: f64) -> FieldPair {
        FieldPair {
            starred: self.starred.scale(C64::new(s, 0.0)),
            plain: self.plain.scale(C64::new(s, 0.0)),
        }
    }
}

/// Physical momentum (radians per unit length).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Momentum {
    pub k0: f64,
    pub k: [f64; 3],
}

impl Momentum {
    pub fn new(k0: f64, k: [f64; 3]) -> Self {
        Momentum { k0, k }
    }

    pub fn zero() -> Self {
        Momentum {
            k0: 0.0,
            k: [0.0; 3],
        }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Momentum {
            k0: a[0],
            k: [a[1], a[2], a[3]],
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.k0, self.k[0], self.k[1], self.k[2]]
    }

    pub fn spatial_sq(&self) -> f64 {
        self.k.iter().map(|x| x * x).sum()
    }

    /// Euclidean length of all four components.
    pub fn norm(&self) -> f64 {
        (self.k0 * self.k0 + self.spatial_sq()).sqrt()
    }

    pub fn add(&self, o: &Momentum) -> Momentum {
        Momentum {
            k0: self.k0 + o.k0,
            k: [self.k[0] + o.k[0], self.k[1] + o.k[1], self.k[2] + o.k[2]],
        }
    }

    pub fn neg(&self) -> Momentum {
        Momentum {
            k0: -self.k0,
            k: [-self.k[0], -self.k[1], -self.k[2]],
        }
    }
}

/// Symmetric representative of mode `j` modulo `n`, in `(-n/2, n/2]`.
#[inline]
pub fn symmetric_mode(j: usize, n: usize) -> i64 {
    let j = j as i64;
    let n = n as i64;
    if 2 * j > n {
        j - n
    } else {
        j
    }
}

/// Integer mode numbers of a DFT index on the given level.
pub fn mode_of_index(shape: &TorusShape, level: Level, i: usize) -> [i64; 4] {
    let dims = shape.extents(level);
    let c = coords(&dims, i);
    let mut m = [0i64; 4];
    for a in 0..4 {
        m[a] = symmetric_mode(c[a], dims[a]);
    }
    m
}

/// Momentum for integer mode numbers: `2 pi m / (extent * spacing)` per axis.
pub fn momentum_of_mode(shape: &TorusShape, level: Level, m: [i64; 4]) -> Momentum {
    let dims = shape.extents(level);
    let h = shape.spacing(level);
    let mut p = [0.0; 4];
    for a in 0..4 {
        p[a] = 2.0 * PI * m[a] as f64 / (dims[a] as f64 * h[a]);
    }
    Momentum::from_array(p)
}

/// One momentum per site, in the same order as the DFT output of [`dft`].
pub fn dual_lattice(shape: &TorusShape, level: Level) -> Vec<Momentum> {
    (0..shape.site_count(level))
        .map(|i| momentum_of_mode(shape, level, mode_of_index(shape, level, i)))
        .collect()
}

/// Weighted bilinear pairing (no conjugation).
pub fn inner_product(a: &Field, b: &Field) -> RgResult<C64> {
    a.same_layout(b)?;
    let w = a.shape.weight(a.level);
    let s: C64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(s * w)
}

/// Unnormalized 4-d DFT in place; `inverse` selects the positive exponent.
pub fn fft4(values: &mut [C64], dims: [usize; 4], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let total: usize = dims.iter().product();
    assert_eq!(values.len(), total);
    let mut line = Vec::new();
    for axis in 0..4 {
        let len = dims[axis];
        if len == 1 {
            continue;
        }
        let fft = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        let stride: usize = dims[axis + 1..].iter().product();
        let outer = total / (len * stride);
        line.resize(len, C64::new(0.0, 0.0));
        for o in 0..outer {
            for s in 0..stride {
                let base = o * len * stride + s;
                for j in 0..len {
                    line[j] = values[base + j * stride];
                }
                fft.process(&mut line);
                for j in 0..len {
                    values[base + j * stride] = line[j];
                }
            }
        }
    }
}

/// Unnormalized forward DFT `f_hat(j) = sum_x exp(-2 pi i j.x / N) f(x)`.
pub fn dft(f: &Field) -> Vec<C64> {
    let mut v = f.values.clone();
    fft4(&mut v, f.dims(), false);
    v
}

/// Inverse of [`dft`] (includes the `1/N`).
pub fn idft(shape: TorusShape, level: Level, mut coeffs: Vec<C64>) -> Field {
    let dims = shape.extents(level);
    fft4(&mut coeffs, dims, true);
    let inv = 1.0 / coeffs.len() as f64;
    for z in coeffs.iter_mut() {
        *z *= inv;
    }
    Field {
        shape,
        level,
        values: coeffs,
    }
}

/// Index of the negated mode.
pub fn negated_index(dims: &[usize; 4], i: usize) -> usize {
    let c = coords(dims, i);
    let mut n = [0usize; 4];
    for a in 0..4 {
        n[a] = (dims[a] - c[a]) % dims[a];
    }
    linear_index(dims, n)
}

/// Same pairing as [`inner_product`], computed from DFT coefficients.
pub fn inner_product_spectral(a: &Field, b: &Field) -> RgResult<C64> {
    a.same_layout(b)?;
    let dims = a.dims();
    let ah = dft(a);
    let bh = dft(b);
    let n = ah.len() as f64;
    let s: C64 = (0..ah.len())
        .map(|i| ah[negated_index(&dims, i)] * bh[i])
        .sum();
    Ok(s * (a.shape.weight(a.level) / n))
}
