//! Momentum-space symbols of the averaging and heat operators and of the
//! composite operators built from them.
//!
//! At a fixed unit momentum `k` the fine fiber `{k + l : l in B_n}` has `L^(5n)`
//! points. `Q_n* Q_n` acts on it as the rank-one matrix `u u^T` with
//! `u_l = u_n(k + l)`, and the heat operator is diagonal, so every composite
//! reduces to a rank-one (scalar) or rank-two (2x2 block) update of a
//! diagonal. Both are inverted exactly with a pivoted Sherman-Morrison form
//! that stays finite when one diagonal block is singular (e.g. `k = 0`).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{RgError, RgResult};
use crate::lattice_ops::AveragingProfile;
use crate::torus::{Momentum, TorusShape, C64};

/// How the time derivative (and the Laplacian) enter symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeMode {
    /// Forward differences at the fine spacing.
    Discrete,
    /// `d/dt -> i p0` and `-Delta -> |p|^2`.
    Continuum,
}

impl TimeMode {
    pub fn parse(s: &str) -> RgResult<Self> {
        match s {
            "discrete" => Ok(TimeMode::Discrete),
            "continuum" | "continuum-pretend" => Ok(TimeMode::Continuum),
            other => Err(RgError::Config(format!(
                "mode must be discrete or continuum-pretend, got {other}"
            ))),
        }
    }
}

/// `sin(N h p / 2) / (N sin(h p / 2))` for odd `N`, with the removable
/// singularities filled in.
pub fn box_ratio(p: f64, n: usize, h: f64) -> f64 {
    if n == 1 {
        return 1.0;
    }
    let x = 0.5 * h * p;
    let j = (x / PI).round();
    let delta = x - j * PI;
    let nf = n as f64;
    if delta.abs() < 1e-6 {
        1.0 - (nf * nf - 1.0) * delta * delta / 6.0
    } else {
        (nf * delta).sin() / (nf * delta.sin())
    }
}

/// Symbol of `Q_n`: product of box ratios over the four axes, raised to the profile exponent.
pub fn u_n(p: Momentum, shape: &TorusShape, profile: AveragingProfile) -> f64 {
    let f = shape.fine_factors();
    let pa = p.as_array();
    let h = [shape.eps_t, shape.eps_x, shape.eps_x, shape.eps_x];
    let mut u = 1.0;
    for a in 0..4 {
        u *= box_ratio(pa[a], f[a], h[a]);
    }
    u.powi(profile.exponent as i32)
}

/// Symbol of `Q` (unit lattice to coarse sublattice) at a unit-lattice momentum.
pub fn u_block(p: Momentum, l: usize, profile: AveragingProfile) -> f64 {
    let pa = p.as_array();
    let blocks = [l * l, l, l, l];
    let mut u = 1.0;
    for a in 0..4 {
        u *= box_ratio(pa[a], blocks[a], 1.0);
    }
    u.powi(profile.exponent as i32)
}

/// Symbol of the forward time difference.
pub fn dt_symbol(p0: f64, h: f64, mode: TimeMode) -> C64 {
    match mode {
        TimeMode::Discrete => (C64::new(0.0, h * p0).exp() - 1.0) / h,
        TimeMode::Continuum => C64::new(0.0, p0),
    }
}

/// Symbol of the transposed forward time difference.
pub fn dt_transpose_symbol(p0: f64, h: f64, mode: TimeMode) -> C64 {
    match mode {
        TimeMode::Discrete => (C64::new(0.0, -h * p0).exp() - 1.0) / h,
        TimeMode::Continuum => C64::new(0.0, -p0),
    }
}

/// Symbol of `-Delta`.
pub fn neg_laplacian_symbol(p: &[f64; 3], h: f64, mode: TimeMode) -> f64 {
    match mode {
        TimeMode::Discrete => p
            .iter()
            .map(|&x| (2.0 - 2.0 * (h * x).cos()) / (h * h))
            .sum(),
        TimeMode::Continuum => p.iter().map(|x| x * x).sum(),
    }
}

/// Symbol of `D = -d dt - Delta` at fine spacings `(eps_t, eps_x)`.
pub fn heat_symbol(p: Momentum, eps_t: f64, eps_x: f64, d: f64, mode: TimeMode) -> C64 {
    -d * dt_symbol(p.k0, eps_t, mode) + neg_laplacian_symbol(&p.k, eps_x, mode)
}

/// Symbol of the transpose `D^T`.
pub fn heat_transpose_symbol(p: Momentum, eps_t: f64, eps_x: f64, d: f64, mode: TimeMode) -> C64 {
    -d * dt_transpose_symbol(p.k0, eps_t, mode) + neg_laplacian_symbol(&p.k, eps_x, mode)
}

/// Parameter record shared by symbol evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolParams {
    pub shape: TorusShape,
    pub mu: f64,
    pub d: f64,
    pub mode: TimeMode,
    pub profile: AveragingProfile,
}

impl SymbolParams {
    pub fn heat(&self, p: Momentum) -> C64 {
        heat_symbol(p, self.shape.eps_t, self.shape.eps_x, self.d, self.mode)
    }

    pub fn heat_transpose(&self, p: Momentum) -> C64 {
        heat_transpose_symbol(p, self.shape.eps_t, self.shape.eps_x, self.d, self.mode)
    }

    pub fn u(&self, p: Momentum) -> f64 {
        u_n(p, &self.shape, self.profile)
    }

    /// The 2x2 radial/tangential operator symbol without the `Q_n* Q_n` mass.
    ///
    /// Diagonal: `2 mu` (radial only) plus `-Delta` plus the symmetric part of
    /// `-d dt`; off-diagonal: `(i d / 2)(dt^T - dt)` and its negative. In
    /// continuum mode this is `[[2mu + p^2, d p0], [-d p0, p^2]]`.
    pub fn box_block(&self, p: Momentum) -> Mat2 {
        let t = dt_symbol(p.k0, self.shape.eps_t, self.mode);
        let ts = dt_transpose_symbol(p.k0, self.shape.eps_t, self.mode);
        let lap = neg_laplacian_symbol(&p.k, self.shape.eps_x, self.mode);
        let sym = -0.5 * self.d * (t + ts);
        let i_half_d = C64::new(0.0, 0.5 * self.d);
        Mat2::new(
            2.0 * self.mu + lap + sym,
            i_half_d * (ts - t),
            i_half_d * (t - ts),
            lap + sym,
        )
    }
}

/// Calls `f(p)` for every `p = k + l`, `l` in the fiber `B_n`, in block-index order.
pub fn for_each_fiber(shape: &TorusShape, k: Momentum, mut f: impl FnMut(usize, Momentum)) {
    let b = shape.fine_factors();
    let ka = k.as_array();
    let half: Vec<i64> = b.iter().map(|&x| (x as i64 - 1) / 2).collect();
    let mut idx = 0;
    for m0 in -half[0]..=half[0] {
        for m1 in -half[1]..=half[1] {
            for m2 in -half[2]..=half[2] {
                for m3 in -half[3]..=half[3] {
                    let p = Momentum::new(
                        ka[0] + 2.0 * PI * m0 as f64,
                        [
                            ka[1] + 2.0 * PI * m1 as f64,
                            ka[2] + 2.0 * PI * m2 as f64,
                            ka[3] + 2.0 * PI * m3 as f64,
                        ],
                    );
                    f(idx, p);
                    idx += 1;
                }
            }
        }
    }
}

/// Minimal 2x2 complex matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub m: [[C64; 2]; 2],
}

impl Mat2 {
    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2 { m: [[a, b], [c, d]] }
    }

    pub fn zero() -> Self {
        let z = C64::new(0.0, 0.0);
        Mat2::new(z, z, z, z)
    }

    pub fn identity() -> Self {
        let z = C64::new(0.0, 0.0);
        let o = C64::new(1.0, 0.0);
        Mat2::new(o, z, z, o)
    }

    pub fn det(&self) -> C64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inv(&self) -> Option<Mat2> {
        let det = self.det();
        if det.norm() == 0.0 || !det.is_finite() {
            return None;
        }
        let r = 1.0 / det;
        Some(Mat2::new(
            self.m[1][1] * r,
            -self.m[0][1] * r,
            -self.m[1][0] * r,
            self.m[0][0] * r,
        ))
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        let mut r = *self;
        for i in 0..2 {
            for j in 0..2 {
                r.m[i][j] += o.m[i][j];
            }
        }
        r
    }

    pub fn sub(&self, o: &Mat2) -> Mat2 {
        self.add(&o.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Mat2 {
        let mut r = *self;
        for row in r.m.iter_mut() {
            for x in row.iter_mut() {
                *x *= s;
            }
        }
        r
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        let mut r = Mat2::zero();
        for i in 0..2 {
            for j in 0..2 {
                r.m[i][j] = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j];
            }
        }
        r
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.m
            .iter()
            .flat_map(|r| r.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> [C64; 2] {
        let tr = self.m[0][0] + self.m[1][1];
        let disc = (tr * tr - 4.0 * self.det()).sqrt();
        [(tr + disc) * 0.5, (tr - disc) * 0.5]
    }
}

fn pivot_index(c: &[C64]) -> usize {
    let mut j = 0;
    for (i, z) in c.iter().enumerate() {
        if z.norm() < c[j].norm() {
            j = i;
        }
    }
    j
}

/// Solves `(diag(c) + u u^T) x = b` exactly.
///
/// The entry with the smallest `|c_j|` is eliminated through the rank-one
/// row, so a single vanishing `c_j` is allowed as long as `u_j != 0`.
pub fn solve_rank_one(c: &[C64], u: &[f64], b: &[C64]) -> Option<Vec<C64>> {
    let n = c.len();
    let j = pivot_index(c);
    let mut w = C64::new(0.0, 0.0);
    let mut t = C64::new(0.0, 0.0);
    for i in 0..n {
        if i == j {
            continue;
        }
        if c[i].norm() == 0.0 {
            return None;
        }
        w += u[i] * u[i] / c[i];
        t += u[i] * b[i] / c[i];
    }
    let uj = u[j];
    let cj = c[j];
    let den = cj * (1.0 + w) + uj * uj;
    if den.norm() == 0.0 || !den.is_finite() {
        return None;
    }
    let s = (uj * b[j] + cj * t) / den;
    let mut x: Vec<C64> = (0..n)
        .map(|i| if i == j { C64::new(0.0, 0.0) } else { (b[i] - u[i] * s) / c[i] })
        .collect();
    x[j] = if uj.abs() >= cj.norm() {
        (s * (1.0 + w) - t) / uj
    } else {
        (b[j] - uj * s) / cj
    };
    Some(x)
}

/// `1 - u^T (diag(c) + u u^T)^{-1} u`, finite when one `c_j` vanishes.
pub fn one_minus_rank_one_form(c: &[C64], u: &[f64]) -> Option<C64> {
    let j = pivot_index(c);
    let mut w = C64::new(0.0, 0.0);
    for i in 0..c.len() {
        if i == j || u[i] == 0.0 {
            continue;
        }
        if c[i].norm() == 0.0 {
            return None;
        }
        w += u[i] * u[i] / c[i];
    }
    let den = c[j] * (1.0 + w) + u[j] * u[j];
    if den.norm() == 0.0 || !den.is_finite() {
        return None;
    }
    Some(c[j] / den)
}

fn pivot_index2(c: &[Mat2]) -> usize {
    let mut j = 0;
    let mut best = f64::INFINITY;
    for (i, m) in c.iter().enumerate() {
        let d = m.det().norm();
        if d < best {
            best = d;
            j = i;
        }
    }
    j
}

/// Solves `(blockdiag(C_l) + (u u^T) (x) I_2) x = b` exactly with a pivoted Woodbury form.
pub fn solve_rank_one_2(c: &[Mat2], u: &[f64], b: &[[C64; 2]]) -> Option<Vec<[C64; 2]>> {
    let n = c.len();
    let j = pivot_index2(c);
    let mut w = Mat2::zero();
    let mut t = [C64::new(0.0, 0.0); 2];
    let mut cinv: Vec<Option<Mat2>> = vec![None; n];
    for i in 0..n {
        if i == j {
            continue;
        }
        let ci = c[i].inv()?;
        w = w.add(&ci.scale(C64::new(u[i] * u[i], 0.0)));
        let cb = ci.apply(b[i]);
        t[0] += u[i] * cb[0];
        t[1] += u[i] * cb[1];
        cinv[i] = Some(ci);
    }
    let uj = u[j];
    let ipw = Mat2::identity().add(&w);
    let lhs = c[j]
        .mul(&ipw)
        .add(&Mat2::identity().scale(C64::new(uj * uj, 0.0)));
    let ct = c[j].apply(t);
    let rhs = [uj * b[j][0] + ct[0], uj * b[j][1] + ct[1]];
    let s = lhs.inv()?.apply(rhs);
    let mut x = vec![[C64::new(0.0, 0.0); 2]; n];
    for i in 0..n {
        if i == j {
            continue;
        }
        let r = [b[i][0] - u[i] * s[0], b[i][1] - u[i] * s[1]];
        x[i] = cinv[i].unwrap().apply(r);
    }
    let cj_inv = c[j].inv();
    x[j] = match cj_inv {
        Some(ci) if uj.abs() < 1e-3 => ci.apply([b[j][0] - uj * s[0], b[j][1] - uj * s[1]]),
        _ => {
            if uj == 0.0 {
                return None;
            }
            let v = ipw.apply(s);
            [(v[0] - t[0]) / uj, (v[1] - t[1]) / uj]
        }
    };
    Some(x)
}

/// `I - (u^T (x) I)(blockdiag(C) + (u u^T) (x) I)^{-1}(u (x) I)`, finite for one singular block.
pub fn one_minus_rank_one_form_2(c: &[Mat2], u: &[f64]) -> Option<Mat2> {
    let j = pivot_index2(c);
    let mut w = Mat2::zero();
    for i in 0..c.len() {
        if i == j || u[i] == 0.0 {
            continue;
        }
        w = w.add(&c[i].inv()?.scale(C64::new(u[i] * u[i], 0.0)));
    }
    let lhs = c[j]
        .mul(&Mat2::identity().add(&w))
        .add(&Mat2::identity().scale(C64::new(u[j] * u[j], 0.0)));
    Some(lhs.inv()?.mul(&c[j]))
}

fn singular(k: Momentum, detail: &str) -> RgError {
    RgError::Singular {
        momentum: k.as_array(),
        detail: detail.to_string(),
    }
}

/// Fiber data `(c_l, u_l)` for `Q_n* Q_n + D - mu` at unit momentum `k`.
pub fn scalar_fiber(k: Momentum, params: &SymbolParams, transpose: bool) -> (Vec<C64>, Vec<f64>) {
    let len = params.shape.fine_ratio();
    let mut c = Vec::with_capacity(len);
    let mut u = Vec::with_capacity(len);
    for_each_fiber(&params.shape, k, |_, p| {
        let h = if transpose {
            params.heat_transpose(p)
        } else {
            params.heat(p)
        };
        c.push(h - params.mu);
        u.push(params.u(p));
    });
    (c, u)
}

/// Fiber blocks of the radial/tangential operator (without `Q_n* Q_n`).
pub fn box_fiber(k: Momentum, params: &SymbolParams) -> (Vec<Mat2>, Vec<f64>) {
    let len = params.shape.fine_ratio();
    let mut c = Vec::with_capacity(len);
    let mut u = Vec::with_capacity(len);
    for_each_fiber(&params.shape, k, |_, p| {
        c.push(params.box_block(p));
        u.push(params.u(p));
    });
    (c, u)
}

/// Symbol of `1 - Q_n S_n(mu) Q_n*`, `S_n(mu) = (Q_n* Q_n - mu + D_n)^{-1}`.
pub fn symbol_one_minus_qsq(k: Momentum, params: &SymbolParams) -> RgResult<C64> {
    let (c, u) = scalar_fiber(k, params, false);
    one_minus_rank_one_form(&c, &u).ok_or_else(|| singular(k, "resolvent S_n(mu) is singular"))
}

/// Both sides of `Q_n S_n(0) Q_n* = Q_n D^{-1} Q_n* Delta^(n)` at `k != 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaIdentity {
    pub lhs: C64,
    pub rhs: C64,
    pub diff: f64,
}

/// The left side solves the fiber system with `b = u` and pairs with `u`; the
/// right side forms `A = sum u^2 / D_hat` and returns `A (1 + A)^{-1}`.
pub fn check_delta_identity(k: Momentum, params: &SymbolParams) -> RgResult<DeltaIdentity> {
    let p0 = SymbolParams { mu: 0.0, ..*params };
    let (c, u) = scalar_fiber(k, &p0, false);
    if c.iter().any(|z| z.norm() == 0.0) {
        return Err(singular(k, "D_hat vanishes on the fiber (k = 0 excluded)"));
    }
    let b: Vec<C64> = u.iter().map(|&x| C64::new(x, 0.0)).collect();
    let x = solve_rank_one(&c, &u, &b).ok_or_else(|| singular(k, "fiber solve failed"))?;
    let lhs: C64 = u.iter().zip(&x).map(|(a, b)| b * *a).sum();
    let a: C64 = u.iter().zip(&c).map(|(uu, cc)| uu * uu / cc).sum();
    let delta = 1.0 / (1.0 + a);
    let rhs = a * delta;
    Ok(DeltaIdentity {
        lhs,
        rhs,
        diff: (lhs - rhs).norm(),
    })
}

/// 2x2 symbol of `1 - Q_n box^{-1} Q_n*`, equal to `D_tilde(k) = (1 + sum u^2 D_hat^{-1})^{-1}`.
pub fn symbol_one_minus_qsquare(k: Momentum, params: &SymbolParams) -> RgResult<Mat2> {
    let (c, u) = box_fiber(k, params);
    one_minus_rank_one_form_2(&c, &u).ok_or_else(|| singular(k, "box operator block is singular"))
}

/// Residual `max |box x - b|` of a fiber solve of the full `box` at `k` on random `b`.
pub fn box_inverse_residual(k: Momentum, params: &SymbolParams, b: &[[C64; 2]]) -> RgResult<f64> {
    let (c, u) = box_fiber(k, params);
    let x = solve_rank_one_2(&c, &u, b).ok_or_else(|| singular(k, "box fiber solve failed"))?;
    let mut s = [C64::new(0.0, 0.0); 2];
    for (ui, xi) in u.iter().zip(&x) {
        s[0] += *ui * xi[0];
        s[1] += *ui * xi[1];
    }
    let mut worst: f64 = 0.0;
    let scale = b.iter().map(|v| v[0].norm().max(v[1].norm())).fold(0.0, f64::max);
    for i in 0..c.len() {
        let cx = c[i].apply(x[i]);
        for a in 0..2 {
            let r = cx[a] + u[i] * s[a] - b[i][a];
            worst = worst.max(r.norm());
        }
    }
    Ok(worst / scale.max(1e-300))
}

/// Maximum entrywise ratio `|computed| / envelope` for one part of the technical bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRatios {
    pub max_ratio: [[f64; 2]; 2],
    pub samples: usize,
}

impl BoundRatios {
    fn new() -> Self {
        BoundRatios {
            max_ratio: [[0.0; 2]; 2],
            samples: 0,
        }
    }

    fn record(&mut self, computed: &Mat2, envelope: [[f64; 2]; 2]) {
        for i in 0..2 {
            for j in 0..2 {
                let z = computed.m[i][j].norm();
                let e = envelope[i][j];
                let r = if e > 0.0 {
                    z / e
                } else if z <= 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                };
                self.max_ratio[i][j] = self.max_ratio[i][j].max(r);
            }
        }
        self.samples += 1;
    }

    pub fn all_finite(&self) -> bool {
        self.max_ratio.iter().flatten().all(|x| x.is_finite())
    }
}

/// Ratio report for parts (a)-(d) of the momentum-space bounds on `D_hat` and `D_tilde`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEnvelopeReport {
    pub d: f64,
    pub mu: f64,
    pub part_a: BoundRatios,
    pub part_b: BoundRatios,
    pub part_c: BoundRatios,
    pub part_d: BoundRatios,
}

/// Evaluates the four bound families on `grid` (unit momenta `k`) and the
/// fibers over them. Part (a) uses every fiber point with `|p| >= 1`; parts
/// (b) and (d) use `l != 0`.
pub fn verify_bound_envelopes(params: &SymbolParams, grid: &[Momentum]) -> RgResult<BoundEnvelopeReport> {
    let d = params.d;
    let mu = params.mu;
    let mut ra = BoundRatios::new();
    let mut rb = BoundRatios::new();
    let mut rc = BoundRatios::new();
    let mut rd = BoundRatios::new();
    let env_a = [[d.powi(-2), 1.0 / d], [1.0 / d, 1.0]];
    let zero_l = (params.shape.fine_ratio() - 1) / 2;
    for &k in grid {
        let kn = k.norm();
        let dk = params.box_block(k);
        let dt = symbol_one_minus_qsquare(k, params)?;
        let env_b = [
            [mu / (d * d) + kn, kn / d],
            [mu / d + d * kn, kn],
        ];
        let env_c = [
            [mu / (d * d) + kn * kn, kn / d],
            [kn / d, kn * kn],
        ];
        let env_d = [
            [mu / d.powi(4) + kn / (d * d), kn / d.powi(3) + kn * kn / d],
            [mu / d.powi(3) + kn / d, kn / (d * d) + kn * kn],
        ];
        let mut err = None;
        for_each_fiber(&params.shape, k, |idx, p| {
            if err.is_some() {
                return;
            }
            let inv = match params.box_block(p).inv() {
                Some(m) => m,
                None => {
                    if p.norm() >= 1.0 || idx != zero_l {
                        err = Some(singular(p, "D_hat not invertible"));
                    }
                    return;
                }
            };
            if p.norm() >= 1.0 {
                ra.record(&inv, env_a);
            }
            if idx != zero_l {
                rb.record(&inv.mul(&dk), env_b);
                rd.record(&inv.mul(&dt), env_d);
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        rc.record(&dt, env_c);
    }
    Ok(BoundEnvelopeReport {
        d,
        mu,
        part_a: ra,
        part_b: rb,
        part_c: rc,
        part_d: rd,
    })
}

/// Least-squares fit on the basis `{1, i k0, k0^2, |k|^2}` with complex coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallKFit {
    /// Coefficients of `1`, `i k0`, `k0^2`, `|k|^2`.
    pub coeffs: [C64; 4],
    /// Root-mean-square misfit over the samples.
    pub residual: f64,
    pub window: f64,
}

impl SmallKFit {
    pub fn mass(&self) -> C64 {
        self.coeffs[0]
    }

    /// Coefficient of `-i k0`.
    pub fn minus_ik0(&self) -> C64 {
        -self.coeffs[1]
    }

    pub fn k0_sq(&self) -> C64 {
        self.coeffs[2]
    }

    pub fn k_sq(&self) -> C64 {
        self.coeffs[3]
    }
}

/// Sample momenta for fits: a `5^4` product grid on `[-w, w]^4`.
pub fn fit_grid(window: f64) -> Vec<Momentum> {
    let pts: Vec<f64> = (0..5).map(|i| window * (i as f64 - 2.0) / 2.0).collect();
    let mut out = Vec::with_capacity(625);
    for &a in &pts {
        for &b in &pts {
            for &c in &pts {
                for &e in &pts {
                    out.push(Momentum::new(a, [b, c, e]));
                }
            }
        }
    }
    out
}

/// Fits samples `(k, s(k))`.
pub fn small_k_fit(samples: &[(Momentum, C64)], window: f64) -> RgResult<SmallKFit> {
    if samples.len() < 4 {
        return Err(RgError::Numerical(format!(
            "small-k fit needs at least 4 samples, got {}",
            samples.len()
        )));
    }
    let m = samples.len();
    let a = DMatrix::<C64>::from_fn(m, 4, |i, j| {
        let k = samples[i].0;
        match j {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, k.k0),
            2 => C64::new(k.k0 * k.k0, 0.0),
            _ => C64::new(k.spatial_sq(), 0.0),
        }
    });
    let b = DVector::<C64>::from_fn(m, |i, _| samples[i].1);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-12 * smax {
        return Err(RgError::Numerical("rank-deficient small-k fit".into()));
    }
    let x = svd
        .solve(&b, 1e-14 * smax)
        .map_err(|e| RgError::Numerical(e.to_string()))?;
    let r = &a * &x - &b;
    let residual = (r.iter().map(|z| z.norm_sqr()).sum::<f64>() / m as f64).sqrt();
    Ok(SmallKFit {
        coeffs: [x[0], x[1], x[2], x[3]],
        residual,
        window,
    })
}

/// Samples a scalar symbol on [`fit_grid`] and fits it.
pub fn fit_symbol(
    window: f64,
    mut f: impl FnMut(Momentum) -> RgResult<C64>,
) -> RgResult<SmallKFit> {
    let mut samples = Vec::new();
    for k in fit_grid(window) {
        samples.push((k, f(k)?));
    }
    small_k_fit(&samples, window)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Parabolic,
    Elliptic,
    Transitional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    /// Required factor by which the dominant term must beat the competitor at the window scale.
    pub dominance: f64,
    /// Mass coefficient below which a fit counts as massless.
    pub mass_tol: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        RegimeThresholds {
            dominance: 3.0,
            mass_tol: 0.05,
        }
    }
}

/// Parabolic when the first-order `i k0` term beats `k0^2` at the window scale and
/// the mass vanishes; elliptic when `k0^2` beats `i k0` and `|k|^2` is present.
pub fn classify_regime(fit: &SmallKFit, th: &RegimeThresholds) -> Regime {
    let w = fit.window;
    let lin = fit.coeffs[1].norm() * w;
    let quad0 = fit.coeffs[2].norm() * w * w;
    let quadk = fit.coeffs[3].norm() * w * w;
    if lin >= th.dominance * quad0 && fit.mass().norm() <= th.mass_tol && lin > 0.0 {
        Regime::Parabolic
    } else if quad0 >= th.dominance * lin && quadk > 0.0 {
        Regime::Elliptic
    } else {
        Regime::Transitional
    }
}

/// The small-modulus eigenvalue branch of the 2x2 symbol, tie broken toward
/// the `-i k0` side. Parabolic: `-i k0 + k0^2 + |k|^2`; elliptic: the tangential entry.
pub fn soft_eigenvalue(k: Momentum, params: &SymbolParams) -> RgResult<C64> {
    let m = symbol_one_minus_qsquare(k, params)?;
    let [a, b] = m.eigenvalues();
    let tie = (a.norm() - b.norm()).abs() <= 1e-9 * (a.norm() + b.norm());
    let pick = if tie {
        if a.im * k.k0 <= 0.0 {
            a
        } else {
            b
        }
    } else if a.norm() < b.norm() {
        a
    } else {
        b
    };
    Ok(pick)
}
