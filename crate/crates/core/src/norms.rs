//! Tree-weighted kernel norms.
//!
//! The weight of a kernel entry is `exp(m tau)` where `tau` is the length of a
//! minimal Steiner tree joining the entry's sites in the torus lattice graph
//! (unit edges, periodic). `tau` is computed exactly by Dreyfus-Wagner.

use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use crate::error::{RgError, RgResult};
use crate::torus::{coords, linear_index, C64};

pub type Site = [usize; 4];

/// Sparse multi-argument kernel on a torus with extents `dims`.
///
/// With `translation_invariant` set, each entry stands for its whole orbit
/// under lattice translations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub arity: usize,
    pub dims: [usize; 4],
    pub translation_invariant: bool,
    pub entries: Vec<(Vec<Site>, C64)>,
}

impl Kernel {
    /// Ingests entries, reducing sites mod the torus and symmetrizing over
    /// argument permutations. Translation-invariant kernels are stored with
    /// the first argument moved to the origin.
    pub fn new(
        arity: usize,
        dims: [usize; 4],
        entries: Vec<(Vec<Site>, C64)>,
        translation_invariant: bool,
    ) -> RgResult<Self> {
        if arity == 0 {
            return Err(RgError::Config("kernel arity must be positive".into()));
        }
        let perms = permutations(arity);
        let total = perms.len() as f64;
        let mut acc: BTreeMap<Vec<Site>, C64> = BTreeMap::new();
        for (sites, v) in entries {
            if sites.len() != arity {
                return Err(RgError::Config(format!(
                    "entry has {} sites, kernel arity is {arity}",
                    sites.len()
                )));
            }
            for s in &sites {
                for a in 0..4 {
                    if s[a] >= dims[a] {
                        return Err(RgError::Config(format!(
                            "site {s:?} outside torus {dims:?}"
                        )));
                    }
                }
            }
            // Weight distinct images by multiplicity so a fully symmetric entry keeps its value.
            let mut images: BTreeMap<Vec<Site>, usize> = BTreeMap::new();
            for p in &perms {
                let mut t: Vec<Site> = p.iter().map(|&i| sites[i]).collect();
                if translation_invariant {
                    t = translate_to_origin(&t, dims);
                }
                *images.entry(t).or_insert(0) += 1;
            }
            for (t, count) in images {
                *acc.entry(t).or_insert(C64::new(0.0, 0.0)) += v * (count as f64 / total);
            }
        }
        Ok(Kernel {
            arity,
            dims,
            translation_invariant,
            entries: acc.into_iter().filter(|(_, v)| v.norm() > 0.0).collect(),
        })
    }

    /// Translation-invariant on-diagonal kernel `value * delta(x_1 = ... = x_arity)`.
    pub fn local(arity: usize, dims: [usize; 4], value: C64) -> Self {
        Kernel {
            arity,
            dims,
            translation_invariant: true,
            entries: vec![(vec![[0; 4]; arity], value)],
        }
    }

    /// Stored value for a site tuple (zero if absent).
    pub fn get(&self, sites: &[Site]) -> C64 {
        let key: Vec<Site> = if self.translation_invariant {
            translate_to_origin(sites, self.dims)
        } else {
            sites.to_vec()
        };
        self.entries
            .iter()
            .find(|(s, _)| *s == key)
            .map(|(_, v)| *v)
            .unwrap_or(C64::new(0.0, 0.0))
    }

    /// Parses the sparse text format: per line `arity` site 4-tuples, then re and im.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse_text(
        text: &str,
        arity: usize,
        dims: [usize; 4],
        translation_invariant: bool,
    ) -> RgResult<Self> {
        let mut entries = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 4 * arity + 2 {
                return Err(RgError::Config(format!(
                    "kernel line {}: expected {} numbers, got {}",
                    ln + 1,
                    4 * arity + 2,
                    toks.len()
                )));
            }
            let mut sites = Vec::with_capacity(arity);
            for j in 0..arity {
                let mut s = [0usize; 4];
                for a in 0..4 {
                    s[a] = toks[4 * j + a].parse().map_err(|_| {
                        RgError::Config(format!("kernel line {}: bad site index", ln + 1))
                    })?;
                }
                sites.push(s);
            }
            let re: f64 = toks[4 * arity].parse().map_err(|_| {
                RgError::Config(format!("kernel line {}: bad real part", ln + 1))
            })?;
            let im: f64 = toks[4 * arity + 1].parse().map_err(|_| {
                RgError::Config(format!("kernel line {}: bad imaginary part", ln + 1))
            })?;
            entries.push((sites, C64::new(re, im)));
        }
        Kernel::new(arity, dims, entries, translation_invariant)
    }
}

fn translate_to_origin(sites: &[Site], dims: [usize; 4]) -> Vec<Site> {
    let o = sites[0];
    sites
        .iter()
        .map(|s| {
            let mut t = [0usize; 4];
            for a in 0..4 {
                t[a] = (s[a] + dims[a] - o[a]) % dims[a];
            }
            t
        })
        .collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Wrapped L1 distance on the torus graph.
pub fn torus_distance(a: Site, b: Site, dims: [usize; 4]) -> usize {
    (0..4)
        .map(|i| {
            let d = a[i].abs_diff(b[i]);
            d.min(dims[i] - d)
        })
        .sum()
}

fn neighbors(dims: &[usize; 4], v: usize, out: &mut Vec<usize>) {
    out.clear();
    let c = coords(dims, v);
    for a in 0..4 {
        if dims[a] == 1 {
            continue;
        }
        let mut up = c;
        up[a] = (c[a] + 1) % dims[a];
        out.push(linear_index(dims, up));
        if dims[a] > 2 {
            let mut dn = c;
            dn[a] = (c[a] + dims[a] - 1) % dims[a];
            out.push(linear_index(dims, dn));
        }
    }
}

/// Exact Steiner-tree length joining `points` in the torus graph (Dreyfus-Wagner).
pub fn tree_length(points: &[Site], dims: [usize; 4]) -> RgResult<usize> {
    let mut terms: Vec<Site> = Vec::new();
    for p in points {
        if !terms.contains(p) {
            terms.push(*p);
        }
    }
    let k = terms.len();
    if k > 6 {
        return Err(RgError::TooManyTerminals(k));
    }
    if k <= 1 {
        return Ok(0);
    }
    if k == 2 {
        return Ok(torus_distance(terms[0], terms[1], dims));
    }
    let nv: usize = dims.iter().product();
    let full = (1usize << k) - 1;
    let inf = usize::MAX / 4;
    // dp[mask][v]: minimal tree spanning terminals in mask plus vertex v.
    let mut dp = vec![vec![inf; nv]; full + 1];
    for (i, t) in terms.iter().enumerate() {
        let ti = linear_index(&dims, *t);
        for v in 0..nv {
            dp[1 << i][v] = torus_distance(*t, coords(&dims, v), dims);
        }
        debug_assert_eq!(dp[1 << i][ti], 0);
    }
    let mut nb = Vec::with_capacity(8);
    for mask in 1..=full {
        if mask.count_ones() < 2 {
            continue;
        }
        // Merge step over proper submasks.
        let mut cur = vec![inf; nv];
        let mut sub = (mask - 1) & mask;
        while sub > 0 {
            let other = mask ^ sub;
            if sub < other {
                for v in 0..nv {
                    let c = dp[sub][v] + dp[other][v];
                    if c < cur[v] {
                        cur[v] = c;
                    }
                }
            }
            sub = (sub - 1) & mask;
        }
        // Relaxation by Dijkstra (unit edges).
        let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
            cur.iter().enumerate().map(|(v, &c)| Reverse((c, v))).collect();
        while let Some(Reverse((c, v))) = heap.pop() {
            if c > cur[v] {
                continue;
            }
            neighbors(&dims, v, &mut nb);
            for &w in &nb {
                if c + 1 < cur[w] {
                    cur[w] = c + 1;
                    heap.push(Reverse((c + 1, w)));
                }
            }
        }
        dp[mask] = cur;
    }
    Ok(*dp[full].iter().min().unwrap())
}

/// Minimum-spanning-tree length over the terminals: a fast upper bound on `tau`.
pub fn tree_length_mst_bound(points: &[Site], dims: [usize; 4]) -> usize {
    let k = points.len();
    if k <= 1 {
        return 0;
    }
    let mut in_tree = vec![false; k];
    let mut best = vec![usize::MAX; k];
    best[0] = 0;
    let mut total = 0;
    for _ in 0..k {
        let (i, _) = (0..k)
            .filter(|&i| !in_tree[i])
            .map(|i| (i, best[i]))
            .min_by_key(|x| x.1)
            .unwrap();
        in_tree[i] = true;
        total += best[i];
        for j in 0..k {
            if !in_tree[j] {
                best[j] = best[j].min(torus_distance(points[i], points[j], dims));
            }
        }
    }
    total
}

/// Which tree length to use when weighting kernel entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeMetric {
    Steiner,
    MstUpperBound,
}

fn entry_tau(sites: &[Site], dims: [usize; 4], metric: TreeMetric) -> RgResult<usize> {
    match metric {
        TreeMetric::Steiner => tree_length(sites, dims),
        TreeMetric::MstUpperBound => Ok(tree_length_mst_bound(sites, dims)),
    }
}

/// `max_j sup_{x_j} sum_{x_k, k != j} |V| exp(m tau)`.
pub fn kernel_norm(v: &Kernel, m: f64) -> RgResult<f64> {
    kernel_norm_with(v, m, TreeMetric::Steiner)
}

pub fn kernel_norm_with(v: &Kernel, m: f64, metric: TreeMetric) -> RgResult<f64> {
    if m < 0.0 {
        return Err(RgError::Config(format!("decay rate m must be >= 0, got {m}")));
    }
    let mut taus = Vec::with_capacity(v.entries.len());
    for (sites, _) in &v.entries {
        taus.push(entry_tau(sites, v.dims, metric)?);
    }
    if v.translation_invariant {
        // Every entry contributes once to the sum at any pinned position of any argument.
        let s: f64 = v
            .entries
            .iter()
            .zip(&taus)
            .map(|((_, z), &t)| z.norm() * (m * t as f64).exp())
            .sum();
        return Ok(s);
    }
    let mut best: f64 = 0.0;
    for j in 0..v.arity {
        let mut sums: HashMap<Site, f64> = HashMap::new();
        for ((sites, z), &t) in v.entries.iter().zip(&taus) {
            *sums.entry(sites[j]).or_insert(0.0) += z.norm() * (m * t as f64).exp();
        }
        for s in sums.values() {
            best = best.max(*s);
        }
    }
    Ok(best)
}

/// `v_0 = 2 ||V||_{2m}`.
pub fn coupling_constant(v: &Kernel, m: f64) -> RgResult<f64> {
    Ok(2.0 * kernel_norm(v, 2.0 * m)?)
}

/// One `(r, s)` term of a field power series with its kernel norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesTerm {
    pub r: u32,
    pub s: u32,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesNorm {
    pub terms: Vec<SeriesTerm>,
    pub kappa: f64,
    pub kappa_prime: f64,
    pub total: f64,
}

/// `sum ||p_rs||_m kappa^r kappa'^s`; constant `(0, 0)` terms are rejected.
pub fn series_norm(terms: &[SeriesTerm], kappa: f64, kappa_prime: f64) -> RgResult<SeriesNorm> {
    let mut total = 0.0;
    for t in terms {
        if t.r == 0 && t.s == 0 {
            return Err(RgError::Config(
                "series has a constant (r, s) = (0, 0) term".into(),
            ));
        }
        total += t.norm * kappa.powi(t.r as i32) * kappa_prime.powi(t.s as i32);
    }
    Ok(SeriesNorm {
        terms: terms.to_vec(),
        kappa,
        kappa_prime,
        total,
    })
}
