//! Structural invariants checked on random inputs.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use parabolic_rg::background::{solve_nonlinear, ModelParams, NewtonOptions};
use parabolic_rg::flow::{kernel_symbol, localize_quadratic, OffsetKernel};
use parabolic_rg::lattice_ops::{
    block_average_q, block_average_q_adjoint, fine_average_qn, fine_average_qn_adjoint,
    forward_diff, heat_op, heat_op_transpose, AveragingProfile,
};
use parabolic_rg::norms::{kernel_norm, torus_distance, tree_length, tree_length_mst_bound, Kernel, Site};
use parabolic_rg::symbols::{symbol_one_minus_qsq, SymbolParams, TimeMode};
use parabolic_rg::torus::{
    inner_product, inner_product_spectral, linear_index, make_shape, Field, FieldPair,
    Level, Momentum, TorusShape, C64,
};

const SHARP: AveragingProfile = AveragingProfile::SHARP;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

fn small_shape() -> impl Strategy<Value = TorusShape> {
    (0u32..=1, 1usize..=2, 1usize..=2).prop_map(|(n, nt, nx)| make_shape(n, 3, nt, nx).unwrap())
}

/// Time reflection `t -> -t` on any level.
fn reflect_time(f: &Field) -> Field {
    let dims = f.dims();
    Field::from_fn(f.shape, f.level, |c| {
        let t = (dims[0] - c[0]) % dims[0];
        f.values[linear_index(&dims, [t, c[1], c[2], c[3]])]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval(shape in small_shape(), seed in any::<u64>()) {
        let mut r = rng(seed);
        for level in [Level::Unit, Level::Fine] {
            let a = Field::random(shape, level, 1.0, &mut r);
            let b = Field::random(shape, level, 1.0, &mut r);
            let direct = inner_product(&a, &b).unwrap();
            let spectral = inner_product_spectral(&a, &b).unwrap();
            prop_assert!(close(direct, spectral, 1e-12));
        }
    }

    #[test]
    fn averaging_adjoints(shape in small_shape(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = Field::random(shape, Level::Fine, 1.0, &mut r);
        let g = Field::random(shape, Level::Unit, 1.0, &mut r);
        let lhs = inner_product(&fine_average_qn(&f, SHARP).unwrap(), &g).unwrap();
        let rhs = inner_product(&f, &fine_average_qn_adjoint(&g, SHARP).unwrap()).unwrap();
        prop_assert!(close(lhs, rhs, 1e-12));

        let big = make_shape(shape.n, 3, 9, 3).unwrap();
        let u = Field::random(big, Level::Unit, 1.0, &mut r);
        let th = Field::random(big, Level::Coarse, 1.0, &mut r);
        let lhs = inner_product(&block_average_q(&u, SHARP).unwrap(), &th).unwrap();
        let rhs = inner_product(&u, &block_average_q_adjoint(&th, SHARP).unwrap()).unwrap();
        prop_assert!(close(lhs, rhs, 1e-12));
    }

    #[test]
    fn heat_transpose_is_bilinear_adjoint(shape in small_shape(), seed in any::<u64>(), d in 1.0f64..20.0) {
        let mut r = rng(seed);
        let f = Field::random(shape, Level::Fine, 1.0, &mut r);
        let g = Field::random(shape, Level::Fine, 1.0, &mut r);
        let lhs = inner_product(&g, &heat_op(&f, d)).unwrap();
        let rhs = inner_product(&heat_op_transpose(&g, d), &f).unwrap();
        prop_assert!(close(lhs, rhs, 1e-11));
    }

    #[test]
    fn averaging_commutes_with_unit_translations(seed in any::<u64>(), t in 0i64..2, x in 0i64..2) {
        let shape = make_shape(1, 3, 2, 2).unwrap();
        let f = Field::random(shape, Level::Fine, 1.0, &mut rng(seed));
        let ff = shape.fine_factors();
        let fine_off = [t * ff[0] as i64, x * ff[1] as i64, 0, 0];
        let a = fine_average_qn(&f.translate(fine_off), SHARP).unwrap();
        let b = fine_average_qn(&f, SHARP).unwrap().translate([t, x, 0, 0]);
        prop_assert!(a.sub(&b).sup_norm() < 1e-13);
    }

    #[test]
    fn qsq_symbol_is_real_operator(k0 in -3.1f64..3.1, k1 in -3.1f64..3.1, mu in 0.01f64..0.5, d in 1.0f64..4.0) {
        let sp = SymbolParams { shape: make_shape(1, 3, 1, 1).unwrap(), mu, d, mode: TimeMode::Discrete, profile: SHARP };
        let k = Momentum::new(k0, [k1, 0.3, -0.2]);
        let a = symbol_one_minus_qsq(k, &sp).unwrap();
        let b = symbol_one_minus_qsq(k.neg(), &sp).unwrap();
        prop_assert!(close(a, b.conj(), 1e-11));
    }

    #[test]
    fn tree_length_bounds(
        dims in prop::array::uniform4(1usize..=5),
        raw in prop::collection::vec(prop::array::uniform4(0usize..5), 1..=5),
    ) {
        let pts: Vec<Site> = raw.iter().map(|p| [0, 1, 2, 3].map(|a| p[a] % dims[a])).collect();
        let tau = tree_length(&pts, dims).unwrap();
        let mst = tree_length_mst_bound(&pts, dims);
        let far = pts.iter().flat_map(|a| pts.iter().map(move |b| (a, b)))
            .map(|(a, b)| torus_distance(*a, *b, dims)).max().unwrap();
        prop_assert!(far <= tau && tau <= mst);
        // The Steiner ratio of any metric is at least 1/2.
        prop_assert!(2 * tau >= mst);
        let mut shuffled = pts.clone();
        shuffled.reverse();
        prop_assert_eq!(tree_length(&shuffled, dims).unwrap(), tau);
    }

    #[test]
    fn kernel_norm_is_monotone_in_m(
        raw in prop::collection::vec((prop::array::uniform4(0usize..3), prop::array::uniform4(0usize..3), -1.0f64..1.0), 1..6),
        ti in any::<bool>(),
        m1 in 0.0f64..1.0,
        dm in 0.0f64..1.0,
    ) {
        let dims = [3, 3, 3, 3];
        let entries = raw.iter().map(|(a, b, v)| (vec![*a, *b], C64::new(*v, 0.5))).collect();
        let k = Kernel::new(2, dims, entries, ti).unwrap();
        prop_assert!(kernel_norm(&k, m1).unwrap() <= kernel_norm(&k, m1 + dm).unwrap() * (1.0 + 1e-15));
    }

    #[test]
    fn localization_reconstructs_kernel(seed in any::<u64>(), entries in prop::collection::vec((0usize..108, -1.0f64..1.0), 1..6)) {
        let shape = make_shape(0, 3, 4, 3).unwrap();
        let mut full = OffsetKernel::zeros(shape.extents(Level::Unit));
        for (i, v) in &entries {
            full.values[*i] += C64::new(*v, 0.25 * v);
        }
        let psi = Field::random(shape, Level::Unit, 1.0, &mut rng(seed));
        let loc = localize_quadratic(&full);
        let mut rebuilt = psi.scale(loc.scalar);
        for nu in 0..4 {
            rebuilt = rebuilt.add(&loc.parts[nu].apply(&forward_diff(&psi, nu)).unwrap());
        }
        let direct = full.apply(&psi).unwrap();
        prop_assert!(rebuilt.sub(&direct).sup_norm() < 1e-12);
        // The offset convention matches the symbol: K psi has DFT K_hat * psi_hat.
        let sym = kernel_symbol(&full);
        let lhs = parabolic_rg::torus::dft(&direct);
        let rhs = parabolic_rg::torus::dft(&psi);
        for i in 0..lhs.len() {
            prop_assert!(close(lhs[i], sym[i] * rhs[i], 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn background_is_phase_equivariant(seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let shape = make_shape(1, 3, 2, 1).unwrap();
        let mp = ModelParams::new(0.05, 0.5, 1.0).unwrap();
        let mut r = rng(seed);
        let psi = FieldPair::new(
            Field::random(shape, Level::Unit, 0.3, &mut r),
            Field::random(shape, Level::Unit, 0.3, &mut r),
        ).unwrap();
        let ph = C64::from_polar(1.0, alpha);
        let rotated = FieldPair::new(psi.starred.scale(ph.conj()), psi.plain.scale(ph)).unwrap();
        let opts = NewtonOptions { tol: 1e-13, ..Default::default() };
        let a = solve_nonlinear(&psi, &mp, SHARP, &opts).unwrap();
        let b = solve_nonlinear(&rotated, &mp, SHARP, &opts).unwrap();
        prop_assert!(a.converged && b.converged);
        prop_assert!(b.phi.sub(&a.phi.scale(ph)).sup_norm() < 1e-10);
        prop_assert!(b.phi_star.sub(&a.phi_star.scale(ph.conj())).sup_norm() < 1e-10);
    }

    #[test]
    fn time_reversal_maps_real_subspace_to_itself(seed in any::<u64>()) {
        let shape = make_shape(1, 3, 2, 1).unwrap();
        let mp = ModelParams::new(0.05, 0.5, 2.0).unwrap();
        let psi = Field::random(shape, Level::Unit, 0.3, &mut rng(seed));
        let ext = FieldPair::new(reflect_time(&psi.conj()), psi).unwrap();
        let opts = NewtonOptions { tol: 1e-13, ..Default::default() };
        let sol = solve_nonlinear(&ext, &mp, SHARP, &opts).unwrap();
        prop_assert!(sol.converged);
        prop_assert!(sol.phi_star.sub(&reflect_time(&sol.phi.conj())).sup_norm() < 1e-10);
    }
}
