use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spmhd::derham::{Gauge, OperatorContext, Source};
use spmhd::diagnostics::magnetic_helicity;
use spmhd::fem_spaces::{FeSpace, FieldVector};
use spmhd::mesh::{build_box_mesh, BoxDomain, TetMesh};
use spmhd::verification::{commuting_battery, ASSEMBLY_QUAD_DEGREE};

fn ctx2() -> &'static OperatorContext {
    static CTX: OnceLock<OperatorContext> = OnceLock::new();
    CTX.get_or_init(|| context(build_box_mesh(2, BoxDomain::unit()).unwrap()))
}

fn context(mesh: TetMesh) -> OperatorContext {
    OperatorContext::new(Arc::new(mesh), 0, ASSEMBLY_QUAD_DEGREE).unwrap()
}

fn random_field(space: &FeSpace, rng: &mut ChaCha8Rng) -> FieldVector {
    let coeffs = (0..space.ndofs).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut v = FieldVector::new(space, coeffs).unwrap();
    space.constrain(&mut v);
    v
}

fn random_perm(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.gen_range(0..=i));
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn coboundaries_compose_to_zero_under_any_numbering(n in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = build_box_mesh(n, BoxDomain::unit()).unwrap();
        let m = mesh.relabel_vertices(&random_perm(mesh.num_vertices(), &mut rng)).unwrap();
        prop_assert!(m.incidence(1).composes_to_zero(m.incidence(0)));
        prop_assert!(m.incidence(2).composes_to_zero(m.incidence(1)));
        prop_assert_eq!(m.euler_characteristic(), 1);
    }

    #[test]
    fn discrete_curl_of_gradient_and_div_of_curl_vanish(seed in any::<u64>()) {
        let ctx = ctx2();
        let c = ctx.complex();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_field(&c.lagrange, &mut rng);
        let a = random_field(&c.nedelec, &mut rng);
        let grad = ctx.mesh().incidence(0).to_sparse().mul_vec(&p.coeffs);
        let curl_grad = ctx.mesh().incidence(1).to_sparse().mul_vec(&grad);
        prop_assert!(curl_grad.iter().all(|v| v.abs() < 1e-13));
        let b = c.curl(&a);
        prop_assert!(c.div_norm(&b) < 1e-13);
    }

    #[test]
    fn weak_curl_is_adjoint_to_curl(seed in any::<u64>()) {
        let ctx = ctx2();
        let c = ctx.complex();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_field(&c.rt, &mut rng);
        let v = random_field(&c.nedelec, &mut rng);
        let lhs = ctx.ned_inner(&ctx.curl_h(&b).unwrap(), &v);
        // polarisation gives (b, curl v) in the RT mass inner product
        let cv = c.curl(&v);
        let rhs = 0.25
            * (ctx.rt_norm(&b.lin_comb(1.0, &cv, 1.0)).powi(2) - ctx.rt_norm(&b.lin_comb(1.0, &cv, -1.0)).powi(2));
        let scale = ctx.rt_norm(&b) * ctx.rt_norm(&c.curl(&v)) + 1e-300;
        prop_assert!((lhs - rhs).abs() / scale < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn projections_fix_their_range(seed in any::<u64>()) {
        let ctx = ctx2();
        let c = ctx.complex();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_field(&c.nedelec, &mut rng);
        let q = ctx.q_h_project(Source::Discrete(&x)).unwrap();
        prop_assert!(ctx.ned_norm(&q.lin_comb(1.0, &x, -1.0)) < 1e-12 * (1.0 + ctx.ned_norm(&x)));
        let p = ctx.pi_n(Source::Discrete(&x)).unwrap().field;
        let pp = ctx.pi_n(Source::Discrete(&p)).unwrap().field;
        prop_assert!(ctx.ned_norm(&pp.lin_comb(1.0, &p, -1.0)) < 1e-12 * (1.0 + ctx.ned_norm(&p)));
        let b = c.curl(&x);
        let tb = ctx.pi_tilde_rt(Source::Discrete(&b)).unwrap();
        prop_assert!(ctx.rt_norm(&tb.lin_comb(1.0, &b, -1.0)) < 1e-12 * (1.0 + ctx.rt_norm(&b)));
        // a general RT field is mapped into the divergence-free subspace
        let r = random_field(&c.rt, &mut rng);
        let tr = ctx.pi_tilde_rt(Source::Discrete(&r)).unwrap();
        prop_assert!(c.div_norm(&tr) < 1e-12);
    }

    #[test]
    fn helicity_does_not_depend_on_the_gauge(seed in any::<u64>()) {
        let ctx = ctx2();
        let c = ctx.complex();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = c.curl(&random_field(&c.nedelec, &mut rng));
        let hc = magnetic_helicity(ctx, &b, Gauge::Coulomb).unwrap();
        let hk = magnetic_helicity(ctx, &b, Gauge::Combinatorial).unwrap();
        prop_assert!((hc - hk).abs() <= 1e-10 * (1.0 + hc.abs()), "{hc} vs {hk}");
    }

    #[test]
    fn norms_and_commuting_defect_ignore_orientation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = build_box_mesh(2, BoxDomain::unit()).unwrap();
        let perm = random_perm(mesh.num_vertices(), &mut rng);
        let other = context(mesh.relabel_vertices(&perm).unwrap());
        let base = ctx2();
        let battery = commuting_battery();
        let (_, field) = &battery[rng.gen_range(0..battery.len())];
        let norm = |ctx: &OperatorContext| {
            let c = ctx.complex();
            let mut e = c.interpolate_nedelec(field, 0.0);
            c.nedelec.constrain(&mut e);
            let a = magnetic_helicity(ctx, &c.curl(&e), Gauge::Coulomb).unwrap();
            (ctx.ned_norm(&e), ctx.rt_norm(&c.curl(&e)), a)
        };
        let (n0, c0, h0) = norm(base);
        let (n1, c1, h1) = norm(&other);
        prop_assert!((n0 - n1).abs() < 1e-12 * n0.max(1.0));
        prop_assert!((c0 - c1).abs() < 1e-12 * c0.max(1.0));
        prop_assert!((h0 - h1).abs() < 1e-10 * h0.abs().max(1.0));
        prop_assert!(other.commuting_check(field, 0.0).unwrap() < 1e-10);
    }
}
