use flowseg::eval::evaluate;
use flowseg::graph::{propagate, PropagationMode};
use flowseg::media::{synth_sequence, FlowSet, GroundTruth, MaskStack, SynthSpec, VideoTensor};
use flowseg::oracle::checks::check_power_iteration;
use flowseg::oracle::{
    dense_joint_operator, dominant_eig, joint_iteration, OracleContext, DEFAULT_SIZE_CAP,
};
use flowseg::solver::{binarize, init_mask, iterate, prepare, run, InitScheme, SolverConfig};
use flowseg::Error;

fn scene<T: flowseg::Scalar>(seed: u64, m: usize, h: usize, w: usize) -> (VideoTensor<T>, FlowSet, GroundTruth) {
    synth_sequence::<T>(&SynthSpec::seeded_scene(seed, m, h, w)).unwrap()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[test]
fn synthetic_scene_segments_and_scores() {
    let (video, flows, gt) = scene::<f64>(3, 8, 32, 32);
    let config = SolverConfig::default();
    let (mask, diag) = run(&video, &flows, &config, None, None).unwrap();
    assert_eq!(diag.iterations, config.iterations);
    let soft = config.normalization.apply(&mask).unwrap();
    assert!(soft.x.iter().all(|v| (0.0..=1.0).contains(v)));
    let bits = binarize(&soft.x, config.threshold).unwrap();
    let pred = MaskStack::new(mask.dims, bits).unwrap();
    let report = evaluate(&pred, &gt, None).unwrap();
    assert!(report.j_mean.unwrap() > 0.8, "{report:?}");
    assert!(report.f_mean.unwrap() > 0.8, "{report:?}");
    assert_eq!(report.corloc, 1.0);
}

#[test]
fn single_and_double_precision_agree() {
    let config = SolverConfig::default();
    let (v64, f64s, _) = scene::<f64>(1, 5, 16, 16);
    let (v32, f32s, _) = scene::<f32>(1, 5, 16, 16);
    let (a, _) = run(&v64, &f64s, &config, None, None).unwrap();
    let (b, _) = run(&v32, &f32s, &config, None, None).unwrap();
    let b: Vec<f64> = b.x.iter().map(|&v| v as f64).collect();
    assert!(cosine(&a.x, &b) > 1.0 - 1e-4);
}

#[test]
fn iterates_do_not_depend_on_start_scale() {
    let (video, flows, _) = scene::<f64>(2, 5, 8, 8);
    let config = SolverConfig::default();
    let prepared = prepare(&video, &flows, None, &config).unwrap();
    let reg = prepared.regressor(&config).unwrap();
    let x0 = init_mask::<f64>(&config.init, prepared.dims, None).unwrap();
    let mut scaled = x0.clone();
    scaled.x.iter_mut().for_each(|v| *v *= 37.5);
    let mode = PropagationMode::Deterministic;
    let (a, _) = iterate(&prepared.edges, &reg, x0, 5, 0.0, mode, false).unwrap();
    let (b, _) = iterate(&prepared.edges, &reg, scaled, 5, 0.0, mode, false).unwrap();
    for (p, q) in a.x.iter().zip(&b.x) {
        assert!((p - q).abs() <= 1e-12 * p.abs().max(1.0));
    }
}

#[test]
fn one_step_matches_dense_operator() {
    let (video, flows, _) = scene::<f64>(0, 5, 8, 8);
    let ctx = OracleContext::new(&video, &flows, &SolverConfig::default(), None, DEFAULT_SIZE_CAP).unwrap();
    let outcome = check_power_iteration(&ctx, 1).unwrap();
    assert!(outcome.passed, "{outcome}");
}

#[test]
fn default_iterations_land_near_dominant_direction() {
    let (video, flows, _) = scene::<f64>(4, 5, 8, 8);
    let config = SolverConfig::default();
    let ctx = OracleContext::new(&video, &flows, &config, None, DEFAULT_SIZE_CAP).unwrap();
    let (mask, _) = ctx.prepared.solve(&config, None).unwrap();
    let left = dominant_eig(&ctx.feature_motion.transpose(), 2000, 0.0).unwrap();
    assert!(1.0 - cosine(&mask.x, &left.vector).abs() < 1e-2);
}

#[test]
fn joint_iteration_fixed_point_is_joint_eigenvector() {
    let (video, flows, _) = scene::<f64>(0, 3, 4, 4);
    let ctx = OracleContext::new(&video, &flows, &SolverConfig::default(), None, DEFAULT_SIZE_CAP).unwrap();
    let f = ctx.prepared.features.view().to_dense();
    let op = dense_joint_operator(&ctx.adjacency, f.view(), 1.0, 1.0).unwrap();
    let x0 = vec![1.0; ctx.adjacency.rows()];
    let x = joint_iteration(&ctx.adjacency, f.view(), 1.0, 1.0, &x0, 1000).unwrap();
    let ax = op.mul_vec(&x);
    let lambda: f64 = ax.iter().zip(&x).map(|(a, b)| a * b).sum();
    let residual = ax.iter().zip(&x).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
    assert!(residual < 1e-8, "residual {residual:.2e}");
}

#[test]
fn fast_and_deterministic_propagation_agree() {
    let (video, flows, _) = scene::<f64>(5, 6, 24, 24);
    let prepared = prepare(&video, &flows, None, &SolverConfig::default()).unwrap();
    let x: Vec<f64> = (0..prepared.dims.node_count()).map(|i| ((i * 31) % 17) as f64 - 8.0).collect();
    let a = propagate(&prepared.edges, &x, PropagationMode::Deterministic);
    let b = propagate(&prepared.edges, &x, PropagationMode::Fast);
    for (p, q) in a.iter().zip(&b) {
        assert!((p - q).abs() <= 1e-12 * p.abs().max(1.0));
    }
}

#[test]
fn mismatched_flow_count_is_rejected() {
    let (video, _, _) = scene::<f64>(0, 5, 8, 8);
    let (_, short, _) = scene::<f64>(0, 4, 8, 8);
    assert!(run(&video, &short, &SolverConfig::default(), None, None).is_err());
}

#[test]
fn external_start_requires_maps() {
    let (video, flows, _) = scene::<f64>(0, 3, 8, 8);
    let config = SolverConfig {
        init: InitScheme::External,
        ..SolverConfig::default()
    };
    let err = run(&video, &flows, &config, None, None).unwrap_err();
    assert!(matches!(err, Error::InvalidConfig(_)), "{err}");
}
