use std::collections::BTreeSet;

use liouville::bridge::{bridge_clock, couple_paths, sample_bridge, transform_table, FieldMode, TransformConfig};
use liouville::experiment::{parse_config, render_config, ExperimentConfig, ExperimentKind};
use liouville::field::{CirculantSampler, CovarianceSpec, Dim, Embedding, FieldSample, GridSpec, PointSampler};
use liouville::lbm2d::{clock, sample_walk, FieldAccess};
use liouville::stats::median;
use proptest::prelude::*;

fn torus_field(eps: f64, seed: u64) -> FieldSample<f64> {
    let grid = GridSpec::square([-12.8, -12.8], 25.6, 512).unwrap();
    CirculantSampler::new(grid, CovarianceSpec::new(Dim::Two, 1.0, eps).unwrap(), Embedding::Periodic).unwrap().sample(seed)
}

/// Cell-center indices used by bilinear interpolation at `p` on a clamped grid.
fn corners(g: &GridSpec<f64>, p: [f64; 2]) -> [usize; 4] {
    let n = g.resolution;
    let h = g.cell_size();
    let axis = |c: f64, o: f64| {
        let s = ((c - o) / h - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = (s.floor() as usize).min(n - 2);
        (i0, i0 + 1)
    };
    let (x0, x1) = axis(p[0], g.origin[0]);
    let (y0, y1) = axis(p[1], g.origin[1]);
    [y0 * n + x0, y0 * n + x1, y1 * n + x0, y1 * n + x1]
}

/// The grid values the path needs and the path values themselves are drawn
/// from one exact joint law, so the two clocks see the same field.
#[test]
fn grid_and_exact_clocks_agree_on_coupled_fields() {
    let (eps, gamma) = (0.2, 1.0);
    let spec = CovarianceSpec::new(Dim::Two, 1.0, eps).unwrap();
    let grid = GridSpec::square([-3.2, -3.2], 6.4, 128).unwrap();
    let rel: Vec<f64> = (0..100u64)
        .map(|r| {
            let walk = sample_walk([0.0, 0.0], 1.0, 100, r).unwrap();
            let nodes: BTreeSet<usize> = walk.positions.iter().flat_map(|&p| corners(&grid, p)).collect();
            let nodes: Vec<usize> = nodes.into_iter().collect();
            let n = walk.times.len();
            let mut points: Vec<[f64; 2]> = nodes.iter().map(|&k| grid.cell_center(k)).collect();
            points.extend_from_slice(&walk.positions[..n - 1]);
            let joint = PointSampler::new(&points, &spec).unwrap();
            let draw = joint.sample(1000 + r);
            let mut values = vec![0.0; grid.n_cells()];
            for (i, &k) in nodes.iter().enumerate() {
                values[k] = draw[i];
            }
            let field = FieldSample { grid, values, sigma2: joint.sigma2(), spec, seed: r, periodic: false, clipped_mass: 0.0 };
            let f_grid = clock(&walk, gamma, &FieldAccess::Grid(&field)).unwrap().total();
            let shift = 0.5 * gamma * gamma * joint.sigma2();
            let f_exact: f64 = (0..n - 1).map(|i| (gamma * draw[nodes.len() + i] - shift).exp() * (walk.times[i + 1] - walk.times[i])).sum();
            ((f_grid - f_exact) / f_exact).abs()
        })
        .collect();
    assert!(median(&rel) < 0.05, "median relative difference {}", median(&rel));
}

#[test]
fn transform_off_diagonal_values_approach_the_diagonal() {
    let field = torus_field(0.1, 21);
    let cfg = TransformConfig { n_bridges: 400, seed: 5, ..Default::default() };
    let x = [0.0, 0.0];
    let at = |d: f64| transform_table(x, [d, 0.0], 1.0, &[1.0], &[1.0], &cfg, FieldMode::Quenched(&field)).unwrap().remove(0);
    let diag = at(0.0);
    let off: Vec<_> = [0.25, 0.0625, 0.015625].iter().map(|&d| at(d)).collect();
    let se = |a: f64, b: f64| (a * a + b * b).sqrt();
    for e in &off {
        assert!((e.value - diag.value).abs() <= 3.0 * se(e.stderr, diag.stderr), "{} vs {}", e.value, diag.value);
    }
    for w in off.windows(2) {
        assert!((w[1].value - w[0].value).abs() <= 3.0 * se(w[0].stderr, w[1].stderr));
    }
}

#[test]
fn bridge_clock_is_continuous_in_the_endpoint() {
    let field = torus_field(0.1, 8);
    let access = FieldAccess::Grid(&field);
    let (x, y, t) = ([0.0, 0.0], [0.5, 0.3], 1.0);
    let capped_mean = |end: [f64; 2]| {
        (0..2000u64).map(|s| bridge_clock(&sample_bridge(x, end, t, 400, s).unwrap(), 1.0, &access, t).unwrap().min(1.0)).sum::<f64>() / 2000.0
    };
    let base = capped_mean(y);
    let diffs: Vec<f64> = (1..=4).map(|k| (capped_mean([y[0] + 0.5f64.powi(k), y[1]]) - base).abs()).collect();
    assert!(diffs.windows(2).all(|w| w[1] <= w[0]), "{diffs:?}");
}

#[test]
fn coupling_failure_probability_shrinks_with_the_gap() {
    let eta = 1.0;
    let p: Vec<f64> = [1.0, 0.5, 0.25]
        .iter()
        .map(|&g| (0..2000u64).filter(|&s| couple_paths([0.0, 0.0], [g, g], eta, 2000, s).unwrap().tau > eta).count() as f64 / 2000.0)
        .collect();
    assert!(p[0] > p[1] && p[1] > p[2], "{p:?}");
    // exact values 0.77, 0.48, 0.26 from the first-passage law
    assert!((p[2] - 0.26).abs() < 0.05, "{p:?}");
}

fn kind() -> impl Strategy<Value = ExperimentKind> {
    prop::sample::select(ExperimentKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn config_round_trips(
        k in kind(),
        seed in any::<u64>(),
        gamma in prop::collection::vec(0.0f64..1.99, 1..4),
        mass in 0.1f64..10.0,
        n_bridges in 2usize..5000,
        t_high in prop::option::of(1.0f64..100.0),
        quenched in any::<bool>(),
        horizon in 0.1f64..100.0,
        dir in "[a-z][a-z0-9_/]{0,12}",
    ) {
        let mut c = ExperimentConfig::defaults(k);
        c.master_seed = seed;
        c.model.gamma = gamma;
        c.model.mass = mass;
        c.mc.n_bridges = n_bridges;
        c.mc.t_high = t_high;
        c.mc.quenched = quenched;
        c.coupling.horizon = horizon;
        c.output_dir = dir.into();
        let text = render_config(&c);
        prop_assert_eq!(parse_config(&text).unwrap(), c);
    }
}
