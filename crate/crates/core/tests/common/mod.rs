//! Shared fixtures for the integration suites: the hand-sized two-state
//! instance and a generator of random oracle-sized instances.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use rddp::model::{
    CostSpec, DiscreteState, InitialState, MdpModel, Outcome, RiskParams, StageConstraints,
    StateBox,
};

pub fn box_constraints(lower: Vec<f64>, upper: Vec<f64>) -> StageConstraints {
    StageConstraints {
        a_mat: vec![],
        b_vec: vec![],
        x_mat: vec![],
        lower,
        upper,
        senses: vec![],
    }
}

/// Two discrete states, two outcomes each, n = m = 1, T = 2, lambda = 0.5,
/// alpha = 0.5. Small enough for the exact oracle, rich enough to exercise
/// the discrete-state coupling and both risk terms.
pub fn tiny_instance() -> MdpModel {
    let mk = |prob: f64, next_d: usize, tx: f64, ta: f64, u: f64| Outcome {
        prob,
        next_d,
        t_x: vec![vec![tx]],
        t_a: vec![vec![ta]],
        u: vec![u],
    };
    MdpModel {
        horizon: 2,
        n: 1,
        m: 1,
        risk: RiskParams { lambda: 0.5, alpha: 0.5 },
        initial: InitialState { d: 0, x: vec![1.0] },
        states: vec![
            DiscreteState {
                constraints: box_constraints(vec![-1.0], vec![1.0]),
                outcomes: vec![mk(0.7, 0, 1.05, 1.0, 0.1), mk(0.3, 1, 0.9, -0.4, -0.2)],
            },
            DiscreteState {
                constraints: box_constraints(vec![-1.0], vec![1.0]),
                outcomes: vec![mk(0.5, 0, 1.2, 0.6, 0.0), mk(0.5, 1, 0.8, 1.1, 0.3)],
            },
        ],
        cost: CostSpec { c_a: vec![0.5], c_x: vec![1.0], c_n: vec![-1.0] },
        x_box: StateBox { lo: vec![-10.0], hi: vec![10.0] },
    }
}

/// Random oracle-sized instance: n = m = 1, T = 2, up to two discrete
/// states and two outcomes each, box-only action polytopes (complete
/// recourse for free), random risk parameters including the boundary cases.
/// The state box is computed by interval propagation of the dynamics, so
/// seeded bounds are valid by construction.
#[allow(dead_code)]
pub fn random_instance(rng: &mut ChaCha8Rng) -> MdpModel {
    let horizon = 2;
    let num_d = rng.gen_range(1..=2);
    let lower = -(rng.gen_range(0.5..1.5));
    let upper = rng.gen_range(0.5..1.5);
    let mut states = Vec::new();
    for _ in 0..num_d {
        let num_outcomes = rng.gen_range(1..=2);
        let raw: Vec<f64> = (0..num_outcomes).map(|_| rng.gen_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let outcomes = raw
            .iter()
            .map(|&p| Outcome {
                prob: p / total,
                next_d: rng.gen_range(0..num_d),
                t_x: vec![vec![rng.gen_range(-1.2..1.2)]],
                t_a: vec![vec![rng.gen_range(-1.2..1.2)]],
                u: vec![rng.gen_range(-0.5..0.5)],
            })
            .collect();
        states.push(DiscreteState {
            constraints: box_constraints(vec![lower], vec![upper]),
            outcomes,
        });
    }
    let risk = match rng.gen_range(0..4) {
        0 => RiskParams::risk_neutral(),
        1 => RiskParams::robust(),
        2 => RiskParams { lambda: 1.0, alpha: rng.gen_range(0.1..1.0) },
        _ => RiskParams {
            lambda: rng.gen_range(0.1..0.9),
            alpha: rng.gen_range(0.1..1.0),
        },
    };
    let x0 = rng.gen_range(-1.0..1.0);

    // Interval propagation of the reachable continuous state.
    let (mut lo, mut hi) = (x0, x0);
    let (mut reach_lo, mut reach_hi) = (lo, hi);
    for _ in 0..=horizon {
        let (mut next_lo, mut next_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for state in &states {
            for o in &state.outcomes {
                let tx = o.t_x[0][0];
                let ta = o.t_a[0][0];
                let u = o.u[0];
                let from_x = [tx * lo, tx * hi];
                let from_a = [ta * lower, ta * upper];
                next_lo = next_lo
                    .min(from_x[0].min(from_x[1]) + from_a[0].min(from_a[1]) + u);
                next_hi = next_hi
                    .max(from_x[0].max(from_x[1]) + from_a[0].max(from_a[1]) + u);
            }
        }
        lo = next_lo;
        hi = next_hi;
        reach_lo = reach_lo.min(lo);
        reach_hi = reach_hi.max(hi);
    }

    let model = MdpModel {
        horizon,
        n: 1,
        m: 1,
        risk,
        initial: InitialState { d: rng.gen_range(0..num_d), x: vec![x0] },
        states,
        cost: CostSpec {
            c_a: vec![rng.gen_range(-1.0..1.0)],
            c_x: vec![rng.gen_range(-1.0..1.0)],
            c_n: vec![rng.gen_range(-1.0..1.0)],
        },
        x_box: StateBox { lo: vec![reach_lo - 1.0], hi: vec![reach_hi + 1.0] },
    };
    assert!(model.validate().is_empty(), "generator produced invalid model");
    model
}
