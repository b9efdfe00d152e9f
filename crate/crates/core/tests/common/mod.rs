#![allow(dead_code)]

use shapeopt_core::mesh::{generate_channel_with, BoundaryTag, ChannelGeometry, TriMesh};
use shapeopt_core::objectives::boundary_mass_flow;
use shapeopt_core::solver::{solve_flow, BoundaryCondition, BoundarySpec, FlowSolution, FluidProperties, SolverSettings};

pub const CHANNEL_LENGTH: f64 = 4.0;

/// Newtonian flow through the straight channel `[0, 4] × [-0.5, 0.5]` with a
/// plug inflow of 0.45 and the given outlet condition.
pub fn straight_channel(h: f64, outlet: BoundaryCondition) -> (TriMesh, FlowSolution) {
    let geom = ChannelGeometry {
        length: CHANNEL_LENGTH,
        inlet_height: 1.0,
        outlet_height: 1.0,
    };
    let m = generate_channel_with(&geom, h).unwrap();
    let bcs = BoundarySpec::new(vec![
        (BoundaryTag::Inflow, BoundaryCondition::Dirichlet([0.45, 0.0])),
        (BoundaryTag::Wall, BoundaryCondition::NoSlip),
        (BoundaryTag::Out, outlet),
    ]);
    let sol = solve_flow(&m, &FluidProperties::newtonian(1.0), &bcs, &SolverSettings::default()).unwrap();
    (m, sol)
}

/// Largest deviation of `v_x` on the node column at `x` from the parabola
/// carrying the discrete outflow rate, relative to the parabola's peak.
pub fn poiseuille_error(m: &TriMesh, sol: &FlowSolution, x: f64) -> f64 {
    let q = boundary_mass_flow(m, sol, BoundaryTag::Out, 1.0).unwrap();
    let peak = 1.5 * q;
    let mut err: f64 = 0.0;
    let mut seen = 0;
    for (p, v) in m.nodes.iter().zip(&sol.velocity) {
        if (p[0] - x).abs() < 1e-9 {
            let exact = peak * (1.0 - 4.0 * p[1] * p[1]);
            err = err.max((v[0] - exact).abs() / peak);
            seen += 1;
        }
    }
    assert!(seen > 2, "no node column at x = {x}");
    err
}

use shapeopt_core::agents::{train, AgentConfig, Algorithm, Distribution, Model};
use shapeopt_core::env::{ChainEnv, EnvCase, EnvConfig};

/// Probability of the paying arm after training on the two-armed bandit.
pub fn bandit_best_arm_probability(algorithm: Algorithm, total_steps: u64) -> f64 {
    let cfg = AgentConfig {
        n_steps: (algorithm == Algorithm::Ppo).then_some(250),
        ..AgentConfig::new(algorithm)
    };
    let env = EnvConfig {
        case: EnvCase::Bandit,
        ..Default::default()
    };
    let (agent, _) = train(&cfg, &env, 1, 0, total_steps).unwrap();
    let Model::ActorCritic(ac) = &agent.model else { unreachable!() };
    let Distribution::Categorical(c) = ac.distribution(&[1.0]).unwrap() else { unreachable!() };
    c.probs()[0]
}

pub const CHAIN_GAMMA: f64 = 0.9;

/// Largest deviation of DQN's Q-values from value iteration on the
/// three-state chain after 20k steps.
pub fn chain_q_error() -> f64 {
    let cfg = AgentConfig {
        gamma: CHAIN_GAMMA,
        learning_rate: Some(1e-3),
        target_update: 500,
        train_freq: 1,
        exploration_fraction: 0.2,
        ..AgentConfig::new(Algorithm::Dqn)
    };
    let env = EnvConfig {
        case: EnvCase::Chain,
        ..Default::default()
    };
    let (agent, _) = train(&cfg, &env, 1, 0, 20_000).unwrap();
    let Model::Q(q) = &agent.model else { unreachable!() };
    let exact = ChainEnv::optimal_q(CHAIN_GAMMA);
    let mut err: f64 = 0.0;
    for (s, row) in exact.iter().enumerate() {
        let mut obs = vec![0.0; exact.len()];
        obs[s] = 1.0;
        let got = q.q_values(&obs).unwrap();
        for (a, v) in row.iter().enumerate() {
            err = err.max((got[a] - v).abs());
        }
    }
    err
}
