mod common;

use common::{bandit_best_arm_probability, chain_q_error};
use shapeopt_core::agents::{evaluate_policy, train, AgentConfig, Algorithm};
use shapeopt_core::env::{EnvCase, EnvConfig, Strategy};

#[test]
fn ppo_solves_the_bandit() {
    let p = bandit_best_arm_probability(Algorithm::Ppo, 5_000);
    assert!(p > 0.95, "P(best arm) = {p}");
}

#[test]
fn a2c_solves_the_bandit() {
    let p = bandit_best_arm_probability(Algorithm::A2c, 10_000);
    assert!(p > 0.95, "P(best arm) = {p}");
}

#[test]
fn dqn_matches_value_iteration() {
    let err = chain_q_error();
    assert!(err < 1e-2, "max |Q - Q*| = {err}");
}

#[test]
fn trained_bandit_policy_evaluates_well() {
    let env = EnvConfig {
        case: EnvCase::Bandit,
        ..Default::default()
    };
    let cfg = AgentConfig {
        n_steps: Some(250),
        ..AgentConfig::new(Algorithm::Ppo)
    };
    let (agent, _) = train(&cfg, &env, 1, 0, 5_000).unwrap();
    let greedy = evaluate_policy(&agent, &env, 50, true, 1).unwrap();
    assert_eq!(greedy.mean_reward, 1.0);
    let sampled = evaluate_policy(&agent, &env, 200, false, 1).unwrap();
    assert!(sampled.mean_reward >= 0.95, "{}", sampled.mean_reward);
    assert_eq!(sampled.steps.len(), 200);
}

#[test]
fn smoke_run_on_the_fem_t_junction() {
    let env = EnvConfig {
        case: EnvCase::TJunction,
        max_steps: 10,
        ..Default::default()
    };
    let cfg = AgentConfig {
        n_steps: Some(32),
        ..AgentConfig::new(Algorithm::Ppo)
    };
    let (agent, log) = train(&cfg, &env, 1, 0, 64).unwrap();
    assert_eq!(agent.global_step, 64);
    assert_eq!(log.len() as u64, agent.episodes);
    assert!(log.iter().all(|e| e.steps <= 10));
}

#[test]
fn compatibility_matrix() {
    for strategy in [Strategy::Incremental, Strategy::Direct] {
        let env = EnvConfig {
            case: EnvCase::Surrogate,
            strategy,
            ..Default::default()
        };
        for algorithm in [Algorithm::Ppo, Algorithm::A2c, Algorithm::Dqn] {
            let cfg = AgentConfig {
                n_steps: Some(8),
                batch_size: Some(8),
                learning_starts: 4,
                ..AgentConfig::new(algorithm)
            };
            let ok = train(&cfg, &env, 1, 0, 16).is_ok();
            let expected = !(algorithm == Algorithm::Dqn && strategy == Strategy::Direct);
            assert_eq!(ok, expected, "{algorithm:?} with {strategy:?}");
        }
    }
}
