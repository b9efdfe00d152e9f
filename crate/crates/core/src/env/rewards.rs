//! Reward functions of the two test cases and both optimization strategies.
//!
//! The printed piecewise definitions overlap; every function applies the
//! precedence failure > goal > remaining cases.

pub const FAILURE_REWARD: f64 = -10.0;
pub const GOAL_REWARD: f64 = 5.0;

/// Direct strategy, mass-flow ratio: `-e_t` until `e_t < ε`.
pub fn reward_t_direct(e_t: f64, eps_goal: f64, sim_failed: bool) -> f64 {
    if sim_failed {
        FAILURE_REWARD
    } else if e_t < eps_goal {
        GOAL_REWARD
    } else {
        -e_t
    }
}

/// Incremental strategy, mass-flow ratio: fixed penalties for worsening or
/// stagnation, relative improvement otherwise.
pub fn reward_t_incremental(
    mu_t: f64,
    mu_prev: f64,
    e_t: f64,
    e_prev: f64,
    eps_goal: f64,
    sim_failed: bool,
) -> f64 {
    if sim_failed {
        FAILURE_REWARD
    } else if e_t < eps_goal {
        GOAL_REWARD
    } else if e_t > e_prev {
        -0.5
    } else if e_t == e_prev {
        -0.2
    } else {
        assert!(e_prev > 0.0, "improvement from a zero deviation is unreachable");
        (mu_t - mu_prev).abs() / e_prev
    }
}

/// Direct strategy, homogeneity: `-q_t` until `q_t < q*`.
pub fn reward_ch_direct(q_t: f64, q_star: f64, sim_failed: bool) -> f64 {
    if sim_failed {
        FAILURE_REWARD
    } else if q_t < q_star {
        GOAL_REWARD
    } else {
        -q_t
    }
}

/// Incremental strategy, homogeneity: the improvement `q_{t-1} - q_t`,
/// doubled when negative.
pub fn reward_ch_incremental(q_t: f64, q_prev: f64, q_star: f64, sim_failed: bool) -> f64 {
    if sim_failed {
        return FAILURE_REWARD;
    }
    if q_t < q_star {
        return GOAL_REWARD;
    }
    let improvement = q_prev - q_t;
    if improvement < 0.0 {
        2.0 * improvement
    } else {
        improvement
    }
}
