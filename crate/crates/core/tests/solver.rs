mod common;

use common::{poiseuille_error, straight_channel, CHANNEL_LENGTH};
use shapeopt_core::mesh::generate_tjunction;
use shapeopt_core::solver::{BoundaryCondition, BoundarySpec, FlowSolver, FluidProperties, SolverSettings};

#[test]
fn developed_channel_flow_is_parabolic() {
    let (m, sol) = straight_channel(0.05, BoundaryCondition::PseudoTraction);
    let outlet = poiseuille_error(&m, &sol, CHANNEL_LENGTH);
    assert!(outlet < 0.02, "outlet L∞ error {outlet}");
    let (m, sol) = straight_channel(0.05, BoundaryCondition::TractionFree);
    let interior = poiseuille_error(&m, &sol, 3.0);
    assert!(interior < 0.02, "interior L∞ error {interior}");
}

#[test]
fn picard_contracts_on_the_carreau_t_junction() {
    let m = generate_tjunction(0.125).unwrap();
    let mut solver = FlowSolver::new(&m);
    let sol = solver
        .solve(&m, &FluidProperties::default(), &BoundarySpec::tjunction(), &SolverSettings::default())
        .unwrap();
    assert!(sol.converged);
    let h = solver.picard_history();
    assert_eq!(h.len(), sol.picard_iterations);
    assert!(h.len() > 2);
    assert!(*h.last().unwrap() < 1e-6);
    for w in h[1..].windows(2) {
        assert!(w[1] < w[0], "Picard change grew: {h:?}");
    }
}
