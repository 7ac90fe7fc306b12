use prlc::config::bundled_scenario;
use prlc::mdp::{evaluate_policy, expected_reward, transition_pmf, value_iteration, Policy, ScenarioModel, TabularMdp};
use prlc::sim::{run_experiment, Scheme, SimConfig};
use prlc::ExactProb;

fn scenario(name: &str) -> (ScenarioModel, TabularMdp) {
    let model = bundled_scenario(name).unwrap().model();
    let mdp = TabularMdp::build::<ExactProb>(&model).unwrap();
    (model, mdp)
}

#[test]
fn bundled_scenarios_have_the_expected_dimensions() {
    for (name, states, actions) in [
        ("two-layer-5", 18, 56),
        ("two-layer-10", 18, 56),
        ("three-layer-dg5", 88, 252),
        ("two-server-symmetric", 18, 200),
        ("two-server-asymmetric", 18, 200),
    ] {
        let (_, mdp) = scenario(name);
        assert_eq!((mdp.states.len(), mdp.actions.len()), (states, actions), "{name}");
    }
}

#[test]
fn value_iteration_residuals_contract() {
    let (_, mdp) = scenario("two-layer-5");
    for gamma in [0.5, 0.9, 0.99] {
        let vi = value_iteration(&mdp, gamma, 1e-10).unwrap();
        for w in vi.residuals.windows(2) {
            assert!(w[1] <= gamma * w[0] + 1e-12, "gamma={gamma}: {} after {}", w[1], w[0]);
        }
        assert!(*vi.residuals.last().unwrap() < 1e-10);
    }
}

/// Brute-force argmax of the exact expected reward, lowest action on ties.
fn exact_greedy(model: &ScenarioModel, mdp: &TabularMdp) -> Vec<usize> {
    (0..mdp.states.len())
        .map(|s| {
            let state = mdp.states.state(s);
            let mut best: Option<(ExactProb, usize)> = None;
            for &a in mdp.valid_actions(s) {
                let r: ExactProb = expected_reward(state, mdp.actions.action(a), model).unwrap();
                if best.as_ref().is_none_or(|(b, _)| r > *b) {
                    best = Some((r, a));
                }
            }
            best.unwrap().1
        })
        .collect()
}

#[test]
fn myopic_plan_is_exact_reward_argmax() {
    for name in ["two-layer-5", "two-server-asymmetric"] {
        let (model, mdp) = scenario(name);
        let vi = value_iteration(&mdp, 0.0, 1e-12).unwrap();
        assert_eq!(vi.policy, exact_greedy(&model, &mdp), "{name}");
    }
}

#[test]
fn next_state_law_ignores_the_current_state() {
    let (model, mdp) = scenario("two-layer-10");
    for a in (0..mdp.actions.len()).step_by(5) {
        let action = mdp.actions.action(a);
        let first = transition_pmf::<ExactProb>(mdp.states.state(0), action, &model).unwrap();
        for s in 1..mdp.states.len() {
            assert_eq!(transition_pmf::<ExactProb>(mdp.states.state(s), action, &model).unwrap(), first);
        }
        let table = mdp.transition(mdp.transition_id(a));
        let total: f64 = table.iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for &(s2, p) in table {
            let exact = first
                .iter()
                .find(|(r, _)| r == mdp.states.state(s2))
                .map(|(_, p)| prlc::Probability::to_f64(p))
                .unwrap();
            assert!((exact - p).abs() < 1e-15);
        }
    }
}

#[test]
fn simulated_codec_matches_exact_policy_evaluation() {
    let (model, mdp) = scenario("two-layer-5");
    let vi = value_iteration(&mdp, 0.9, 1e-9).unwrap();
    let exact = evaluate_policy(&mdp, |s| vec![(vi.policy[s], 1.0)], 100).unwrap();
    let exact_mean = exact.iter().sum::<f64>() / exact.len() as f64;
    let scheme = Scheme::policy("model-mdp", vi.policy.clone());
    let cfg = SimConfig::default();
    let sim = run_experiment(&model, &mdp, &scheme, &cfg, 100, 7).unwrap();
    assert!(
        (sim.mean_delta - exact_mean).abs() <= 3.0 * sim.std_error,
        "simulated {} +- {} vs exact {exact_mean}",
        sim.mean_delta,
        sim.std_error
    );
}

#[test]
fn exported_policy_round_trips_and_guards_the_scenario() {
    let (_, mdp) = scenario("two-layer-5");
    let (_, other) = scenario("two-layer-10");
    let vi = value_iteration(&mdp, 0.9, 1e-9).unwrap();
    let policy = Policy::from_actions(&mdp, "model-mdp", 0.9, &vi.policy, Some(&vi.values)).unwrap();
    let dir = tempdir();
    let path = dir.join("p.json");
    policy.save(&path).unwrap();
    let back = Policy::load(&path).unwrap();
    assert_eq!(back.resolve(&mdp).unwrap(), vi.policy);
    assert!(matches!(back.resolve(&other), Err(prlc::Error::FingerprintMismatch { .. })));
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempdir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("prlc-planning-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
