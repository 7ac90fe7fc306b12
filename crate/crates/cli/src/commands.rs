use std::path::{Path, PathBuf};

use prlc::config::ScenarioConfig;
use prlc::mdp::{value_iteration, ActionSpace, Policy, ScenarioModel, StateSpace, TabularMdp};
use prlc::rl::{Checkpoint, Trainer, TrainingEnv};
use prlc::sim::{
    curve_schema, render_svg, run_experiment, summary_schema, sweep_schema, trace_schema, validate_csv, write_curve,
    write_summary, write_sweep, write_trace, Scheme, SummaryRow, SweepRow,
};
use prlc::{ExactProb, ProbabilityMode};
use rayon::prelude::*;

use crate::{Axis, Cli, Command, Failure, Learner, Mode};

type Outcome<T = ()> = Result<T, Failure>;

struct Context {
    out_dir: Option<PathBuf>,
    mode: Option<Mode>,
    self_check: bool,
}

impl Context {
    fn load(&self, path: &Path) -> Outcome<ScenarioConfig> {
        let mut cfg = ScenarioConfig::load(path)?;
        if let Some(m) = self.mode {
            cfg.planning.mode = match m {
                Mode::Exact => ProbabilityMode::Exact,
                Mode::InfiniteQ => ProbabilityMode::InfiniteQ,
            };
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ScenarioConfig) -> Outcome<PathBuf> {
        let dir = self
            .out_dir
            .clone()
            .or_else(|| cfg.simulation.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
        Ok(dir)
    }

    fn check(&self, what: &str, ok: bool) -> Outcome {
        if self.self_check && !ok {
            return Err(Failure::SelfCheck(what.to_string()));
        }
        Ok(())
    }

    fn check_csv(&self, path: &Path, schema: &prlc::sim::CsvSchema) -> Outcome {
        if self.self_check {
            validate_csv(path, schema).map_err(|e| Failure::SelfCheck(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

pub fn run(cli: Cli) -> Outcome {
    let ctx = Context {
        out_dir: cli.out_dir,
        mode: cli.mode,
        self_check: cli.self_check,
    };
    match cli.command {
        Command::ValidateConfig { config } => validate(&ctx, &config),
        Command::Plan { config, gamma, output } => plan(&ctx, &config, gamma, output),
        Command::Train {
            config,
            algo,
            seed,
            episodes,
            resume,
            stop_after,
        } => train(&ctx, &config, algo, seed, episodes, resume, stop_after),
        Command::Simulate {
            config,
            policy,
            baseline: _,
            runs,
            seed,
            svg,
        } => simulate(&ctx, &config, policy, runs, seed, svg),
        Command::Sweep {
            config,
            axis,
            values,
            seeds,
            runs,
        } => sweep(&ctx, &config, axis, &values, seeds, runs),
    }
}

fn build(model: &ScenarioModel) -> Outcome<TabularMdp> {
    Ok(TabularMdp::build::<ExactProb>(model)?)
}

fn validate(ctx: &Context, path: &Path) -> Outcome {
    let cfg = ctx.load(path)?;
    let model = cfg.model();
    let states = StateSpace::enumerate(&model.beta()).len();
    let actions = ActionSpace::enumerate(&model).len();
    println!("{}: ok", cfg.name);
    println!("states={states} actions={actions}");
    println!("fingerprint={}", model.fingerprint());
    Ok(())
}

fn plan_policy(model: &ScenarioModel, mdp: &TabularMdp, gamma: f64, threshold: f64) -> Outcome<(Policy, usize)> {
    let vi = value_iteration(mdp, gamma, threshold)?;
    let policy = Policy::from_actions(mdp, "model-mdp", gamma, &vi.policy, Some(&vi.values))?;
    debug_assert_eq!(policy.fingerprint, model.fingerprint());
    Ok((policy, vi.iterations))
}

fn plan(ctx: &Context, path: &Path, gamma: Option<f64>, output: Option<PathBuf>) -> Outcome {
    let cfg = ctx.load(path)?;
    let gamma = gamma.unwrap_or(cfg.planning.gamma);
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Failure::Validation("--gamma must lie in [0, 1]".into()));
    }
    let model = cfg.model();
    let mdp = build(&model)?;
    println!("states={} actions={}", mdp.states.len(), mdp.actions.len());
    let (policy, iterations) = plan_policy(&model, &mdp, gamma, cfg.planning.threshold)?;
    println!("iterations={iterations}");
    let out = match output {
        Some(p) => p,
        None => ctx.out_dir(&cfg)?.join(format!("{}-model-mdp-g{gamma}.policy.json", cfg.name)),
    };
    policy.save(&out)?;
    println!("policy={}", out.display());
    if ctx.self_check {
        let back = Policy::load(&out)?;
        let vi = value_iteration(&mdp, gamma, cfg.planning.threshold)?;
        ctx.check("policy file does not reproduce the planned actions", back.resolve(&mdp)? == vi.policy)?;
    }
    Ok(())
}

fn train(
    ctx: &Context,
    path: &Path,
    algo: Learner,
    seed: Option<u64>,
    episodes: Option<u64>,
    resume: Option<PathBuf>,
    stop_after: Option<u64>,
) -> Outcome {
    let cfg = ctx.load(path)?;
    let model = cfg.model();
    let mdp = build(&model)?;
    let (mut trainer, seed) = match &resume {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            let conflict = |what: &str, given: u64, stored: u64| {
                Failure::Validation(format!("checkpoint has {what} {stored}, not {given}"))
            };
            if ck.config.algorithm.name() != algo.key() {
                return Err(Failure::Validation(format!(
                    "checkpoint was written by {}, not {}",
                    ck.config.algorithm.name(),
                    algo.key()
                )));
            }
            let stored = ck.config.seed;
            if let Some(s) = seed.filter(|&s| s != stored) {
                return Err(conflict("seed", s, stored));
            }
            if let Some(n) = episodes.filter(|&n| n != ck.config.episodes) {
                return Err(conflict("episodes", n, ck.config.episodes));
            }
            let env = TrainingEnv::new(&model, stored)?;
            (Trainer::resume(&mdp, env, ck)?, stored)
        }
        None => {
            let seed = seed.unwrap_or(0);
            let env = TrainingEnv::new(&model, seed)?;
            (Trainer::new(&mdp, cfg.train_config(algo.key(), seed, episodes)?, env)?, seed)
        }
    };
    println!("states={} actions={}", mdp.states.len(), mdp.actions.len());
    trainer.run_for(stop_after.unwrap_or(u64::MAX))?;
    let dir = ctx.out_dir(&cfg)?;
    let stem = format!("{}-{}-s{seed}", cfg.name, algo.key());
    let ck = trainer.checkpoint();
    let ck_path = dir.join(format!("{stem}.checkpoint.json"));
    ck.save(&ck_path)?;
    println!("episodes={} temperature={:.6}", ck.episode, ck.temperature);
    println!("checkpoint={}", ck_path.display());
    if !trainer.is_done() {
        return Ok(());
    }
    let gamma = ck.config.gamma;
    let outcome = trainer.finish();
    println!("virtual_updates={}", outcome.virtual_updates);
    let policy = Policy::from_actions(&mdp, algo.key(), gamma, &outcome.policy, None)?;
    let policy_path = dir.join(format!("{stem}.policy.json"));
    policy.save(&policy_path)?;
    let curve_path = dir.join(format!("{stem}-curve.csv"));
    write_curve(&curve_path, &outcome.curve)?;
    println!("policy={}", policy_path.display());
    println!("curve={}", curve_path.display());
    ctx.check_csv(&curve_path, &curve_schema())?;
    if ctx.self_check {
        let back = Policy::load(&policy_path)?;
        ctx.check("policy file does not reproduce the learned actions", back.resolve(&mdp)? == outcome.policy)?;
        let bound = mdp.reward_bound() / (1.0 - gamma);
        ctx.check(
            "learned values exceed the reward bound",
            gamma >= 1.0 || outcome.table.max_abs() <= bound + 1e-9,
        )?;
    }
    Ok(())
}

fn simulate(
    ctx: &Context,
    path: &Path,
    policy: Option<PathBuf>,
    runs: Option<usize>,
    seed: Option<u64>,
    svg: bool,
) -> Outcome {
    let cfg = ctx.load(path)?;
    let model = cfg.model();
    let mdp = build(&model)?;
    let scheme = match &policy {
        Some(p) => {
            let pol = Policy::load(p)?;
            let actions = pol.resolve(&mdp)?;
            Scheme::policy(pol.scheme, actions)
        }
        None => Scheme::RandSched,
    };
    let runs = runs.unwrap_or(cfg.simulation.runs);
    if runs == 0 {
        return Err(Failure::Validation("--runs must be at least 1".into()));
    }
    let seed = seed.unwrap_or(cfg.simulation.seed);
    let summary = run_experiment(&model, &mdp, &scheme, &cfg.sim_config(), runs, seed)?;
    let dir = ctx.out_dir(&cfg)?;
    let stem = format!("{}-{}-s{seed}", cfg.name, scheme.name());
    let trace_path = dir.join(format!("{stem}-trace.csv"));
    let summary_path = dir.join(format!("{stem}-summary.csv"));
    write_trace(&trace_path, &summary)?;
    write_summary(&summary_path, &[SummaryRow::new(&cfg.name, &summary)])?;
    println!(
        "scheme={} mean_delta={:.4} std_error={:.4} fluctuation_std={:.4}",
        summary.scheme, summary.mean_delta, summary.std_error, summary.fluctuation
    );
    println!("trace={}", trace_path.display());
    println!("summary={}", summary_path.display());
    if svg {
        let svg_path = dir.join(format!("{stem}-trace.svg"));
        let title = format!("{}: {}", cfg.name, scheme.name());
        std::fs::write(&svg_path, render_svg(&title, &[(scheme.name(), &summary.per_generation)]))
            .map_err(|e| Failure::Runtime(e.to_string()))?;
        println!("svg={}", svg_path.display());
    }
    ctx.check_csv(&trace_path, &trace_schema())?;
    ctx.check_csv(&summary_path, &summary_schema())?;
    Ok(())
}

fn integral(axis: &str, v: f64) -> Outcome<u64> {
    if v >= 1.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(Failure::Validation(format!("{axis} values must be positive integers, got {v}")))
    }
}

enum Cell {
    Learn { value: f64, learner: Learner, seed: u64, episodes: u64, update_period: Option<u64> },
    Loss { value: f64 },
}

fn sweep(
    ctx: &Context,
    path: &Path,
    axis: Axis,
    values: &[f64],
    seeds: Option<usize>,
    runs: Option<usize>,
) -> Outcome {
    let cfg = ctx.load(path)?;
    if values.is_empty() {
        return Err(Failure::Validation("--values must list at least one value".into()));
    }
    let runs = runs.unwrap_or(cfg.simulation.runs);
    let sim_seed = cfg.simulation.seed;
    let mut cells = Vec::new();
    let axis_name = match axis {
        Axis::Episodes => "episodes",
        Axis::UpdatePeriod => "update-period",
        Axis::Loss => "loss",
    };
    match axis {
        Axis::Episodes | Axis::UpdatePeriod => {
            let t = cfg.training()?;
            let seeds = seeds.unwrap_or(t.seeds) as u64;
            let learners: Vec<Learner> = match axis {
                Axis::Episodes => [(Learner::Qlearn, &t.qlearn), (Learner::QlearnVe, &t.qlearn_ve)]
                    .into_iter()
                    .filter(|(_, s)| s.is_some())
                    .map(|(l, _)| l)
                    .collect(),
                _ => vec![Learner::QlearnVe],
            };
            for &v in values {
                let n = integral(axis_name, v)?;
                for &learner in &learners {
                    for seed in 0..seeds {
                        let (episodes, update_period) = match axis {
                            Axis::Episodes => (n, None),
                            _ => {
                                let ve = t.qlearn_ve.as_ref().ok_or_else(|| {
                                    Failure::Validation("training.qlearn-ve section is required".into())
                                })?;
                                (ve.episodes, Some(n))
                            }
                        };
                        cells.push(Cell::Learn { value: v, learner, seed, episodes, update_period });
                    }
                }
            }
        }
        Axis::Loss => {
            for &v in values {
                if !(0.0..1.0).contains(&v) {
                    return Err(Failure::Validation(format!("loss values must lie in [0, 1), got {v}")));
                }
                cells.push(Cell::Loss { value: v });
            }
        }
    }
    let base = cfg.model();
    let base_mdp = match axis {
        Axis::Loss => None,
        _ => Some(build(&base)?),
    };
    let rows: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|cell| -> Outcome<Vec<SweepRow>> {
            match *cell {
                Cell::Learn { value, learner, seed, episodes, update_period } => {
                    let mdp = base_mdp.as_ref().expect("built for learning axes");
                    let mut tc = cfg.train_config(learner.key(), seed, Some(episodes))?;
                    if let Some(u) = update_period {
                        tc.algorithm = prlc::rl::Algorithm::QLearningVe { update_period: u };
                    }
                    let out = Trainer::new(mdp, tc, TrainingEnv::new(&base, seed)?)?.run()?;
                    let scheme = Scheme::policy(learner.key(), out.policy);
                    let s = run_experiment(&base, mdp, &scheme, &cfg.sim_config(), runs, sim_seed)?;
                    Ok(vec![SweepRow {
                        axis: axis_name.into(),
                        value,
                        scheme: learner.key().into(),
                        seed,
                        mean_delta: s.mean_delta,
                        std_error: s.std_error,
                    }])
                }
                Cell::Loss { value } => {
                    let mut model = base.clone();
                    for l in &mut model.links {
                        l.loss = value;
                    }
                    let mdp = build(&model)?;
                    let (policy, _) = plan_policy(&model, &mdp, model.gamma, cfg.planning.threshold)?;
                    let planned = Scheme::policy("model-mdp", policy.resolve(&mdp)?);
                    [planned, Scheme::RandSched]
                        .iter()
                        .map(|scheme| {
                            let s = run_experiment(&model, &mdp, scheme, &cfg.sim_config(), runs, sim_seed)?;
                            Ok(SweepRow {
                                axis: axis_name.into(),
                                value,
                                scheme: scheme.name().into(),
                                seed: sim_seed,
                                mean_delta: s.mean_delta,
                                std_error: s.std_error,
                            })
                        })
                        .collect()
                }
            }
        })
        .collect::<Outcome<_>>()?;
    let rows: Vec<SweepRow> = rows.into_iter().flatten().collect();
    let dir = ctx.out_dir(&cfg)?;
    let out = dir.join(format!("{}-sweep-{axis_name}.csv", cfg.name));
    write_sweep(&out, &rows)?;
    for r in &rows {
        println!("{} {} {} seed={} mean_delta={:.4}", r.axis, r.value, r.scheme, r.seed, r.mean_delta);
    }
    println!("sweep={}", out.display());
    ctx.check_csv(&out, &sweep_schema())?;
    Ok(())
}
