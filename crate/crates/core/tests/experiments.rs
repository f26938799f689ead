use std::fs;

use infoflow::experiments::{
    analyze, emit_csv, emit_strategy_csv, emit_surface_csv, load_config, run_experiment, run_experiment_with_threads,
    strategy_report, sweep, AgentSpec, ExperimentConfig, Scenario,
};
use infoflow::pricing::PayoffModel;
use infoflow::Error;

fn small(scenario: Scenario) -> ExperimentConfig {
    ExperimentConfig {
        scenario,
        auctions: 20,
        paths: 100,
        ..Default::default()
    }
}

#[test]
fn se_shrinks_with_more_paths() {
    let mut cfg = small(Scenario::Omitter);
    cfg.paths = 2000;
    let a = run_experiment(&cfg).unwrap();
    cfg.paths = 4000;
    let b = run_experiment(&cfg).unwrap();
    let ratio = b.terminal[1].se / a.terminal[1].se;
    assert!((ratio * 2f64.sqrt() - 1.0).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn mean_profit_is_zero_sum_per_auction() {
    for scenario in [Scenario::Omitter, Scenario::Attentive] {
        let r = run_experiment(&small(scenario)).unwrap();
        for k in 0..r.times.len() {
            let total: f64 = r.agents.iter().map(|a| a.mean_pnl[k]).sum();
            assert!(total.abs() <= 1e-12);
        }
    }
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Scenario::Attentive);
    let (p1, p2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    emit_csv(&run_experiment_with_threads(&cfg, 1).unwrap(), &p1).unwrap();
    emit_csv(&run_experiment_with_threads(&cfg, 3).unwrap(), &p2).unwrap();
    assert_eq!(fs::read(p1).unwrap(), fs::read(p2).unwrap());
}

#[test]
fn strategic_and_cara_scenarios_run() {
    let mut cfg = small(Scenario::Strategic);
    cfg.payoff = PayoffModel::Gaussian;
    cfg.true_x = None;
    cfg.multipliers.bid = 1.0;
    cfg.multipliers.ask = 1.0;
    cfg.agents = vec![AgentSpec::new(0.5), AgentSpec::new(1.0)];
    let r = run_experiment(&cfg).unwrap();
    // The inferior agent never expects to gain, so it never quotes.
    assert!(r.agents[0].trade_freq.iter().all(|f| *f == 0.0));

    cfg.scenario = Scenario::Cara;
    assert!(matches!(run_experiment(&cfg), Err(Error::Config { .. })));
    for a in &mut cfg.agents {
        a.lambda = Some(0.5);
    }
    let r = run_experiment(&cfg).unwrap();
    assert!(r.agents[1].trade_freq.iter().any(|f| *f > 0.0));
}

#[test]
fn many_omitters_trade() {
    let mut cfg = small(Scenario::Omitter);
    cfg.agents = vec![AgentSpec::new(0.5), AgentSpec::new(1.0), AgentSpec::new(1.5)];
    let r = run_experiment(&cfg).unwrap();
    assert_eq!(r.agents.len(), 3);
    assert!(r.terminal[2].mean > r.terminal[0].mean);

    cfg.scenario = Scenario::Attentive;
    assert!(cfg.validate().is_err());
}

#[test]
fn config_round_trips_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let mut cfg = small(Scenario::Attentive);
    cfg.agents[0].believed_sigma = Some(1.5);
    fs::write(&path, cfg.to_json().unwrap()).unwrap();
    assert_eq!(load_config(&path).unwrap(), cfg);

    fs::write(&path, r#"{"scenario": "cara"}"#).unwrap();
    assert!(load_config(&path).unwrap_err().is_config());
    fs::write(&path, r#"{"paths": "many"}"#).unwrap();
    assert!(load_config(&path).unwrap_err().is_config());
}

#[test]
fn shipped_presets_are_valid() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 5);
}

#[test]
fn analysis_and_strategy_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Scenario::Strategic);
    cfg.payoff = PayoffModel::Gaussian;
    cfg.auctions = 8;
    cfg.true_x = Some(0.5);
    cfg.agents = vec![AgentSpec::new(0.5), AgentSpec::new(1.0)];
    let rows = analyze(&cfg).unwrap();
    assert_eq!(rows.len(), 2 * 7 * 8 / 2);
    assert!(rows.iter().filter(|r| r.agent == 1).all(|r| r.h > 0.0));
    emit_surface_csv(&rows, dir.path().join("s.csv")).unwrap();

    let report = strategy_report(&cfg).unwrap();
    for (v, e) in report.optimum.iter().zip(&report.enumerated) {
        assert!((v - e.unwrap()).abs() < 1e-12);
    }
    let rule = report.policies.iter().find(|p| p.agent == 1 && p.policy == "rule").unwrap();
    assert_eq!(rule.trades, 7);
    emit_strategy_csv(&report, dir.path()).unwrap();
    assert!(dir.path().join("policies.csv").exists());
}

#[test]
fn sweep_changes_one_parameter() {
    let cfg = small(Scenario::Omitter);
    let pts = sweep(&cfg, "sigma2", &[0.5, 1.5]).unwrap();
    assert_eq!(pts.len(), 2);
    assert!(pts[0].result.terminal[1].mean.abs() < pts[1].result.terminal[1].mean.abs());
    assert!(sweep(&cfg, "nonsense", &[1.0]).is_err());
}
