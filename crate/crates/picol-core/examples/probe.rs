//! Development probe for scenario dynamics (not part of the test suite).

use std::path::Path;

use picol_core::controller::{enumerate_joint_actions, LossContext, TaskLoss};
use picol_core::harness::{
    bundled, prepare_predictor, run_scenario, score_run, RunPredictor,
};
use picol_core::objectives::loss_network;
use picol_core::routing::Basis;
use picol_core::simulator::TrafficState;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "network".into());
    match which.as_str() {
        "network" => probe_network(),
        "coord" => probe_coordination(),
        "route" => probe_route(),
        "link" => probe_link(),
        _ => eprintln!("unknown probe {which}"),
    }
}

fn probe_network() {
    let cfg = bundled::network_scenario();
    let resolved = cfg.resolve(Path::new(".")).unwrap();
    let predictor = prepare_predictor(&resolved).unwrap();
    let seeds: Vec<u64> = (0..5).collect();
    let mut per_seed = Vec::new();
    for &s in &seeds {
        let log = run_scenario(&resolved, &predictor, s).unwrap();
        per_seed.push(score_run(&log).unwrap());
    }
    for h in 0..24 {
        let cap: Vec<f64> = per_seed.iter().map(|r| 1.0 - r.hourly[h].obs_mape).collect();
        let fmape: Vec<f64> = per_seed.iter().map(|r| r.hourly[h].fusion_mape).collect();
        let mc = cap.iter().sum::<f64>() / cap.len() as f64;
        let mf = fmape.iter().sum::<f64>() / fmape.len() as f64;
        println!(
            "hour {h:2}: captured {:.3} (min {:.3})  fusion_mape {:.3} (max {:.3})",
            mc,
            cap.iter().cloned().fold(f64::INFINITY, f64::min),
            mf,
            fmape.iter().cloned().fold(0.0, f64::max)
        );
    }
}

fn probe_coordination() {
    use picol_core::camera::action_set;
    use picol_core::controller::{CameraRngs, ControllerConfig, PolicySet};
    use picol_core::network::bundled_graph;

    let g = bundled_graph();
    let weights: std::collections::BTreeMap<&str, f64> = [
        ("1-70", 10.0),
        ("2-10", 5.0),
        ("10-2", 5.0),
        ("2-4", 4.0),
        ("4-2", 4.0),
        ("3-1", 4.0),
        ("11-5", 6.0),
        ("6-12", 3.5),
        ("12-6", 3.5),
        ("1-2", 1.2),
        ("2-1", 1.2),
        ("1-8", 1.0),
        ("71-1", 1.0),
        ("9-2", 1.0),
        ("4-3", 0.5),
        ("4-6", 1.5),
        ("6-4", 1.5),
        ("5-6", 1.0),
        ("5-3", 2.0),
    ]
    .into_iter()
    .collect();
    let values: Vec<f64> = g
        .edges()
        .iter()
        .map(|e| weights[e.to_string().as_str()] * 100.0)
        .collect();
    let state = TrafficState::new(values, 0);
    let cameras: Vec<_> = [1u32, 2, 3, 4, 5, 6]
        .iter()
        .map(|&n| action_set(&g, n).unwrap())
        .collect();

    let joints = enumerate_joint_actions(&cameras).unwrap();
    let best = joints
        .iter()
        .map(|(_, j)| 1.0 - loss_network(j, &state).unwrap().value)
        .fold(0.0f64, f64::max);
    println!("joint actions {}, best captured share {best:.4}", joints.len());

    let cfg = ControllerConfig { gamma: 1.0, epsilon: 0.0, mode: picol_core::controller::ControlMode::Cew };
    for seed in 0..10u64 {
        let mut set = PolicySet::uniform(cameras.clone());
        let mut rngs = CameraRngs::new(seed, 6);
        for _ in 0..500 {
            let (picks, _) = set.sample_joint(&mut rngs);
            let ctx = LossContext { state: &state, delta: None };
            set.cew_update(&picks, &ctx, TaskLoss::NetworkCapture, cfg.gamma, cfg.epsilon);
        }
        let (picks, joint) = set.sample_joint(&mut rngs);
        let captured = 1.0 - loss_network(&joint, &state).unwrap().value;
        println!(
            "seed {seed}: captured {captured:.4} ratio {:.4} picks {picks:?}",
            captured / best
        );
    }
}

fn probe_route() {
    let cfg = bundled::route_scenario();
    let resolved = cfg.resolve(Path::new(".")).unwrap();
    let predictor = prepare_predictor(&resolved).unwrap();
    let mut switch_fusion = 0;
    let mut switch_pred = 0;
    let mut switch_truth = 0;
    let n = 20u64;
    for seed in 0..n {
        let log = run_scenario(&resolved, &predictor, seed).unwrap();
        for (basis, set) in &log.replans {
            let at4 = set.rows.iter().find(|r| r.node == 4);
            let switched = at4.map(|r| r.path.starts_with("4-2")).unwrap_or(false);
            match basis {
                Basis::Fusion => switch_fusion += u32::from(switched),
                Basis::Prediction => switch_pred += u32::from(switched),
                Basis::Truth => switch_truth += u32::from(switched),
            }
            if seed < 3 {
                let rows: Vec<String> = set
                    .rows
                    .iter()
                    .map(|r| format!("@{} n{} {} eta {:.0}", r.decided_at, r.node, r.path, r.eta_seconds))
                    .collect();
                println!("seed {seed} {basis}: {}", rows.join(" | "));
            }
        }
    }
    println!("switch at node 4: truth {switch_truth}/{n} fusion {switch_fusion}/{n} prediction {switch_pred}/{n}");
}

fn probe_link() {
    let cfg3 = bundled::link_scenario();
    let mut cfg0 = cfg3.clone();
    cfg0.controller.epsilon = Some(0.0);
    let r3 = cfg3.resolve(Path::new(".")).unwrap();
    let r0 = cfg0.resolve(Path::new(".")).unwrap();
    let p3 = prepare_predictor(&r3).unwrap();
    let p0 = match &p3 {
        RunPredictor::Shared(p) => RunPredictor::Shared(p.clone()),
        RunPredictor::Oracle => RunPredictor::Oracle,
    };
    let n = 30u64;
    let mut delays = Vec::new();
    let mut wins = 0;
    let mut losses = 0;
    for seed in 0..n {
        let l3 = run_scenario(&r3, &p3, seed).unwrap();
        let l0 = run_scenario(&r0, &p0, seed).unwrap();
        let s3 = score_run(&l3).unwrap();
        let s0 = score_run(&l0).unwrap();
        delays.push(s3.detections[0].1);
        let e21 = l3.meta.edges.iter().position(|e| e.to_string() == "2-1").unwrap();
        let m3 = s3.edges[e21].reconstruction_mae;
        let m0 = s0.edges[e21].reconstruction_mae;
        if m3 < m0 {
            wins += 1;
        } else if m3 > m0 {
            losses += 1;
        }
        if seed < 5 {
            println!("seed {seed}: delay {:?} mae3 {m3:.1} mae0 {m0:.1}", s3.detections[0].1);
        }
    }
    let mut sorted: Vec<i64> = delays.iter().map(|d| d.map(i64::from).unwrap_or(9999)).collect();
    sorted.sort();
    println!("median delay {} wins {wins} losses {losses} / {n}", sorted[sorted.len() / 2]);
}
