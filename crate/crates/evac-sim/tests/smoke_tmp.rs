// Temporary closed-loop diagnostics; replaced by the real integration suite.

use evac_sim::domain::SimConfig;
use evac_sim::sim::{coverage_fraction, Simulation};

#[test]
#[ignore]
fn closed_loop_diagnostics() {
    let mut cfg = SimConfig { humans: 250, robots: 16, horizon: 80.0, seed: 1, ..SimConfig::default() };
    if let Ok(v) = std::env::var("EVAC_WALL_GAIN") {
        cfg.position_control.wall_gain = v.parse().unwrap();
    }
    if let Ok(v) = std::env::var("EVAC_DAMPING") {
        cfg.human_damping = v.parse().unwrap();
    }
    if let Ok(v) = std::env::var("EVAC_ETA_MAX") {
        cfg.direction_control.max_turn_rate = v.parse().unwrap();
    }
    if let Ok(v) = std::env::var("EVAC_SEED") {
        cfg.seed = v.parse().unwrap();
    }
    let start = std::time::Instant::now();
    let mut sim = Simulation::new(&cfg).unwrap();
    let mut iter = 0usize;
    while !sim.finished() {
        sim.step().unwrap();
        iter += 1;
        if iter % 100 == 0 {
            let row = sim.metrics().final_row().unwrap();
            let positions: Vec<_> = sim.robots().positions.to_vec();
            let cov = coverage_fraction(&positions, &cfg.domain, 0.15);
            println!(
                "t={:6.1} dens={:8.4} vel={:8.4} force={:9.3} w={:7.4} evac={:6.2} cov={:5.3} speed={:7.4}",
                row.t, row.density_err, row.velocity_err, row.force_err, row.weight_norm,
                row.evac_rate, cov, row.mean_speed
            );
        }
    }
    let elapsed = start.elapsed();
    let row = sim.metrics().final_row().unwrap();
    println!(
        "final: evac={:.2}% dens={:.4} (initial {:.4}) iters={} wall={:.1}s ({:.1} ms/iter)",
        row.evac_rate,
        row.density_err,
        sim.metrics().rows[0].density_err,
        iter,
        elapsed.as_secs_f64(),
        1e3 * elapsed.as_secs_f64() / iter as f64
    );
}
