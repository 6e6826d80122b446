use airhockey_core::puck_dynamics::{simulate_trace, PuckState, SimParams, Trace};
use airhockey_core::sysid::{identify, mean_position_error, random_search, BoConfig};
use airhockey_core::table::TableGeometry;
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn make_traces(theta: &SimParams, table: &TableGeometry, n: usize, seed: u64) -> Vec<Trace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let initial = PuckState::new(
                Vector2::new(rng.gen_range(-0.6..0.6), rng.gen_range(-0.35..0.35)),
                Vector2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-6.0..6.0),
            );
            simulate_trace(&initial, theta, table, 0.01, 2.0)
        })
        .collect()
}

fn main() {
    let table = TableGeometry::default();
    // Hidden parameters, noticeably off the defaults but inside bounds.
    let theta_star = SimParams {
        e_long: 0.72,
        e_short: 0.86,
        mu_rim: 0.16,
        mu_table: 0.055,
        k_spin: 0.31,
        d_lin: 0.007,
        d_ang: 0.0032,
    };
    let traces = make_traces(&theta_star, &table, 10, 42);
    let config = BoConfig::default(); // 200 iterations, batch 5

    let t0 = Instant::now();
    let bo = identify(&traces, &table, &config, 1).unwrap();
    let t_bo = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    let rs = random_search(&traces, &table, &config, 1);
    let t_rs = t0.elapsed().as_secs_f64();

    let err = mean_position_error(&bo.theta_best, &traces, &table);
    println!("BO:    {:.1}s best loss {:.3e}", t_bo, bo.best_loss);
    println!("RS:    {:.1}s best loss {:.3e}", t_rs, rs.best_loss);
    println!("BO mean position error: {:.4} m", err);
    println!(
        "BO \u{2264} RS: {}  curve head {:?} tail {:?}",
        bo.best_loss <= rs.best_loss,
        &bo.curve[..3.min(bo.curve.len())],
        &bo.curve[bo.curve.len().saturating_sub(3)..]
    );
}
