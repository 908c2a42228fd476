use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BusType, GridModel, Injections};

/// Uniform box sampling of bus demand around the base case.
///
/// Each bus draws one factor `u ~ U[1 - spread, 1 + spread]` applied to both its P and Q
/// demand, so power factors are preserved. Non-slack generator dispatch is rescaled by the
/// ratio of sampled to base total active demand.
pub fn sample_operating_points(
    grid: &GridModel,
    spread: f64,
    count: usize,
    seed: u64,
) -> Vec<Injections> {
    assert!((0.0..=1.0).contains(&spread), "spread must lie in [0, 1]");
    let base = Injections::base(grid);
    let base_total: f64 = base.p_load.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut inj = base.clone();
            for i in 0..grid.n_buses() {
                let u = 1.0 - spread + 2.0 * spread * rng.random::<f64>();
                inj.p_load[i] *= u;
                inj.q_load[i] *= u;
            }
            let total: f64 = inj.p_load.iter().sum();
            let ratio = if base_total != 0.0 {
                total / base_total
            } else {
                1.0
            };
            for (k, g) in grid.generators.iter().enumerate() {
                if grid.buses[g.bus].bus_type != BusType::Slack {
                    inj.p_gen[k] = base.p_gen[k] * ratio;
                }
            }
            inj
        })
        .collect()
}
