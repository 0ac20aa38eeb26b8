// scratch debug: trace 3-pulse extraction
use siglog_core::kinematics::KinematicSeries;
use siglog_core::lognorm::*;

fn main() {
    let truth = [
        LognormalComponent { t0: 0.02, d: 6.0, mu: -1.6, sigma: 0.30 },
        LognormalComponent { t0: 0.16, d: 9.0, mu: -1.4, sigma: 0.35 },
        LognormalComponent { t0: 0.34, d: 5.0, mu: -1.7, sigma: 0.25 },
    ];
    for c in &truth {
        println!("truth: t0={:.3} mode={:.4} peak={:.2}", c.t0, c.peak_time(), c.peak_speed());
    }
    let dt: f64 = 1.0 / 480.0;
    let n = (1.2 / dt).ceil() as usize;
    let grid: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    let speed = synthesize(&truth, &grid);
    let series = KinematicSeries::from_speed(grid.clone(), speed.clone());
    for maxc in 1..=6 {
        let cfg = FitConfig { max_components: maxc, snr_target_db: 200.0, min_gain_db: 0.5, ..Default::default() };
        let fit = extract(&series, &cfg).unwrap();
        println!("maxc={} C={} snr={:.2}", maxc, fit.n_components(), fit.snr_db);
        for c in &fit.components {
            println!("   t0={:.4} d={:.3} mu={:.3} sigma={:.3} mode={:.4} peak={:.2}", c.t0, c.d, c.mu, c.sigma, c.peak_time(), c.peak_speed());
        }
    }
}
