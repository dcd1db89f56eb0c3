// probe: trendless periodic dose-response fixture, varying n and sigma
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tiltsmooth::estimators::FitContext;
use tiltsmooth::realdata::{fit_4pl_robust, Loss};
use tiltsmooth::{EstimatorSpec, Interval, Kernel, OptimizerConfig, Sample};

fn truth(x: f64) -> f64 {
    50.0 + 15.0 * (2.0 * std::f64::consts::PI * 3.0 * (x - 1.0) / 99.0).sin()
}

fn main() {
    for (n, sigma, seeds) in [(600usize, 7.5f64, 50u64), (1000, 7.5, 25), (600, 10.0, 25)] {
        let doses: Vec<f64> = (0..n).map(|i| 1.0 + 99.0 * i as f64 / (n - 1) as f64).collect();
        let opt = OptimizerConfig { grid_points: 201, ..OptimizerConfig::default() };
        let (mut joint, mut a, mut b, mut c) = (0, 0, 0, 0);
        for seed in 0..seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
            let y: Vec<f64> = doses
                .iter()
                .map(|&d| truth(d) + sigma * rng.random_range(-1.732..1.732))
                .collect();
            let interval = Interval::new(doses[0], doses[n - 1]).unwrap();
            let sample = Sample::new(doses.clone(), y.clone(), interval).unwrap();
            let mut ctx = FitContext::new(&sample, Kernel::Gaussian, opt.clone());
            let tmse = |pred: &[f64]| {
                pred.iter().zip(&doses).map(|(p, &d)| (p - truth(d)).powi(2)).sum::<f64>() / n as f64
            };
            let m_tll = tmse(&ctx.fit(EstimatorSpec::TiltedLl { nodes: 4 }).unwrap().predict(&doses).unwrap());
            let m_ll = tmse(&ctx.fit(EstimatorSpec::Ll).unwrap().predict(&doses).unwrap());
            let m_io = tmse(&ctx.fit(EstimatorSpec::Io).unwrap().predict(&doses).unwrap());
            let (fit4, _) = fit_4pl_robust(&doses, &y, Loss::Huber { delta: None }).unwrap();
            let m_4pl = tmse(&doses.iter().map(|&d| fit4.eval(d)).collect::<Vec<_>>());
            if m_tll <= m_ll { a += 1; }
            if m_ll <= m_io { b += 1; }
            if m_tll <= m_ll && m_ll <= m_io { joint += 1; }
            if m_tll <= m_4pl { c += 1; }
        }
        println!("n={n} sigma={sigma}: tll<=ll {a}/{seeds}  ll<=io {b}/{seeds}  joint {joint}/{seeds}  tll<=4pl {c}/{seeds}");
    }
}
