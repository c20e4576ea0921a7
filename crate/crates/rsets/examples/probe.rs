use rayon::prelude::*;
use rsets::construct::{periodize, PeriodizeOptions, SlopeInterval};
use rsets::geometry::Point;
use rsets::maxop::{flat_upper_cert, CertParams, ScaleBand};

fn main() {
    let s_int = SlopeInterval::from_endpoints(0.9, 0.91).unwrap();
    let opts = PeriodizeOptions { n_cap: 500, window: 9, nu_audit_samples: 500, seed: 2 };
    let per = periodize(0.099, 0.05, s_int, &opts).unwrap();
    let band = ScaleBand::full();
    for (p, q) in [(1u32, 2u32), (1, 3), (2, 3), (1, 4)] {
        for zone in [6.0, 10.0, 14.0] {
            let cp = CertParams { zone };
            let g = 64;
            let results: Vec<f64> = (0..g * g)
                .into_par_iter()
                .map(|t| {
                    let (i, j) = (t % g, t / g);
                    let x = Point::new(i as f64 / g as f64 - 0.5, j as f64 / g as f64 - 0.5);
                    flat_upper_cert(&per, x, p, q, &band, &cp)
                })
                .collect();
            let best = results.iter().cloned().fold(f64::INFINITY, f64::min);
            let below = results.iter().filter(|&&c| c <= 0.125).count();
            println!("tan s = {p}/{q}, zone {zone}: best {best:.4}, <=1/8: {below}/{}", g * g);
        }
    }
}
