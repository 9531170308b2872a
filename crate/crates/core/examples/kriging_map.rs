// Fit a variogram to scattered samples of a smooth field, krige a map and
// report the kriging variance at a sampled and an unsampled location.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectrum_rem::geostat::{self, KrigingModel, Sample2D, VariogramKind};
use spectrum_rem::rem::{self, MapGrid};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let field = |x: f64, y: f64| -95.0 + 8.0 * (1.5 * x).sin() * (1.2 * y).cos();
    let samples: Vec<Sample2D> = (0..120)
        .map(|_| {
            let (x, y) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            Sample2D::new(x, y, field(x, y))
        })
        .collect();

    let ev = geostat::empirical_variogram(&samples, 12, geostat::default_max_lag(&samples))?;
    let fit = geostat::fit_variogram(&ev, VariogramKind::Exponential)?;
    println!(
        "exponential variogram: nugget {:.3}, sill {:.2}, range {:.3} (objective {:.3e})",
        fit.model.nugget, fit.model.sill, fit.model.range_len, fit.objective
    );

    let model = KrigingModel::fit(&samples, fit.model)?;
    let at_sample = model.predict(samples[0].x, samples[0].y);
    let far = model.predict(0.999, -0.999);
    println!("at a sample: {:.3} (variance {:.2e})", at_sample.value, at_sample.variance);
    println!("in a corner: {:.3} (variance {:.2e})", far.value, far.variance);

    let map = rem::predict_map(&model, &MapGrid::new((-1.0, 1.0, -1.0, 1.0), 32, 32)?)?;
    let err = map
        .grid
        .centers()
        .iter()
        .zip(map.values.iter().flatten())
        .map(|(&(x, y), v)| (v - field(x, y)).powi(2))
        .sum::<f64>()
        / (32.0 * 32.0);
    println!("32x32 map, MSE against the true field: {err:.4} dB^2");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
