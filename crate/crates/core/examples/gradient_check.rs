// Check reverse-mode gradients against central differences, and the order of
// the five-point Laplacian stencil, on a small random network.

use spectrum_rem::geostat::Sample2D;
use spectrum_rem::neural::{self, init_model_scaled};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut model = init_model_scaled(&[2, 8, 8, 1], 5, 1.5)?;
    model.z_mean = -90.0;
    model.z_std = 4.0;
    let batch: Vec<Sample2D> = (0..10)
        .map(|i| {
            let t = i as f64 / 10.0;
            Sample2D::new(t - 0.5, 0.3 - t, -92.0 + 6.0 * t)
        })
        .collect();

    let grad = neural::param_gradients(&model, &batch)?;
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..model.n_params() {
        let mut plus = model.clone();
        plus.params_mut()[i] += step;
        let mut minus = model.clone();
        minus.params_mut()[i] -= step;
        let fd = (neural::data_loss(&plus, &batch) - neural::data_loss(&minus, &batch)) / (2.0 * step);
        worst = worst.max((grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-8));
    }
    println!("{} parameters, worst relative gradient error {worst:.2e}", model.n_params());

    // The exact Laplacian is estimated from a much finer stencil.
    let (x, y) = (0.2, -0.1);
    let reference = neural::input_laplacian(&model, x, y, 1e-3);
    for h in [0.2, 0.1, 0.05] {
        let err = (neural::input_laplacian(&model, x, y, h) - reference).abs();
        println!("h = {h:<5} error {err:.3e}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
