// Train a plain network and a physics-informed one on 64 noisy samples of a
// harmonic field, then compare held-out error and the Laplace residual.

use spectrum_rem::neural::train_mlp;
use spectrum_rem::pinn::{pde_loss, sample_collocation, train_pinn};
use spectrum_rem::rem::{test_mse, Comparison, Tagged};
use spectrum_rem::synth::{benchmark_config, HarmonicBenchmark};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let (train, test) = HarmonicBenchmark::default().generate();
    let config = benchmark_config(0);

    let nn = train_mlp(&train, &config.base)?;
    let pinn = train_pinn(&train, &config)?;

    let probe = sample_collocation(&config);
    println!(
        "residual: nn {:.3e}, pinn {:.3e} (pinn started at {:.3e})",
        pde_loss(&nn.model, &probe, config.stencil_h),
        pinn.trace.pde.last().copied().unwrap_or(f64::NAN),
        pinn.trace.pde[0]
    );
    let tagged = |tag: &str, model| Tagged {
        tag: tag.to_string(),
        inner: model,
    };
    let table = Comparison::new(vec![
        test_mse(&tagged("nn", nn.model), &test)?,
        test_mse(&tagged("pinn", pinn.model), &test)?,
    ]);
    print!("{}", table.table());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
