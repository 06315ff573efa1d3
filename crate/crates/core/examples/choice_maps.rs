//! Choice maps, conjugates and the Fenchel coupling for built-in and custom kernels.

use ftrl_lab::prelude::*;
use ftrl_lab::regularizer::CustomKernel;

fn main() -> Result<()> {
    let y = [0.8, 0.1, -0.4];
    let cubic = CustomKernel::new(
        "quadratic-plus-cubic",
        |x| 0.5 * x * x + x * x * x,
        |x| x + 3.0 * x * x,
        |x| 1.0 + 6.0 * x,
        false,
    )?;
    let kernels = [
        Kernel::Entropy,
        Kernel::Quadratic,
        Kernel::entropy_plus_quadratic(),
        Kernel::scaled_quadratic(2.0)?,
        cubic,
    ];
    for k in &kernels {
        let x = k.choice_map(&y)?;
        println!(
            "{:>22}: steep={:<5} K={:.1}  Q(y)={:.5?}  h*(y)={:.5}  F(e_0, y)={:.5}",
            k.name(),
            k.is_steep(),
            k.strong_convexity(),
            x,
            k.conjugate(&y)?,
            k.fenchel(&[1.0, 0.0, 0.0], &y)?,
        );
    }

    let generic = Kernel::Quadratic.as_generic().choice_map(&y)?;
    let closed = Kernel::Quadratic.choice_map(&y)?;
    let gap = generic.iter().zip(&closed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("bisection vs closed-form projection: max gap {gap:.2e}");

    match Kernel::Entropy.bregman(&[1.0, 0.0, 0.0], &[0.0, 0.5, 0.5])? {
        Divergence::Finite(d) => println!("D(e_0, x) = {d}"),
        Divergence::Infinite => println!("D(e_0, x) = +inf (support not included, steep kernel)"),
    }
    Ok(())
}
