//! Test measures on a dyadic tree and their doubling constants.
//!
//! Usage: measures [depth]

use ainfty_lab::measure::{make_measure, DataFunction, MeasureSpec};

fn main() -> ainfty_lab::Result<()> {
    let depth: u32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    for spec in ["lebesgue", "bernoulli:0.7", "random-doubling:4,11"] {
        let spec: MeasureSpec = spec.parse()?;
        let mu = make_measure(&spec, 1, depth)?;
        let e = DataFunction::indicator(1, depth, 0..4)?;
        let maximal = mu.dyadic_maximal(&e)?;
        println!(
            "{spec:<24} kappa {:>7.3}  total {:.3}  M(chi_E) at the last cell {:.2e}",
            mu.doubling_constant(),
            mu.total(),
            maximal[mu.num_cells() - 1]
        );
    }
    Ok(())
}
