//! Effect of the truncation K on u(A_Q) and the decay exponent.

use ainfty_lab::pde::{CoefficientField, SolverOptions};
use ainfty_lab::potential::{truncation_study, Interval};

fn main() -> ainfty_lab::Result<()> {
    let q = Interval::new(0.0, 1.0)?;
    for k in [2.0, 4.0, 8.0] {
        let r = truncation_study(&CoefficientField::identity(), &q, k, 1.0 / 32.0, SolverOptions::default())?;
        println!(
            "K = {k}: u_K {:.5}, u_2K {:.5}, difference {:.2e}, lateral {:.2e}, alpha {:.3}, consistent {}",
            r.u_k, r.u_2k, r.difference, r.lateral_magnitude, r.alpha, r.consistent
        );
    }
    Ok(())
}
