//! Build a good cover of a small set and verify it by brute force.

use ainfty_lab::cover::{build_good_cover, verify_cover};
use ainfty_lab::measure::{make_measure, DataFunction, MeasureSpec};

fn main() -> ainfty_lab::Result<()> {
    let mu = make_measure(&MeasureSpec::Bernoulli { p: 0.6 }, 1, 12)?;
    let e = DataFunction::indicator(1, 12, [1000])?;
    let cover = build_good_cover(&mu, &e, 0.2)?;
    println!("k = {}, eps0 = {:.3}, kappa = {:.3}", cover.k(), cover.epsilon0, cover.kappa);
    for l in 1..=cover.k() {
        let level = cover.level(l);
        println!("U_{l}: {} cubes, {} cells", level.cubes.len(), level.cells.count());
    }
    let report = verify_cover(&mu, &cover)?;
    for c in &report.checks {
        println!("{:<28} {} (worst {:.3e})", c.name, if c.passed { "ok" } else { "FAILED" }, c.worst);
    }
    for row in &report.decay {
        println!("gap {}: worst {:.3e} <= {:.3e}", row.gap, row.worst_ratio, row.bound);
    }
    Ok(())
}
