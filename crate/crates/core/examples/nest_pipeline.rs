//! Square function, Carleson and L^p quantities along a shrinking nest.
//!
//! Usage: nest_pipeline [operator] [h]

use std::time::Instant;

use ainfty_lab::ainfty::{fit_c0, prop11_report, run_nest, thm110_report, thm116_report, NestConfig, THM110_C0};
use ainfty_lab::pde::operator_by_name;

fn main() -> ainfty_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "identity".into());
    let field = operator_by_name(&name, &[])?;
    let mut cfg = NestConfig::default();
    if let Some(h) = args.next().and_then(|s| s.parse().ok()) {
        cfg.h = h;
    }
    let start = Instant::now();
    let run = run_nest(&field, &cfg)?;
    println!("{}: omega(Q) {:.4}  kappa {:.3}  in {:.1?}", name, run.omega_q, run.kappa, start.elapsed());
    println!("{:>9} {:>10} {:>4} {:>3} {:>10} {:>8} {:>10} {:>10} {:>7} {:>6}", "target", "omega(E)", "kbar", "k", "min S^2", "ratio", "A_emp", "C_emp", "theta", "alpha");
    for r in &run.rows {
        println!(
            "{:>9.1e} {:>10.3e} {:>4} {:>3} {:>10.4e} {:>8.4} {:>10.4e} {:>10.4e} {:>7.3} {:>6.3} {}",
            r.target, r.omega_e, r.kbar, r.k, r.min_s2, r.min_s2 / r.kbar as f64, r.a_emp, r.c_emp, r.theta, r.alpha,
            r.skipped.as_deref().unwrap_or("")
        );
    }
    println!("fitted c0 = {:.4e}", fit_c0(&run));
    for (name, ok, failed) in [
        ("prop11", prop11_report(&run).passed(), prop11_report(&run).failed().len()),
        ("thm110", thm110_report(&run, THM110_C0).passed(), thm110_report(&run, THM110_C0).failed().len()),
        ("thm116", thm116_report(&run).passed(), thm116_report(&run).failed().len()),
    ] {
        println!("{name}: {} ({failed} failed assertions)", if ok { "pass" } else { "FAIL" });
    }
    println!("{}", serde_json::to_string_pretty(&prop11_report(&run).summary).unwrap());
    Ok(())
}
