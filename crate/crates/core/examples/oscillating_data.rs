//! Oscillating datum F from a cover and its martingale square-sum
//! certificate.

use ainfty_lab::cover::build_good_cover;
use ainfty_lab::measure::{make_measure, DataFunction, MeasureSpec};
use ainfty_lab::oscillate::{build_oscillating_data, certify, oscillation_terms};

fn main() -> ainfty_lab::Result<()> {
    let mu = make_measure(&MeasureSpec::RandomDoubling { kappa: 3.0, seed: 4 }, 1, 14)?;
    let e = DataFunction::indicator(1, 14, 5000..5003)?;
    let cover = build_good_cover(&mu, &e, 0.15)?;
    let f = build_oscillating_data(&cover);
    let sizes: Vec<usize> = oscillation_terms(&cover).iter().map(|t| t.count()).collect();
    println!("k = {}, term sizes {sizes:?}, |F| = {}", cover.k(), f.count());
    let cert = certify(&mu, &cover, &f, &e)?;
    println!(
        "beta0 {:.4}, jump floor {:.4}, min square sum {:.4}, M {:.4}, feasible {}, bound asserted {}",
        cert.beta0, cert.jump_floor, cert.min_square_sum, cert.m, cert.feasible, cert.all_jumps_meet_beta0
    );
    Ok(())
}
