//! Adaptive Metropolis reference for eight schools with its convergence
//! diagnostics.

use softcvi::models::ModelTask;
use softcvi::numeric::RngKey;
use softcvi::reference::{adaptive_mh, MhConfig};

fn main() -> softcvi::Result<()> {
    let task = ModelTask::parse("eight-schools", RngKey::new(0))?;
    let r = adaptive_mh(&task, &MhConfig::default(), RngKey::new(1))?;
    let names = task.theta_names();
    let (means, sds) = (r.samples.column_means(), r.samples.column_stds());
    println!("{:<8} {:>8} {:>8} {:>7} {:>8}", "param", "mean", "sd", "R-hat", "ESS");
    for j in 0..names.len() {
        println!(
            "{:<8} {:>8.3} {:>8.3} {:>7.3} {:>8.0}",
            names[j], means[j], sds[j], r.diagnostics.r_hat[j], r.diagnostics.ess[j]
        );
    }
    println!("acceptance per chain {:.3?}", r.diagnostics.acceptance);
    Ok(())
}
