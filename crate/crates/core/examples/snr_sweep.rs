//! Gradient signal-to-noise ratio of SoftCVI and SNIS-fKL as the shared
//! log-scale moves through the optimum of the 50-d toy normal.

use softcvi::harness::{snr_sweep, sweep_objectives, SweepParam};
use softcvi::numeric::RngKey;

fn main() -> softcvi::Result<()> {
    let opt = 0.5 * 0.8f64.ln();
    let values: Vec<f64> = (-4..=4).map(|i| opt + 0.05 * i as f64).collect();
    let rows = snr_sweep(50, &sweep_objectives(&[1.0, 0.75], 8), SweepParam::LogSigma, &values, 500, RngKey::new(0))?;
    println!("{:<28} {:>8} {:>9} {:>9} {:>8}", "objective", "log σ", "signal", "noise", "snr");
    for r in rows {
        println!("{:<28} {:>8.3} {:>9.4} {:>9.4} {:>8.3}", r.objective, r.value, r.signal, r.noise, r.snr);
    }
    Ok(())
}
