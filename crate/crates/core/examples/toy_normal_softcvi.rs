//! Fits the toy normal posterior N(0.8, 0.8) with SoftCVI and prints the
//! fitted location and scale next to the exact values.

use softcvi::harness::{train, ExperimentConfig};
use softcvi::objectives::{NegativeSpec, ObjectiveSpec};

fn main() -> softcvi::Result<()> {
    for alpha in [1.0, 0.75] {
        let mut cfg = ExperimentConfig::new("toy-normal(d=1)", ObjectiveSpec::softcvi(8, NegativeSpec::proposal(alpha)));
        cfg.family = Some("mean-field-normal(dim=1)".into());
        cfg.steps = 5000;
        cfg.optimizer.lr = 0.01;
        cfg.metrics.enabled = false;
        let run = train(&cfg, 0)?;
        println!(
            "alpha {alpha}: mu {:.4} (exact 0.8), sigma {:.4} (exact {:.4}), final loss {:.4}",
            run.final_phi[0],
            run.final_phi[1].exp(),
            0.8f64.sqrt(),
            run.loss_trace.last().map_or(f64::NAN, |t| t.loss)
        );
    }
    Ok(())
}
