//! Coverage curves of an exact, an overconfident and a conservative normal
//! q against the analytic toy posterior.

use softcvi::distributions::VariationalFamily;
use softcvi::metrics::evaluate;
use softcvi::models::ModelTask;
use softcvi::numeric::RngKey;
use softcvi::reference::analytic_posterior;

fn main() -> softcvi::Result<()> {
    let task = ModelTask::parse("toy-normal(d=2)", RngKey::new(0))?;
    let reference = analytic_posterior(&task, 10_000, RngKey::new(1))?;
    let family = VariationalFamily::mean_field_normal(2);
    for (label, scale) in [("exact", 1.0), ("overconfident", 0.5), ("conservative", 2.0)] {
        let mut phi = family.init_params(RngKey::new(0));
        phi.block_mut("loc").expect("loc").fill(0.8);
        phi.block_mut("log_scale").expect("log_scale").fill((scale * 0.8f64.sqrt()).ln());
        let m = evaluate(&family, &phi, &reference, 10_000, RngKey::new(2))?;
        println!(
            "{label:<14} miscalibration {:+.3}  reference log-prob {:.3}  forward KL {:.3}",
            m.miscalibration,
            m.reference_log_prob.value,
            m.forward_kl.unwrap_or(f64::NAN)
        );
        let at = |g: f64| m.coverage.nominal.iter().position(|n| (n - g).abs() < 1e-9).map(|i| m.coverage.actual[i]);
        println!("{:<14} coverage at 0.5 / 0.9: {:.3?} / {:.3?}", "", at(0.5), at(0.9));
    }
    Ok(())
}
