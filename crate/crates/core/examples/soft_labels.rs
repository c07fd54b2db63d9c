//! Soft labels and classifier logits for one contrast set on the toy task.

use softcvi::distributions::VariationalFamily;
use softcvi::models::ModelTask;
use softcvi::numeric::RngKey;
use softcvi::objectives::{classifier_logits, compute_labels, draw_contrast_set, NegativeSpec};

fn main() -> softcvi::Result<()> {
    let task = ModelTask::parse("toy-normal(d=2)", RngKey::new(0))?;
    let family = VariationalFamily::mean_field_normal(2);
    let phi = family.init_params(RngKey::new(1));
    let set = draw_contrast_set(&task, &family, &phi, RngKey::new(2), 6)?;

    for neg in [NegativeSpec::proposal(1.0), NegativeSpec::proposal(0.75), NegativeSpec::proposal(0.0), NegativeSpec::joint(1.0)] {
        let y = compute_labels(&set, &neg)?;
        let z = classifier_logits(&family, &phi, &set, &neg);
        println!("{neg:?}");
        println!("  labels {:?}", round(&y));
        println!("  logits {:?}", round(&z));
    }
    Ok(())
}

fn round(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}
