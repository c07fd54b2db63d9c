//! SoftCVI with α = 1 and the score-corrected SNIS forward-KL gradient are
//! the same estimator: both are evaluated on identical draws here.

use softcvi::distributions::VariationalFamily;
use softcvi::harness::random_phi;
use softcvi::models::ModelTask;
use softcvi::numeric::RngKey;
use softcvi::objectives::{loss_grad, lv_snis_fkl_grad, NegativeSpec, ObjectiveSpec};

fn main() -> softcvi::Result<()> {
    let task = ModelTask::parse("eight-schools", RngKey::new(0))?;
    let family = VariationalFamily::eight_schools();
    let spec = ObjectiveSpec::softcvi(8, NegativeSpec::proposal(1.0));
    for s in 0..5u64 {
        let phi = random_phi(&family, RngKey::new(s), 0.3);
        let key = RngKey::new(100 + s);
        let a = loss_grad(&task, &family, &phi, key, &spec)?.grad;
        let b = lv_snis_fkl_grad(&task, &family, &phi, key, 8)?.grad;
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        println!("point {s}: |grad| max {:.3e}, max difference {diff:.1e}", a.iter().map(|x| x.abs()).fold(0.0, f64::max));
    }
    Ok(())
}
