//! The rational-quadratic spline flow on the SLCP box: a perturbed flow is
//! sampled, its density evaluated, and each layer inverted.

use softcvi::distributions::VariationalFamily;
use softcvi::harness::random_phi;
use softcvi::numeric::RngKey;

fn main() -> softcvi::Result<()> {
    let family = VariationalFamily::spline_flow(4, 8, 32);
    let VariationalFamily::SplineFlow(flow) = &family else { unreachable!() };
    println!("{} with {} parameters", family.descriptor(), family.n_params());
    let phi = random_phi(&family, RngKey::new(3), 0.5);
    let (theta, lq) = family.sample_with_log_prob(&phi, RngKey::new(4), 5)?;
    for (t, l) in theta.rows().zip(&lq) {
        let mut z = t.to_vec();
        let mut err = 0.0f64;
        for layer in 0..flow.layers() {
            let (next, _) = flow.layer_forward(phi.values(), layer, &z);
            let (back, _) = flow.layer_inverse(phi.values(), layer, &next);
            err = back.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(err, f64::max);
            z = next;
        }
        println!("θ = {:>7.3?}  log q = {l:>8.3}  roundtrip error {err:.1e}", t);
    }
    Ok(())
}
