//! Slices one moving 4D Gaussian at several times: the conditional mean
//! travels with the velocity it was built from, the spatial covariance stays
//! fixed and the temporal weight fades away from the center time.
//!
//! cargo run --example temporal_slice

use hybrid_gs::io::moving_gaussian;
use hybrid_gs::math::condition_at_time;
use hybrid_gs::ShColor;
use nalgebra::Vector3;

fn main() -> hybrid_gs::Result<()> {
    let vel = Vector3::new(0.8, 0.0, -0.3);
    let color = ShColor::from_rgb(0, [0.9, 0.4, 0.1])?;
    let g = moving_gaussian(Vector3::new(0.0, 0.2, 0.0), 0.5, vel, 0.05, 0.15, 0.9, color)?;
    let cov = g.covariance();
    println!("temporal extent exp(s_t) = {:.3}, leakage {:.3}", g.temporal_scale(), g.rotation().leakage());
    println!("   t     mean_x   mean_y   mean_z   weight  spatial_var_x");
    for k in 0..=10 {
        let t = k as f64 / 10.0;
        let s = condition_at_time(&g.mean4(), &cov, t)?;
        println!(
            "{t:4.1}  {:8.4} {:8.4} {:8.4}  {:7.4}  {:.6}",
            s.mean3.x,
            s.mean3.y,
            s.mean3.z,
            s.temporal_weight,
            s.cov3.matrix()[(0, 0)]
        );
    }
    Ok(())
}
