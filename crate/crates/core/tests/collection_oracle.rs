use std::f64::consts::FRAC_PI_2;

use ioncollect::collection::*;
use ioncollect::optics::{Aperture, Point3, Surface};
use ioncollect::presets;
use rand::{Rng, SeedableRng};

#[test]
fn open_caps_match_closed_form_within_three_sigma() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for k in 0..10 {
        let theta = rng.random_range(0.1..FRAC_PI_2 - 0.1);
        let g = CollectionGeometry {
            mirror: Surface::sphere(
                20.0,
                -10.0,
                Aperture::Circular {
                    radius_mm: presets::mirror_aperture_radius(20.0, theta.sin()),
                },
            )
            .unwrap(),
            ion: Point3::origin(),
            occluders: vec![],
            scatter: ScatterModel::Fraction { fraction: 0.0 },
        };
        let r = solid_angle_mc(&g, 1_000_000, k).unwrap();
        let exact = cap_solid_angle(theta).unwrap();
        assert!(
            (r.total_sr - exact).abs() < 3.0 * r.total_stderr_sr,
            "θ = {theta}: {} vs {exact}",
            r.total_sr
        );
        assert!((r.analytic_total_sr - exact).abs() < 1e-9);
    }
}

#[test]
fn trap_budget_reproduces_published_figures() {
    let r = solid_angle_mc(&presets::trap_geometry(), 2_000_000, 1).unwrap();
    assert!((r.total_sr - r.analytic_total_sr).abs() < 0.02 * r.analytic_total_sr);
    assert!((r.blocked_sr - 1.27).abs() < 0.127);
    assert!((r.effective_sr - 1.39).abs() < 0.139);
    assert!((r.effective_na - 0.63).abs() < 0.02);
}

#[test]
fn square_cut_outline_is_reported_larger() {
    let mut g = presets::trap_geometry();
    g.mirror = presets::square_cut_mirror_surface(20.0).unwrap();
    let square = aperture_solid_angle(&g, 720);
    let circle = aperture_solid_angle(&presets::trap_geometry(), 720);
    assert!(square > circle);
    assert!((square - 2.85).abs() < 0.01, "{square}");
}
