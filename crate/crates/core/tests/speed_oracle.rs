use std::sync::Arc;

use quietvoyage_core::geo::{BathymetryGrid, Environment, GeoPoint, PlanarPoint, RegionMask};
use quietvoyage_core::noise_source::{ShipClass, ShipSpec};
use quietvoyage_core::propagation::DirectTl;
use quietvoyage_core::route_planner::Route;
use quietvoyage_core::speed_optimizer::{
    optimize_speeds, tdt, ExposureModel, GaConfig, VoyageConstraints, DEFAULT_TABLE_STEP_M,
};
use quietvoyage_core::wildlife::MammalState;

fn setup() -> (Environment<f64>, Route, Vec<MammalState>, ShipSpec) {
    let g = BathymetryGrid::from_fn(47.5, -124.0, 0.02, 91, 51, |_: f64, _: f64| 200.0).unwrap();
    let m = RegionMask::derive(&g, None, None).unwrap();
    let env = Environment::new(g, m, 10.0).unwrap();
    let start = GeoPoint::surface(47.55, -123.5);
    let route = Route::from_planar(start, &[PlanarPoint::new(0.0, 0.0), PlanarPoint::new(0.0, 72.0 * 1852.0)]).unwrap();
    let mammals = vec![
        MammalState::stationary(0, GeoPoint::surface(47.95, -123.45).with_depth(20.0)),
        MammalState { id: 1, position: GeoPoint::surface(48.4, -123.56).with_depth(5.0), speed_kt: 1.5, heading_deg: 200.0 },
    ];
    let ship = ShipSpec {
        name: "bulk".into(),
        ais_type_id: 70,
        ship_class: ShipClass::Other,
        length_ft: 684.97,
        v_min_kt: 8.0,
        v_max_kt: 16.0,
    };
    (env, route, mammals, ship)
}

#[test]
fn ga_matches_three_level_exhaustive_search() {
    let (env, route, mammals, ship) = setup();
    let tl = DirectTl { grid: Arc::clone(&env.grid) };
    let eta = 6.0;
    let legs = 6;
    let model = ExposureModel::build(&route, &mammals, eta, legs, &ship, &tl, &env, DEFAULT_TABLE_STEP_M).unwrap();
    let c = VoyageConstraints::new(eta, 12.0 * eta, 8.0, 16.0);
    let dt = eta / legs as f64;

    let levels = [8.0, 12.0, 16.0];
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(legs as u32) {
        let v: Vec<f64> = (0..legs).map(|i| levels[code / 3usize.pow(i as u32) % 3]).collect();
        if c.violation_m(tdt(&v, dt)) == 0.0 {
            best = best.min(model.objective(&v).unwrap());
        }
    }

    let ga = GaConfig { population: 300, max_generations: 150, seed: 7, ..GaConfig::default() };
    let out = optimize_speeds(&model, &c, &ga, None).unwrap();
    let j = out.objective_db.unwrap();
    assert!(out.profile.satisfies(&c));
    assert!(j <= best + 0.5, "GA {j} vs exhaustive {best}");
    assert!(j <= out.constant_objective_db.unwrap() + 1e-9);

    // same seed, same answer
    let again = optimize_speeds(&model, &c, &ga, None).unwrap();
    assert_eq!(again.profile, out.profile);
}

#[test]
fn unique_feasible_profile_is_returned() {
    let (env, route, mammals, ship) = setup();
    let tl = DirectTl { grid: Arc::clone(&env.grid) };
    let model = ExposureModel::build(&route, &mammals, 4.5, 6, &ship, &tl, &env, DEFAULT_TABLE_STEP_M).unwrap();
    let c = VoyageConstraints::new(4.5, 72.0, 8.0, 16.0);
    let out = optimize_speeds(&model, &c, &GaConfig { population: 50, max_generations: 20, ..GaConfig::default() }, None)
        .unwrap();
    assert!(out.profile.speeds_kt.iter().all(|&v| (v - 16.0).abs() < 1e-6));
}

#[test]
fn no_mammals_gives_constant_speed() {
    let (env, route, _, ship) = setup();
    let tl = DirectTl { grid: Arc::clone(&env.grid) };
    let model = ExposureModel::build(&route, &[], 6.0, 6, &ship, &tl, &env, DEFAULT_TABLE_STEP_M).unwrap();
    let c = VoyageConstraints::new(6.0, 72.0, 8.0, 16.0);
    let out = optimize_speeds(&model, &c, &GaConfig::default(), None).unwrap();
    assert_eq!(out.profile.speeds_kt, vec![12.0; 6]);
    assert_eq!(out.objective_db, None);
}
