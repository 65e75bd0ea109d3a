use std::path::Path;

use pfloc::config::ScenarioConfig;
use pfloc::run::summary_row;
use pfloc_core::metrics::RunSummary;
use pfloc_core::tracker::TrackerMode;

fn load(name: &str) -> pfloc::Scenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.json"));
    ScenarioConfig::load(&path).unwrap().build().unwrap()
}

// N_T, rot, trans, rho_fp, delta_rho_fp, max_fp, rho_fn, rho_pfn, delta_rho_pfn
type Layout = (usize, f64, f64, f64, f64, usize, f64, f64, f64);

const NAMES: [&str; 10] = [
    "single_clean",
    "single_pose",
    "single_pose_fp",
    "single_pose_fp_fn",
    "single_full",
    "multi_clean",
    "multi_pose",
    "multi_pose_fp",
    "multi_pose_fp_fn",
    "multi_full",
];

const LAYOUTS: [Layout; 10] = [
    (1, 0.0, 0.0, 0.0, 0.0, 0, 0.0, 0.0, 0.0),
    (1, 0.1, 0.5, 0.0, 0.0, 0, 0.0, 0.0, 0.0),
    (1, 0.1, 0.5, 0.1, 0.2, 3, 0.0, 0.0, 0.0),
    (1, 0.1, 0.5, 0.1, 0.2, 3, 0.1, 0.0, 0.0),
    (1, 0.1, 0.5, 0.1, 0.2, 3, 0.1, 0.1, 0.2),
    (3, 0.0, 0.0, 0.0, 0.0, 0, 0.0, 0.0, 0.0),
    (3, 0.1, 0.5, 0.0, 0.0, 0, 0.0, 0.0, 0.0),
    (3, 0.1, 0.5, 0.1, 0.2, 3, 0.0, 0.0, 0.0),
    (3, 0.1, 0.5, 0.1, 0.2, 3, 0.1, 0.0, 0.0),
    (3, 0.1, 0.5, 0.1, 0.2, 3, 0.1, 0.1, 0.2),
];

#[test]
fn scenarios_have_the_expected_noise_layout() {
    for (name, expected) in NAMES.iter().zip(&LAYOUTS) {
        let s = load(name);
        let row = summary_row(&s, &RunSummary::default());
        let got: Layout = (
            row.n_t,
            row.max_nu_rot_deg,
            row.max_nu_t_m,
            row.rho_fp,
            row.delta_rho_fp,
            row.max_fp,
            row.rho_fn,
            row.rho_pfn,
            row.delta_rho_pfn,
        );
        assert_eq!(&got, expected, "{name}");
        assert_eq!(s.n_seeds, 10);
        assert_eq!(s.filter.n_particles, 100_000);
        assert_eq!(s.filter.tau_min_obs, 5);
        assert_eq!(s.filter.sd_init, 1000.0);
        assert_eq!(s.tracker.n_dismiss, 5);
        assert_eq!(s.tracker.n_fuse, 5);
        assert_eq!(s.world.trajectory.step_m, 10.0);
        assert_eq!(s.world.trajectory.frame_count(), 101);
        let mode = if expected.0 == 1 { TrackerMode::Single } else { TrackerMode::Multi };
        assert_eq!(s.tracker.mode, mode, "{name}");
    }
}

#[test]
fn multitarget_scenarios_stage_the_targets() {
    let s = load("multi_clean");
    let appear: Vec<f64> = s.world.targets.iter().map(|t| t.appear_after_m).collect();
    assert_eq!(appear, vec![0.0, 200.0, 500.0]);
}

#[test]
fn thin_mast_is_a_tall_narrow_target_at_700_m() {
    let s = load("thin_mast");
    let t = &s.world.targets[0];
    assert_eq!(t.half_extents.as_slice(), &[0.5, 100.0, 0.5]);
    assert!((t.centre.z - 700.0).abs() < 1e-9);
    assert_eq!(s.world.trajectory.step_m, 2.0);
}
