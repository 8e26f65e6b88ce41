use cfmimo::association::{run_baseline, run_sua, AssociationMatrix};
use cfmimo::channel::LinkTable;
use cfmimo::net_metrics::{clutter_counts, energy_total, transmission_delay, x_sweep_gain, EnergyModel, SPEED_OF_LIGHT};
use cfmimo::scenario::{distance, generate_deployment, SystemConfig};
use proptest::prelude::*;

#[test]
fn every_ue_waits_less_under_sua() {
    let cfg = SystemConfig::default();
    let dep = generate_deployment(&cfg).unwrap();
    let sua = run_sua(&cfg, &dep).unwrap();
    let base = run_baseline(&cfg, &dep);
    let ds = transmission_delay(&sua.links, &sua.assoc).unwrap();
    let db = transmission_delay(&base.links, &base.assoc).unwrap();
    for (k, (s, b)) in ds.iter().zip(&db).enumerate() {
        assert!(s < b, "UE {k}: {s} vs {b}");
    }
}

#[test]
fn nearer_ap_lowers_the_mean_delay() {
    let cfg = SystemConfig { l: 12, k: 3, ..Default::default() };
    let dep = generate_deployment(&cfg).unwrap();
    let links = LinkTable::new(&cfg, &dep);
    for k in 0..cfg.k {
        let mut order: Vec<usize> = (0..cfg.l).collect();
        order.sort_by(|&i, &j| links.dist[links.idx(i, k)].total_cmp(&links.dist[links.idx(j, k)]));
        let mut a = AssociationMatrix::zeros(cfg.l, cfg.k);
        for q in 0..cfg.k {
            a.a[order[cfg.l - 1] * cfg.k + q] = true;
            a.a[order[cfg.l - 2] * cfg.k + q] = true;
        }
        let before = transmission_delay(&links, &a).unwrap()[k];
        a.a[order[0] * cfg.k + k] = true;
        let after = transmission_delay(&links, &a).unwrap()[k];
        assert!(after < before);
        let d = distance(dep.aps[order[0]].pos, dep.ues[k].pos, cfg.pathloss.d_0);
        assert!((links.dist[links.idx(order[0], k)] - d).abs() < 1e-12);
    }
    assert!((300.0 / SPEED_OF_LIGHT - 1.000_692_4e-6).abs() < 1e-12);
}

#[test]
fn energy_grows_with_load() {
    let e = |k| {
        let cfg = SystemConfig { k, ..Default::default() };
        let dep = generate_deployment(&cfg).unwrap();
        energy_total(&run_sua(&cfg, &dep).unwrap().assoc, &cfg.energy)
    };
    assert!(e(50) > e(30));
}

#[test]
fn energy_is_linear_in_the_static_power() {
    let cfg = SystemConfig::default();
    let dep = generate_deployment(&cfg).unwrap();
    let a = run_sua(&cfg, &dep).unwrap().assoc;
    let m = EnergyModel::default();
    let stat = |p| energy_total(&a, &EnergyModel { p_static: p, ..m }) - energy_total(&a, &EnergyModel { p_static: 0.0, ..m });
    assert!((stat(4.0) - 2.0 * stat(2.0)).abs() < 1e-15);
    assert_eq!(energy_total(&AssociationMatrix::zeros(4, 3), &m), 0.0);
}

#[test]
fn clutter_counts_without_scatterers_are_zero() {
    let cfg = SystemConfig { clutter_density: 0.0, ..Default::default() };
    let dep = generate_deployment(&cfg).unwrap();
    let base = run_baseline(&cfg, &dep);
    let c = clutter_counts(&cfg, &dep, &base.assoc);
    assert_eq!((c.min, c.max, c.mean), (0, 0, 0.0));
    assert_eq!(c.per_link.len(), cfg.l * cfg.k);
}

#[test]
fn sweep_has_a_knee_and_ideal_reference() {
    let cfg = SystemConfig { l: 40, k: 10, ..Default::default() };
    let xs: Vec<usize> = (1..=10).collect();
    let s = x_sweep_gain(&cfg, &xs, 5).unwrap();
    assert_eq!(s.points[0].real_gain_db, 0.0);
    assert_eq!(s.points[0].ideal_gain_db, 0.0);
    assert!((s.points[9].ideal_gain_db - 10.0).abs() < 1e-12);
    assert!(s.points.iter().all(|p| p.real_gain_db.is_finite()));
    let best = s.points.iter().map(|p| p.real_gain_db).fold(f64::NEG_INFINITY, f64::max);
    let at_knee = s.points.iter().find(|p| p.x == s.knee).unwrap();
    assert_eq!(at_knee.real_gain_db, best);
    for p in s.points.iter().filter(|p| p.x > s.knee) {
        assert!(p.ideal_gain_db >= p.real_gain_db);
    }
    assert!(x_sweep_gain(&cfg, &[0], 1).is_err());
    assert!(x_sweep_gain(&cfg, &[40], 1).is_err());
    assert!(x_sweep_gain(&cfg, &[2], 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sua_never_costs_more_energy(seed in any::<u64>(), k in 5usize..40) {
        let cfg = SystemConfig { seed, k, ..Default::default() };
        let dep = generate_deployment(&cfg).unwrap();
        let sua = run_sua(&cfg, &dep).unwrap();
        let base = run_baseline(&cfg, &dep);
        prop_assert!(energy_total(&sua.assoc, &cfg.energy) <= energy_total(&base.assoc, &cfg.energy));
        let again = clutter_counts(&cfg, &dep, &sua.assoc);
        prop_assert_eq!(again, clutter_counts(&cfg, &dep, &sua.assoc));
    }
}
