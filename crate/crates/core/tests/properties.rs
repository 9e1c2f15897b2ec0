use nfvsim_core::catalog::Catalog;
use nfvsim_core::energy::{power_multidim, PowerCoefficients, UtilizationSample};
use nfvsim_core::model::{
    pm_utilization, DataCenter, Load, PhysicalMachine, PmId, ResourceVector, VirtualMachine, VmId,
};
use nfvsim_core::policies::{
    drs_imbalance, drs_migrate, ecocloud_score, imbalance_of, nfv_score, probabilistic_place,
    PolicyKind, PolicyParams, Scheduler,
};
use nfvsim_core::rng;
use nfvsim_core::workload::{
    generate_nfvlets_seeded, parse_trace, write_trace, AppType, GeneratorSpec, LengthDistribution,
    LoadTrace, Resource,
};
use proptest::prelude::*;

fn resource() -> impl Strategy<Value = Resource> {
    prop::sample::select(Resource::ALL.to_vec())
}

/// Random data center: hosts of 4 to 20 CU, VMs placed first-fit.
fn datacenter() -> impl Strategy<Value = DataCenter> {
    (
        prop::collection::vec(4u64..=20, 2..8),
        prop::collection::vec((1u64..=6, 0.05f64..=1.0), 1..20),
        any::<u64>(),
    )
        .prop_map(|(hosts, vms, seed)| {
            let pms = hosts
                .iter()
                .enumerate()
                .map(|(i, &cu)| {
                    PhysicalMachine::new(
                        PmId(i),
                        0,
                        ResourceVector::new(cu * 1000, 64_000, 4_000, 10_000),
                        100.0,
                        200.0,
                        1000.0,
                    )
                })
                .collect();
            let vms: Vec<VirtualMachine> = vms
                .iter()
                .enumerate()
                .map(|(i, &(cu, load))| {
                    let mut vm = VirtualMachine::new(
                        VmId(i),
                        0,
                        ResourceVector::new(cu * 1000, 1000, 100, 0),
                        1000.0,
                    );
                    vm.load = Load::uniform(load);
                    vm
                })
                .collect();
            let mut dc = DataCenter::new(pms, vms, 1000.0);
            // spread VMs by a seeded offset so states vary
            let n = dc.pms.len();
            for v in 0..dc.vms.len() {
                for k in 0..n {
                    let pm = PmId(((seed as usize).wrapping_add(v * 7 + k)) % n);
                    if dc.place(VmId(v), pm).is_ok() {
                        break;
                    }
                }
            }
            dc
        })
}

proptest! {
    #[test]
    fn trace_round_trip(values in prop::collection::vec(0u8..=100, 1..200), interval in 1u32..100_000, r in resource()) {
        let trace = LoadTrace::new(r, values, f64::from(interval) / 4.0).unwrap();
        let text = write_trace(&trace);
        let back = parse_trace(&text, r).unwrap();
        prop_assert_eq!(&back, &trace);
        prop_assert_eq!(write_trace(&back), text);
    }

    #[test]
    fn generation_is_deterministic_and_positive(seed in any::<u64>(), count in 0usize..200, kind in 0u8..3) {
        let length_distribution = match kind {
            0 => LengthDistribution::default(),
            1 => LengthDistribution::Normal { mean: 100.0, std_dev: 80.0 },
            _ => LengthDistribution::Poisson { mean: 3.0 },
        };
        let spec = GeneratorSpec { length_distribution, task_count: count, app_type: AppType::Hybrid, seed };
        let a = generate_nfvlets_seeded(&spec).unwrap();
        let b = generate_nfvlets_seeded(&spec).unwrap();
        prop_assert_eq!(a.len(), count);
        prop_assert!(a.iter().all(|n| n.length_mi > 0.0));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn power_is_affine(cpu in 0.0f64..=100.0, mem in 0.0f64..1e9, disk in 0.0f64..1e5, net in 0.0f64..1e5) {
        let c = PowerCoefficients::default();
        let at = |u_cpu, u_mem, u_disk, u_net| {
            power_multidim(&UtilizationSample { u_cpu, u_mem, u_disk, u_net, timestamp: 0.0 }, &c).unwrap()
        };
        let p0 = at(0.0, 0.0, 0.0, 0.0);
        let sum = at(cpu, 0.0, 0.0, 0.0) + at(0.0, mem, 0.0, 0.0) + at(0.0, 0.0, disk, 0.0) + at(0.0, 0.0, 0.0, net) - 3.0 * p0;
        let p = at(cpu, mem, disk, net);
        prop_assert!((p - sum).abs() <= 1e-9 * p);
        let half = at(cpu / 2.0, 0.0, 0.0, 0.0) - p0;
        prop_assert!(((at(cpu, 0.0, 0.0, 0.0) - p0) - 2.0 * half).abs() <= 1e-12 * p);
    }

    #[test]
    fn ecocloud_score_bounded(u in 0.0f64..=1.0, p in 2u32..=4, t_a in 0.5f64..=1.0) {
        let params = PolicyParams { p, t_a, t_b: 0.1, ..Default::default() };
        let s = ecocloud_score(u, &params).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        if u > t_a {
            prop_assert_eq!(s, 0.0);
        }
    }

    #[test]
    fn nfv_score_bounded_and_symmetric(x in 0.0f64..=1.0, ab in 0.2f64..40.0, alpha in 0.2f64..10.0, beta in 0.2f64..10.0) {
        let sym = PolicyParams { alpha: ab, beta: ab, ..Default::default() };
        let s = nfv_score(x, &sym).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        let mirrored = nfv_score(1.0 - x, &sym).unwrap();
        prop_assert!((s - mirrored).abs() < 1e-9);
        let general = nfv_score(x, &PolicyParams { alpha, beta, ..Default::default() }).unwrap();
        prop_assert!((0.0..=1.0).contains(&general));
    }

    #[test]
    fn argmax_is_scale_invariant(dc in datacenter(), k in 1e-6f64..1e6, which in 0u8..2) {
        let mut dc = dc;
        let vm = VmId(dc.vms.len());
        dc.vms.push(VirtualMachine::new(vm, 0, ResourceVector::new(1000, 1, 1, 0), 1000.0));
        let all: Vec<PmId> = dc.pms.iter().map(|p| p.id).collect();
        let params = PolicyParams::default();
        let score = move |u: f64, p: &PolicyParams| if which == 0 { ecocloud_score(u, p) } else { nfv_score(u, p) };
        let base = probabilistic_place(&dc, vm, &all, score, &params, &mut rng::stream(0, 0));
        let scaled = probabilistic_place(&dc, vm, &all, move |u: f64, p: &PolicyParams| score(u, p).map(|s| s * k), &params, &mut rng::stream(0, 0));
        prop_assert_eq!(base, scaled);
    }

    #[test]
    fn utilization_monotone_under_addition(dc in datacenter(), cu in 1u64..4, load in 0.0f64..=1.0) {
        let mut dc = dc;
        let vm = VmId(dc.vms.len());
        let mut extra = VirtualMachine::new(vm, 0, ResourceVector::new(cu * 1000, 100, 10, 0), 1000.0);
        extra.load = Load::uniform(load);
        dc.vms.push(extra);
        for pm in 0..dc.pms.len() {
            let before = pm_utilization(&dc.pms[pm], &dc.vms).unwrap();
            let mut trial = dc.clone();
            if trial.place(vm, PmId(pm)).is_ok() {
                let after = pm_utilization(&trial.pms[pm], &trial.vms).unwrap();
                for i in 0..4 {
                    prop_assert!(after[i] >= before[i]);
                }
            }
        }
    }

    #[test]
    fn drs_moves_strictly_improve(dc in datacenter(), threshold in 0.01f64..0.3) {
        let params = PolicyParams { drs_threshold: threshold, ..Default::default() };
        let start = dc.clone();
        let mut work = dc;
        let decisions = drs_migrate(&mut work, &params, 1, |_, _| true, &mut rng::stream(0, 0)).unwrap();
        prop_assert!(decisions.len() <= start.vms.len());
        let mut replay = start;
        for d in &decisions {
            let g0 = imbalance_of(&replay).unwrap();
            prop_assert!(g0 > threshold);
            replay.migrate(d.vm, d.target_pm, 1).unwrap();
            let g1 = imbalance_of(&replay).unwrap();
            prop_assert!(g1 < g0, "move {d:?} took g from {g0} to {g1}");
        }
        prop_assert!(replay.audit().is_ok());
    }

    #[test]
    fn rebalance_decisions_stay_feasible(dc in datacenter(), kind in 0usize..3, tick in 0u64..20) {
        let kind = PolicyKind::ALL[kind];
        let mut s = Scheduler::new(kind, PolicyParams::default(), 3, rng::stream(tick, 2)).unwrap();
        let decisions = s.rebalance(&dc, tick).unwrap();
        let mut work = dc;
        let mut seen = std::collections::BTreeSet::new();
        for d in &decisions {
            prop_assert_ne!(d.source_pm, d.target_pm);
            prop_assert!(seen.insert(d.vm), "VM {} moved twice", d.vm);
            prop_assert_eq!(work.vm(d.vm).host, Some(d.source_pm));
            work.migrate(d.vm, d.target_pm, tick).unwrap();
        }
        prop_assert!(work.audit().is_ok());
    }

    #[test]
    fn imbalance_is_population_std(utils in prop::collection::vec(0.0f64..=1.0, 1..50)) {
        let g = drs_imbalance(&utils).unwrap();
        // two-pass oracle via pairwise differences: var = sum_{i<j} (x_i - x_j)^2 / n^2
        let n = utils.len() as f64;
        let mut acc = 0.0;
        for i in 0..utils.len() {
            for j in (i + 1)..utils.len() {
                acc += (utils[i] - utils[j]).powi(2);
            }
        }
        prop_assert!((g - (acc / (n * n)).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn catalog_lines_round_trip(cpu in 0u64..200_000, mem in 0u64..1_000_000, disk in 0u64..10_000, p_min in 0.0f64..500.0, extra in 0.0f64..100.0) {
        let mut cat = Catalog::default();
        cat.apply_file(&format!("pm z cpu={}.{:03} memory_mb={mem} storage_gb={disk} p_min={p_min} p_max={}", cpu / 1000, cpu % 1000, p_min + extra)).unwrap();
        let mut back = Catalog { pms: vec![], vms: vec![] };
        back.apply_file(&cat.to_lines().join("\n")).unwrap();
        prop_assert_eq!(back, cat);
    }
}
