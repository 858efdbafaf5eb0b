use satisfice::conic::{SolveOptions, SolveStatus};
use satisfice_apps::lotsizing::{
    formulation_size, nominal_cost, run_lotsizing, LotSizingInstance, Method, Mode,
};

fn both(inst: &LotSizingInstance, mode: Mode, param: f64) -> (f64, f64) {
    let opts = SolveOptions::default();
    let p = run_lotsizing(inst, mode, Method::Primal, param, &opts).unwrap();
    let d = run_lotsizing(inst, mode, Method::Dual, param, &opts).unwrap();
    assert_eq!(p.status, SolveStatus::Optimal);
    assert_eq!(d.status, SolveStatus::Optimal);
    (p.objective, d.objective)
}

#[test]
fn satisficing_primal_and_dual_agree_on_five_nodes() {
    let inst = LotSizingInstance::generate(5, 1).unwrap();
    let tau = 1.5 * nominal_cost(&inst, &SolveOptions::default()).unwrap();
    let (p, d) = both(&inst, Mode::Satisficing, tau);
    eprintln!("satisficing k: primal {p} dual {d}");
    assert!((p - d).abs() <= 1e-5, "primal {p} dual {d}");
    assert!(p > 0.0);
}

#[test]
fn robust_primal_and_dual_agree_on_five_nodes() {
    let inst = LotSizingInstance::generate(5, 1).unwrap();
    let (p, d) = both(&inst, Mode::Robust, 50.0);
    eprintln!("robust: primal {p} dual {d}");
    assert!((p - d).abs() <= 1e-5 * (1.0 + p.abs()), "primal {p} dual {d}");
}

#[test]
fn dual_formulations_are_smaller_from_ten_nodes() {
    for n in [10, 15, 20] {
        let inst = LotSizingInstance::generate(n, 0).unwrap();
        for (mode, param) in [(Mode::Robust, 10.0 * n as f64), (Mode::Satisficing, 1000.0)] {
            let p = formulation_size(&inst, mode, Method::Primal, param);
            let d = formulation_size(&inst, mode, Method::Dual, param);
            eprintln!("n={n} {mode:?}: primal {p:?} dual {d:?}");
            assert!(d.size() < p.size());
        }
    }
}
