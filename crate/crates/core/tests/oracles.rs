use dnad_core::oracle::{barenblatt_oracle, heat_oracle, verify_residual, Barenblatt, BarenblattSetup, HeatSetup};

#[test]
fn heat_oracle_is_second_order() {
    let setup = HeatSetup {
        t1: 0.2,
        ..HeatSetup::default()
    };
    let r = heat_oracle(&setup, &[48, 96]).unwrap();
    assert!(r.runs[1].linf_error < r.runs[0].linf_error);
    let order = r.order_linf.unwrap();
    assert!((1.7..2.4).contains(&order), "order {order}");
    assert!(r.runs.iter().all(|run| run.mass_drift < 1e-12));
}

#[test]
fn barenblatt_oracle_converges() {
    let setup = BarenblattSetup {
        t1: 1.3,
        ..BarenblattSetup::default()
    };
    let r = barenblatt_oracle(&setup, &[64, 128]).unwrap();
    assert!(r.residual.as_ref().unwrap().passed);
    assert!(r.runs[1].l1_error < r.runs[0].l1_error);
    assert!(r.runs[1].l1_error < 0.01);
}

#[test]
fn orthotropic_profile_solves_the_equation_in_two_and_three_dimensions() {
    for dim in [2, 3] {
        let b = Barenblatt::new(dim, 3.0, 1.0).unwrap();
        let reach = b.front(1.5);
        let res = verify_residual(|x, t| b.value(x, t), dim, 3.0, 1.5, reach);
        assert!(res.passed, "dim {dim}: {res:?}");
    }
}
