use std::f64::consts::PI;

use cgle_core::analysis::{default_slack, fit_decay_rate, verify_envelope, verify_rate};
use cgle_core::certificates::{certify_modal_h1, certify_modal_l2, certify_nodal, certify_steering1, certify_volume};
use cgle_core::{
    eigen_system, simulate, Boundary, CgleParams, ControllerSpec, Domain, DomainSpec, Error, InitialCondition,
    RunSettings, SteeringTarget,
};

const DT: f64 = 1e-3;

fn settings(t_final: f64) -> RunSettings {
    RunSettings {
        t_final,
        dt: Some(DT),
        sample_every: 0.05,
    }
}

fn modal_params() -> CgleParams {
    CgleParams {
        lambda: 1.0,
        alpha: 1.0,
        kappa: 1.0,
        beta: 1.0,
        gamma: 0.5,
        p: 2.0,
        mu: 1.0,
        n_controllers: 1,
        ..CgleParams::default()
    }
}

fn pi_domain() -> Domain {
    Domain::new(DomainSpec::interval(PI, 63, Boundary::Dirichlet)).unwrap()
}

#[test]
fn oracle_rate_matches_closed_form() {
    let d = pi_domain();
    let p = CgleParams {
        kappa: 0.0,
        beta: 0.0,
        linear_oracle: true,
        ..modal_params()
    };
    let u0 = InitialCondition::SingleMode { k: 1 }.build(&d).unwrap();
    let run = simulate(&u0, None, &p, &ControllerSpec::Modal, &settings(3.0)).unwrap();
    let fit = fit_decay_rate(&run.record.times, &run.record.l2_sq, 0.5).unwrap();
    assert!((fit.rate - 2.0 * (1.0 - 0.5 + 1.0)).abs() <= 1e-6, "rate {}", fit.rate);
}

#[test]
fn volume_envelope_on_short_run() {
    let d = Domain::new(DomainSpec::interval(1.0, 33, Boundary::Neumann)).unwrap();
    let p = CgleParams {
        gamma: 0.1,
        n_controllers: 4,
        alpha: 0.5,
        beta: 0.5,
        ..modal_params()
    };
    let cert = certify_volume(&p, 1.0);
    assert!(cert.satisfied());
    let u0 = InitialCondition::random_smooth(1).build(&d).unwrap();
    let run = simulate(&u0, None, &p, &ControllerSpec::VolumeElements, &settings(3.0)).unwrap();
    let rep = verify_envelope(&run.record, &cert, default_slack(DT)).unwrap();
    assert!(rep.passed, "worst ratio {}", rep.worst_ratio);
}

#[test]
fn modal_envelope_on_rectangle() {
    let d = Domain::new(DomainSpec::rectangle(PI, PI, 31)).unwrap();
    let p = CgleParams {
        p: 1.0,
        gamma: 2.0,
        mu: 3.0,
        n_controllers: 3,
        ..modal_params()
    };
    let es = eigen_system(&d, 4).unwrap();
    // λ_1 = 2, λ_4 = 8.
    assert_eq!(es.lambda(1), 2.0);
    let cert = certify_modal_l2(&p, &es).unwrap();
    assert!(cert.satisfied());
    assert!((cert.exponent().unwrap() - 2.0 * (1.0 - 2.0 / 8.0) * 2.0).abs() < 1e-9);
    let u0 = InitialCondition::random_smooth(4).build(&d).unwrap();
    let run = simulate(&u0, None, &p, &ControllerSpec::Modal, &settings(2.0)).unwrap();
    let rep = verify_envelope(&run.record, &cert, default_slack(DT)).unwrap();
    assert!(rep.passed, "worst ratio {}", rep.worst_ratio);

    // p = 1 = 4/n − 1 is subcritical in two dimensions.
    let h1 = certify_modal_h1(&p, &es, 2, 0.5 * cert.formula_exponent()).unwrap();
    assert!(h1.satisfied());
    let rate = verify_rate(&run.record.times, &run.record.h1_semi_sq, 0.5 * cert.formula_exponent(), 0.5).unwrap();
    assert!(rate.passed, "fitted {}", rate.fit.rate);
}

#[test]
fn steering_error_rate_within_five_percent() {
    let d = pi_domain();
    let p = CgleParams {
        kappa: 2.0,
        ..modal_params()
    };
    let es = eigen_system(&d, 2).unwrap();
    let cert = certify_steering1(&p, &es).unwrap();
    assert!(cert.satisfied());
    let u0 = InitialCondition::random_smooth(13).build(&d).unwrap();
    let v0 = InitialCondition::random_smooth(11).build(&d).unwrap();
    let run = simulate(
        &u0,
        Some(&v0),
        &p,
        &ControllerSpec::Steering(SteeringTarget::AnySolution),
        &settings(4.0),
    )
    .unwrap();
    let z = run.record.z_l2_sq.as_ref().unwrap();
    let fit = fit_decay_rate(&run.record.times, z, 0.5).unwrap();
    assert!(fit.rate >= 0.95 * cert.formula_exponent(), "fitted {}", fit.rate);
    assert!(verify_envelope(&run.record, &cert, default_slack(DT)).unwrap().passed);
}

#[test]
fn nodal_envelope_with_midpoints() {
    let d = pi_domain();
    let p = CgleParams {
        gamma: 0.2,
        n_controllers: 4,
        alpha: 0.0,
        beta: 0.0,
        ..modal_params()
    };
    let cert = certify_nodal(&p, PI);
    assert!(cert.satisfied());
    let u0 = InitialCondition::random_smooth(5).build(&d).unwrap();
    let run = simulate(&u0, None, &p, &ControllerSpec::Nodal(None), &settings(4.0)).unwrap();
    let rep = verify_envelope(&run.record, &cert, default_slack(DT)).unwrap();
    assert!(rep.passed, "worst ratio {}", rep.worst_ratio);
}

#[test]
fn blow_up_keeps_partial_record() {
    let d = pi_domain();
    let p = CgleParams {
        gamma: 40.0,
        kappa: 0.0,
        beta: 0.0,
        mu: 0.0,
        linear_oracle: true,
        ..modal_params()
    };
    let u0 = InitialCondition::SingleMode { k: 1 }.build(&d).unwrap();
    match simulate(&u0, None, &p, &ControllerSpec::None, &settings(2.0)) {
        Err(Error::Diverged { time, partial }) => {
            assert!(time > 0.3 && time < 0.4, "diverged at {time}");
            assert!(!partial.is_empty());
            assert!(partial.times.last().unwrap() < &time);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}
