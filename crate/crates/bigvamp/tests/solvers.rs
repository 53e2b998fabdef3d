use bigvamp::model::{generate_instance, nrmse, ChannelSpec, PriorSpec, ProblemDims, RunConfig};
use bigvamp::solver::{run_baseline_amp, run_bigvamp, run_bivamp, Termination};
use bigvamp::state_evolution::{run_se, se_predicted_nrmse, SEParams, SeMode};
use bigvamp::Error;

const GAUSS: PriorSpec = PriorSpec::Gaussian { mean: 0.0, var: 1.0 };

fn gaussian_nrmse(snr: f64, seed: u64) -> f64 {
    let dims = ProblemDims::new(120, 80, 4).unwrap();
    let inst = generate_instance(dims, GAUSS, GAUSS, ChannelSpec::awgn(1.0), snr, seed).unwrap();
    let res = run_bivamp(&inst.observation(), &GAUSS, &GAUSS, &dims, &RunConfig::for_priors(&GAUSS, &GAUSS), None).unwrap();
    nrmse(&res.z_hat, &inst.z_true).unwrap()
}

#[test]
fn error_drops_with_snr() {
    let lo = gaussian_nrmse(0.0, 3);
    let hi = gaussian_nrmse(30.0, 3);
    assert!(hi < 0.1 * lo, "{lo} {hi}");
}

#[test]
fn same_seed_same_result() {
    assert_eq!(gaussian_nrmse(10.0, 9), gaussian_nrmse(10.0, 9));
}

#[test]
fn bigvamp_on_awgn_tracks_bivamp() {
    let dims = ProblemDims::new(150, 100, 5).unwrap();
    let inst = generate_instance(dims, GAUSS, GAUSS, ChannelSpec::awgn(1.0), 20.0, 1).unwrap();
    let cfg = RunConfig::for_priors(&GAUSS, &GAUSS);
    let obs = inst.observation();
    let a = run_bivamp(&obs, &GAUSS, &GAUSS, &dims, &cfg, None).unwrap();
    let b = run_bigvamp(&obs, &GAUSS, &GAUSS, &dims, &cfg, None).unwrap();
    let c = run_baseline_amp(&obs, &GAUSS, &GAUSS, &dims, &cfg, None).unwrap();
    let ea = nrmse(&a.z_hat, &inst.z_true).unwrap();
    let eb = nrmse(&b.z_hat, &inst.z_true).unwrap();
    let ec = nrmse(&c.z_hat, &inst.z_true).unwrap();
    assert!((ea - eb).abs() < 0.1 * ea, "{ea} {eb}");
    assert!((ea - ec).abs() < 0.05 * ea, "{ea} {ec}");
}

#[test]
fn gaussian_run_near_se() {
    let dims = ProblemDims::new(200, 100, 10).unwrap();
    let ch = ChannelSpec::awgn(1.0);
    let p = SEParams::for_snr(&dims, GAUSS, GAUSS, ch, 20.0);
    let se = se_predicted_nrmse(run_se(&p, SeMode::BiVamp, 1000).unwrap().last(), &p);
    let cfg = RunConfig::for_priors(&GAUSS, &GAUSS);
    let mean = (0..4)
        .map(|s| {
            let inst = generate_instance(dims, GAUSS, GAUSS, ch, 20.0, s).unwrap();
            let r = run_bivamp(&inst.observation(), &GAUSS, &GAUSS, &dims, &cfg, None).unwrap();
            nrmse(&r.z_hat, &inst.z_true).unwrap()
        })
        .sum::<f64>()
        / 4.0;
    assert!((mean - se).abs() < 0.15 * se, "{mean} {se}");
}

#[test]
fn history_tracks_truth_when_given() {
    let dims = ProblemDims::new(60, 40, 2).unwrap();
    let inst = generate_instance(dims, GAUSS, GAUSS, ChannelSpec::awgn(1.0), 20.0, 2).unwrap();
    let res =
        run_bivamp(&inst.observation(), &GAUSS, &GAUSS, &dims, &RunConfig::for_priors(&GAUSS, &GAUSS), Some(&inst.z_true))
            .unwrap();
    assert_eq!(res.history.len(), res.iterations_run);
    assert!(res.history.iter().all(|h| h.nrmse_z.is_some()));
    assert!(matches!(res.termination, Termination::Converged | Termination::IterationCap));
}

#[test]
fn rejects_mismatched_inputs() {
    let dims = ProblemDims::new(30, 20, 2).unwrap();
    let inst = generate_instance(dims, GAUSS, GAUSS, ChannelSpec::selection(0.5, 1.0), 20.0, 0).unwrap();
    let cfg = RunConfig::for_priors(&GAUSS, &GAUSS);
    assert!(run_bivamp(&inst.observation(), &GAUSS, &GAUSS, &dims, &cfg, None).is_err());
    let wrong = ProblemDims::new(31, 20, 2).unwrap();
    assert!(matches!(run_bigvamp(&inst.observation(), &GAUSS, &GAUSS, &wrong, &cfg, None), Err(Error::Dimension(_))));
    let bin = PriorSpec::Binary;
    assert!(matches!(
        run_baseline_amp(&inst.observation(), &bin, &GAUSS, &dims, &cfg, None),
        Err(Error::UnsupportedPrior(_))
    ));
}
