//! Acceptance suite. Runs every criterion at its stated tolerance, prints one
//! PASS/FAIL line each and exits non-zero if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use emwavenet::autograd::gradcheck;
use emwavenet::classify::{default_layout, snr_loss, region_energies, DetectorLayout};
use emwavenet::data::{add_noise_snr, mask_placement, mask_window, synth_clutter, synth_dataset, Sample};
use emwavenet::experiments::{snr_grid, superpose_sweep};
use emwavenet::field::ComplexField;
use emwavenet::network::{param_count, InitScheme, ModulationLayer, NetConfig, Network};
use emwavenet::propagation::{adjoint_propagate, make_transfer_exact, make_transfer_fresnel, propagate, KernelKind};
use emwavenet::train::{encode_checkpoint, evaluate, fit, History, TrainConfig};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_field(n: usize, dx: f64, rng: &mut ChaCha8Rng) -> ComplexField {
    ComplexField::from_fn(n, dx, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).unwrap()
}

fn energy(u: &ComplexField) -> f64 {
    u.as_slice().iter().map(|z| z.re * z.re + z.im * z.im).sum()
}

fn inner(a: &ComplexField, b: &ComplexField) -> Complex64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y.conj()).sum()
}

fn rel_l2(a: &ComplexField, reference: &ComplexField) -> f64 {
    let num: f64 = a.as_slice().iter().zip(reference.as_slice()).map(|(x, y)| (x - y).norm_sqr()).sum();
    (num / energy(reference)).sqrt()
}

fn c1_gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        worst = worst.max(gradcheck(16, 2, 3, seed).map_err(|e| e.to_string())?.max_rel_error);
    }
    let t = start.elapsed();
    check(
        worst < 1e-4 && t < Duration::from_secs(30),
        format!("max rel error {worst:.2e} (< 1e-4) over 5 seeds in {:.2} s (< 30 s)", t.as_secs_f64()),
    )
}

fn c2_unitarity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for &n in &[16, 64, 128, 256, 512] {
        for &(dx, lambda, d) in &[(0.01, 0.03, 0.5), (1e-4, 0.03, 0.3), (0.005, 0.02, 2.0)] {
            let h = make_transfer_fresnel(n, dx, lambda, d).unwrap();
            let u = random_field(n, dx, &mut rng);
            let v = propagate(&u, &h).unwrap();
            worst = worst.max((energy(&v) - energy(&u)).abs() / energy(&u));
        }
    }
    check(worst < 1e-10, format!("max rel energy change {worst:.2e} (< 1e-10), N up to 512"))
}

fn c3_semigroup() -> Outcome {
    let (n, dx, lambda) = (64, 0.01, 0.03);
    let mut worst_h: f64 = 0.0;
    for &(d1, d2) in &[(0.1, 0.2), (0.5, 0.5), (0.03, 1.7)] {
        let a = make_transfer_fresnel(n, dx, lambda, d1).unwrap();
        let b = make_transfer_fresnel(n, dx, lambda, d2).unwrap();
        let ab = make_transfer_fresnel(n, dx, lambda, d1 + d2).unwrap();
        for ((x, y), z) in a.as_slice().iter().zip(b.as_slice()).zip(ab.as_slice()) {
            worst_h = worst_h.max((x * y - z).norm() / z.norm());
        }
    }
    let cfg = NetConfig {
        f: 1e10,
        lambda,
        m_layers: 3,
        n,
        d: 0.5,
        dx,
        dl: None,
        kernel: KernelKind::Fresnel,
    };
    let k = cfg.wavenumber();
    let net = Network::new(cfg.clone(), (0..3).map(|_| ModulationLayer::identity(n, k)).collect()).unwrap();
    let u = random_field(n, dx, &mut ChaCha8Rng::seed_from_u64(3));
    let once = propagate(&u, &make_transfer_fresnel(n, dx, lambda, 4.0 * cfg.d).unwrap()).unwrap();
    let err_net = rel_l2(&net.forward_field(&u).unwrap(), &once);
    check(
        worst_h < 1e-12 && err_net < 1e-10,
        format!("H(d1)H(d2) vs H(d1+d2) {worst_h:.2e} (< 1e-12); identity net vs one shot {err_net:.2e} (< 1e-10)"),
    )
}

fn c4_adjoint() -> Outcome {
    let (n, dx, lambda, d) = (64, 0.01, 0.03, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for kernel in [make_transfer_fresnel(n, dx, lambda, d), make_transfer_exact(n, 0.01, 0.03, d)] {
        let h = kernel.unwrap();
        for _ in 0..100 {
            let x = random_field(n, dx, &mut rng);
            let y = random_field(n, dx, &mut rng);
            let lhs = inner(&propagate(&x, &h).unwrap(), &y);
            let rhs = inner(&x, &adjoint_propagate(&y, &h).unwrap());
            worst = worst.max((lhs - rhs).norm() / lhs.norm());
        }
    }
    check(worst < 1e-10, format!("max rel |<Px,y> - <x,P*y>| {worst:.2e} (< 1e-10), 100 pairs per kernel"))
}

fn c5_gaussian_beam() -> Outcome {
    let (n, dx, lambda, w0) = (512, 0.01, 0.03, 0.1);
    let z_r = PI * w0 * w0 / lambda;
    let c = (n / 2) as f64;
    let pos = |i: usize| (i as f64 - c) * dx;
    let beam =
        ComplexField::from_fn(n, dx, |r, col| Complex64::new((-(pos(r).powi(2) + pos(col).powi(2)) / (w0 * w0)).exp(), 0.0))
            .unwrap();
    let mut worst: f64 = 0.0;
    for frac in [0.25, 0.5, 1.0] {
        let z = frac * z_r;
        let out = propagate(&beam, &make_transfer_fresnel(n, dx, lambda, z).unwrap()).unwrap();
        let mut m2 = 0.0;
        for r in 0..n {
            for col in 0..n {
                m2 += (pos(r).powi(2) + pos(col).powi(2)) * out[(r, col)].norm_sqr();
            }
        }
        let w = (2.0 * m2 / energy(&out)).sqrt();
        let analytic = w0 * (1.0 + (z / z_r).powi(2)).sqrt();
        worst = worst.max((w - analytic).abs() / analytic);
    }
    check(
        worst < 0.01,
        format!("waist 10 dx, z in {{0.25, 0.5, 1}} zR: max rel radius error {worst:.2e} (< 1e-2)"),
    )
}

fn small_net(seed: u64) -> (Network, DetectorLayout) {
    let cfg = NetConfig {
        f: 1e10,
        lambda: 0.03,
        m_layers: 2,
        n: 64,
        d: 0.5,
        dx: 0.01,
        dl: None,
        kernel: KernelKind::Fresnel,
    };
    (Network::init(cfg, InitScheme::UniformPhase, seed).unwrap(), default_layout(64, 4).unwrap())
}

fn c6_scale_invariance() -> Outcome {
    let (net, layout) = small_net(6);
    let x = random_field(64, 0.01, &mut ChaCha8Rng::seed_from_u64(6));
    let loss = |u: &ComplexField| snr_loss(&region_energies(&net.forward_field(u).unwrap(), &layout).unwrap(), 1).unwrap();
    let base = loss(&x);
    let mut worst: f64 = 0.0;
    for alpha in [Complex64::new(2.0, 0.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, 3.0), Complex64::new(1e-3, 0.0)] {
        worst = worst.max((loss(&x.scaled(alpha)) - base).abs() / base.abs());
    }
    check(worst < 1e-12, format!("alpha in {{2, -1, 3j, 1e-3}}: max rel loss change {worst:.2e} (< 1e-12)"))
}

fn c7_linearity() -> Outcome {
    let (net, _) = small_net(7);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let x = random_field(64, 0.01, &mut rng);
        let y = random_field(64, 0.01, &mut rng);
        let alpha = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let beta = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let mut mix = x.scaled(alpha);
        mix.add_scaled(beta, &y).unwrap();
        let mut expect = net.forward_field(&x).unwrap().scaled(alpha);
        expect.add_scaled(beta, &net.forward_field(&y).unwrap()).unwrap();
        worst = worst.max(rel_l2(&net.forward_field(&mix).unwrap(), &expect));
    }
    check(worst < 1e-12, format!("max rel L2 error {worst:.2e} (< 1e-12) over 5 random (x, y, alpha, beta)"))
}

struct Trained {
    net: Network,
    history: History,
    test: Vec<Sample>,
    layout: DetectorLayout,
    elapsed: Duration,
}

const TRAIN_SEED: u64 = 8;

fn train_run(threads: usize) -> Trained {
    let cfg = NetConfig {
        f: 1e10,
        lambda: 0.03,
        m_layers: 3,
        n: 64,
        d: 0.5,
        dx: 0.01,
        dl: None,
        kernel: KernelKind::Fresnel,
    };
    let train = synth_dataset(4, 150, 64, 0.01, 101).unwrap();
    let test = synth_dataset(4, 30, 64, 0.01, 202).unwrap();
    let layout = default_layout(64, 4).unwrap();
    let tc = TrainConfig { seed: TRAIN_SEED, ..Default::default() };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let start = Instant::now();
    let (net, history) = pool.install(|| {
        let mut net = Network::init(cfg, tc.init, tc.seed).unwrap();
        let history = fit(&mut net, &train, &layout, &tc).map_err(|d| d.error).unwrap();
        (net, history)
    });
    Trained { net, history, test, layout, elapsed: start.elapsed() }
}

fn c8_training(run: &Trained) -> Outcome {
    let acc = evaluate(&run.net, &run.test, &run.layout).map_err(|e| e.to_string())?.accuracy;
    let epochs = run.history.epochs.len();
    let (l1, l50) = (run.history.epochs[0].mean_loss, run.history.epochs[49].mean_loss);
    let secs = run.elapsed.as_secs_f64();
    check(
        acc >= 0.95 && epochs <= 200 && l50 < l1 && secs <= 600.0,
        format!(
            "test accuracy {acc:.4} (>= 0.95) after {epochs} epochs; loss epoch 1 {l1:.3} > epoch 50 {l50:.3}; {secs:.0} s single-threaded (<= 600 s)"
        ),
    )
}

fn c9_superposition(run: &Trained) -> Outcome {
    let rows = superpose_sweep(&run.net, &run.layout, &run.test, &[2], 100, 9).map_err(|e| e.to_string())?;
    let acc = rows[0].accuracy;
    check(acc >= 0.8, format!("top-2 set accuracy {acc:.3} (>= 0.8) over 100 seeded pairs with distinct labels"))
}

fn c10_structure() -> Outcome {
    let mut cfg = NetConfig::mstar();
    cfg.m_layers = 10;
    let count = param_count(&cfg);

    let x = synth_dataset(2, 3, 64, 0.01, 10).unwrap();
    let noise = synth_clutter(64, 0.01, 11).unwrap();
    let mut worst_db: f64 = 0.0;
    for (i, s) in x.iter().enumerate() {
        for db in snr_grid() {
            let out = add_noise_snr(s, &noise, db, i as u64).unwrap();
            let mut added = out.field.clone();
            added.add_scaled(Complex64::new(-1.0, 0.0), &s.field).unwrap();
            let measured = 10.0 * (energy(&s.field) / energy(&added)).log10();
            worst_db = worst_db.max((measured - db).abs());
        }
    }

    let win = mask_window(256);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut outside = 0;
    for _ in 0..10_000 {
        let side = rng.gen_range(0..=win.w);
        let p = mask_placement(256, (side, side), &mut rng).unwrap();
        if p.x0 < win.x0 || p.y0 < win.y0 || p.x0 + p.w > win.x0 + win.w || p.y0 + p.h > win.y0 + win.h {
            outside += 1;
        }
    }
    check(
        count == 1_310_720 && worst_db < 0.01 && outside == 0 && win.w == 88,
        format!(
            "param_count(M=10, N=256) = {count} (1310720); SNR mixer max error {worst_db:.1e} dB over -10..10 dB (< 0.01); {outside} of 10000 masks outside the central {}x{} window",
            win.w, win.h
        ),
    )
}

fn c11_determinism(first: &Trained) -> Outcome {
    let second = train_run(4);
    let same_ckpt = encode_checkpoint(&first.net) == encode_checkpoint(&second.net);
    let same_csv = first.history.to_csv().unwrap() == second.history.to_csv().unwrap();
    check(
        same_ckpt && same_csv,
        format!("second run on 4 worker threads: checkpoint identical {same_ckpt}, metrics CSV identical {same_csv}"),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut run = |name: &'static str, f: &dyn Fn() -> Outcome| {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{tag} {name}: {detail}");
        results.push((name, outcome));
    };
    run("1 gradient fidelity", &c1_gradient_fidelity);
    run("2 propagation unitarity", &c2_unitarity);
    run("3 Fresnel semigroup", &c3_semigroup);
    run("4 adjoint identity", &c4_adjoint);
    run("5 Gaussian-beam oracle", &c5_gaussian_beam);
    run("6 loss scale invariance", &c6_scale_invariance);
    run("7 network linearity", &c7_linearity);
    let trained = catch_unwind(|| train_run(1));
    match &trained {
        Ok(t) => {
            run("8 end-to-end synthetic training", &|| c8_training(t));
            run("9 superposition recognition", &|| c9_superposition(t));
            run("10 structural cross-checks", &c10_structure);
            run("11 determinism", &|| c11_determinism(t));
        }
        Err(_) => {
            for name in ["8 end-to-end synthetic training", "9 superposition recognition", "11 determinism"] {
                run(name, &|| Err("training run panicked".into()));
            }
            run("10 structural cross-checks", &c10_structure);
        }
    }
    let failed = results.iter().filter(|(_, o)| o.is_err()).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
