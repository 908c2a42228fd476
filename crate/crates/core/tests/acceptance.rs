//! One pass/fail line per acceptance criterion. Everything runs inside a single test so
//! the timing criteria do not compete with other tests for cores.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pqv_core::encoder::{encode_snapshot, read_dataset, write_dataset, LabeledDataset, Split};
use pqv_core::eval::{
    bench_assessment, evaluate, export_conv1_weights, kmeans, metrics, misclassification_report,
    operating_features, radar_csv, reference_cases, ConfusionMatrix, DEFAULT_MAX_ITERS,
};
use pqv_core::fixtures;
use pqv_core::generate::{generate_dataset, GenerateConfig};
use pqv_core::grid::{
    default_contingencies, max_mismatch, sample_operating_points, solve_power_flow, Bus, BusType,
    Generator, GridFile, GridModel, Injections, Line, Snapshot,
};
use pqv_core::nn::{
    conv_chain, loss, paper_chain, save_checkpoint, LayerSpec, LossConfig, Mode, Model,
};
use pqv_core::stability::{
    augmented_admittance, damping_ratios, eigenvalues, kron_reduce, linearize_swing,
    reduce_network, DynamicParams, MachineParams, ReducedNetwork,
};
use pqv_core::train::{train, TrainConfig};
use pqv_core::{Model32, Tensor64};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

// ---------------------------------------------------------------------------------------
// Architecture

fn architecture_audit() -> Outcome {
    use LayerSpec::*;
    let start = Instant::now();
    let model = Model32::new([162, 162, 3], paper_chain(), 0).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let infos = model.layer_infos();
    let counts: Vec<usize> = infos
        .iter()
        .filter(|l| l.spec.has_params())
        .map(|l| l.param_count())
        .collect();
    let shapes: Vec<Vec<usize>> = infos.iter().map(|l| l.out_shape.clone()).collect();
    let expected_shapes: Vec<Vec<usize>> = vec![
        vec![162, 162, 20],
        vec![81, 81, 20],
        vec![81, 81, 20],
        vec![81, 81, 40],
        vec![40, 40, 40],
        vec![40, 40, 40],
        vec![40, 40, 80],
        vec![20, 20, 80],
        vec![20, 20, 80],
        vec![32_000],
        vec![250],
        vec![250],
        vec![250],
        vec![2],
        vec![2],
    ];
    let kinds_ok = matches!(
        model.chain(),
        [
            Conv {
                kernel: 9,
                filters: 20
            },
            MaxPool,
            Relu,
            Conv {
                kernel: 7,
                filters: 40
            },
            MaxPool,
            Relu,
            Conv {
                kernel: 5,
                filters: 80
            },
            MaxPool,
            Relu,
            Flatten,
            Dense { units: 250 },
            Relu,
            Dropout { .. },
            Dense { units: 2 },
            Softmax
        ]
    );
    // Independent count: k*k*c_in*c_out + c_out per conv, n_in*n_out + n_out per dense.
    let hand = [
        9 * 9 * 3 * 20 + 20,
        7 * 7 * 20 * 40 + 40,
        5 * 5 * 40 * 80 + 80,
        32_000 * 250 + 250,
        250 * 2 + 2,
    ];
    let ok = counts == [4_880, 39_240, 80_080, 8_000_250, 502]
        && counts == hand
        && model.param_count() == 8_124_952
        && shapes == expected_shapes
        && kinds_ok
        && elapsed < Duration::from_secs(1);
    check(
        ok,
        format!(
            "counts {counts:?}, total {}, 81->40 pool, built in {elapsed:.2?}",
            model.param_count()
        ),
    )
}

// ---------------------------------------------------------------------------------------
// Gradients and loss

fn one_hot_labels(n: usize, rng: &mut ChaCha8Rng) -> Tensor64 {
    let data = (0..n)
        .flat_map(|_| {
            if rng.random_bool(0.6) {
                [1.0, 0.0]
            } else {
                [0.0, 1.0]
            }
        })
        .collect();
    Tensor64::from_vec(&[n, 2], data)
}

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let model =
        Model::<f64>::new([12, 12, 3], conv_chain([2, 3, 4], 5), 21).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let x = Tensor64::from_fn(&[8, 12, 12, 3], |_| rng.random_range(0.0..1.0));
    let y = one_hot_labels(8, &mut rng);
    let cfg = LossConfig {
        phi: 2.0,
        alpha: [0.5, 0.0, 0.5, 0.5],
        lambda: 1e-4,
        eps_clip: 1e-7,
    };
    let mode = Mode::Train { seed: 23 };
    let (_, grads) = model
        .loss_and_gradients(&x, &y, &cfg, mode, 0)
        .map_err(|e| e.to_string())?;
    let total = |m: &Model<f64>| {
        m.loss_and_gradients(&x, &y, &cfg, mode, 0)
            .expect("loss")
            .0
            .total
    };

    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut probe = model.clone();
    for li in 0..model.params.len() {
        for bias in [false, true] {
            let len = if bias {
                model.params[li].bias.value.len()
            } else {
                model.params[li].weights.value.len()
            };
            for i in 0..len {
                let mut at = |delta: f64| {
                    let t = if bias {
                        &mut probe.params[li].bias.value
                    } else {
                        &mut probe.params[li].weights.value
                    };
                    let orig = t[i];
                    t[i] = orig + delta;
                    let v = total(&probe);
                    let t = if bias {
                        &mut probe.params[li].bias.value
                    } else {
                        &mut probe.params[li].weights.value
                    };
                    t[i] = orig;
                    v
                };
                let num = (at(h) - at(-h)) / (2.0 * h);
                let ana = if bias {
                    grads.layers[li].1[i]
                } else {
                    grads.layers[li].0[i]
                };
                worst = worst.max((ana - num).abs() / ana.abs().max(num.abs()).max(1e-6));
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst < 1e-4 && elapsed < Duration::from_secs(60),
        format!("{checked} parameters, worst relative error {worst:.2e}, {elapsed:.2?}"),
    )
}

fn loss_reduction() -> Outcome {
    let model = Model::<f64>::new(
        [2, 2, 1],
        vec![
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 2 },
            LayerSpec::Softmax,
        ],
        0,
    )
    .map_err(|e| e.to_string())?;
    let cfg = LossConfig {
        phi: 1.0,
        alpha: [0.0; 4],
        lambda: 0.0,
        eps_clip: 1e-7,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=64);
        let p0: Vec<f64> = (0..n).map(|_| rng.random_range(0.001..0.999)).collect();
        let probs = Tensor64::from_vec(&[n, 2], p0.iter().flat_map(|&p| [p, 1.0 - p]).collect());
        let labels = one_hot_labels(n, &mut rng);
        let bce = -(0..n)
            .map(|b| {
                let y = labels[2 * b];
                y * p0[b].ln() + (1.0 - y) * (1.0 - p0[b]).ln()
            })
            .sum::<f64>()
            / n as f64;
        worst = worst.max((loss(&probs, &labels, &model, &cfg).total - bce).abs());
    }
    check(
        worst <= 1e-12,
        format!("100 batches, max |loss - BCE| = {worst:.2e}"),
    )
}

// ---------------------------------------------------------------------------------------
// Power flow

fn bus(index: usize, bus_type: BusType, p_load: f64, q_load: f64) -> Bus {
    Bus {
        index,
        bus_type,
        p_load,
        q_load,
        g_shunt: 0.0,
        b_shunt: 0.0,
        v_setpoint: 1.0,
    }
}

fn two_bus(p: f64) -> GridModel {
    GridModel::from_file(GridFile {
        base_mva: 100.0,
        frequency: 60.0,
        buses: vec![
            bus(0, BusType::Slack, 0.0, 0.0),
            bus(1, BusType::Pq, p, 0.0),
        ],
        lines: vec![Line {
            from_bus: 0,
            to_bus: 1,
            r: 0.0,
            x: 0.1,
            b: 0.0,
            in_service: true,
        }],
        generators: vec![Generator {
            bus: 0,
            p_gen: 0.0,
            h: 5.0,
            d: 1.0,
            xd_prime: 0.2,
        }],
    })
    .expect("valid two-bus grid")
}

/// Lossless line, unity slack, Q = 0 at the load: Q-balance gives V = cos(t) and
/// P-balance gives 10 V sin(t) = -P, solved for t by bisection on [-pi/4, 0].
fn bisection_two_bus(p: f64) -> (f64, f64) {
    let f = |t: f64| 10.0 * t.cos() * t.sin() + p;
    let (mut lo, mut hi) = (-std::f64::consts::FRAC_PI_4, 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    (t.cos(), t)
}

/// Largest nodal imbalance between each bus's net injection and the flows leaving it
/// through lines and shunts.
fn nodal_imbalance(grid: &GridModel, s: &Snapshot) -> f64 {
    let n = grid.n_buses();
    let mut p_out = vec![0.0; n];
    let mut q_out = vec![0.0; n];
    for (id, l) in grid.lines.iter().enumerate().filter(|(_, l)| l.in_service) {
        p_out[l.from_bus] += s.p_from[id];
        q_out[l.from_bus] += s.q_from[id];
        p_out[l.to_bus] += s.p_to[id];
        q_out[l.to_bus] += s.q_to[id];
    }
    grid.buses
        .iter()
        .map(|b| {
            let v2 = s.v[b.index] * s.v[b.index];
            let dp = -s.p[b.index] - (p_out[b.index] + b.g_shunt * v2);
            let dq = -s.q[b.index] - (q_out[b.index] - b.b_shunt * v2);
            dp.abs().max(dq.abs())
        })
        .fold(0.0, f64::max)
}

fn power_flow_oracle() -> Outcome {
    let mut worst_2bus = 0.0f64;
    for p in [0.1, 0.5, 1.0, 2.0, 3.5, 4.5] {
        let pf = solve_power_flow(&two_bus(p), &Injections::base(&two_bus(p)))
            .map_err(|e| format!("P = {p}: {e}"))?;
        let (v, t) = bisection_two_bus(p);
        worst_2bus = worst_2bus
            .max((pf.snapshot.v[1] - v).abs())
            .max((pf.snapshot.theta[1] - t).abs());
    }
    let mut worst_balance = 0.0f64;
    let mut converged = 0;
    for (grid, seed) in [
        (fixtures::nine_bus(), 1),
        (fixtures::nine_bus_heavy(), 2),
        (fixtures::three_bus(), 3),
    ] {
        for inj in sample_operating_points(&grid, 0.4, 1000, seed) {
            if let Ok(pf) = solve_power_flow(&grid, &inj) {
                converged += 1;
                worst_balance = worst_balance
                    .max(max_mismatch(&grid, &inj, &pf.snapshot))
                    .max(nodal_imbalance(&grid, &pf.snapshot));
            }
        }
    }
    check(
        worst_2bus < 1e-8 && worst_balance < 1e-6 && converged > 0,
        format!("2-bus error {worst_2bus:.2e}; {converged} converged snapshots, worst imbalance {worst_balance:.2e}"),
    )
}

// ---------------------------------------------------------------------------------------
// Stability

/// A machine against a second machine with enormous inertia (and damping in the same
/// proportion) behaves as a machine against an infinite bus.
fn smib_error() -> f64 {
    let omega_s = 2.0 * std::f64::consts::PI * 60.0;
    let mut worst = 0.0f64;
    for (h, d, x, e1, delta) in [
        (3.5, 2.0, 0.4, 1.1, 0.3),
        (6.0, 10.0, 0.25, 1.05, 0.6),
        (2.0, 0.5, 0.8, 1.2, 0.1),
    ] {
        let big = 1e9;
        let b = 1.0 / x;
        let net = ReducedNetwork {
            y: DMatrix::from_row_slice(2, 2, &[c(0.0, -b), c(0.0, b), c(0.0, b), c(0.0, -b)]),
            emf: vec![Complex64::from_polar(e1, delta), c(1.0, 0.0)],
            p_mech: vec![e1 * b * delta.sin(), -e1 * b * delta.sin()],
        };
        let dynp = DynamicParams {
            machines: vec![
                MachineParams {
                    h,
                    d,
                    xd_prime: 0.1,
                },
                MachineParams {
                    h: h * big,
                    d: d * big,
                    xd_prime: 0.1,
                },
            ],
            omega_s,
        };
        let modes =
            damping_ratios(&eigenvalues(&linearize_swing(&net, &dynp)).expect("eigenvalues"));
        // M d'' + D d' + K d = 0 with M = 2H/ws, D = d/ws, K = E V B cos(delta).
        let (m, dd, k) = (2.0 * h / omega_s, d / omega_s, e1 * b * delta.cos());
        let zeta = dd / (2.0 * (k * m).sqrt());
        let got = modes.min_damping().unwrap_or(f64::NAN);
        worst = worst.max((got - zeta).abs());
    }
    worst
}

fn kron_error() -> f64 {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..20 {
        let n = rng.random_range(4..12);
        let keep = rng.random_range(1..n);
        let mut y = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.5) {
                    let ys = c(rng.random_range(0.1..2.0), -rng.random_range(1.0..20.0));
                    y[(i, j)] -= ys;
                    y[(j, i)] -= ys;
                    y[(i, i)] += ys;
                    y[(j, j)] += ys;
                }
            }
            y[(i, i)] += c(rng.random_range(0.1..1.0), rng.random_range(-0.5..0.5));
        }
        let red = kron_reduce(&y, keep).expect("reduction");
        let v: DVector<Complex64> = DVector::from_fn(keep, |_, _| {
            c(rng.random_range(0.8..1.2), rng.random_range(-0.3..0.3))
        });
        let i_port = &red * &v;
        let mut rhs = DVector::zeros(n);
        rhs.rows_mut(0, keep).copy_from(&i_port);
        let x = y.clone().lu().solve(&rhs).expect("solve");
        for k in 0..keep {
            worst = worst.max((x[k] - v[k]).norm() / v[k].norm());
        }
    }
    // The classical-model reduction of a real grid.
    let grid = fixtures::nine_bus();
    let snap = solve_power_flow(&grid, &Injections::base(&grid))
        .expect("base case")
        .snapshot;
    let dynp = DynamicParams::from_grid(&grid);
    let net = reduce_network(&grid, &snap, &dynp).expect("reduce");
    let full = augmented_admittance(&grid, &snap, &dynp);
    let m = net.emf.len();
    let i_gen = &net.y * DVector::from_vec(net.emf.clone());
    let mut rhs = DVector::zeros(full.nrows());
    rhs.rows_mut(0, m).copy_from(&i_gen);
    let x = full.lu().solve(&rhs).expect("solve");
    for k in 0..m {
        worst = worst.max((x[k] - net.emf[k]).norm() / net.emf[k].norm());
    }
    worst
}

fn eigen_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut spectrum = Vec::new();
        while spectrum.len() < 8 {
            let re = rng.random_range(-3.0..0.5);
            if rng.random_bool(0.5) && spectrum.len() <= 6 {
                let im = rng.random_range(0.2..12.0);
                spectrum.push(c(re, im));
                spectrum.push(c(re, -im));
            } else {
                spectrum.push(c(re, 0.0));
            }
        }
        let n = spectrum.len();
        let mut l = DMatrix::<f64>::zeros(n, n);
        let mut k = 0;
        while k < n {
            let s = spectrum[k];
            l[(k, k)] = s.re;
            if s.im != 0.0 {
                l[(k, k + 1)] = s.im;
                l[(k + 1, k)] = -s.im;
                l[(k + 1, k + 1)] = s.re;
                k += 2;
            } else {
                k += 1;
            }
        }
        let q = DMatrix::from_fn(
            n,
            n,
            |i, j| if i == j { 4.0 } else { 0.0 } + rng.random_range(-1.0..1.0),
        );
        let a = &q * &l * q.clone().try_inverse().expect("invertible");
        let got = eigenvalues(&a).expect("eigenvalues");
        for want in &spectrum {
            let best = got
                .iter()
                .map(|g| (g - want).norm())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
        }
    }
    worst
}

fn stability_oracle() -> Outcome {
    let (smib, kron, eig) = (smib_error(), kron_error(), eigen_error());
    check(
        smib < 1e-6 && kron < 1e-10 && eig < 1e-8,
        format!("SMIB damping error {smib:.2e}, Kron port error {kron:.2e}, eigen recovery error {eig:.2e}"),
    )
}

// ---------------------------------------------------------------------------------------
// Encoder

fn encoder_properties(ds: &LabeledDataset, grid: &GridModel) -> Outcome {
    let topo = grid.topology();
    let n = topo.n_buses;
    let limit = 2 * grid.lines.iter().filter(|l| l.in_service).count();
    let mut out_of_range = 0;
    let mut asymmetric = 0;
    let mut too_dense = 0;
    let count = ds.samples.len().min(10_000);
    for s in &ds.samples[..count] {
        let img =
            encode_snapshot::<f64>(&s.snapshot, &topo, &ds.norms).map_err(|e| e.to_string())?;
        out_of_range += img
            .data
            .iter()
            .filter(|v| !(0.0..=1.0).contains(*v))
            .count();
        for i in 0..n {
            for j in 0..n {
                if img.get(i, j, 2) != img.get(j, i, 2) {
                    asymmetric += 1;
                }
            }
        }
        too_dense += (0..3)
            .filter(|&ch| img.off_diagonal_nonzeros(ch) > limit)
            .count();
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a.pqvd"), dir.path().join("b.pqvd"));
    write_dataset(ds, &a).map_err(|e| e.to_string())?;
    let back = read_dataset(&a).map_err(|e| e.to_string())?;
    write_dataset(&back, &b).map_err(|e| e.to_string())?;
    let same_bytes = std::fs::read(&a).map_err(|e| e.to_string())?
        == std::fs::read(&b).map_err(|e| e.to_string())?;
    let equal = back == *ds;
    check(
        count == 10_000 && out_of_range == 0 && asymmetric == 0 && too_dense == 0 && same_bytes && equal,
        format!(
            "{count} images: {out_of_range} values outside [0,1], {asymmetric} asymmetric V cells, \
             {too_dense} channels over {limit} off-diagonal cells; round trip equal = {equal}, bytes equal = {same_bytes}"
        ),
    )
}

// ---------------------------------------------------------------------------------------
// Learning and speed

fn desk_scale_learning(ds: &LabeledDataset) -> (Outcome, Option<Model32>) {
    let safe_share = ds.safe_share(&(0..ds.len()).collect::<Vec<_>>());
    let cases = reference_cases();
    let base = TrainConfig {
        max_epochs: 15,
        patience: 10,
        seed: 1,
        ..TrainConfig::default()
    };
    let init = match Model32::new([9, 9, 3], paper_chain(), 1) {
        Ok(m) => m,
        Err(e) => return (Err(e.to_string()), None),
    };
    let start = Instant::now();
    let run = |case: usize| -> Result<(Model32, pqv_core::eval::Evaluation), String> {
        let cfg = TrainConfig {
            loss: cases[case].loss(&base.loss),
            ..base.clone()
        };
        let (model, _) = train(init.clone(), ds, &cfg).map_err(|e| e.to_string())?;
        let ev = evaluate(&model, ds, Split::Test, 256).map_err(|e| e.to_string())?;
        Ok((model, ev))
    };
    let (case6, case1) = match (run(5), run(0)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return (Err(e), None),
    };
    let elapsed = start.elapsed();
    let (r6, a6) = (
        case6.1.report.recall.unwrap_or(0.0),
        case6.1.report.accuracy.unwrap_or(0.0),
    );
    let r1 = case1.1.report.recall.unwrap_or(0.0);
    let summary = format!(
        "{} points, safe share {safe_share:.3}; case 6 recall {r6:.4} accuracy {a6:.4} mcc {}; case 1 recall {r1:.4}; {elapsed:.0?}",
        ds.len(),
        case6.1.report.mcc.map_or("undefined".into(), |m| format!("{m:.4}")),
    );
    let ok = ds.len() >= 20_000
        && (0.10..=0.25).contains(&safe_share)
        && r6 >= 0.95
        && a6 >= 0.90
        && r6 >= r1
        && elapsed < Duration::from_secs(30 * 60);
    (check(ok, summary), Some(case6.0))
}

fn speedup(ds: &LabeledDataset, grid: &GridModel, model: &Model32) -> Outcome {
    let dynp = DynamicParams::from_grid(grid);
    let cont = default_contingencies(grid);
    let point = &ds.samples[ds.splits.test[0]].snapshot;
    let report = bench_assessment(grid, &dynp, &cont, 0.03, point, &ds.norms, model, 1000)
        .map_err(|e| e.to_string())?;
    check(
        cont.len() >= 6 && report.ratio >= 10.0,
        format!(
            "{} contingencies, oracle {:.4} ms, network {:.4} ms, ratio {:.2} (needs >= 10)",
            cont.len(),
            report.oracle_ms,
            report.cnn_ms,
            report.ratio
        ),
    )
}

// ---------------------------------------------------------------------------------------
// Metrics and clustering

fn metric_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut failures = Vec::new();
    for trial in 0..1000 {
        let cm = ConfusionMatrix {
            tp: rng.random_range(0..500),
            fn_: rng.random_range(0..500),
            fp: rng.random_range(0..500),
            tn: rng.random_range(0..500),
        };
        let (tp, fn_, fp, tn) = (cm.tp as f64, cm.fn_ as f64, cm.fp as f64, cm.tn as f64);
        let r = metrics(&cm);
        let div = |a: f64, b: f64| (b > 0.0).then(|| a / b);
        let recall = div(tp, tp + fn_);
        let spec = div(tn, tn + fp);
        let prec = div(tp, tp + fp);
        let acc = div(tp + tn, tp + tn + fp + fn_);
        let f1 = match (prec, recall) {
            (Some(p), Some(q)) if p + q > 0.0 => Some(2.0 * p * q / (p + q)),
            _ => None,
        };
        let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        let mcc = (den > 0.0).then(|| (tp * tn - fp * fn_) / den.sqrt());
        let exact = r.recall == recall
            && r.specificity == spec
            && r.precision == prec
            && r.accuracy == acc
            && r.f1 == f1
            && r.mcc == mcc;
        // Alternative forms agree to rounding.
        let f1_alt =
            (2.0 * tp + fp + fn_ > 0.0 && tp > 0.0).then(|| 2.0 * tp / (2.0 * tp + fp + fn_));
        let f1_ok = match (r.f1, f1_alt) {
            (Some(a), Some(b)) => (a - b).abs() < 1e-12,
            (a, b) => a.is_none() && (b.is_none() || tp == 0.0),
        };
        // Swapping the predicted classes negates MCC.
        let flipped = metrics(&ConfusionMatrix {
            tp: cm.fn_,
            fn_: cm.tp,
            fp: cm.tn,
            tn: cm.fp,
        });
        let flip_ok = match (r.mcc, flipped.mcc) {
            (Some(a), Some(b)) => a == -b,
            (None, None) => true,
            _ => false,
        };
        let bounded = r.mcc.is_none_or(|m| (-1.0..=1.0).contains(&m));
        if !(exact && f1_ok && flip_ok && bounded) {
            failures.push(trial);
        }
    }
    let perfect = metrics(&ConfusionMatrix {
        tp: 7,
        fn_: 0,
        fp: 0,
        tn: 9,
    })
    .mcc == Some(1.0);
    let inverse = metrics(&ConfusionMatrix {
        tp: 0,
        fn_: 7,
        fp: 9,
        tn: 0,
    })
    .mcc == Some(-1.0);
    let chance = metrics(&ConfusionMatrix {
        tp: 10,
        fn_: 10,
        fp: 10,
        tn: 10,
    })
    .mcc == Some(0.0);
    let degenerate = metrics(&ConfusionMatrix {
        tp: 5,
        fn_: 0,
        fp: 5,
        tn: 0,
    })
    .mcc
    .is_none();
    check(
        failures.is_empty() && perfect && inverse && chance && degenerate,
        format!(
            "1000 matrices, {} failing; perfect {perfect}, inverse {inverse}, chance {chance}, degenerate undefined {degenerate}",
            failures.len()
        ),
    )
}

fn kmeans_criteria() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let mut increasing = 0;
    for inst in 0..100 {
        let dim = 1 + inst % 4;
        let n = rng.random_range(20..200);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let km = kmeans(&pts, 1 + inst % 8, inst as u64, DEFAULT_MAX_ITERS)
            .map_err(|e| e.to_string())?;
        if km.objective.windows(2).any(|w| w[1] > w[0]) {
            increasing += 1;
        }
    }

    let mut blobs = Vec::new();
    let mut truth = Vec::new();
    for (b, centre) in [[-10.0, 3.0, 0.0], [10.0, -2.0, 4.0]].iter().enumerate() {
        for _ in 0..80 {
            blobs.push(
                centre
                    .iter()
                    .map(|c| c + rng.random_range(-1.0..1.0))
                    .collect::<Vec<f64>>(),
            );
            truth.push(b);
        }
    }
    let km = kmeans(&blobs, 2, 3, DEFAULT_MAX_ITERS).map_err(|e| e.to_string())?;
    let flip = km.assignments[0] != truth[0];
    let recovered = km
        .assignments
        .iter()
        .zip(&truth)
        .all(|(&a, &t)| (a != t) == flip);

    // Uniform background plus one tight, far-away blob that holds every error.
    let mut features: Vec<Vec<f64>> = (0..600)
        .map(|_| (0..6).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let blob_start = features.len();
    for _ in 0..40 {
        features.push(
            (0..6)
                .map(|_| 8.0 + rng.random_range(-0.01..0.01))
                .collect(),
        );
    }
    let misclassified: Vec<usize> = (blob_start..features.len()).collect();
    let report = misclassification_report(&features, &misclassified, &[2, 3, 5, 10], 4)
        .map_err(|e| e.to_string())?;
    let concentrated = report.rows.len() == 4 && report.rows.iter().all(|r| r.fraction == 1.0);
    check(
        increasing == 0 && recovered && concentrated,
        format!(
            "100 instances, {increasing} with a rising objective; two blobs recovered {recovered}; injected blob fractions {:?}",
            report.rows.iter().map(|r| r.fraction).collect::<Vec<_>>()
        ),
    )
}

// ---------------------------------------------------------------------------------------
// Determinism

fn pipeline_artifacts(dir: &std::path::Path) -> Result<Vec<Vec<u8>>, String> {
    let err = |e: &dyn std::fmt::Display| e.to_string();
    let grid = fixtures::nine_bus_heavy();
    let dynp = DynamicParams::from_grid(&grid);
    let gcfg = GenerateConfig {
        count: 800,
        seed: 5,
        ..GenerateConfig::default()
    };
    let (ds, _) = generate_dataset(&grid, &dynp, &gcfg).map_err(|e| err(&e))?;
    let data = dir.join("dataset.pqvd");
    write_dataset(&ds, &data).map_err(|e| err(&e))?;
    let ds = read_dataset(&data).map_err(|e| err(&e))?;

    let ckpt = dir.join("model.pqvm");
    let tcfg = TrainConfig {
        max_epochs: 3,
        patience: 3,
        seed: 5,
        checkpoint: Some(ckpt.clone()),
        ..TrainConfig::default()
    };
    let init = Model32::new([9, 9, 3], conv_chain([6, 8, 10], 16), 5).map_err(|e| err(&e))?;
    let (model, history) = train(init, &ds, &tcfg).map_err(|e| err(&e))?;
    save_checkpoint(&model, &ckpt).map_err(|e| err(&e))?;

    let ev = evaluate(&model, &ds, Split::Test, 128).map_err(|e| err(&e))?;
    let case = &reference_cases()[5];
    let radar = radar_csv([(case, Ok(&ev.report))]);
    let misclass =
        misclassification_report(&operating_features(&ds), &ev.misclassified(&ds), &[3, 5], 5)
            .map_err(|e| err(&e))?;
    let ppm = dir.join("conv1.ppm");
    export_conv1_weights(&model, &ppm).map_err(|e| err(&e))?;

    let read = |p: &std::path::Path| std::fs::read(p).map_err(|e| err(&e));
    Ok(vec![
        read(&data)?,
        read(&ckpt)?,
        history.to_csv().into_bytes(),
        ev.report.to_csv(&ev.confusion).into_bytes(),
        radar.into_bytes(),
        misclass.to_csv().into_bytes(),
        read(&ppm)?,
    ])
}

fn determinism() -> Outcome {
    let (a, b) = (
        tempfile::tempdir().map_err(|e| e.to_string())?,
        tempfile::tempdir().map_err(|e| e.to_string())?,
    );
    let first = pipeline_artifacts(a.path())?;
    let second = pipeline_artifacts(b.path())?;
    let names = [
        "dataset",
        "checkpoint",
        "history",
        "metrics",
        "radar",
        "misclassification",
        "conv1 image",
    ];
    let differing: Vec<&str> = names
        .iter()
        .zip(first.iter().zip(&second))
        .filter(|(_, (x, y))| x != y)
        .map(|(n, _)| *n)
        .collect();
    check(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} artifacts byte-identical across reruns", names.len())
        } else {
            format!("differing: {differing:?}")
        },
    )
}

// ---------------------------------------------------------------------------------------

#[test]
fn acceptance() {
    println!();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |name: &'static str, outcome: Outcome| {
        match &outcome {
            Ok(d) => println!("PASS  {name}: {d}"),
            Err(d) => println!("FAIL  {name}: {d}"),
        }
        results.push((name, outcome));
    };

    report("architecture audit", architecture_audit());
    report("gradient fidelity", gradient_fidelity());
    report("loss reduction", loss_reduction());
    report("power-flow oracle", power_flow_oracle());
    report("stability oracle", stability_oracle());

    let grid = fixtures::nine_bus_heavy();
    let dynp = DynamicParams::from_grid(&grid);
    let cfg = GenerateConfig {
        count: 20_000,
        seed: 1,
        spread: 0.4,
        ..GenerateConfig::default()
    };
    let generated = generate_dataset(&grid, &dynp, &cfg).map(|(ds, _)| ds);
    match &generated {
        Ok(ds) => {
            report("encoder properties", encoder_properties(ds, &grid));
            let (outcome, learned) = desk_scale_learning(ds);
            report("desk-scale learning", outcome);
            match learned {
                Some(model) => report("speedup", speedup(ds, &grid, &model)),
                None => report("speedup", Err("no trained model".into())),
            }
        }
        Err(e) => {
            for name in ["encoder properties", "desk-scale learning", "speedup"] {
                report(name, Err(format!("dataset generation failed: {e}")));
            }
        }
    }

    report("metric identities", metric_identities());
    report("k-means", kmeans_criteria());
    report("determinism", determinism());

    let failed: Vec<&str> = results
        .iter()
        .filter(|(_, o)| o.is_err())
        .map(|(n, _)| *n)
        .collect();
    println!(
        "{} of {} criteria pass",
        results.len() - failed.len(),
        results.len()
    );
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
