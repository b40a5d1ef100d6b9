//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use fedv_core::dlog::{self, DlogTable};
use fedv_core::entity::{self, Permutation};
use fedv_core::group::group_gen;
use fedv_core::models::{self, ModelKind};
use fedv_core::otp::OtpChain;
use fedv_core::tpa::{ipm_check, FunctionalKey, IpmPolicy, KeyRequest, KeyResponse, Tpa, EXPLOITED_VECTOR};
use fedv_core::{mife, sife};
use fedv_runtime::config::{CryptoSection, DataConfig, DropoutSection, FederationSection, ModelSection, RunConfig};
use fedv_runtime::experiment::{self, BATCHES_FILE, METRICS_FILE};
use fedv_runtime::synth::{self, Shape};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};

type Outcome = Result<String, String>;
type Criterion<'a> = (u32, &'static str, Box<dyn Fn() -> Outcome + 'a>);

fn dot_i64(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check(cond: bool, ok: impl Into<String>, fail: impl Into<String>) -> Outcome {
    if cond {
        Ok(ok.into())
    } else {
        Err(fail.into())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Writes a CSV with `attrs` attributes in [0, 1], an id column and a label
/// column whose convention follows `kind`.
fn write_dataset(dir: &Path, kind: ModelKind, rows: usize, attrs: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<f64> = (0..attrs).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut text = String::from("id");
    for j in 0..attrs {
        let _ = write!(text, ",x{j}");
    }
    text.push_str(",y\n");
    for r in 0..rows {
        let x: Vec<f64> = (0..attrs).map(|_| rng.gen_range(0.0..1.0)).collect();
        let z = models::dot(&truth, &x) + rng.gen_range(-0.3..0.3);
        let _ = write!(text, "rec-{r}");
        for v in &x {
            let _ = write!(text, ",{v:.6}");
        }
        let label = match kind {
            ModelKind::LinearRegression => format!("{z:.6}"),
            _ => u8::from(z > 0.0).to_string(),
        };
        let _ = writeln!(text, ",{label}");
    }
    let path = dir.join(format!("{}-{seed}.csv", kind.name()));
    std::fs::write(&path, text).unwrap();
    path
}

fn small_config(path: PathBuf, kind: ModelKind, rows: usize, parties: usize, sigma: i64) -> RunConfig {
    RunConfig {
        data: DataConfig {
            path,
            label_column: Some("y".into()),
            id_column: Some("id".into()),
            positive_label: None,
            train_rows: rows,
            test_rows: 0,
        },
        federation: FederationSection { parties, threshold: 1, ..FederationSection::default() },
        model: ModelSection {
            kind: kind.name().into(),
            alpha: 0.2,
            lambda: 0.01,
            batch_size: 8,
            batches_per_epoch: Some(5),
            epochs: 4,
            update: "per_batch".into(),
            secure_loss: false,
        },
        crypto: CryptoSection {
            sigma,
            table_half_width: if sigma > 1_000 { 1 << 22 } else { 1 << 16 },
            ..CryptoSection::default()
        },
        resolution: Default::default(),
        seeds: Default::default(),
    }
}

fn c1_fe_correctness() -> Outcome {
    let start = Instant::now();
    let ctx = group_gen(64, b"acceptance fe").map_err(err)?;
    let table = DlogTable::build(&ctx, 1 << 16).map_err(err)?;
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let entry = |rng: &mut ChaCha20Rng| rng.gen_range(-1024i64..=1024);
    let cases = 128;
    let mut failures = 0;
    for _ in 0..cases {
        let eta = rng.gen_range(1..=16);
        let msk = sife::setup(&ctx, eta, &mut rng).map_err(err)?;
        let x: Vec<i64> = (0..eta).map(|_| entry(&mut rng)).collect();
        let y: Vec<i64> = (0..eta).map(|_| entry(&mut rng)).collect();
        let ct = sife::encrypt(&ctx, msk.public_key(), &x, &mut rng).map_err(err)?;
        let key = sife::derive_key(&ctx, &msk, &y).map_err(err)?;
        let got = sife::decrypt(&ctx, &ct, &key, &table, 16 << 20).map_err(err)?;
        failures += usize::from(got != dot_i64(&x, &y));
    }
    for _ in 0..cases {
        let n = rng.gen_range(1..=5);
        let lengths: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=4)).collect();
        let msk = mife::setup(&ctx, &lengths, &mut rng).map_err(err)?;
        let xs: Vec<Vec<i64>> = lengths.iter().map(|&l| (0..l).map(|_| entry(&mut rng)).collect()).collect();
        let y: Vec<i64> = (0..lengths.iter().sum()).map(|_| entry(&mut rng)).collect();
        let cts = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let key = mife::skdist(&ctx, &msk, i + 1)?;
                mife::encrypt(&ctx, &key, x, &mut rng).map(Some)
            })
            .collect::<fedv_core::Result<Vec<_>>>()
            .map_err(err)?;
        let key = mife::derive_key(&ctx, &msk, &y).map_err(err)?;
        let got = mife::decrypt(&ctx, &cts, &key, &table, 20 << 20).map_err(err)?;
        failures += usize::from(got != dot_i64(&xs.concat(), &y));
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        failures == 0 && secs < 60.0,
        format!("{cases} SIFE + {cases} MIFE roundtrips exact in {secs:.1}s (limit 60s)"),
        format!("{failures} mismatches, {secs:.1}s"),
    )
}

fn c2_losslessness(dir: &Path) -> Outcome {
    let mut worst = Vec::new();
    for kind in ModelKind::ALL {
        for (sigma, tol) in [(1_000i64, 2.0 / 1_000.0), (1_000_000, 2e-3)] {
            for parties in [2, 3] {
                let path = write_dataset(dir, kind, 40, 5, 20 + parties as u64);
                let cfg = small_config(path, kind, 40, parties, sigma);
                let out = dir.join(format!("c2-{}-{sigma}-{parties}", kind.name()));
                experiment::run_experiment(&cfg, Some(&out)).map_err(err)?;
                let v = experiment::verify(&out).map_err(err)?;
                if v.checked != 20 || v.max_abs_deviation > tol {
                    return Err(format!(
                        "{} sigma={sigma} n={parties}: {} batches checked, max deviation {:.3e} > {tol:.0e}",
                        kind.name(),
                        v.checked,
                        v.max_abs_deviation
                    ));
                }
                worst.push(format!("{}@{sigma}/n{parties}={:.2e}", kind.name(), v.max_abs_deviation));
            }
        }
    }
    Ok(format!("20 batches per case, s=8, d=6; max deviations {}", worst.join(" ")))
}

fn c3_ipm() -> Outcome {
    let ctx = group_gen(64, b"acceptance ipm").map_err(err)?;
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let (mut served, mut rejected) = (0usize, 0usize);
    for n in 2..=4usize {
        for (t, binary) in (1..=n).flat_map(|t| [(t, true), (t, false)]) {
            let s = 3;
            let mut policy = IpmPolicy::new(n, t, s).map_err(err)?;
            policy.binary_fusion = binary;
            let (mut tpa, _, _) = Tpa::setup(&ctx, policy, &mut rng).map_err(err)?;
            let mut requests = Vec::new();
            // every vector over {-1, 0, 1, 2} of lengths n-1, n and n+1
            for len in n - 1..=n + 1 {
                for code in 0..4usize.pow(len as u32) {
                    let v: Vec<i64> = (0..len).map(|i| (code / 4usize.pow(i as u32) % 4) as i64 - 1).collect();
                    let ok = len == n
                        && (!binary || v.iter().all(|&x| x == 0 || x == 1))
                        && v.iter().sum::<i64>() > t as i64;
                    requests.push((KeyRequest::feature_dim(v), ok));
                }
            }
            for len in [s - 1, s, s + 1] {
                requests.push((KeyRequest::sample_dim(vec![5; len]), len == s));
            }
            let mut unit = vec![0; n];
            unit[n - 1] = 1;
            requests.push((KeyRequest::feature_dim(unit), false));
            for (req, ok) in requests {
                match (tpa.query_key_service(&req), ok) {
                    (KeyResponse::Granted(FunctionalKey::Mife(_) | FunctionalKey::Sife(_)), true) => served += 1,
                    (KeyResponse::Rejected(reason), false) if reason == EXPLOITED_VECTOR => rejected += 1,
                    (resp, _) => {
                        return Err(format!(
                            "n={n} t={t} binary={binary} vector {:?}: unexpected {resp:?}",
                            req.vector
                        ));
                    }
                }
                if ipm_check(&policy, &req).is_ok() != ok {
                    return Err(format!("ipm_check disagrees on {:?}", req.vector));
                }
            }
        }
    }
    Ok(format!("exhaustive n=2..4, all t, binary and integer fusion: {served} compliant served, {rejected} rejected as \"{EXPLOITED_VECTOR}\""))
}

fn c4_dropout(dir: &Path) -> Outcome {
    let kind = ModelKind::Logistic;
    let path = write_dataset(dir, kind, 60, 6, 44);
    let mut cfg = small_config(path, kind, 60, 3, 1_000);
    cfg.model.epochs = 8;
    cfg.federation.dropout = Some(DropoutSection { parties: vec![2], fraction: 0.3, seed: 9 });
    let out = dir.join("c4");
    let report = experiment::run_experiment(&cfg, Some(&out)).map_err(err)?;
    let log = std::fs::read_to_string(out.join(BATCHES_FILE)).map_err(err)?;
    let affected = log.lines().filter(|l| l.contains("\"live\":[true,true,false]")).count();
    let total = log.lines().count();
    let v = experiment::verify(&out).map_err(err)?;
    check(
        affected > 0 && report.skipped_batches == 0 && v.checked == total && v.max_abs_deviation <= 2e-3,
        format!(
            "n=3 t=1, party 2 absent in {affected}/{total} batches, all applied; max deviation vs reduced oracle {:.2e} (tol 2e-3)",
            v.max_abs_deviation
        ),
        format!("affected={affected} skipped={} checked={} dev={:.3e}", report.skipped_batches, v.checked, v.max_abs_deviation),
    )
}

fn c5_message_counts(dir: &Path) -> Outcome {
    let kind = ModelKind::LogisticTaylor;
    let mut seen = Vec::new();
    for n in 2..=5usize {
        let path = write_dataset(dir, kind, 30, 6, 50 + n as u64);
        let mut cfg = small_config(path, kind, 30, n, 1_000);
        cfg.model.batch_size = 4;
        cfg.model.batches_per_epoch = Some(3);
        cfg.model.epochs = 2;
        cfg.model.secure_loss = true;
        let out = dir.join(format!("c5-{n}"));
        let report = experiment::run_experiment(&cfg, Some(&out)).map_err(err)?;
        let metrics = std::fs::read_to_string(out.join(METRICS_FILE)).map_err(err)?;
        let mut per_phase: BTreeMap<String, BTreeSet<u64>> = BTreeMap::new();
        for line in metrics.lines() {
            let v: serde_json::Value = serde_json::from_str(line).map_err(err)?;
            if v["type"] == "iteration" {
                per_phase
                    .entry(v["phase"].as_str().unwrap_or("").into())
                    .or_default()
                    .insert(v["crypto_party_messages"].as_u64().unwrap_or(0));
                if v["p2p_messages"].as_u64() != Some(0) {
                    return Err(format!("n={n}: peer-to-peer traffic recorded"));
                }
            }
        }
        let expected = BTreeSet::from([n as u64]);
        if per_phase.get("gradient") != Some(&expected)
            || per_phase.get("loss") != Some(&expected)
            || report.p2p_messages != 0
        {
            return Err(format!("n={n}: per-iteration counts {per_phase:?}, p2p {}", report.p2p_messages));
        }
        seen.push(format!("n={n}:{n}/{n}/0"));
    }
    Ok(format!("gradient/loss/p2p messages per iteration {}", seen.join(" ")))
}

fn c6_accuracy(dir: &Path) -> Outcome {
    let start = Instant::now();
    let path = dir.join("ionosphere.csv");
    synth::write(Shape::Ionosphere, 1, &path).map_err(err)?;
    let (train, test) = Shape::Ionosphere.split();
    let cfg = RunConfig {
        data: DataConfig {
            path,
            label_column: Some("class".into()),
            id_column: Some("id".into()),
            positive_label: Some("g".into()),
            train_rows: train,
            test_rows: test,
        },
        federation: FederationSection { parties: 2, threshold: 1, ..FederationSection::default() },
        model: ModelSection {
            kind: "logistic".into(),
            alpha: 0.5,
            lambda: 0.001,
            batch_size: 32,
            batches_per_epoch: None,
            epochs: 40,
            update: "per_batch".into(),
            secure_loss: false,
        },
        crypto: CryptoSection { group_bits: 64, sigma: 1_000_000, beta: 100.0, table_half_width: 1 << 24 },
        resolution: Default::default(),
        seeds: Default::default(),
    };
    let oracle = experiment::run_oracle(&cfg).map_err(err)?;
    let fed = experiment::run_experiment(&cfg, None).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    let (a, b) = (fed.test.accuracy.unwrap_or(0.0), oracle.test.accuracy.unwrap_or(0.0));
    check(
        (a - b).abs() <= 0.02 && secs < 600.0,
        format!("Ionosphere-shaped 288/63, 2 parties, sigma=1e6, 40 epochs: FedV {:.1}% vs centralized {:.1}% (tol 2pp) in {secs:.0}s", a * 100.0, b * 100.0),
        format!("FedV {a:.4} vs oracle {b:.4} after {secs:.0}s"),
    )
}

fn c7_otp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (rows, s) = (1_000usize, 32usize);
    let trials = 1_000;
    let mut collisions = 0;
    for _ in 0..trials {
        let mut seed = [0u8; 32];
        rng.fill(&mut seed);
        let (epoch, b_idx) = (rng.gen_range(0..360u32), rng.gen_range(0..100u32));
        let parties: Vec<OtpChain> = (0..5).map(|_| OtpChain::new(seed)).collect();
        let lists: Vec<Vec<usize>> = parties
            .iter()
            .map(|p| p.select_batch(epoch, b_idx, s, rows))
            .collect::<fedv_core::Result<_>>()
            .map_err(err)?;
        if lists.iter().any(|l| l != &lists[0]) {
            return Err("parties disagree on a batch".into());
        }
        let mut seed2 = seed;
        seed2[rng.gen_range(0..32)] ^= 1 << rng.gen_range(0..8);
        let variants = [
            OtpChain::new(seed2).select_batch(epoch, b_idx, s, rows),
            parties[0].select_batch(epoch + 1, b_idx, s, rows),
            parties[0].select_batch(epoch, b_idx + 1, s, rows),
        ];
        for v in variants {
            collisions += usize::from(v.map_err(err)? == lists[0]);
        }
    }
    let rate = collisions as f64 / (3 * trials) as f64;
    check(
        rate < 0.01,
        format!("{trials} triples, 5 parties agree; perturbed triples collide at rate {rate:.4} (limit 0.01)"),
        format!("collision rate {rate}"),
    )
}

fn c8_finite_differences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for kind in ModelKind::ALL {
        let mut done = 0;
        while done < 50 {
            let (s, d) = (rng.gen_range(1..=6), rng.gen_range(1..=5));
            let x: Vec<Vec<f64>> = (0..s).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let y: Vec<f64> = (0..s)
                .map(|_| match kind.classes() {
                    Some((neg, pos)) => {
                        if rng.gen_bool(0.5) {
                            pos
                        } else {
                            neg
                        }
                    }
                    None => rng.gen_range(-2.0..2.0),
                })
                .collect();
            let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lambda = rng.gen_range(0.0..0.1);
            // keep every margin away from the hinge kink
            if kind == ModelKind::SvmSquaredHinge
                && x.iter().zip(&y).any(|(r, &yk)| (1.0 - yk * models::dot(&w, r)).abs() < 1e-2)
            {
                continue;
            }
            let g = models::oracle_gradient(kind, &x, &y, &w, lambda).map_err(err)?;
            let h = 1e-5;
            for j in 0..d {
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[j] += h;
                wm[j] -= h;
                let fd = (models::objective(kind, &x, &y, &wp, lambda).map_err(err)?
                    - models::objective(kind, &x, &y, &wm, lambda).map_err(err)?)
                    / (2.0 * h);
                let rel = (g[j] - fd).abs() / g[j].abs().max(fd.abs()).max(1e-3);
                worst = worst.max(rel);
            }
            done += 1;
        }
    }
    check(
        worst <= 1e-5,
        format!("4 models x 50 instances, worst relative error {worst:.2e} (limit 1e-5)"),
        format!("worst relative error {worst:.3e}"),
    )
}

fn person(rng: &mut ChaCha8Rng) -> String {
    const SYL: [&str; 16] =
        ["ka", "lo", "mi", "ren", "sa", "to", "vel", "an", "dor", "is", "qu", "be", "ny", "ul", "fe", "zo"];
    let word = |rng: &mut ChaCha8Rng, k: usize| (0..k).map(|_| SYL[rng.gen_range(0..SYL.len())]).collect::<String>();
    let (first, last) = (word(rng, 2), word(rng, 3));
    format!("{first} {last} {}-{:02}-{:02}", rng.gen_range(1940..2005), rng.gen_range(1..13), rng.gen_range(1..29))
}

fn pairs(perms: &[Permutation]) -> BTreeSet<(usize, usize)> {
    let inv = |p: &Permutation| -> BTreeMap<usize, usize> {
        p.iter().enumerate().filter_map(|(l, g)| g.map(|g| (g, l))).collect()
    };
    let (a, b) = (inv(&perms[0]), inv(&perms[1]));
    a.iter().filter_map(|(g, la)| b.get(g).map(|lb| (*la, *lb))).collect()
}

fn c9_entity_resolution() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut people: Vec<String> = Vec::new();
    while people.len() < 240 {
        let p = person(&mut rng);
        if !people.contains(&p) {
            people.push(p);
        }
    }
    // 200 shared identities, 20 extras on each side, the second party shuffled
    let a: Vec<String> = people[..200].iter().chain(&people[200..220]).cloned().collect();
    let mut b: Vec<String> = people[..200].iter().chain(&people[220..240]).cloned().collect();
    b.shuffle(&mut rng);
    let key = b"acceptance clk";
    let clks = [&a, &b]
        .iter()
        .map(|ids| {
            ids.iter().map(|id| entity::build_clk(&[id.as_str()], 1024, 2, key)).collect::<fedv_core::Result<Vec<_>>>()
        })
        .collect::<fedv_core::Result<Vec<_>>>()
        .map_err(err)?;
    let fuzzy = pairs(&entity::match_and_permute(&clks, 0.8).map_err(err)?);
    let exact = pairs(&entity::exact_join(&[a.clone(), b.clone()]).map_err(err)?);
    let agree = fuzzy.intersection(&exact).count();
    let accuracy = agree as f64 / exact.len() as f64;
    let extras_matched = fuzzy.iter().filter(|(la, lb)| *la >= 200 || people[200..].contains(&b[*lb])).count();
    check(
        exact.len() == 200 && accuracy >= 0.99 && extras_matched == 0,
        format!("200 shared + 20 extras per side: CLK/Dice at 0.8 reproduces {agree}/200 exact-join pairs ({:.1}%), 0 extras matched", accuracy * 100.0),
        format!("exact pairs {}, agreement {accuracy:.4}, extras matched {extras_matched}", exact.len()),
    )
}

fn c10_dlog() -> Outcome {
    let ctx = group_gen(64, b"acceptance dlog").map_err(err)?;
    let b: u64 = 1 << 20;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let exps: Vec<i64> = (0..1_000).map(|_| rng.gen_range(-(b as i64)..=b as i64)).collect();

    let full = DlogTable::build(&ctx, b).map_err(err)?;
    let mut max_slots = 0;
    let t = Instant::now();
    for &e in &exps {
        let p = full.probe(&ctx, &ctx.g_pow_signed(e));
        if p.exponent != Some(e) {
            return Err(format!("table lookup failed for {e}"));
        }
        max_slots = max_slots.max(p.slots_inspected);
    }
    let hit_us = t.elapsed().as_secs_f64() * 1e6 / exps.len() as f64;

    // a small table forces the giant-step fallback for almost every exponent
    let small = DlogTable::build(&ctx, 1 << 10).map_err(err)?;
    let mut worst = Duration::ZERO;
    for &e in &exps {
        let h = ctx.g_pow_signed(e);
        let t = Instant::now();
        let got = dlog::dlog(&ctx, &small, &h, b).map_err(err)?;
        worst = worst.max(t.elapsed());
        if got != e {
            return Err(format!("fallback recovered {got} for {e}"));
        }
    }
    let mut worst_bsgs = Duration::ZERO;
    for &e in &exps[..20] {
        let h = ctx.g_pow_signed(e);
        let t = Instant::now();
        let got = dlog::bsgs(&ctx, &h, b).map_err(err)?;
        worst_bsgs = worst_bsgs.max(t.elapsed());
        if got != e {
            return Err(format!("standalone BSGS recovered {got} for {e}"));
        }
    }
    let limit = Duration::from_millis(50);
    check(
        max_slots <= 64 && worst < limit && worst_bsgs < limit,
        format!(
            "b=2^20, 1000 exponents: table hits {hit_us:.1}us avg, at most {max_slots} slots probed; fallback worst {:.2}ms, standalone BSGS worst {:.2}ms (limit 50ms)",
            worst.as_secs_f64() * 1e3,
            worst_bsgs.as_secs_f64() * 1e3
        ),
        format!("slots {max_slots}, fallback {worst:?}, bsgs {worst_bsgs:?}"),
    )
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let d = dir.path();
    let criteria: Vec<Criterion> = vec![
        (1, "FE correctness", Box::new(c1_fe_correctness)),
        (2, "protocol losslessness", Box::new(|| c2_losslessness(d))),
        (3, "IPM enforcement", Box::new(c3_ipm)),
        (4, "dropout", Box::new(|| c4_dropout(d))),
        (5, "communication counts", Box::new(|| c5_message_counts(d))),
        (6, "end-to-end accuracy", Box::new(|| c6_accuracy(d))),
        (7, "OTP batch agreement", Box::new(c7_otp)),
        (8, "gradient vs finite differences", Box::new(c8_finite_differences)),
        (9, "entity resolution", Box::new(c9_entity_resolution)),
        (10, "discrete-log recovery", Box::new(c10_dlog)),
    ];
    let filter: Option<Vec<u32>> =
        std::env::var("FEDV_CRITERIA").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, run) in &criteria {
        if filter.as_ref().is_some_and(|f| !f.contains(id)) {
            continue;
        }
        let t = Instant::now();
        let outcome = run();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
