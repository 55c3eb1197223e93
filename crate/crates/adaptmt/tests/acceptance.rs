//! Acceptance suite: one PASS/FAIL line per criterion on stderr (written
//! straight to the stream so it shows even when output is captured).

mod common;

use std::collections::{HashMap, VecDeque};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use adaptmt::checkpoint::{checkpoint, restore};
use adaptmt::files::save_bpe;
use adaptmt::pelog_xml::{parse_log, write_log};
use adaptmt::server::{serve, ApiUser, Credentials, Registry};
use adaptmt::SystemClock;
use adaptmt_core::adaptation::{AdaptiveSession, ModelConfig, TrainingPair};
use adaptmt_core::metrics::{bleu, hbleu, hter, ter};
use adaptmt_core::neuralmt::{Arch, NmtModel};
use adaptmt_core::pelog::{Edit, EventKind, LogEvent};
use adaptmt_core::simulator::{compare_runs, generate, pretrain, run_simulation, CorpusSpec, PretrainSpec};
use common::{http, system, write_project};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

type Check = std::result::Result<String, String>;

fn line(text: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{text}");
}

fn criterion(name: &str, check: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            line(&format!("PASS {name}: {detail} [{secs:.1}s]"));
            true
        }
        Err(why) => {
            line(&format!("FAIL {name}: {why} [{secs:.1}s]"));
            false
        }
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn session(cfg: ModelConfig) -> AdaptiveSession {
    let s = system();
    AdaptiveSession::new(s.model.clone(), s.pipeline.clone(), cfg).unwrap()
}

fn config(id: &str) -> ModelConfig {
    ModelConfig::new(id, "en", "fr", &format!("{id}.bpe"), &format!("{id}.ckpt"))
}

fn efficacy() -> Check {
    let start = Instant::now();
    let mut rows = Vec::new();
    for seed in 1..=3u64 {
        let corpus = generate(&CorpusSpec {
            seed,
            ..Default::default()
        });
        let (pipeline, model, _) = pretrain(&corpus.train, &PretrainSpec { seed, ..Default::default() })
            .map_err(|e| e.to_string())?;
        let base = AdaptiveSession::new(model, pipeline, config("sim"))
            .map_err(|e| e.to_string())?
            .with_clock(Arc::new(SystemClock::new()));
        let fixed = run_simulation(&mut base.clone(), &corpus.test, false).map_err(|e| e.to_string())?;
        let online = run_simulation(&mut base.clone(), &corpus.test, true).map_err(|e| e.to_string())?;
        let cmp = compare_runs(&fixed, &online).map_err(|e| e.to_string())?;
        rows.push((seed, corpus.test.len(), cmp.delta_hter, cmp.delta_hbleu));
    }
    let elapsed = start.elapsed();
    let detail = rows
        .iter()
        .map(|(s, n, t, b)| format!("seed {s} ({n} segs): dHTER={t:.1} dBLEU={b:.1}"))
        .collect::<Vec<_>>()
        .join("; ");
    ensure(rows.iter().all(|r| r.2 >= 2.0 && r.3 >= 2.0), || format!("delta below 2.0 points: {detail}"))?;
    ensure(elapsed < Duration::from_secs(600), || format!("took {elapsed:?}: {detail}"))?;
    Ok(format!("{detail}; total {:.0}s", elapsed.as_secs_f64()))
}

fn overfit() -> Check {
    let mut slowest = 0.0f64;
    let pairs = &system().corpus.test[..5];
    for (src, pe) in pairs {
        let mut cfg = config("p");
        cfg.learning_rate = 0.1;
        let mut s = session(cfg);
        let start = Instant::now();
        for i in 0..50 {
            s.confirm_and_update(TrainingPair::new("1", src, pe, i)).map_err(|e| e.to_string())?;
        }
        let out = s.translate_segment(src).map_err(|e| e.to_string())?.text;
        let secs = start.elapsed().as_secs_f64();
        slowest = slowest.max(secs);
        ensure(&out == pe, || format!("{src:?} -> {out:?}, expected {pe:?}"))?;
        ensure(secs < 5.0, || format!("{secs:.2}s for {src:?}"))?;
    }
    Ok(format!("{} pairs reproduced, slowest {slowest:.2}s", pairs.len()))
}

fn gradients() -> Check {
    let start = Instant::now();
    let model = NmtModel::<f64>::new(Arch::new(10, 12).with_dims(8, 8), 42).map_err(|e| e.to_string())?;
    let n = model.params().num_values();
    ensure(n <= 5000, || format!("{n} parameters"))?;
    let (src, tgt) = ([4, 7, 9, 5], [6, 11, 4]);
    let (_, grads) = model.loss_and_grad(&src, &tgt).map_err(|e| e.to_string())?;
    let eps = 1e-5;
    let mut worst = 0.0f64;
    let mut probe = model.clone();
    for ti in 0..model.params().len() {
        for k in 0..model.params().tensors()[ti].len() {
            let orig = model.params().tensors()[ti].data()[k];
            probe.params_mut().tensors_mut()[ti].data_mut()[k] = orig + eps;
            let up = probe.loss(&src, &tgt).unwrap();
            probe.params_mut().tensors_mut()[ti].data_mut()[k] = orig - eps;
            let down = probe.loss(&src, &tgt).unwrap();
            probe.params_mut().tensors_mut()[ti].data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grads.tensors()[ti].data()[k];
            worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst < 1e-4, || format!("max relative error {worst:.2e}"))?;
    ensure(secs < 60.0, || format!("{secs:.1}s"))?;
    Ok(format!("{n} params, max relative error {worst:.2e}"))
}

fn descent() -> Check {
    let mut rng = StdRng::seed_from_u64(2024);
    let c = &system().corpus;
    let pool: Vec<&(String, String)> = c.train.iter().chain(&c.test).collect();
    let mut cfg = config("p");
    cfg.learning_rate = 1e-3;
    let base = session(cfg);
    let mut ok = 0;
    for i in 0..100 {
        let (src, pe) = pool[rng.gen_range(0..pool.len())];
        let r = base.clone().confirm_and_update(TrainingPair::new("1", src, pe, i)).map_err(|e| e.to_string())?;
        if r.post_loss <= r.pre_loss {
            ok += 1;
        }
    }
    ensure(ok >= 95, || format!("{ok}/100 updates did not increase the loss"))?;
    Ok(format!("{ok}/100 updates did not increase the loss"))
}

fn levenshtein(a: &[&str], b: &[&str]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for j in 1..=b.len() {
            cur[j] = (prev[j - 1] + usize::from(*x != b[j - 1])).min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Exhaustive minimum over block moves (unit cost each) plus edit distance.
fn exact_ter_cost(hyp: &[&'static str], reference: &[&str]) -> usize {
    let mut dist: HashMap<Vec<&str>, usize> = HashMap::from([(hyp.to_vec(), 0)]);
    let mut queue = VecDeque::from([hyp.to_vec()]);
    while let Some(cur) = queue.pop_front() {
        let d = dist[&cur];
        let n = cur.len();
        for len in 1..=n {
            for start in 0..=n - len {
                for dest in (0..=n - len).filter(|&x| x != start) {
                    let mut rest = cur[..start].to_vec();
                    rest.extend_from_slice(&cur[start + len..]);
                    let mut next = rest[..dest].to_vec();
                    next.extend_from_slice(&cur[start..start + len]);
                    next.extend_from_slice(&rest[dest..]);
                    if !dist.contains_key(&next) {
                        dist.insert(next.clone(), d + 1);
                        queue.push_back(next);
                    }
                }
            }
        }
    }
    dist.iter().map(|(s, m)| m + levenshtein(s, reference)).min().unwrap()
}

fn metric_oracles() -> Check {
    // Documented examples.
    let four_the = vec![vec!["the", "the", "the", "the"]];
    ensure(bleu(&four_the, &[vec!["the", "cat"]]).unwrap() == 0.0, || "clipped BLEU example".into())?;
    let corpus = vec![vec!["a", "b", "c", "d"], vec!["x", "y", "z", "w", "v"]];
    ensure(bleu(&corpus, &corpus).unwrap() == 100.0, || "identity BLEU".into())?;
    ensure(bleu(&[vec![]], &[vec!["a", "b"]]).unwrap() == 0.0, || "empty hypothesis BLEU".into())?;
    ensure(bleu(&[vec!["a"]], &[vec!["a"], vec!["b"]]).is_err(), || "length mismatch accepted".into())?;
    let same = ter(&["a", "b", "c"], &["a", "b", "c"]).unwrap();
    ensure(same.score == 0.0 && same.edits() == 0, || "identity TER".into())?;
    let swap = ter(&["b", "a"], &["a", "b"]).unwrap();
    ensure(swap.shifts == 1 && swap.score == 0.5, || format!("swap TER {swap:?}"))?;
    let ins = ter(&["a"], &["a", "b"]).unwrap();
    ensure(ins.insertions == 1 && ins.score == 0.5, || format!("insertion TER {ins:?}"))?;
    ensure(ter::<&str>(&["a"], &[]).is_err(), || "empty reference accepted".into())?;
    ensure(hter(&["x", "y", "z"], &["a", "b", "c"]).unwrap() == 1.0, || "rewrite hTER".into())?;
    ensure(hter(&["a", "b"], &["a", "b"]).unwrap() == 0.0, || "accepted hTER".into())?;
    ensure(hbleu(&corpus, &corpus).unwrap() == 100.0, || "accepted hBLEU".into())?;

    // Exhaustive shift search on short sequences.
    let mut seqs: Vec<Vec<&'static str>> = vec![vec![]];
    let mut frontier = seqs.clone();
    for _ in 0..4 {
        frontier = frontier
            .iter()
            .flat_map(|s| ["a", "b", "c"].map(|t| [s.as_slice(), &[t]].concat()))
            .collect();
        seqs.extend(frontier.iter().cloned());
    }
    let (mut total, mut equal) = (0usize, 0usize);
    for r in seqs.iter().filter(|r| !r.is_empty()) {
        for h in &seqs {
            let greedy = ter(h, r).unwrap().edits();
            let exact = exact_ter_cost(h, r);
            ensure(greedy >= exact, || format!("{h:?} vs {r:?}: greedy {greedy} below minimum {exact}"))?;
            total += 1;
            equal += usize::from(greedy == exact);
        }
    }
    let rate = equal as f64 / total as f64;
    ensure(rate >= 0.90, || format!("greedy optimal on {equal}/{total}"))?;
    Ok(format!("documented examples exact; greedy TER optimal on {equal}/{total} ({:.2}%), never below", 100.0 * rate))
}

fn protocol() -> Check {
    let dir = tempfile::tempdir().unwrap();
    write_project(dir.path(), "a", |_| {});
    write_project(dir.path(), "b", |_| {});
    let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(4).enable_all().build().unwrap();
    let creds = Credentials::new(vec![ApiUser::new("u", "pw", &["*"])]);
    let handle = rt.block_on(serve("127.0.0.1:0", Registry::new(dir.path()), creds)).map_err(|e| e.to_string())?;
    let addr = handle.addr;
    let auth = Some(("u", "pw"));
    let post = |path: &str, body: &Value| http(addr, "POST", path, auth, Some(&body.to_string()));
    let srcs: Vec<&str> = system().corpus.test[..6].iter().map(|p| p.0.as_str()).collect();
    let translate = |project: &str| {
        let segs: Vec<Value> = srcs.iter().enumerate().map(|(i, s)| json!({"id": i, "src": s})).collect();
        let (code, v) = post("/api/v1/translate", &json!({"project_id": project, "segments": segs}));
        assert_eq!(code, 200, "{v}");
        v["segments"].as_array().unwrap().clone()
    };

    // Round trip.
    let b_before = translate("b");
    let first = translate("a");
    let (src, pe) = &system().corpus.test[0];
    let update = |i: usize| {
        let (src, pe) = &system().corpus.test[i % 10];
        let (code, v) = post(
            "/api/v1/update",
            &json!({"project_id": "a", "segment_id": i, "src": src, "post_edit": pe}),
        );
        assert_eq!(code, 200, "{v}");
        v
    };
    let ack = update(0);
    assert_eq!(ack["updates_applied"], json!(1));
    let second = translate("a");
    assert!(first.iter().all(|s| s["model_updates_seen"] == json!(0)));
    assert!(second.iter().all(|s| s["model_updates_seen"] == json!(1)));
    assert!(
        second[0]["tgt"] != first[0]["tgt"] || second[0]["hypothesis_id"] != first[0]["hypothesis_id"] || ack["pre_loss"] == ack["post_loss"],
        "update not visible for {src:?} / {pe:?}"
    );

    // Serialized updates with concurrent readers.
    let (acks, seen): (Vec<u64>, Vec<u64>) = std::thread::scope(|s| {
        let writers: Vec<_> = (1..11).map(|i| s.spawn(move || update(i)["updates_applied"].as_u64().unwrap())).collect();
        let readers: Vec<_> = (0..6)
            .map(|_| s.spawn(|| translate("a").iter().map(|x| x["model_updates_seen"].as_u64().unwrap()).collect::<Vec<_>>()))
            .collect();
        let acks = writers.into_iter().map(|h| h.join().unwrap()).collect();
        let seen = readers.into_iter().flat_map(|h| h.join().unwrap()).collect();
        (acks, seen)
    });
    let mut sorted = acks.clone();
    sorted.sort();
    assert_eq!(sorted, (2..=11).collect::<Vec<u64>>(), "acks {acks:?}");
    assert!(seen.iter().all(|n| (1..=11).contains(n)), "snapshot counters {seen:?}");
    let (_, status) = http(addr, "GET", "/api/v1/status/a", auth, None);
    assert_eq!(status["updates_applied"], json!(11));

    // Isolation.
    assert_eq!(translate("b"), b_before, "project b changed");

    // Error statuses.
    let cases: Vec<(&str, &str, Option<(&str, &str)>, String, u16, &str)> = vec![
        ("POST", "/api/v1/translate", None, json!({"project_id": "a", "segments": []}).to_string(), 401, "unauthorized"),
        ("POST", "/api/v1/translate", Some(("u", "bad")), json!({"project_id": "a", "segments": []}).to_string(), 401, "unauthorized"),
        ("POST", "/api/v1/translate", auth, json!({"project_id": "nope", "segments": []}).to_string(), 404, "unknown_project"),
        ("POST", "/api/v1/update", auth, json!({"project_id": "nope", "segment_id": 1, "src": "x", "post_edit": "y"}).to_string(), 404, "unknown_project"),
        ("GET", "/api/v1/status/nope", auth, String::new(), 404, "unknown_project"),
        ("POST", "/api/v1/translate", auth, "{".into(), 422, "malformed_request"),
        ("POST", "/api/v1/translate", auth, "[]".into(), 422, "malformed_request"),
        ("POST", "/api/v1/translate", auth, json!({"project_id": "a"}).to_string(), 422, "malformed_request"),
        ("POST", "/api/v1/translate", auth, json!({"project_id": "a", "segments": [{"src": "x"}]}).to_string(), 422, "malformed_request"),
        ("POST", "/api/v1/update", auth, json!({"project_id": "a", "segment_id": 1, "src": "x"}).to_string(), 422, "malformed_request"),
        ("POST", "/api/v1/update", auth, json!({"project_id": "a", "segment_id": 1, "src": 3, "post_edit": "y"}).to_string(), 422, "malformed_request"),
    ];
    let n_cases = cases.len();
    for (method, path, who, body, status, code) in cases {
        let (got, v) = http(addr, method, path, who, (!body.is_empty()).then_some(body.as_str()));
        assert_eq!((got, v["code"].as_str()), (status, Some(code)), "{method} {path} {body}");
        assert!(v["message"].is_string());
    }
    let (_, v) = post("/api/v1/update", &json!({"project_id": "a", "segment_id": 1, "src": "x"}));
    assert!(v["message"].as_str().unwrap().contains("post_edit"));
    let (code, v) = post("/api/v1/translate", &json!({"project_id": "a", "segments": []}));
    assert_eq!((code, v), (200, json!({"segments": []})));

    let flushed = rt.block_on(handle.shutdown()).map_err(|e| e.to_string())?;
    assert_eq!(flushed, 1);
    Ok(format!(
        "round trip, 10 serialized updates with concurrent readers, isolation and {n_cases} error cases"
    ))
}

fn persistence() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let (ckpt, bpe) = (dir.path().join("m.ckpt"), dir.path().join("m.bpe"));
    save_bpe(&system().pipeline.bpe, &bpe).map_err(|e| e.to_string())?;
    let doc = &system().corpus.test;
    let pair = |i: usize| TrainingPair::new(&i.to_string(), &doc[i].0, &doc[i].1, i as u64);
    let mut live = session(config("m"));
    let mut losses = Vec::new();
    for i in 0..12 {
        losses.push(live.confirm_and_update(pair(i)).map_err(|e| e.to_string())?.post_loss);
        if i == 5 {
            checkpoint(&live, &ckpt).map_err(|e| e.to_string())?;
            let back = restore(&ckpt, config("m"), &bpe).map_err(|e| e.to_string())?;
            for (src, _) in doc {
                ensure(back.translate_segment(src).unwrap() == live.translate_segment(src).unwrap(), || {
                    format!("restored translation differs for {src:?}")
                })?;
            }
        }
    }
    let mut resumed = restore(&ckpt, config("m"), &bpe).map_err(|e| e.to_string())?;
    for i in 6..12 {
        let got = resumed.confirm_and_update(pair(i)).map_err(|e| e.to_string())?.post_loss;
        ensure(got == losses[i], || format!("post-loss {got} vs {} at step {i}", losses[i]))?;
    }
    Ok(format!("{} translations bit-identical; 6 replayed post-losses identical", doc.len()))
}

fn pelog_round_trip() -> Check {
    let kind = prop_oneof![
        Just(EventKind::Focus),
        Just(EventKind::Confirm),
        ("\\PC{0,4}", prop_oneof![Just(Edit::Insert), Just(Edit::Delete), Just(Edit::Navigate), (0usize..999).prop_map(Edit::Paste)])
            .prop_map(|(key, edit)| EventKind::Keystroke { key, edit }),
        "[ -~\t\n]{0,6}".prop_map(|action| EventKind::Mouse { action }),
    ];
    let stream = prop::collection::btree_set("[a-z0-9&<> ]{0,5}", 1..4).prop_flat_map(move |ids| {
        let ids: Vec<String> = ids.into_iter().collect();
        let n = ids.len();
        prop::collection::vec((0..n, 0u64..10_000, kind.clone()), 0..50).prop_map(move |raw| {
            let mut clock = vec![0u64; n];
            raw.into_iter()
                .map(|(i, dt, kind)| {
                    clock[i] += dt;
                    LogEvent::new(&ids[i], clock[i], kind)
                })
                .collect::<Vec<_>>()
        })
    });
    let cases = 1000;
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&stream, |events| {
            let xml = write_log(&events).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let parsed = parse_log(&xml).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(parsed.events, events);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("parse(write(E)) = E on {cases} generated streams"))
}

#[test]
fn every_criterion_holds() {
    line("acceptance suite");
    let results = [
        criterion("adaptation efficacy", efficacy),
        criterion("overfit one pair", overfit),
        criterion("gradient correctness", gradients),
        criterion("descent property", descent),
        criterion("metric oracles", metric_oracles),
        criterion("protocol conformance", protocol),
        criterion("persistence", persistence),
        criterion("pelog round trip", pelog_round_trip),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    line(&format!("{passed}/{} criteria passed", results.len()));
    assert_eq!(passed, results.len());
}
