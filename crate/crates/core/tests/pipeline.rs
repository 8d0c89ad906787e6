use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use explainbench_core::exchange::{ExchangeRequest, ExchangeResponse};
use explainbench_core::io::{read_json, read_jsonl, write_jsonl};
use explainbench_core::pipeline::{
    build_data, humaneval_emit, humaneval_report, humaneval_select, run_pipeline, run_until,
    split_dir_name, ModelConfig, RunConfig, Stage, MANIFEST_FILE, REQUESTS_FILE, RESPONSES_FILE,
    SCORES_FILE, SPLIT_SCORE_FILE,
};
use explainbench_core::prompt::RenderedExample;
use explainbench_core::split::Split;
use explainbench_core::synthetic;
use explainbench_core::task::TaskId;
use explainbench_core::Error;

fn setup(task: TaskId, n: usize) -> (tempfile::TempDir, RunConfig) {
    let dir = tempfile::tempdir().unwrap();
    let src = synthetic::write_source(task, n, 5, &dir.path().join("raw")).unwrap();
    let data = dir.path().join(format!("{task}.jsonl"));
    build_data(task, &src, &data).unwrap();
    let mut cfg = RunConfig::new(task, data, dir.path().join("run"));
    cfg.n_splits = 4;
    cfg.dev_size = Some(60);
    cfg.parallelism = 2;
    (dir, cfg)
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, (Vec<u8>, std::time::SystemTime)> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let meta = fs::metadata(&p).unwrap();
                out.insert(p.clone(), (fs::read(&p).unwrap(), meta.modified().unwrap()));
            }
        }
    }
    out
}

#[test]
fn echo_gold_scores_perfectly() {
    for task in TaskId::ALL {
        let (_dir, mut cfg) = setup(task, 300);
        cfg.model = ModelConfig::EchoGold;
        let out = run_pipeline(&cfg).unwrap();
        let report = out.report.unwrap();
        assert_eq!(report.accuracy.mean, 1.0, "{task}");
        assert_eq!(report.similarity.mean, 1.0, "{task}");
        assert_eq!(report.accuracy.se, 0.0);
        assert_eq!(report.n_splits, 4);
    }
}

#[test]
fn constant_label_matches_dev_prior() {
    let (_dir, mut cfg) = setup(TaskId::Esnli, 300);
    cfg.model = ModelConfig::ConstantLabel {
        label: "entailment".into(),
    };
    let report = run_pipeline(&cfg).unwrap().report.unwrap();
    let instances = explainbench_core::pipeline::load_instances(&cfg.data, TaskId::Esnli).unwrap();
    let label: BTreeMap<&str, &str> = instances
        .iter()
        .map(|i| (i.id.as_str(), i.label.as_str()))
        .collect();
    let splits: Vec<Split> = read_jsonl(&cfg.output_dir.join("splits.jsonl")).unwrap();
    let priors: Vec<f64> = splits
        .iter()
        .map(|s| {
            s.dev_ids
                .iter()
                .filter(|id| label[id.as_str()] == "entailment")
                .count() as f64
                / s.dev_ids.len() as f64
        })
        .collect();
    let expected = priors.iter().sum::<f64>() / priors.len() as f64;
    assert!((report.accuracy.mean - expected).abs() < 1e-12);
    assert_eq!(report.similarity.mean, 0.0);
}

#[test]
fn rerun_is_a_no_op_and_stages_regenerate() {
    let (_dir, mut cfg) = setup(TaskId::Sbic, 300);
    cfg.model = ModelConfig::UniformRandom { seed: 9 };
    let first = run_pipeline(&cfg).unwrap();
    let before = snapshot(&cfg.output_dir);
    let second = run_pipeline(&cfg).unwrap();
    assert_eq!(first, second);
    assert_eq!(before, snapshot(&cfg.output_dir));

    // Drop only the score artifacts: they come back identical.
    for s in &first.manifest.splits {
        let d = cfg.output_dir.join(&s.dir);
        fs::remove_file(d.join(SCORES_FILE)).unwrap();
        fs::remove_file(d.join(SPLIT_SCORE_FILE)).unwrap();
    }
    fs::remove_file(cfg.output_dir.join("report.json")).unwrap();
    let third = run_pipeline(&cfg).unwrap();
    assert_eq!(first.report, third.report);
    let after: BTreeMap<_, _> = snapshot(&cfg.output_dir)
        .into_iter()
        .map(|(k, v)| (k, v.0))
        .collect();
    let before: BTreeMap<_, _> = before.into_iter().map(|(k, v)| (k, v.0)).collect();
    assert_eq!(before, after);
}

#[test]
fn manifest_lists_every_artifact() {
    let (_dir, mut cfg) = setup(TaskId::Comve, 300);
    cfg.model = ModelConfig::EchoGold;
    let out = run_pipeline(&cfg).unwrap();
    let listed: std::collections::BTreeSet<PathBuf> = out
        .manifest
        .artifacts
        .iter()
        .map(|a| cfg.output_dir.join(a))
        .collect();
    for (path, _) in snapshot(&cfg.output_dir) {
        if path.ends_with(MANIFEST_FILE) {
            continue;
        }
        assert!(listed.contains(&path), "{} not in manifest", path.display());
    }
    assert_eq!(out.manifest.splits.len(), 4);
}

#[test]
fn exchange_mode_waits_for_responses() {
    let (_dir, cfg) = setup(TaskId::Comve, 300);
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(err.is_missing_artifact(), "{err}");
    let msg = err.to_string();
    assert!(msg.contains("split 00"), "{msg}");
    assert!(msg.contains("responses.jsonl not found"), "{msg}");

    // Answer every split but drop one id from split 2.
    let splits: Vec<Split> = read_jsonl(&cfg.output_dir.join("splits.jsonl")).unwrap();
    for s in &splits {
        let d = cfg.output_dir.join(split_dir_name(s));
        let gold: Vec<RenderedExample> = read_jsonl(&d.join("gold.jsonl")).unwrap();
        let requests: Vec<ExchangeRequest> = read_jsonl(&d.join(REQUESTS_FILE)).unwrap();
        assert_eq!(requests.len(), 60);
        let mut responses: Vec<ExchangeResponse> = gold
            .into_iter()
            .map(|g| ExchangeResponse {
                id: g.instance_id,
                output: g.target,
            })
            .collect();
        if s.split_index == 2 {
            responses.remove(7);
        }
        write_jsonl(&d.join(RESPONSES_FILE), &responses).unwrap();
    }
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(err.is_missing_artifact());
    assert!(err.to_string().contains("split 02"), "{err}");
    assert!(err.to_string().contains(&splits[2].dev_ids[7]), "{err}");

    let d2 = cfg.output_dir.join(split_dir_name(&splits[2]));
    let gold: Vec<RenderedExample> = read_jsonl(&d2.join("gold.jsonl")).unwrap();
    let responses: Vec<ExchangeResponse> = gold
        .into_iter()
        .rev()
        .map(|g| ExchangeResponse {
            id: g.instance_id,
            output: g.target,
        })
        .collect();
    write_jsonl(&d2.join(RESPONSES_FILE), &responses).unwrap();
    let report = run_pipeline(&cfg).unwrap().report.unwrap();
    assert_eq!(report.accuracy.mean, 1.0);
}

#[test]
fn changed_config_is_refused() {
    let (_dir, mut cfg) = setup(TaskId::Esnli, 300);
    cfg.model = ModelConfig::EchoGold;
    run_until(&cfg, Stage::Render).unwrap();
    cfg.master_seed = 1;
    assert!(matches!(run_pipeline(&cfg), Err(Error::Config(_))));
}

#[test]
fn missing_data_is_a_missing_artifact() {
    let cfg = RunConfig::new(TaskId::Esnli, "/nonexistent/esnli.jsonl", "/tmp/unused-run");
    assert!(run_pipeline(&cfg).unwrap_err().is_missing_artifact());
}

#[test]
fn incontext_run_records_demo_counts() {
    let (_dir, mut cfg) = setup(TaskId::Sbic, 300);
    cfg.variant = Some(explainbench_core::pipeline::VariantConfig {
        family: explainbench_core::PromptFamily::Incontext,
        question: Default::default(),
        tags: false,
        choices: false,
    });
    cfg.model = ModelConfig::EchoGold;
    let out = run_pipeline(&cfg).unwrap();
    assert_eq!(out.manifest.config.dev_size, 18);
    let demos = out.manifest.demo_counts.unwrap();
    assert_eq!(demos.per_split.len(), 4);
    assert!(demos.per_split.iter().all(|s| s.len() == 18));
    assert!(demos.min >= 1 && demos.max <= 48);
    assert_eq!(out.report.unwrap().accuracy.mean, 1.0);
}

#[test]
fn human_eval_round_trip() {
    let (dir, mut cfg) = setup(TaskId::Sbic, 300);
    cfg.model = ModelConfig::EchoGold;
    run_pipeline(&cfg).unwrap();
    let selection = humaneval_select(&cfg, 42).unwrap();
    assert_eq!(selection.items.len(), 24);
    assert!(selection.imbalances.is_empty());
    let again = humaneval_select(&cfg, 42).unwrap();
    assert_eq!(selection, again);

    let batches = humaneval_emit(&cfg).unwrap();
    assert_eq!(batches.len(), 3);

    // Three raters answer every batch; rater r2 fails Step 1 on the first item.
    let mut results = Vec::new();
    for (b, path) in batches.iter().enumerate() {
        let mut r = csv::Reader::from_path(path).unwrap();
        let headers = r.headers().unwrap().clone();
        let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        let out = dir.path().join(format!("result_{b}.csv"));
        let mut w = csv::Writer::from_path(&out).unwrap();
        let mut h: Vec<&str> = headers.iter().collect();
        h.extend(["rater_id", "step1_answer", "rating_a", "rating_b"]);
        w.write_record(&h).unwrap();
        let label_col = headers.iter().position(|x| x == "label").unwrap();
        for (k, row) in rows.iter().enumerate() {
            for rater in ["r1", "r2", "r3"] {
                let mut rec: Vec<String> = row.iter().map(String::from).collect();
                let step1 = if b == 0 && k == 0 && rater == "r2" {
                    "wrong".to_string()
                } else {
                    row[label_col].to_string()
                };
                rec.extend([rater.to_string(), step1, "yes".into(), "yes".into()]);
                w.write_record(&rec).unwrap();
            }
        }
        w.flush().unwrap();
        results.push(out);
    }
    // One rejected response leaves the first item with two raters.
    let err = humaneval_report(&cfg, &results).unwrap_err();
    assert!(err.to_string().contains("exactly 3"), "{err}");

    // A replacement rating from a fourth rater completes it.
    let first_item = &selection.items[0];
    let fix = dir.path().join("fix.csv");
    fs::write(
        &fix,
        format!(
            "item_id,rater_id,step1_answer,rating_a,rating_b\n{},r4,{},yes,yes\n",
            first_item.item_id, first_item.gold_label
        ),
    )
    .unwrap();
    results.push(fix);
    let (report, ingested) = humaneval_report(&cfg, &results).unwrap();
    assert_eq!(ingested.rejected.len(), 1);
    assert_eq!(report.n_items, 24);
    assert_eq!(report.gold.mean, 1.0);
    assert_eq!(report.generated.se, 0.0);
    assert_eq!(report.gold.kappa, 1.0);
    let stored: serde_json::Value =
        read_json(&cfg.output_dir.join("humaneval/plausibility.json")).unwrap();
    assert_eq!(stored["n_items"], 24);
}
