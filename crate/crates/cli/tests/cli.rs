//! End-to-end runs of the `hetmol` binary on small synthetic inputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use hetmol::synthetic::{drug_ids, synthetic_drug_kg, synthetic_smiles};
use serde_json::Value;
use tempfile::TempDir;

fn hetmol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetmol")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = hetmol(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn drug_kg_file(dir: &TempDir, drugs: usize) -> PathBuf {
    let triples = synthetic_drug_kg(&drug_ids(drugs), 5);
    let text: String = triples.iter().map(|(h, r, t)| format!("{h}\t{r}\t{t}\n")).collect();
    write(dir, "drug_kg.tsv", &text)
}

/// `count` synthetic molecules; the last `drugs` carry drug ids.
fn smiles_file(dir: &TempDir, name: &str, count: usize, drugs: usize) -> PathBuf {
    let ids = drug_ids(drugs);
    let text: String = synthetic_smiles(count, 3)
        .iter()
        .enumerate()
        .map(|(i, s)| match i.checked_sub(count - drugs) {
            Some(k) => format!("{s}\t{}\n", ids[k]),
            None => format!("{s}\t-\n"),
        })
        .collect();
    write(dir, name, &text)
}

#[test]
fn three_molecules_two_views_give_six_files_and_a_manifest() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.smi", "CCO\nc1ccccc1N\n# comment\nCC(=O)O\n");
    let out = dir.path().join("graphs");
    ok(&["build-hmg", "--input", p(&input), "--views", "M,EM", "--out", p(&out), "--seed", "1"]);
    let manifest = fs::read_to_string(out.join("manifest.tsv")).unwrap();
    assert_eq!(manifest.lines().count(), 7);
    let files: Vec<_> = fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().path().extension().unwrap() == "hmg").collect();
    assert_eq!(files.len(), 6);
    let text = fs::read_to_string(out.join("00002.EM.hmg")).unwrap();
    assert!(text.starts_with("HMG v1"));
    assert!(manifest.contains("\t4\tEM\t00002.EM.hmg\tCC(=O)O\t-"));
}

#[test]
fn drug_molecule_gets_all_three_views() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.smi", "CC(=O)Nc1ccc(O)cc1\tDB00001\n");
    let kg = drug_kg_file(&dir, 4);
    let out = dir.path().join("g");
    ok(&["build-hmg", "--input", p(&input), "--drug-kg", p(&kg), "--transe-epochs", "5", "--out", p(&out), "--seed", "2"]);
    let mut names: Vec<String> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["00000.DM.hmg", "00000.EM.hmg", "00000.M.hmg", "manifest.tsv"]);
}

#[test]
fn malformed_smiles_names_its_line() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.smi", "CCO\nC1CC\nCCN\n");
    let out = hetmol(&["build-hmg", "--input", p(&input), "--out", p(&dir.path().join("g")), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn seed_is_required_and_config_errors_cite_lines() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.smi", "CCO\n");
    let out = hetmol(&["build-hmg", "--input", p(&input), "--out", p(&dir.path().join("g"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));

    let cfg = write(&dir, "run.cfg", "seed=1\nthis line is wrong\n");
    let out = hetmol(&["build-hmg", "--config", p(&cfg), "--input", p(&input), "--out", p(&dir.path().join("g"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let cfg = write(&dir, "typo.cfg", "seed=1\nlearning-rate=3\n");
    let out = hetmol(&["build-hmg", "--config", p(&cfg), "--input", p(&input), "--out", p(&dir.path().join("g"))]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown config key `learning-rate`"));
}

fn pretrain_args<'a>(input: &'a str, kg: &'a str, out: &'a str, cfg: &'a str) -> Vec<&'a str> {
    vec!["pretrain", "--config", cfg, "--input", input, "--drug-kg", kg, "--out", out]
}

#[test]
fn pretraining_is_deterministic_and_flags_override_the_config() {
    let dir = TempDir::new().unwrap();
    let input = smiles_file(&dir, "pre.smi", 16, 6);
    let kg = drug_kg_file(&dir, 6);
    let cfg = write(&dir, "pre.cfg", "seed=4\nd=8\nlayers=1\nheads=2\nbatch-size=10\ndz=4\nmax-steps=3\ntranse-epochs=5\nepochs=50\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&pretrain_args(p(&input), p(&kg), p(&a), p(&cfg)));
    ok(&pretrain_args(p(&input), p(&kg), p(&b), p(&cfg)));
    let trace = fs::read_to_string(a.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("step,loss_total,loss_M_EM,loss_M_DM,loss_EM_DM"));
    assert_eq!(lines.count(), 3);
    assert_eq!(trace, fs::read_to_string(b.join("trace.csv")).unwrap());
    assert_eq!(fs::read(a.join("model.ckpt")).unwrap(), fs::read(b.join("model.ckpt")).unwrap());

    let c = dir.path().join("c");
    let mut args = pretrain_args(p(&input), p(&kg), p(&c), p(&cfg));
    args.extend(["--seed", "5"]);
    ok(&args);
    assert_ne!(trace, fs::read_to_string(c.join("trace.csv")).unwrap());
}

#[test]
fn diverging_training_exits_with_numeric_code() {
    let dir = TempDir::new().unwrap();
    let input = smiles_file(&dir, "pre.smi", 16, 6);
    let kg = drug_kg_file(&dir, 6);
    let cfg = write(&dir, "pre.cfg", "seed=4\nd=8\nlayers=1\nheads=2\nbatch-size=10\ndz=4\nmax-steps=20\ntranse-epochs=5\nlr=1e300\n");
    let out = hetmol(&pretrain_args(p(&input), p(&kg), p(&dir.path().join("x")), p(&cfg)));
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

fn labelled_file(dir: &TempDir, count: usize) -> PathBuf {
    let text: String = synthetic_smiles(count, 8)
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let n = s.contains('N') || s.contains('n');
            let second = if i % 3 == 0 { String::new() } else { format!("{}", (s.len() % 2 == 0) as u8) };
            format!("{s}\t-\t{}\t{second}\n", n as u8)
        })
        .collect();
    write(dir, "labelled.smi", &text)
}

#[test]
fn finetune_predict_and_eval_round_trip() {
    let dir = TempDir::new().unwrap();
    let data = labelled_file(&dir, 30);
    let cfg = write(&dir, "ft.cfg", "seed=3\nd=8\nlayers=1\nheads=2\nfolds=2\nepochs=3\nbatch-size=8\nlr=0.01\n");
    let run = dir.path().join("ft");
    let start = Instant::now();
    ok(&["finetune", "--config", p(&cfg), "--task", "classification", "--input", p(&data), "--out", p(&run)]);
    assert!(start.elapsed().as_secs() < 60);
    let report: Value = serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["folds"].as_array().unwrap().len(), 2);
    assert!(report["mean"]["roc_auc"].is_number());
    assert!(run.join("fold1.ckpt").exists());

    let five = write(&dir, "five.smi", "CCO\nCCN\nc1ccccc1\nCC(=O)O\nNCCN\n");
    let preds = dir.path().join("preds.tsv");
    let ckpt = run.join("fold0.ckpt");
    ok(&["predict", "--seed", "0", "--checkpoint", p(&ckpt), "--input", p(&five), "--out", p(&preds)]);
    let text = fs::read_to_string(&preds).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "line\tsmiles\tscore_0\tscore_1");
    assert_eq!(rows.len(), 6);

    let report = dir.path().join("eval.json");
    ok(&["eval", "--seed", "0", "--checkpoint", p(&ckpt), "--input", p(&data), "--out", p(&report)]);
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["items"], 30);
    assert_eq!(r["tasks"].as_array().unwrap().len(), 2);
}

#[test]
fn eval_of_perfect_predictions_reports_unit_auc() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "l.smi", "CCO\t-\t1\nCCC\t-\t0\nCCN\t-\t1\nCC\t-\t0\n");
    let preds = write(&dir, "p.tsv", "line\tsmiles\tscore_0\n1\tCCO\t0.9\n2\tCCC\t0.1\n3\tCCN\t0.8\n4\tCC\t0.3\n");
    let out = dir.path().join("e.json");
    ok(&["eval", "--seed", "0", "--task", "classification", "--predictions", p(&preds), "--input", p(&data), "--out", p(&out)]);
    let r: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["mean"]["roc_auc"], 1.0);
    assert_eq!(r["mean"]["accuracy"], 1.0);
}

#[test]
fn pair_training_and_prediction() {
    let dir = TempDir::new().unwrap();
    let smiles = synthetic_smiles(14, 2);
    let mut text = String::new();
    for i in 0..14 {
        text.push_str(&format!("{}\t{}\t1\n", smiles[i], smiles[(i + 1) % 14]));
        text.push_str(&format!("{}\t{}\t1\n", smiles[i], smiles[(i + 3) % 14]));
    }
    let pairs = write(&dir, "pairs.tsv", &text);
    let run = dir.path().join("ddi");
    ok(&["finetune", "--seed", "1", "--task", "ddi", "--input", p(&pairs), "--d", "8", "--layers", "1", "--heads", "2", "--epochs", "2", "--symmetrize", "true", "--out", p(&run)]);
    let report: Value = serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["split"], "transductive");
    assert!(report["test"]["accuracy"].is_number());

    let query = write(&dir, "q.tsv", &format!("{}\t{}\n{}\t{}\n", smiles[0], smiles[1], smiles[1], smiles[0]));
    let preds = dir.path().join("q.out");
    ok(&["predict", "--seed", "1", "--checkpoint", p(&run.join("model.ckpt")), "--input", p(&query), "--out", p(&preds)]);
    let text = fs::read_to_string(&preds).unwrap();
    let scores: Vec<&str> = text.lines().skip(1).map(|l| l.rsplit('\t').next().unwrap()).collect();
    assert_eq!(scores.len(), 2);
    assert_eq!(scores[0], scores[1], "symmetrized scores differ under swap");
}

#[test]
fn attention_export_writes_receiver_and_pool_records() {
    let dir = TempDir::new().unwrap();
    let input = smiles_file(&dir, "pre.smi", 16, 6);
    let kg = drug_kg_file(&dir, 6);
    let cfg = write(&dir, "pre.cfg", "seed=4\nd=8\nlayers=2\nheads=2\nbatch-size=10\ndz=4\nmax-steps=1\ntranse-epochs=5\n");
    let run = dir.path().join("pre");
    ok(&pretrain_args(p(&input), p(&kg), p(&run), p(&cfg)));
    let single = write(&dir, "one.smi", "C\n");
    let dump = dir.path().join("att.jsonl");
    ok(&["export-attention", "--seed", "0", "--checkpoint", p(&run.join("model.ckpt")), "--input", p(&single), "--views", "M,EM", "--out", p(&dump)]);
    let records: Vec<Value> =
        fs::read_to_string(&dump).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(records.iter().all(|r| r["line"] == 1 && r["smiles"] == "C"));
    let atoms: Vec<&Value> = records.iter().filter(|r| r["node_type"] == "Atom" && r["view"] == "M").collect();
    assert_eq!(atoms.len(), 1);
    assert_eq!(atoms[0]["pool_score_normalized_by_type"], 1.0);
    for r in records.iter().filter(|r| r.get("weights").is_some()) {
        for head in r["weights"].as_array().unwrap() {
            let sum: f64 = head.as_array().unwrap().iter().map(|w| w.as_f64().unwrap()).sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
    }
}
