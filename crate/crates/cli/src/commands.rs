use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use hetmol::chem::{brics_fragment, default_rules, load_rules, parse_smiles, read_smiles_list, BricsRule, MolecularGraph, SmilesRecord};
use hetmol::config::KeyValues;
use hetmol::encoder::{Encoder, EncoderConfig, GraphInputs};
use hetmol::finetune::{
    finetune_property, make_ddi_splits, metrics, parse_pairs, DdiModel, FinetuneConfig, MetricReport, Pair, PairRecord,
    PropertyData, PropertyModel, SplitMode, TaskKind,
};
use hetmol::hmg::{build_molecule_view, ElementKnowledge, Hmg, View, ViewBuilder};
use hetmol::kg::{default_elemental_kg, load_triples, train_transe, EmbeddingTable, TransEConfig};
use hetmol::model::SavedModel;
use hetmol::pretrain::{pretrain, trace_csv, ContrastiveModel, PretrainConfig, PretrainItem};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::options::RunConfig;

type Result<T> = std::result::Result<T, CliError>;

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn views(cfg: &RunConfig, default: &str) -> Result<Vec<View>> {
    let text = cfg.kv.get_str("views").unwrap_or(default);
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let v: View = part.parse().map_err(|_| CliError::input(format!("unknown view `{part}` (expected M, EM or DM)")))?;
        if !out.contains(&v) {
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(CliError::input("--views names no view"));
    }
    Ok(out)
}

fn rules(cfg: &RunConfig) -> Result<Vec<BricsRule>> {
    Ok(match cfg.existing_path("rules")? {
        Some(p) => load_rules(p)?,
        None => default_rules(),
    })
}

fn drug_embeddings(cfg: &RunConfig) -> Result<Option<EmbeddingTable>> {
    if let Some(p) = cfg.existing_path("embeddings")? {
        return Ok(Some(EmbeddingTable::load(p)?));
    }
    let Some(p) = cfg.existing_path("drug-kg")? else { return Ok(None) };
    let kg = load_triples(p)?;
    let tc = TransEConfig {
        dim: cfg.get_or("transe-dim", TransEConfig::default().dim)?,
        epochs: cfg.get_or("transe-epochs", TransEConfig::default().epochs)?,
        seed: cfg.seed(),
        ..Default::default()
    };
    Ok(Some(train_transe(&kg, &tc)))
}

fn view_builder(cfg: &RunConfig, k_pe: usize) -> Result<ViewBuilder> {
    let kg = match cfg.existing_path("elemental-kg")? {
        Some(p) => load_triples(p)?,
        None => default_elemental_kg(),
    };
    Ok(ViewBuilder { rules: rules(cfg)?, element: ElementKnowledge::new(kg)?, drug_embeddings: drug_embeddings(cfg)?, k_pe })
}

fn encoder_config(cfg: &RunConfig) -> Result<EncoderConfig> {
    let d = EncoderConfig::default();
    Ok(EncoderConfig {
        d: cfg.get_or("d", d.d)?,
        layers: cfg.get_or("layers", d.layers)?,
        heads: cfg.get_or("heads", d.heads)?,
        k_pe: cfg.get_or("k-pe", d.k_pe)?,
        leaky_slope: cfg.get_or("leaky-slope", d.leaky_slope)?,
        pool_ratio: cfg.get_or("pool-ratio", d.pool_ratio)?,
        seed: cfg.seed(),
    })
}

fn records(cfg: &RunConfig) -> Result<Vec<SmilesRecord>> {
    let path = cfg.require_existing("input")?;
    let recs = read_smiles_list(&path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    if recs.is_empty() {
        return Err(CliError::input(format!("{}: no molecules", path.display())));
    }
    Ok(recs)
}

fn parse_at(line: usize, smiles: &str) -> Result<MolecularGraph> {
    parse_smiles(smiles).map_err(|e| CliError::input(format!("line {line}: {e}")))
}

fn molecule_view(mol: &MolecularGraph, rules: &[BricsRule], k_pe: usize, line: usize) -> Result<Hmg> {
    build_molecule_view(mol, &brics_fragment(mol, rules), rules.len(), k_pe).map_err(|e| CliError::input(format!("line {line}: {e}")))
}

fn load_model(cfg: &RunConfig, key: &str) -> Result<(SavedModel, KeyValues)> {
    let path = cfg.require_existing(key)?;
    let bytes = fs::read(&path)?;
    SavedModel::from_bytes(&bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn checkpoint_bytes(model: &SavedModel, cfg: &RunConfig) -> Vec<u8> {
    let mut run = KeyValues::new();
    for (k, v) in cfg.kv.iter().filter(|(k, _)| *k != "out") {
        run.set(&format!("run.{k}"), v);
    }
    model.to_bytes(&run)
}

pub fn build_hmg(cfg: &RunConfig) -> Result<()> {
    let want = views(cfg, "M,EM,DM")?;
    let out = cfg.out()?;
    let builder = view_builder(cfg, cfg.get_or("k-pe", EncoderConfig::default().k_pe)?)?;
    let mut manifest = String::from("index\tline\tview\tfile\tsmiles\tdrug_id\n");
    fs::create_dir_all(&out)?;
    for (i, rec) in records(cfg)?.iter().enumerate() {
        let mol = parse_at(rec.line, &rec.smiles)?;
        let built = builder.build(&mol, rec.drug_id.as_deref()).map_err(|e| CliError::input(format!("line {}: {e}", rec.line)))?;
        for &v in &want {
            let g = match v {
                View::M => Some(&built.m),
                View::EM => Some(&built.em),
                View::DM => built.dm.as_ref(),
            };
            let Some(g) = g else {
                log::warn!("line {}: no drug view (missing drug id or embedding)", rec.line);
                continue;
            };
            let name = format!("{i:05}.{v}.hmg");
            write(&out.join(&name), g.serialize())?;
            let drug = rec.drug_id.as_deref().unwrap_or("-");
            manifest.push_str(&format!("{i}\t{}\t{v}\t{name}\t{}\t{drug}\n", rec.line, rec.smiles));
        }
    }
    write(&out.join("manifest.tsv"), manifest)
}

pub fn cmd_pretrain(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out()?;
    let ecfg = encoder_config(cfg)?;
    let builder = view_builder(cfg, ecfg.k_pe)?;
    let encoder = Encoder::new(ecfg.clone(), builder.type_dims())?;
    let defaults = PretrainConfig::default();
    let pc = PretrainConfig {
        encoder: ecfg,
        batch_size: cfg.get_or("batch-size", defaults.batch_size)?,
        n_random: cfg.get_or("n-random", defaults.n_random)?,
        tau: cfg.get_or("tau", defaults.tau)?,
        dz: cfg.get_or("dz", defaults.dz)?,
        epochs: cfg.get_or("epochs", defaults.epochs)?,
        max_steps: cfg.get("max-steps")?,
        step_size: cfg.get_or("lr", defaults.step_size)?,
        seed: cfg.seed(),
    };
    let mut items = Vec::new();
    for (i, rec) in records(cfg)?.iter().enumerate() {
        let mol = parse_at(rec.line, &rec.smiles)?;
        let item = PretrainItem::new(&format!("{i}"), &mol, rec.drug_id.as_deref(), &builder, &encoder)
            .map_err(|e| CliError::from(e).context(format!("line {}", rec.line)))?;
        items.push(item);
    }
    let mut model = ContrastiveModel::new(encoder, pc.dz);
    let trace = pretrain(&mut model, &items, &pc)?;
    write(&out.join("trace.csv"), trace_csv(&trace))?;
    write(&out.join("model.ckpt"), checkpoint_bytes(&SavedModel::Contrastive(model), cfg))
}

fn finetune_config(cfg: &RunConfig) -> Result<FinetuneConfig> {
    let d = FinetuneConfig::default();
    Ok(FinetuneConfig {
        epochs: cfg.get_or("epochs", d.epochs)?,
        patience: cfg.get_or("patience", d.patience)?,
        batch_size: cfg.get_or("batch-size", d.batch_size)?,
        step_size: cfg.get_or("lr", d.step_size)?,
        folds: cfg.get_or("folds", d.folds)?,
        seed: cfg.seed(),
        plateau_decay: cfg.get_or("plateau-decay", d.plateau_decay)?,
    })
}

fn task(cfg: &RunConfig) -> Result<String> {
    let t: String = cfg.require("task")?;
    match t.as_str() {
        "classification" | "regression" | "ddi" => Ok(t),
        other => Err(CliError::input(format!("unknown task `{other}` (classification, regression or ddi)"))),
    }
}

/// Encoder for fine-tuning: the pretrained one when given, else from flags.
fn finetune_encoder(cfg: &RunConfig, rule_count: usize) -> Result<(Encoder, Option<hetmol::autodiff::ParamStore>)> {
    if cfg.kv.contains("pretrained") {
        let (m, _) = load_model(cfg, "pretrained")?;
        return Ok((m.encoder().clone(), Some(m.params().clone())));
    }
    let enc = Encoder::new(encoder_config(cfg)?, hetmol::hmg::TypeDims::standard(rule_count))?;
    Ok((enc, None))
}

/// Molecule-view inputs for each distinct SMILES in `pairs`, in first-seen order.
fn pair_molecules(
    pairs: &[PairRecord],
    rules: &[BricsRule],
    enc: &Encoder,
) -> Result<(Vec<GraphInputs>, BTreeMap<String, usize>)> {
    let mut index = BTreeMap::new();
    let mut graphs = Vec::new();
    for p in pairs {
        for s in [&p.a, &p.b] {
            if index.contains_key(s) {
                continue;
            }
            let mol = parse_at(p.line, s)?;
            graphs.push(GraphInputs::new(&molecule_view(&mol, rules, enc.config.k_pe, p.line)?, enc)?);
            index.insert(s.clone(), graphs.len() - 1);
        }
    }
    Ok((graphs, index))
}

fn read_pairs(cfg: &RunConfig) -> Result<Vec<PairRecord>> {
    let path = cfg.require_existing("input")?;
    let pairs = parse_pairs(&fs::read_to_string(&path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    if pairs.is_empty() {
        return Err(CliError::input(format!("{}: no pairs", path.display())));
    }
    Ok(pairs)
}

fn property_data(cfg: &RunConfig, kind: TaskKind, rules: &[BricsRule], enc: &Encoder) -> Result<PropertyData> {
    let recs = records(cfg)?;
    let tasks = recs[0].labels.len();
    let mut graphs = Vec::new();
    let mut labels = Vec::new();
    for rec in &recs {
        if rec.labels.len() != tasks {
            return Err(CliError::input(format!("line {}: {} label columns, expected {tasks}", rec.line, rec.labels.len())));
        }
        let mol = parse_at(rec.line, &rec.smiles)?;
        graphs.push(GraphInputs::new(&molecule_view(&mol, rules, enc.config.k_pe, rec.line)?, enc)?);
        labels.push(rec.labels.clone());
    }
    Ok(PropertyData { graphs, labels, kind })
}

pub fn cmd_finetune(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out()?;
    let rules = rules(cfg)?;
    let fc = finetune_config(cfg)?;
    let (encoder, pretrained) = finetune_encoder(cfg, rules.len())?;
    let t = task(cfg)?;
    if t == "ddi" {
        let pairs = read_pairs(cfg)?;
        let (graphs, index) = pair_molecules(&pairs, &rules, &encoder)?;
        let positives: Vec<(usize, usize)> =
            pairs.iter().filter(|p| p.label != Some(false)).map(|p| (index[&p.a], index[&p.b])).collect();
        let mode: SplitMode = cfg.get_or("split", "transductive".to_string())?.parse()?;
        let split = make_ddi_splits(&positives, mode, fc.seed)?;
        let mut model = DdiModel::new(encoder, cfg.get_or("symmetrize", false)?, fc.seed, pretrained.as_ref());
        let summary = model.train(&graphs, &split.train, &split.val, &fc)?;
        let test = model.net.evaluate(&model.params, &graphs, &split.test)?;
        let report = json!({
            "task": "ddi",
            "split": mode.to_string(),
            "pairs": { "train": split.train.len(), "val": split.val.len(), "test": split.test.len() },
            "unseen_drugs": split.unseen.len(),
            "training": summary,
            "test": test,
        });
        write(&out.join("report.json"), to_json(&report)?)?;
        return write(&out.join("model.ckpt"), checkpoint_bytes(&SavedModel::Ddi(model), cfg));
    }
    let kind = if t == "classification" { TaskKind::BinaryClassification } else { TaskKind::Regression };
    let data = property_data(cfg, kind, &rules, &encoder)?;
    if data.tasks() == 0 {
        return Err(CliError::input("--input has no label columns"));
    }
    let init = PropertyModel::new(encoder, data.tasks(), kind, fc.seed, pretrained.as_ref());
    let (report, models) = finetune_property(&init, &data, &fc, None)?;
    write(&out.join("report.json"), to_json(&report)?)?;
    for (f, m) in models.into_iter().enumerate() {
        write(&out.join(format!("fold{f}.ckpt")), checkpoint_bytes(&SavedModel::Property(m), cfg))?;
    }
    Ok(())
}

fn fmt_score(x: f64) -> String {
    format!("{x:.17e}")
}

/// Rows of predictions: for property models `line, smiles, score per task`,
/// for pair models `smiles_a, smiles_b, score`.
fn predict_rows(cfg: &RunConfig, model: &SavedModel) -> Result<(String, Vec<Vec<String>>)> {
    let rules = rules(cfg)?;
    match model {
        SavedModel::Property(m) => {
            let enc = &m.net.encoder;
            let recs = records(cfg)?;
            let mut graphs = Vec::new();
            for rec in &recs {
                let mol = parse_at(rec.line, &rec.smiles)?;
                graphs.push(GraphInputs::new(&molecule_view(&mol, &rules, enc.config.k_pe, rec.line)?, enc)?);
            }
            let refs: Vec<&GraphInputs> = graphs.iter().collect();
            let preds = m.net.predict(&m.params, &refs)?;
            let header = std::iter::once("line\tsmiles".to_string())
                .chain((0..m.net.head.output).map(|k| format!("score_{k}")))
                .collect::<Vec<_>>()
                .join("\t");
            let rows = recs
                .iter()
                .zip(preds)
                .map(|(r, p)| [r.line.to_string(), r.smiles.clone()].into_iter().chain(p.into_iter().map(fmt_score)).collect())
                .collect();
            Ok((header, rows))
        }
        SavedModel::Ddi(m) => {
            let pairs = read_pairs(cfg)?;
            let (graphs, index) = pair_molecules(&pairs, &rules, &m.net.encoder)?;
            let idx: Vec<Pair> = pairs.iter().map(|p| (index[&p.a], index[&p.b], p.label.unwrap_or(false))).collect();
            let scores = m.net.predict(&m.params, &graphs, &idx)?;
            let rows = pairs.iter().zip(scores).map(|(p, s)| vec![p.a.clone(), p.b.clone(), fmt_score(s)]).collect();
            Ok(("smiles_a\tsmiles_b\tscore".to_string(), rows))
        }
        SavedModel::Contrastive(_) => Err(CliError::input("predict needs a fine-tuned checkpoint, got a pretraining one")),
    }
}

fn tsv(header: &str, rows: &[Vec<String>]) -> String {
    let mut s = format!("{header}\n");
    for r in rows {
        s.push_str(&r.join("\t"));
        s.push('\n');
    }
    s
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<()> {
    let (model, _) = load_model(cfg, "checkpoint")?;
    let (header, rows) = predict_rows(cfg, &model)?;
    write(&cfg.out()?, tsv(&header, &rows))
}

/// Score columns of a prediction TSV, in row order.
fn read_predictions(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| CliError::input(format!("{}: empty", path.display())))?;
    if header.split('\t').count() < 3 {
        return Err(CliError::input(format!("{}: expected two id columns before the scores", path.display())));
    }
    let mut out = Vec::new();
    for (i, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let row = line
            .split('\t')
            .skip(2)
            .map(|f| f.trim().parse::<f64>().map_err(|_| CliError::input(format!("{}: line {}: bad score `{f}`", path.display(), i + 1))))
            .collect::<Result<Vec<_>>>()?;
        out.push(row);
    }
    Ok(out)
}

#[derive(Serialize)]
struct EvalReport {
    task: String,
    items: usize,
    tasks: Vec<MetricReport>,
    mean: MetricReport,
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let given = cfg.existing_path("predictions")?;
    let (kind_name, scores, labels): (String, Vec<Vec<f64>>, Vec<Vec<Option<f64>>>) = match given {
        Some(p) => {
            let t = task(cfg)?;
            let scores = read_predictions(&p)?;
            let labels = if t == "ddi" {
                read_pairs(cfg)?.iter().map(|r| vec![r.label.map(|b| b as u8 as f64)]).collect()
            } else {
                records(cfg)?.into_iter().map(|r| r.labels).collect()
            };
            (t, scores, labels)
        }
        None => {
            let (model, _) = load_model(cfg, "checkpoint")?;
            let (_, rows) = predict_rows(cfg, &model)?;
            let scores = rows.iter().map(|r| r[2..].iter().map(|s| s.parse().expect("formatted float")).collect()).collect();
            let (t, labels) = match &model {
                SavedModel::Ddi(_) => ("ddi".to_string(), read_pairs(cfg)?.iter().map(|r| vec![r.label.map(|b| b as u8 as f64)]).collect()),
                SavedModel::Property(m) => {
                    let t = if m.net.kind == TaskKind::Regression { "regression" } else { "classification" };
                    (t.to_string(), records(cfg)?.into_iter().map(|r| r.labels).collect())
                }
                SavedModel::Contrastive(_) => unreachable!("rejected by predict_rows"),
            };
            (t, scores, labels)
        }
    };
    if scores.len() != labels.len() {
        return Err(CliError::input(format!("{} predictions for {} labelled items", scores.len(), labels.len())));
    }
    let kind = if kind_name == "regression" { TaskKind::Regression } else { TaskKind::BinaryClassification };
    let width = scores.first().map_or(0, Vec::len);
    let mut per_task = Vec::new();
    for k in 0..width {
        let (mut l, mut s) = (Vec::new(), Vec::new());
        for (row, lab) in scores.iter().zip(&labels) {
            let (Some(&score), Some(Some(v))) = (row.get(k), lab.get(k)) else { continue };
            l.push(*v);
            s.push(score);
        }
        if l.is_empty() {
            return Err(CliError::input(format!("task {k} has no labels to score against")));
        }
        per_task.push(metrics(&l, &s, kind)?);
    }
    let mean = MetricReport::mean_std(&per_task).0;
    let report = EvalReport { task: kind_name, items: scores.len(), tasks: per_task, mean };
    write(&cfg.out()?, to_json(&report)?)
}

pub fn cmd_export_attention(cfg: &RunConfig) -> Result<()> {
    let (model, _) = load_model(cfg, "checkpoint")?;
    let enc = model.encoder();
    let want = views(cfg, "M")?;
    let builder = view_builder(cfg, enc.config.k_pe)?;
    let mut out = String::new();
    for rec in records(cfg)? {
        let mol = parse_at(rec.line, &rec.smiles)?;
        let built = builder.build(&mol, rec.drug_id.as_deref()).map_err(|e| CliError::input(format!("line {}: {e}", rec.line)))?;
        for &v in &want {
            let g = match v {
                View::M => Some(&built.m),
                View::EM => Some(&built.em),
                View::DM => built.dm.as_ref(),
            };
            let Some(g) = g else {
                log::warn!("line {}: no drug view to export", rec.line);
                continue;
            };
            let (_, dump) = enc.encode_with_dump(model.params(), g).map_err(|e| CliError::from(e).context(format!("line {}", rec.line)))?;
            for line in dump.to_json_lines().lines() {
                let mut record: Value = serde_json::from_str(line)?;
                record["line"] = json!(rec.line);
                record["smiles"] = json!(rec.smiles);
                out.push_str(&serde_json::to_string(&record)?);
                out.push('\n');
            }
        }
    }
    write(&cfg.out()?, out)
}
