//! `train`: runs the stage plan for every seed and writes a manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{RunConfig, StageKind};
use crate::ars::{representation_by_name, train_es, write_curve_csv, EsPolicy};
use crate::env::Stage;
use crate::error::{Error, Result};
use crate::ppo::{refine, student_for, warm_start, write_log_csv, MlpPolicy, UpdateLog};
use crate::task::task_by_name;

pub const MANIFEST: &str = "manifest.json";
pub const FAILED: &str = "FAILED";
pub const CONFIG_ECHO: &str = "config.ini";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub status: String,
    pub failure: Option<String>,
    pub config_hash: String,
    pub code_version: String,
    /// Deterministic outputs, sorted by path.
    pub artifacts: Vec<ArtifactEntry>,
    /// Files whose content depends on the machine, such as wallclock logs.
    pub volatile: Vec<String>,
}

/// Outcome of one seed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeedReport {
    pub seed: u64,
    pub ars_return: Option<f64>,
    pub warm_deviation: Option<f64>,
    pub warm_converged: Option<bool>,
    pub warm_return: Option<f64>,
    pub refine_return: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub out: PathBuf,
    pub seeds: Vec<SeedReport>,
    pub manifest: Manifest,
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Collects written files; paths are kept relative to the run directory.
struct Artifacts {
    root: PathBuf,
    files: BTreeMap<String, (String, u64)>,
    volatile: Vec<String>,
}

impl Artifacts {
    fn new(root: &Path) -> Self {
        Artifacts { root: root.to_path_buf(), files: BTreeMap::new(), volatile: Vec::new() }
    }

    fn write(&mut self, rel: &str, data: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, data)?;
        self.files.insert(rel.to_string(), (sha256_hex(data), data.len() as u64));
        Ok(())
    }

    fn write_volatile(&mut self, rel: &str, data: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, data)?;
        if !self.volatile.iter().any(|v| v == rel) {
            self.volatile.push(rel.to_string());
            self.volatile.sort();
        }
        Ok(())
    }

    fn manifest(&self, config_hash: &str, failure: Option<String>) -> Manifest {
        Manifest {
            status: if failure.is_some() { "failed" } else { "complete" }.into(),
            failure,
            config_hash: config_hash.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            artifacts: self
                .files
                .iter()
                .map(|(path, (sha256, bytes))| ArtifactEntry { path: path.clone(), sha256: sha256.clone(), bytes: *bytes })
                .collect(),
            volatile: self.volatile.clone(),
        }
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn timing_csv(rows: &[(&str, usize, f64)]) -> Vec<u8> {
    let mut out = b"stage,iteration,wallclock\n".to_vec();
    for (stage, it, t) in rows {
        writeln!(out, "{stage},{it},{t:.3}").expect("write to vec");
    }
    out
}

fn run_seed(
    cfg: &RunConfig,
    seed: u64,
    arts: &mut Artifacts,
    report: &mut SeedReport,
    progress: &mut dyn FnMut(&str),
) -> Result<()> {
    let dir = format!("seed_{seed}");
    let task = task_by_name(&cfg.task)?;
    let mut timing: Vec<(&str, usize, f64)> = Vec::new();
    let result = (|| -> Result<()> {
        let mut teacher: Option<EsPolicy> = match &cfg.teacher {
            Some(p) if !cfg.stages.contains(&StageKind::Ars) => Some(EsPolicy::load(p)?),
            _ => None,
        };
        if cfg.stages.contains(&StageKind::Ars) {
            let repr = representation_by_name(&cfg.representation)?;
            let ars = cfg.ars_config(seed);
            let env = cfg.env_config(Stage::Ars);
            let res = train_es(repr.as_ref(), task.clone(), &ars, &env, &mut |p, _| {
                progress(&format!("seed {seed} ars iteration {} return {:.4}", p.iteration, p.eval_return))
            })?;
            timing.extend(res.curve.iter().map(|p| ("ars", p.iteration, p.wallclock)));
            arts.write(&format!("{dir}/ars_policy.bin"), &res.best.to_bytes())?;
            arts.write(&format!("{dir}/ars_curve.csv"), &csv_bytes(|b| write_curve_csv(b, &res.curve))?)?;
            report.ars_return = Some(res.best_return);
            teacher = Some(res.best);
        }
        let ppo = cfg.ppo_config(seed);
        let env = cfg.env_config(Stage::Ppo);
        let mut network: Option<MlpPolicy> = match &cfg.checkpoint {
            Some(p) if !cfg.stages.contains(&StageKind::WarmStart) => Some(MlpPolicy::load(p)?),
            _ => None,
        };
        if cfg.stages.contains(&StageKind::WarmStart) {
            let teacher = teacher.as_ref().ok_or_else(|| Error::config("[run] teacher: no teacher policy"))?;
            let student = student_for(teacher, &ppo);
            let mut on = |l: &UpdateLog| {
                progress(&format!(
                    "seed {seed} warm start update {} deviation {:.4}",
                    l.update,
                    l.action_deviation.unwrap_or(f64::NAN)
                ))
            };
            let teacher_env = cfg.env_config(Stage::Ars);
            let res = warm_start(student, teacher, &teacher_env, &task, &ppo, &cfg.warm_start_config(), &mut on)?;
            timing.extend(res.log.iter().map(|l| ("warm_start", l.update, l.wallclock)));
            arts.write(&format!("{dir}/warm_start.ckpt"), &res.policy.to_bytes())?;
            arts.write(&format!("{dir}/warm_start_log.csv"), &csv_bytes(|b| write_log_csv(b, &res.log))?)?;
            report.warm_deviation = Some(res.deviation);
            report.warm_converged = Some(res.converged);
            network = Some(res.policy);
        }
        if cfg.stages.contains(&StageKind::Refine) {
            let start = network.ok_or_else(|| Error::config("[run] checkpoint: no network to refine"))?;
            let mut on = |l: &UpdateLog| progress(&format!("seed {seed} refine update {} return {:.4}", l.update, l.eval_return));
            let run = refine(start, &env, &task, &ppo, &mut on)?;
            timing.extend(run.log.iter().map(|l| ("refine", l.update, l.wallclock)));
            arts.write(&format!("{dir}/refine.ckpt"), &run.best.to_bytes())?;
            arts.write(&format!("{dir}/refine_curve.csv"), &csv_bytes(|b| write_curve_csv(b, &run.curve()))?)?;
            arts.write(&format!("{dir}/refine_log.csv"), &csv_bytes(|b| write_log_csv(b, &run.log))?)?;
            report.warm_return = run.log.first().map(|l| l.eval_return);
            report.refine_return = Some(run.best_return);
        }
        Ok(())
    })();
    if !timing.is_empty() {
        arts.write_volatile(&format!("{dir}/timing.csv"), &timing_csv(&timing))?;
    }
    result
}

/// Runs the plan in `cfg` for every seed under `cfg.out`.
///
/// On a stage failure the artifacts written so far stay in place, a
/// `FAILED` marker holding the error is added and the manifest is marked
/// failed. The error is then returned.
pub fn train(cfg: &RunConfig, progress: &mut dyn FnMut(&str)) -> Result<TrainReport> {
    cfg.validate()?;
    let root = cfg.out.clone();
    fs::create_dir_all(&root)?;
    let echo = cfg.to_ini();
    let config_hash = sha256_hex(echo.as_bytes());
    let mut arts = Artifacts::new(&root);
    arts.write(CONFIG_ECHO, echo.as_bytes())?;
    let mut seeds = Vec::new();
    let mut failure = None;
    for &seed in &cfg.seeds {
        let mut report = SeedReport { seed, ..Default::default() };
        let r = run_seed(cfg, seed, &mut arts, &mut report, progress);
        seeds.push(report);
        if let Err(e) = r {
            failure = Some(e);
            break;
        }
    }
    let marker = root.join(FAILED);
    if let Some(e) = &failure {
        arts.write(FAILED, format!("seed {}: {e}\n", seeds.last().map_or(0, |s| s.seed)).as_bytes())?;
    } else if marker.exists() {
        fs::remove_file(&marker)?;
    }
    let manifest = arts.manifest(&config_hash, failure.as_ref().map(|e| e.to_string()));
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    fs::write(root.join(MANIFEST), json + "\n")?;
    match failure {
        Some(e) => Err(e),
        None => Ok(TrainReport { out: root, seeds, manifest }),
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppo::MlpPolicy;

    fn tiny(out: &Path, stages: &str) -> RunConfig {
        let text = format!(
            "[run]\ntask = jip\nstages = {stages}\nseeds = 5\nout = {}\n\n[ars]\ndirections = 2\nelites = 1\niterations = 2\neval_episodes = 1\n\n[ppo]\nbatch_size = 64\nminibatch_size = 32\nepochs = 1\ntotal_timesteps = 128\neval_episodes = 1\nhidden = 8\n\n[warm_start]\nbudget = 64\neval_episodes = 1\n",
            out.display()
        );
        RunConfig::from_ini_str(&text).unwrap()
    }

    fn walk(root: &Path, base: &Path, out: &mut Vec<String>) {
        for e in fs::read_dir(root).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, base, out);
            } else {
                out.push(p.strip_prefix(base).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }

    fn listed(m: &Manifest) -> Vec<String> {
        let mut v: Vec<String> = m.artifacts.iter().map(|a| a.path.clone()).chain(m.volatile.iter().cloned()).collect();
        v.push(MANIFEST.into());
        v.sort();
        v
    }

    #[test]
    fn full_plan_writes_every_artifact_kind_and_lists_them() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(dir.path(), "ars, warm_start, refine");
        let rep = train(&cfg, &mut |_| {}).unwrap();
        let mut on_disk = Vec::new();
        walk(dir.path(), dir.path(), &mut on_disk);
        on_disk.sort();
        assert_eq!(on_disk, listed(&rep.manifest));
        for kind in ["ars_policy.bin", "ars_curve.csv", "warm_start.ckpt", "refine.ckpt"] {
            assert!(dir.path().join("seed_5").join(kind).is_file(), "{kind}");
        }
        for a in &rep.manifest.artifacts {
            let data = fs::read(dir.path().join(&a.path)).unwrap();
            assert_eq!(sha256_hex(&data), a.sha256);
            assert_eq!(data.len() as u64, a.bytes);
        }
        assert_eq!(rep.manifest.status, "complete");
        assert_eq!(read_manifest(&dir.path().join(MANIFEST)).unwrap(), rep.manifest);
        assert!(rep.seeds[0].refine_return.unwrap() >= rep.seeds[0].warm_return.unwrap());
        let echo = fs::read_to_string(dir.path().join(CONFIG_ECHO)).unwrap();
        assert_eq!(RunConfig::from_ini_str(&echo).unwrap(), cfg);
    }

    #[test]
    fn ars_only_plan_writes_no_network_files() {
        let dir = tempfile::tempdir().unwrap();
        let rep = train(&tiny(dir.path(), "ars"), &mut |_| {}).unwrap();
        let paths: Vec<&str> = rep.manifest.artifacts.iter().map(|a| a.path.as_str()).collect();
        assert_eq!(paths, vec!["config.ini", "seed_5/ars_curve.csv", "seed_5/ars_policy.bin"]);
    }

    #[test]
    fn rerun_reproduces_hashes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = train(&tiny(a.path(), "ars, warm_start"), &mut |_| {}).unwrap().manifest;
        let mb = train(&tiny(b.path(), "ars, warm_start"), &mut |_| {}).unwrap().manifest;
        let strip = |m: &Manifest| m.artifacts.iter().filter(|x| x.path != CONFIG_ECHO).cloned().collect::<Vec<_>>();
        assert_eq!(strip(&ma), strip(&mb));
        let again = train(&tiny(a.path(), "ars, warm_start"), &mut |_| {}).unwrap().manifest;
        assert_eq!(again, ma);
    }

    #[test]
    fn failing_stage_leaves_marker_and_partial_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        // A checkpoint built for a different observation size fails refinement.
        let ckpt = dir.path().join("bad.ckpt");
        MlpPolicy::zeros(3, 6, &[4]).save(&ckpt).unwrap();
        let out = dir.path().join("run");
        let mut cfg = tiny(&out, "refine");
        cfg.checkpoint = Some(ckpt);
        let err = train(&cfg, &mut |_| {}).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
        assert_eq!(err.exit_code(), 2);
        let m = read_manifest(&out.join(MANIFEST)).unwrap();
        assert_eq!(m.status, "failed");
        assert!(m.failure.is_some());
        assert!(out.join(FAILED).is_file());
        assert!(out.join(CONFIG_ECHO).is_file());
        let mut on_disk = Vec::new();
        walk(&out, &out, &mut on_disk);
        on_disk.sort();
        assert_eq!(on_disk, listed(&m));
    }

    #[test]
    fn invalid_config_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let mut cfg = tiny(&out, "ars");
        cfg.seeds.clear();
        let err = train(&cfg, &mut |_| {}).unwrap_err();
        assert!(err.to_string().contains("seeds"));
        assert!(!out.exists());
    }
}
