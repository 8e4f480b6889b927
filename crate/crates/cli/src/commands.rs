//! One function per subcommand. Each writes fixed filenames into the output
//! directory and reports them with the resolved configuration.

use std::path::Path;

use serde_json::json;
use shapelink_core::constellation::{self, normalize, relabel_for_shaping, Constellation, ShapingSpec};
use shapelink_core::demap::{MapDemapper, NeuralDemapper};
use shapelink_core::fec::{builtin_code, BUILTIN_CODES};
use shapelink_core::metrics::{ber_csv, ber_sweep, capacity_csv, capacity_curve, gap_to_capacity, ChannelModel, LinkSimulator};
use shapelink_core::receiver::Demapper;
use shapelink_core::rng::derive_seed;
use shapelink_core::training::{history_csv, IddTrainer, NonIddTrainer, TrainState};

use crate::config::{distribution, load_constellation, to_table, BerFile, CapacityFile, ExportFile, ImportFile, TrainFile, TrainIddFile};
use crate::{create_dir, read_file, write_file, CliError, Outcome, Result};

fn checkpoint_writer(path: &Path, every: usize) -> impl FnMut(&TrainState) -> shapelink_core::Result<()> + '_ {
    move |s: &TrainState| {
        if every > 0 && s.step % every == 0 {
            std::fs::write(path, s.to_json()?)?;
            let r = s.history.last().expect("a step was taken");
            eprintln!("step {} loss {:.5} p0 {:.4}", s.step, r.loss, r.p0);
        }
        Ok(())
    }
}

fn load_state(path: &Path) -> Result<TrainState> {
    TrainState::from_json(&read_file(path)?).map_err(|e| CliError::context(format!("checkpoint {}", path.display()), e))
}

fn json_text(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain JSON value");
    s.push('\n');
    s
}

pub fn train(mut f: TrainFile, out: &Path, resume: Option<&Path>) -> Result<Outcome> {
    f.train.seed = f.seed;
    let mut trainer = NonIddTrainer::new(f.train.clone())?;
    if let Some(p) = &f.init_file {
        trainer = trainer.with_constellation(load_constellation(&p.display().to_string())?.0)?;
    }
    let mut state = match resume {
        Some(p) => load_state(p)?,
        None => trainer.init_state()?,
    };
    let ck = out.join("checkpoint.json");
    let start = state.step;
    trainer.train(&mut state, f.train.iterations, &mut checkpoint_writer(&ck, f.checkpoint_every))?;

    let c = state.params.constellation(trainer.mask())?;
    let dist = state.params.distribution(trainer.mask());
    let last = state.history.last();
    let report = json!({
        "steps": state.step,
        "resumed_at": start,
        "p0": state.params.p0(),
        "shaped": f.train.shaped,
        "mean_energy": dist.iter().zip(c.points()).map(|(p, x)| p * x.norm_sqr()).sum::<f64>(),
        "entropy_bits": shapelink_core::constellation::entropy(&constellation::SymbolDistribution { prob: dist.clone() }),
        "final_loss": last.map(|r| r.loss),
        "final_bce": last.map(|r| r.bce),
    });
    write_file(&ck, &state.to_json()?)?;
    write_file(&out.join("constellation.json"), &constellation::to_json(&c))?;
    write_file(&out.join("loss.csv"), &history_csv(&state.history))?;
    write_file(&out.join("report.json"), &json_text(&report))?;
    let mut artifacts: Vec<String> = ["constellation.json", "loss.csv", "checkpoint.json", "report.json"].map(String::from).into();
    if let Some(nd) = &state.params.demapper {
        write_file(&out.join("demapper.json"), &nd.to_json()?)?;
        artifacts.push("demapper.json".into());
    }
    Ok(Outcome { config: to_table(&f)?, artifacts })
}

pub fn train_idd(mut f: TrainIddFile, out: &Path, resume: Option<&Path>) -> Result<Outcome> {
    f.train_idd.seed = f.seed;
    let link = f.link.build()?;
    let trainer = IddTrainer::new(link, f.train_idd.clone())?;
    eprintln!("training Eb/N0 range {:?} dB", trainer.ebn0_range());
    let mut state = match resume {
        Some(p) => load_state(p)?,
        None => trainer.init_state(),
    };
    let ck = out.join("checkpoint.json");
    let start = state.step;
    trainer.train(&mut state, f.train_idd.iterations, &mut checkpoint_writer(&ck, f.checkpoint_every))?;

    let c = trainer.constellation(&state.params)?;
    let first = state.history.first();
    let last = state.history.last();
    let report = json!({
        "steps": state.step,
        "resumed_at": start,
        "ebn0_range_db": trainer.ebn0_range(),
        "scan": trainer.scan.iter().map(|p| json!({"eb_n0_db": p.eb_n0_db, "ber": p.ber, "bits": p.bits})).collect::<Vec<_>>(),
        "first_loss": first.map(|r| r.loss),
        "final_loss": last.map(|r| r.loss),
        "final_per_iter_bce": last.map(|r| r.per_iter.clone()),
    });
    write_file(&ck, &state.to_json()?)?;
    write_file(&out.join("constellation.json"), &constellation::to_json(&c))?;
    write_file(&out.join("loss.csv"), &history_csv(&state.history))?;
    write_file(&out.join("report.json"), &json_text(&report))?;
    let artifacts = ["constellation.json", "loss.csv", "checkpoint.json", "report.json"].map(String::from).into();
    Ok(Outcome { config: to_table(&f)?, artifacts })
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(CliError::Config(format!("name {name:?} must be non-empty and use only [A-Za-z0-9_-]")));
    }
    Ok(())
}

fn check_unique<'a>(names: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for n in names {
        check_name(n)?;
        if !seen.insert(n) {
            return Err(CliError::Config(format!("duplicate name {n:?}")));
        }
    }
    Ok(())
}

pub fn ber(f: BerFile, out: &Path) -> Result<Outcome> {
    if f.systems.is_empty() {
        return Err(CliError::Config("systems: at least one system is required".into()));
    }
    check_unique(f.systems.iter().map(|s| s.name.as_str()))?;
    let mut artifacts = Vec::new();
    for (i, sys) in f.systems.iter().enumerate() {
        sys.receiver.validate()?;
        if let ChannelModel::Fading(c) = &sys.channel {
            c.validate()?;
        }
        let link = sys.link.build().map_err(|e| match e {
            CliError::Core(c) => CliError::context(format!("system {}", sys.name), c),
            other => other,
        })?;
        let demapper = match sys.demapper.as_str() {
            "map" => Demapper::Map(MapDemapper::new(&link.constellation)),
            path => {
                let nd = NeuralDemapper::from_json(&read_file(Path::new(path))?)
                    .map_err(|e| CliError::context(format!("demapper file {path}"), e))?;
                if nd.m() != link.constellation.m() {
                    return Err(CliError::Config(format!(
                        "system {}: demapper outputs {} bits but the constellation has {}",
                        sys.name,
                        nd.m(),
                        link.constellation.m()
                    )));
                }
                Demapper::Neural(nd)
            }
        };
        let sim = LinkSimulator { link, receiver: sys.receiver.clone(), channel: sys.channel.clone(), demapper };
        let seed = if f.sweep.paired { f.seed } else { derive_seed(f.seed, &[i as u64]) };
        let pts = ber_sweep(&sim, &f.sweep.ebn0_db, &f.sweep.stop, seed)?;
        let name = format!("ber_{}.csv", sys.name);
        write_file(&out.join(&name), &ber_csv(&pts))?;
        for p in &pts {
            eprintln!("{} {:.2} dB ber {:.3e} ({} errors)", sys.name, p.eb_n0_db, p.ber, p.bit_errors);
        }
        artifacts.push(name);
    }
    Ok(Outcome { config: to_table(&f)?, artifacts })
}

pub fn capacity(f: CapacityFile, out: &Path) -> Result<Outcome> {
    check_unique(f.constellations.iter().map(|s| s.name.as_str()))?;
    let mut artifacts = Vec::new();
    let mut gaps = String::from("name,rate,gap_db,snr_db,shannon_snr_db\n");
    for src in &f.constellations {
        let (c, _) = load_constellation(&src.source)?;
        let dist = distribution(c.m(), &src.shaped, src.p0)?;
        let c = normalize(c.points(), &dist)?;
        let curve = capacity_curve(&c, &dist, &f.capacity.snr_db, f.capacity.samples, f.seed);
        let name = format!("capacity_{}.csv", src.name);
        write_file(&out.join(&name), &capacity_csv(&curve))?;
        artifacts.push(name);
        if f.capacity.gap_rate > 0.0 {
            let g = gap_to_capacity(&c, &dist, f.capacity.gap_rate, f.capacity.gap_samples, f.seed)
                .map_err(|e| CliError::context(format!("constellation {}", src.name), e))?;
            gaps.push_str(&format!("{},{},{},{},{}\n", src.name, f.capacity.gap_rate, g.gap_db, g.snr_db, g.shannon_snr_db));
            eprintln!("{}: gap {:.3} dB at {} bits", src.name, g.gap_db, f.capacity.gap_rate);
        }
    }
    if f.capacity.gap_rate > 0.0 {
        write_file(&out.join("gap.csv"), &gaps)?;
        artifacts.push("gap.csv".into());
    }
    Ok(Outcome { config: to_table(&f)?, artifacts })
}

pub fn export(f: ExportFile, out: &Path) -> Result<Outcome> {
    let e = &f.export;
    let c = match e.source.as_str() {
        "apsk32" | "qam32" => load_constellation(&e.source)?.0,
        path => {
            let text = read_file(Path::new(path))?;
            match constellation::from_json(&text) {
                Ok(c) => c,
                Err(ce) => match TrainState::from_json(&text) {
                    Ok(s) => Constellation::from_reals(&s.params.raw_points)?,
                    Err(_) => return Err(CliError::context(format!("source {path}"), ce)),
                },
            }
        }
    };
    let p0 = e.p0.unwrap_or(0.5);
    let c = if e.relabel && !e.shaped.is_empty() {
        let spec = ShapingSpec::new(&e.shaped, e.p0.unwrap_or(0.8))?;
        spec.validate(c.m())?;
        relabel_for_shaping(&c, &spec).0
    } else {
        c
    };
    let c = normalize(c.points(), &distribution(c.m(), &e.shaped, p0)?)?;
    write_file(&out.join("constellation.json"), &constellation::to_json(&c))?;
    Ok(Outcome { config: to_table(&f)?, artifacts: vec!["constellation.json".into()] })
}

pub fn import(f: ImportFile, out: &Path) -> Result<Outcome> {
    if f.input.as_os_str().is_empty() {
        return Err(CliError::Config("import needs an input file".into()));
    }
    let text = read_file(&f.input)?;
    let c = constellation::from_json(&text).map_err(|e| CliError::context(format!("{}", f.input.display()), e))?;
    let coincident = c.has_coincident_points();
    if coincident {
        eprintln!("warning: {} has coincident points", f.input.display());
    }
    let uniform = constellation::SymbolDistribution::uniform(c.size());
    let report = json!({
        "m": c.m(),
        "points": c.size(),
        "mean_energy_uniform": c.mean_energy(&uniform),
        "coincident_points": coincident,
    });
    write_file(&out.join("constellation.json"), &constellation::to_json(&c))?;
    write_file(&out.join("report.json"), &json_text(&report))?;
    Ok(Outcome { config: to_table(&f)?, artifacts: vec!["constellation.json".into(), "report.json".into()] })
}

pub fn codes(out: &Path, write: Option<&str>) -> Result<()> {
    println!("{:<16} {:>6} {:>6} {:>6}  note", "name", "n", "checks", "wc");
    for c in BUILTIN_CODES {
        println!("{:<16} {:>6} {:>6} {:>6}  {}", c.name, c.n, c.checks, c.column_weight, c.note);
    }
    if let Some(name) = write {
        let h = builtin_code(name)?;
        create_dir(out)?;
        let path = out.join(format!("{name}.alist"));
        write_file(&path, &h.to_alist())?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}
