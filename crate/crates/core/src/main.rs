use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use beltloc::calibration::ProfileMetadata;
use beltloc::io::manifest::{
    truth_to_string, AnchorEntry, CalibrationEntry, ClipEntry, Manifest, RecordingsManifest, ScenarioManifest,
    SweepEntry,
};
use beltloc::io::profile::{load_profile, save_profile};
use beltloc::io::report::{curve_to_tsv, ReportFile};
use beltloc::io::wav::{read_clip, write_wav, WavEncoding};
use beltloc::io::{resolve_relative, write_atomic, FORMAT_VERSION};
use beltloc::localization::noise_from_silence;
use beltloc::{calibrate, evaluate_sweep, localize, Clip, Config, Error, NoiseProfile, Profile, Result};

/// Sound source localization for microphone belts.
#[derive(Parser)]
#[command(name = "beltloc", version)]
struct Cli {
    /// TOML file overriding the default pipeline parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replaces every seed in a scenario manifest with one derived from this.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scenario manifest to WAV files, truth sidecars and a
    /// recordings manifest.
    Simulate {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Encoding::Float32)]
        encoding: Encoding,
    },
    /// Build a profile from eight labelled recordings and a silence clip.
    Calibrate {
        /// `<degrees>=<wav>`, once per anchor.
        #[arg(long = "angle", value_parser = parse_anchor, required = true)]
        angles: Vec<(u32, PathBuf)>,
        #[arg(long)]
        silence: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Unix timestamp stored in the profile (defaults to SOURCE_DATE_EPOCH, else none).
        #[arg(long)]
        created_at: Option<i64>,
    },
    /// Localize one recording.
    Localize {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        /// Silence recording for the noise floor.
        #[arg(long)]
        noise: Option<PathBuf>,
        /// Write the 360-point score curve here as tab-separated text.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Localize every clip of a manifest and write a report.
    Evaluate {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Encoding {
    Pcm16,
    Pcm24,
    Pcm32,
    Float32,
}

impl From<Encoding> for WavEncoding {
    fn from(e: Encoding) -> Self {
        match e {
            Encoding::Pcm16 => WavEncoding::Pcm16,
            Encoding::Pcm24 => WavEncoding::Pcm24,
            Encoding::Pcm32 => WavEncoding::Pcm32,
            Encoding::Float32 => WavEncoding::Float32,
        }
    }
}

fn parse_anchor(s: &str) -> std::result::Result<(u32, PathBuf), String> {
    let (angle, path) = s.split_once('=').ok_or("expected <degrees>=<wav>")?;
    let angle = angle.trim().parse::<u32>().map_err(|e| format!("bad angle {angle:?}: {e}"))?;
    Ok((angle, PathBuf::from(path)))
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(Error::Config(format!("{what} {} does not exist", path.display())));
    }
    Ok(())
}

fn base_config(cli: &Cli) -> Result<Config> {
    match &cli.config {
        Some(path) => {
            require_file(path, "config file")?;
            Config::load(path)
        }
        None => Ok(Config::default()),
    }
}

/// Without an explicit config, framing and kernel come from the profile.
fn config_for_profile(cli: &Cli, meta: &ProfileMetadata) -> Result<Config> {
    let mut config = base_config(cli)?;
    if cli.config.is_none() {
        config.sample_rate = meta.sample_rate;
        config.frame_size = meta.frame_size;
        config.hop = meta.hop;
        config.tau_max = meta.tau_max;
        config.kernel.sigma = meta.kernel_sigma;
        config.kernel.length_scale = meta.kernel_length_scale;
        config.validate()?;
    }
    Ok(config)
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn relative_string(path: &Path) -> String {
    path.to_string_lossy().replace('\\', "/")
}

fn write_clip(clip: &Clip, out: &Path, rel: &Path, encoding: WavEncoding) -> Result<PathBuf> {
    write_wav(clip, encoding, &out.join(rel))?;
    Ok(rel.to_path_buf())
}

fn write_truth(truth: &beltloc::sim::GroundTruth, out: &Path, rel: &Path) -> Result<PathBuf> {
    write_atomic(&out.join(rel), truth_to_string(truth)?.as_bytes())?;
    Ok(rel.to_path_buf())
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<ScenarioManifest> {
    require_file(path, "manifest")?;
    let (manifest, dir) = Manifest::load(path)?;
    let Manifest::Scenario(mut scenario) = manifest else {
        return Err(Error::Config(format!("{} is not a scenario manifest", path.display())));
    };
    scenario.resolve_signal_paths(&dir)?;
    if let Some(seed) = seed {
        scenario.reseed(seed);
    }
    Ok(scenario)
}

fn simulate(cli: &Cli, manifest: &Path, out: &Path, encoding: WavEncoding) -> Result<()> {
    let scenario = load_scenario(manifest, cli.seed)?;
    let mut files = 0usize;

    let calibration = match scenario.render_calibration()? {
        Some(rendered) => {
            let dir = scenario.calibration.as_ref().map(|c| c.output.clone()).unwrap_or_default();
            let mut anchors = Vec::new();
            for (angle, syn) in &rendered.anchors {
                let stem = dir.join(format!("anchor_{angle:03}"));
                let wav = write_clip(&syn.clip, out, &stem.with_extension("wav"), encoding)?;
                write_truth(&syn.truth, out, &stem.with_extension("truth.json"))?;
                anchors.push(AnchorEntry { angle: *angle, wav });
                files += 2;
            }
            let silence = write_clip(&rendered.silence, out, &dir.join("silence.wav"), encoding)?;
            files += 1;
            println!("calibration anchors={} dir={}", anchors.len(), relative_string(&dir));
            Some(CalibrationEntry { silence, anchors })
        }
        None => None,
    };

    let mut sweeps = Vec::new();
    for (i, spec) in scenario.sweeps.iter().enumerate() {
        let rendered = scenario.render_sweep(i)?;
        let dir = spec.output_dir();
        let mut clips = Vec::new();
        for (k, syn) in rendered.items.iter().enumerate() {
            let stem = dir.join(format!("clip_{k:03}"));
            let wav = write_clip(&syn.clip, out, &stem.with_extension("wav"), encoding)?;
            let truth = write_truth(&syn.truth, out, &stem.with_extension("truth.json"))?;
            clips.push(ClipEntry { wav, truth });
            files += 2;
        }
        let silence = write_clip(&rendered.silence, out, &dir.join("silence.wav"), encoding)?;
        files += 1;
        println!(
            "sweep={} clips={} signal={} dir={}",
            spec.name,
            clips.len(),
            spec.signal.label(),
            relative_string(&dir)
        );
        sweeps.push(SweepEntry {
            name: spec.name.clone(),
            silence,
            clips,
        });
    }

    let recordings = Manifest::Recordings(RecordingsManifest {
        format_version: FORMAT_VERSION,
        name: scenario.name.clone(),
        calibration,
        sweeps,
    });
    write_atomic(&out.join("recordings.toml"), recordings.to_toml_string()?.as_bytes())?;
    files += 1;
    println!("files={files}");
    Ok(())
}

fn created_at(flag: Option<i64>) -> Result<Option<i64>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => v
            .trim()
            .parse::<i64>()
            .map(Some)
            .map_err(|e| Error::Config(format!("SOURCE_DATE_EPOCH {v:?}: {e}"))),
        Err(_) => Ok(None),
    }
}

fn run_calibrate(
    cli: &Cli,
    angles: &[(u32, PathBuf)],
    silence: &Path,
    out: &Path,
    created: Option<i64>,
) -> Result<()> {
    let config = base_config(cli)?;
    let mut recordings = Vec::with_capacity(angles.len());
    for (angle, path) in angles {
        require_file(path, "recording")?;
        recordings.push((*angle, read_clip::<f64>(path)?));
    }
    require_file(silence, "silence recording")?;
    let silence = read_clip::<f64>(silence)?;
    let mut profile = calibrate(&recordings, &silence, &config)?;
    profile.metadata.created_unix = created_at(created)?;
    save_profile(&profile, out)?;
    let angles: Vec<String> = profile.motor_angles().iter().map(|a| a.to_string()).collect();
    let display: Vec<String> = profile.motor_angles_display().iter().map(|a| a.to_string()).collect();
    println!("motor_angles_deg={}", angles.join(","));
    println!("motor_angles_display={}", display.join(","));
    Ok(())
}

fn load_cli_profile(path: &Path) -> Result<Profile> {
    require_file(path, "profile")?;
    load_profile(path)
}

fn noise_or_silent(path: Option<&Path>, config: &Config) -> Result<NoiseProfile<f64>> {
    match path {
        Some(p) => {
            require_file(p, "noise recording")?;
            noise_from_silence(&read_clip::<f64>(p)?, config)
        }
        None => Ok(NoiseProfile::silent(config.frame_size / 2 + 1)),
    }
}

fn run_localize(
    cli: &Cli,
    profile: &Path,
    input: &Path,
    noise: Option<&Path>,
    curve: Option<&Path>,
) -> Result<()> {
    let profile = load_cli_profile(profile)?;
    let config = config_for_profile(cli, &profile.metadata)?;
    require_file(input, "input recording")?;
    let clip = read_clip::<f64>(input)?;
    let noise = noise_or_silent(noise, &config)?;
    let estimate = localize(&clip, &profile, &noise, &config)?;
    if let Some(path) = curve {
        write_atomic(path, curve_to_tsv(&estimate.score_curve).as_bytes())?;
    }
    println!("angle_deg={}", estimate.best_angle);
    println!("score={}", estimate.best_score());
    println!("motor_index={}", estimate.motor_index);
    println!("motor_angle_deg={}", estimate.motor_angle);
    Ok(())
}

fn sweeps_from_recordings(manifest: &RecordingsManifest, dir: &Path) -> Result<Vec<(String, Vec<(Clip, f64)>, Clip)>> {
    manifest
        .sweeps
        .iter()
        .map(|sweep| {
            let items = sweep
                .clips
                .iter()
                .map(|c| {
                    let clip = read_clip::<f64>(&resolve_relative(dir, &c.wav)?)?;
                    let truth = beltloc::io::manifest::load_truth(&resolve_relative(dir, &c.truth)?)?;
                    Ok((clip, truth.source_angle))
                })
                .collect::<Result<Vec<_>>>()?;
            let silence = read_clip::<f64>(&resolve_relative(dir, &sweep.silence)?)?;
            Ok((sweep.name.clone(), items, silence))
        })
        .collect()
}

fn run_evaluate(cli: &Cli, profile_path: &Path, manifest_path: &Path, report: &Path) -> Result<()> {
    let profile = load_cli_profile(profile_path)?;
    let config = config_for_profile(cli, &profile.metadata)?;
    require_file(manifest_path, "manifest")?;
    let (manifest, dir) = Manifest::load(manifest_path)?;
    let sweeps = match &manifest {
        Manifest::Scenario(_) => {
            let scenario = load_scenario(manifest_path, cli.seed)?;
            (0..scenario.sweeps.len())
                .map(|i| {
                    let r = scenario.render_sweep(i)?;
                    let items = r.items.into_iter().map(|s| (s.clip, s.truth.source_angle)).collect();
                    Ok((r.name, items, r.silence))
                })
                .collect::<Result<Vec<_>>>()?
        }
        Manifest::Recordings(m) => sweeps_from_recordings(m, &dir)?,
    };
    if sweeps.is_empty() {
        return Err(Error::Config(format!("{} lists no sweeps", manifest_path.display())));
    }
    let profile_label = file_label(profile_path);
    let mut reports = Vec::with_capacity(sweeps.len());
    for (name, items, silence) in &sweeps {
        let noise = noise_from_silence(silence, &config)?;
        let scenario = format!("{}/{name}", manifest.name());
        let r = evaluate_sweep(items, &profile, &noise, &config, &scenario, &profile_label)?;
        println!(
            "sweep={name} clips={} mae_deg={:.6} match_rate={:.6} failures={}",
            r.per_angle.len(),
            r.mae,
            r.match_rate,
            r.failures
        );
        reports.push(r);
    }
    ReportFile::new(manifest.name().to_string(), reports).save(report)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Simulate {
            manifest,
            out,
            encoding,
        } => simulate(cli, manifest, out, (*encoding).into()),
        Command::Calibrate {
            angles,
            silence,
            out,
            created_at,
        } => run_calibrate(cli, angles, silence, out, *created_at),
        Command::Localize {
            profile,
            input,
            noise,
            curve,
        } => run_localize(cli, profile, input, noise.as_deref(), curve.as_deref()),
        Command::Evaluate {
            profile,
            manifest,
            report,
        } => run_evaluate(cli, profile, manifest, report),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e.category();
            eprintln!("error[{}]: {e}", category.as_str());
            ExitCode::from(category.exit_code())
        }
    }
}
