use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use palimpsest_core::dimred::project_plane;
use palimpsest_core::metrics::{
    evaluate_image, evaluate_plane, format_csv, format_table, rank_by_db, RankedEntry,
};
use palimpsest_core::pipeline::{self, model_file_name, PipelineConfig, PreparedInput, RunOutput};
use palimpsest_core::raster::{load_f64_tiff, load_image, save_f64_tiff};
use palimpsest_core::render::{double_threshold, enhance_polynomial, pseudocolor};
use palimpsest_core::synthetic::{SyntheticPage, SyntheticSpec};
use palimpsest_core::training::names;
use palimpsest_core::{
    Error, ErrorCategory, GrayImage, ImageFormat, NormalizeScope, ProjectionModel, Raster,
    Result, ScorePlane, Warning,
};
use palimpsest_service::ServiceConfig;

use crate::args::*;

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Fit(a) => fit(a),
        Command::Project(a) => project(a),
        Command::Render(a) => render(a),
        Command::Run(a) => run(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Dt(a) => dt(a),
        Command::Contrast(a) => contrast(a),
        Command::Pseudocolor(a) => pseudocolor_cmd(a),
        Command::Bench(a) => bench(a),
        Command::Serve(a) => serve(a),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn warn_all(warnings: &[Warning]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn output_format(path: &Path) -> Result<ImageFormat> {
    ImageFormat::from_path(path).ok_or_else(|| {
        Error::UnsupportedFormat(format!(
            "{}: use a .png, .tif or .tiff extension",
            path.display()
        ))
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// The `--config` file, if any, with every given flag applied on top.
fn build_config(p: &PipelineArgs) -> Result<PipelineConfig> {
    let mut cfg = match (&p.config, &p.stack.manifest) {
        (Some(path), manifest) => {
            let mut cfg = PipelineConfig::load(path)?;
            if let Some(m) = manifest {
                cfg.input.manifest = m.clone();
            }
            cfg
        }
        (None, Some(m)) => PipelineConfig::new(m),
        (None, None) => return Err(Error::Config("give --manifest or --config".into())),
    };
    if p.stack.crop.is_some() {
        cfg.input.crop = p.stack.crop;
    }
    if let Some(n) = p.stack.normalize {
        cfg.input.normalize = n;
    }
    if p.annotations.is_some() {
        cfg.input.annotations = p.annotations.clone();
    }
    if let Some(m) = p.method {
        cfg.fit.method = m;
    }
    if p.components.is_some() {
        cfg.fit.components = p.components;
    }
    if let Some(r) = p.ridge {
        cfg.fit.ridge = r;
    }
    if !p.modes.is_empty() {
        cfg.render.modes = p.modes.clone();
    }
    if !p.depths.is_empty() {
        cfg.render.depths = p.depths.clone();
    }
    if let Some(t) = p.tails {
        cfg.render.tails = t;
    }
    if let Some(f) = p.format {
        cfg.render.format = f;
    }
    if !p.planes.is_empty() {
        cfg.render.planes = Some(p.planes.clone());
    }
    if !p.composites.is_empty() {
        cfg.composites = p.composites.clone();
    }
    if let Some(e) = p.eval_on {
        cfg.output.eval_on = e;
    }
    if let Some(o) = &p.out {
        cfg.output.dir = o.clone();
    }
    if let Some(r) = &p.run {
        cfg.output.run = r.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare(cfg: &PipelineConfig) -> Result<PreparedInput> {
    let input = pipeline::prepare(cfg)?;
    warn_all(&input.warnings);
    Ok(input)
}

fn load_model(path: &Path) -> Result<ProjectionModel> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    ProjectionModel::from_json(&text)
}

fn eigen_table(model: &ProjectionModel) -> String {
    let total: f64 = model.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let mut out = format!("{:>9}  {:>14}  {:>7}\n", "component", "eigenvalue", "share");
    for (k, &ev) in model.eigenvalues.iter().enumerate() {
        let share = if total > 0.0 { ev.max(0.0) / total } else { 0.0 };
        let _ = writeln!(out, "{k:>9}  {ev:>14.6e}  {share:>7.4}");
    }
    out
}

fn ingest(a: IngestArgs) -> Result<()> {
    let manifest = a
        .stack
        .manifest
        .ok_or_else(|| Error::Config("--manifest is required".into()))?;
    let (stack, warnings, sha) = pipeline::load_stack(
        &manifest,
        a.stack.crop,
        a.stack.normalize.unwrap_or_default(),
    )?;
    warn_all(&warnings);
    println!(
        "{}x{} pixels, {} bands, source {}-bit, manifest sha256 {sha}",
        stack.width(),
        stack.height(),
        stack.band_count(),
        stack.source_bit_depth().bits()
    );
    println!("{:>4}  {:>10}  {:<16}  filter", "band", "nm", "illumination");
    for b in stack.bands() {
        println!(
            "{:>4}  {:>10.1}  {:<16}  {}",
            b.meta.band_id,
            b.meta.wavelength_nm,
            b.meta.illumination,
            b.meta.filter.as_deref().unwrap_or("-")
        );
    }
    if let Some(dir) = a.write {
        create_dir(&dir)?;
        let mut listing = String::from("# path,wavelength_nm,illumination,filter\n");
        for b in stack.bands() {
            let name = format!("band_{:02}.tif", b.meta.band_id);
            let img = GrayImage::new(
                stack.width(),
                stack.height(),
                stack.bit_depth(),
                b.samples().to_vec(),
            )?;
            img.save(&dir.join(&name), ImageFormat::Tiff)?;
            let _ = writeln!(
                listing,
                "{name},{},{},{}",
                b.meta.wavelength_nm,
                b.meta.illumination,
                b.meta.filter.as_deref().unwrap_or("")
            );
        }
        let path = dir.join("manifest.csv");
        fs::write(&path, listing).map_err(|e| io_err(&path, e))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let cfg = build_config(&a.pipeline)?;
    let input = prepare(&cfg)?;
    let model = pipeline::fit(&input, &cfg.fit)?;
    create_dir(&cfg.output.dir)?;
    let path = cfg.output.dir.join(model_file_name(&cfg.output.run));
    fs::write(&path, model.to_json()).map_err(|e| io_err(&path, e))?;
    print!("{}", eigen_table(&model));
    println!("wrote {}", path.display());
    Ok(())
}

fn project(a: ProjectArgs) -> Result<()> {
    let cfg = build_config(&a.pipeline)?;
    let input = prepare(&cfg)?;
    let model = match &a.model {
        Some(path) => load_model(path)?,
        None => pipeline::fit(&input, &cfg.fit)?,
    };
    create_dir(&cfg.output.dir)?;
    let planes: Vec<usize> = cfg
        .render
        .planes
        .clone()
        .unwrap_or_else(|| (0..model.components()).collect());
    for k in planes {
        let plane = project_plane(&input.stack, &model, k)?;
        let path = cfg
            .output
            .dir
            .join(format!("{}_plane{k}.tif", cfg.output.run));
        save_f64_tiff(plane.width(), plane.height(), plane.values(), &path)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn report(out: &RunOutput) {
    warn_all(&out.warnings);
    for name in &out.artifacts {
        println!("{}", out.dir.join(name).display());
    }
    if let Some(ev) = &out.evaluation {
        let entry = RankedEntry {
            image: ev.image.clone(),
            outcome: ev.outcome.clone(),
        };
        print!("{}", format_table(std::slice::from_ref(&entry)));
    }
}

fn render(a: RenderArgs) -> Result<()> {
    let cfg = build_config(&a.pipeline)?;
    let input = prepare(&cfg)?;
    let model = load_model(&a.model)?;
    report(&pipeline::render_with_model(&input, model, &cfg)?);
    Ok(())
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn run(a: RunArgs) -> Result<()> {
    let cfg = build_config(&a.pipeline)?;
    let input = prepare(&cfg)?;
    let out = pipeline::execute(&input, &cfg)?;
    report(&out);
    let t = &out.timings;
    eprintln!(
        "fit {:.3}s  project {:.3}s  render {:.3}s  write {:.3}s",
        secs(t.fit),
        secs(t.project),
        secs(t.render),
        secs(t.write)
    );
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let (points, warnings) = pipeline::load_annotations(&a.points)?;
    warn_all(&warnings);
    let under = points.points_of(names::UNDERWRITING);
    let parch = points.points_of(names::PARCHMENT);
    for (name, pts) in [(names::UNDERWRITING, &under), (names::PARCHMENT, &parch)] {
        if pts.is_empty() {
            return Err(Error::MissingClass(name.into()));
        }
    }
    let mut entries = Vec::with_capacity(a.images.len());
    for path in &a.images {
        let outcome = if a.raw {
            let (w, h, values) = load_f64_tiff(path)?;
            evaluate_plane(&ScorePlane::new(w, h, values)?, &under, &parch)
        } else {
            let img = match load_image(path)? {
                Raster::Gray(g) => g,
                Raster::Rgb(c) => c.channel(1),
            };
            evaluate_image(&img, &under, &parch)
        };
        // degenerate images are reported in their row; anything else stops the run
        let outcome = match outcome {
            Ok(r) => Ok(r),
            Err(e) if e.category() == ErrorCategory::Numeric => Err(e.to_string()),
            Err(e) => return Err(e),
        };
        let image = path
            .file_name()
            .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        entries.push(RankedEntry { image, outcome });
    }
    rank_by_db(&mut entries);
    print!("{}", format_table(&entries));
    if let Some(csv) = &a.csv {
        fs::write(csv, format_csv(&entries)).map_err(|e| io_err(csv, e))?;
    }
    Ok(())
}

fn load_gray(path: &Path) -> Result<GrayImage> {
    match load_image(path)? {
        Raster::Gray(g) => Ok(g),
        Raster::Rgb(_) => Err(Error::ImageMismatch(format!(
            "{} is RGB; expected a grayscale image",
            path.display()
        ))),
    }
}

fn save_gray(img: GrayImage, path: &Path) -> Result<()> {
    let format = output_format(path)?;
    img.save(path, format)?;
    println!("{}", path.display());
    Ok(())
}

fn dt(a: DtArgs) -> Result<()> {
    output_format(&a.output)?;
    let img = load_gray(&a.input)?;
    save_gray(double_threshold(&img, a.t1, a.t2, a.alpha)?, &a.output)
}

fn contrast(a: ContrastArgs) -> Result<()> {
    output_format(&a.output)?;
    let img = load_gray(&a.input)?;
    save_gray(enhance_polynomial(&img, a.order)?, &a.output)
}

fn pseudocolor_cmd(a: PseudocolorArgs) -> Result<()> {
    let format = output_format(&a.output)?;
    let manifest = a
        .stack
        .manifest
        .ok_or_else(|| Error::Config("--manifest is required".into()))?;
    let (stack, warnings, _) = pipeline::load_stack(
        &manifest,
        a.stack.crop,
        a.stack.normalize.unwrap_or_default(),
    )?;
    warn_all(&warnings);
    pseudocolor(&stack, a.red, a.uv)?.save(&a.output, format)?;
    println!("{}", a.output.display());
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let (width, height) = a.size;
    if a.bands < 2 {
        return Err(Error::Config("bench needs at least 2 bands".into()));
    }
    let wall = Instant::now();
    let page = SyntheticPage::generate(&SyntheticSpec::new(width, height, a.bands, a.seed))?;
    let training = page.training_set(a.points, a.seed);
    let generate = wall.elapsed();

    let t = Instant::now();
    let input = PreparedInput::from_stack(page.stack, Some(training), NormalizeScope::PerBand)?;
    let normalize = t.elapsed();

    let mut cfg = PipelineConfig::new(PathBuf::from("synthetic"));
    cfg.input.seed = Some(a.seed);
    cfg.render.format = a.format;
    cfg.output.dir = a.out.out;
    cfg.output.run = "bench".into();
    let out = pipeline::execute(&input, &cfg)?;
    let t = &out.timings;
    let compute = t.fit + t.project + t.render;
    println!("stack      {width}x{height}x{} seed {}", a.bands, a.seed);
    println!("generate   {:8.3} s", secs(generate));
    println!("normalize  {:8.3} s", secs(normalize));
    println!("fit        {:8.3} s", secs(t.fit));
    println!("project    {:8.3} s", secs(t.project));
    println!("render     {:8.3} s", secs(t.render));
    println!("write      {:8.3} s", secs(t.write));
    println!("pipeline   {:8.3} s  (fit + project + render)", secs(compute));
    println!("total      {:8.3} s", secs(wall.elapsed()));
    println!("outputs    {} files in {}", out.artifacts.len(), out.dir.display());
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| io_err(Path::new("tokio runtime"), e))?;
    let config = ServiceConfig {
        out_dir: a.out.out,
        ui_dir: a.ui,
    };
    runtime
        .block_on(palimpsest_service::serve(a.addr, config))
        .map_err(|e| io_err(Path::new(&a.addr.to_string()), e))
}
