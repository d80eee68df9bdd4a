use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use palimpsest_core::raster::{load_f64_tiff, load_image};
use palimpsest_core::synthetic::{SyntheticPage, SyntheticSpec};
use palimpsest_core::{BitDepth, GrayImage, ImageFormat, ProjectionModel, Raster};

struct Page {
    dir: tempfile::TempDir,
    manifest: PathBuf,
    points: PathBuf,
}

impl Page {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn page(width: u32, height: u32, bands: usize) -> Page {
    let dir = tempfile::tempdir().unwrap();
    let synthetic =
        SyntheticPage::generate(&SyntheticSpec::new(width, height, bands, 17)).unwrap();
    let manifest = synthetic.write(&dir.path().join("bands")).unwrap();
    let points = dir.path().join("points.csv");
    fs::write(&points, synthetic.training_set(50, 17).to_text()).unwrap();
    Page {
        dir,
        manifest,
        points,
    }
}

fn palimpsest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_palimpsest"))
        .args(args)
        .env_remove("PALIMPSEST_OUT")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn fit_writes_a_model_with_three_dominant_variates() {
    let p = page(96, 80, 23);
    let out = p.path("out");
    let o = palimpsest(&[
        "fit", "--manifest", s(&p.manifest), "--annotations", s(&p.points),
        "--method", "cva", "--out", s(&out), "--run", "page1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("eigenvalue"));
    let model =
        ProjectionModel::from_json(&fs::read_to_string(out.join("page1.model.json")).unwrap())
            .unwrap();
    assert_eq!(model.eigenvalues.len(), 23);
    let top = model.eigenvalues[0];
    assert_eq!(model.eigenvalues.iter().filter(|&&l| l > 1e-6 * top).count(), 3);
    assert!(model.provenance.manifest_sha256.is_some());
}

#[test]
fn exit_codes_follow_the_error_category() {
    let p = page(40, 32, 4);
    let o = palimpsest(&[
        "fit", "--manifest", s(&p.manifest), "--annotations", s(&p.points),
        "--method", "lda", "--out", s(&p.path("o")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("LDA requires exactly 2 classes"), "{}", stderr(&o));

    let o = palimpsest(&["fit", "--manifest", s(&p.path("missing.csv")), "--method", "pca_unsupervised"]);
    assert_eq!(o.status.code(), Some(2));

    for args in [
        &["fit", "--no-such-flag"][..],
        &["fit", "--method", "cva"][..],
        &["render", "--manifest", "m.csv"][..],
        &["fit", "--manifest", "m.csv", "--mode", "p3"][..],
        &["fit", "--manifest", "m.csv", "--depth", "12"][..],
        &["contrast", "in.png", "--order", "5", "-o", "x.png"][..],
    ] {
        assert_eq!(palimpsest(args).status.code(), Some(1), "{args:?}");
    }
    assert_eq!(palimpsest(&["--help"]).status.code(), Some(0));

    // a numeric failure: one point per class leaves no within-class scatter
    let pts = p.path("two.csv");
    fs::write(&pts, "class,x,y\nparchment,1,1\nunderwriting,20,20\n").unwrap();
    let o = palimpsest(&[
        "fit", "--manifest", s(&p.manifest), "--annotations", s(&pts),
        "--method", "cva", "--out", s(&p.path("o")),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn render_names_one_file_per_plane_and_mode() {
    let p = page(64, 48, 23);
    let out = p.path("out");
    let o = palimpsest(&[
        "fit", "--manifest", s(&p.manifest), "--annotations", s(&p.points),
        "--method", "cva", "--out", s(&out), "--run", "r",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model = out.join("r.model.json");
    let o = palimpsest(&[
        "render", "--manifest", s(&p.manifest), "--annotations", s(&p.points),
        "--model", s(&model), "--mode", "full", "--mode", "p5", "--depth", "8", "--depth", "16",
        "--composite", "1,0,2", "--out", s(&out), "--run", "r",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let names = files(&out);
    let full8 = names.iter().filter(|n| n.ends_with("_full_8bit.png")).count();
    let p5 = names.iter().filter(|n| n.contains("_p5_")).count();
    assert_eq!(full8, 23);
    assert_eq!(p5, 46);
    assert!(names.contains(&"r_R1G0B2.png".to_string()), "{names:?}");

    // green channel of the composite is plane 0 at the first mode and depth
    let Raster::Rgb(rgb) = load_image(&out.join("r_R1G0B2.png")).unwrap() else {
        panic!("composite is RGB");
    };
    let Raster::Gray(plane0) = load_image(&out.join("r_plane0_full_8bit.png")).unwrap() else {
        panic!("plane is gray");
    };
    assert_eq!(rgb.channel(1), plane0);
}

#[test]
fn config_file_with_flag_overrides_and_rerun_from_run_meta() {
    let p = page(48, 40, 8);
    let out = p.path("out");
    let config = p.path("run.toml");
    fs::write(
        &config,
        format!(
            "[input]\nmanifest = {:?}\nannotations = {:?}\n\n[fit]\nmethod = \"pca\"\n\n\
             [render]\nmodes = [\"train\"]\nplanes = [0, 1]\n\n[output]\ndir = {:?}\nrun = \"cfg\"\n",
            p.manifest, p.points, out
        ),
    )
    .unwrap();
    let o = palimpsest(&["run", "--config", s(&config), "--method", "cva", "-k", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let names = files(&out);
    assert!(names.contains(&"cfg_plane1_train_8bit.png".to_string()), "{names:?}");
    assert!(!names.iter().any(|n| n.contains("plane2_")));
    assert!(names.contains(&"cfg_eval.csv".to_string()));
    let meta = fs::read_to_string(out.join("run.meta")).unwrap();
    assert!(meta.contains("method = \"cva\"") && meta.contains("[provenance]"), "{meta}");
    let first: Vec<Vec<u8>> = names.iter().map(|n| fs::read(out.join(n)).unwrap()).collect();

    let o = palimpsest(&["run", "--config", s(&out.join("run.meta"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let again: Vec<Vec<u8>> = names.iter().map(|n| fs::read(out.join(n)).unwrap()).collect();
    assert_eq!(first, again);
}

#[test]
fn output_directory_defaults_to_the_environment() {
    let p = page(32, 32, 4);
    let out = p.path("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_palimpsest"))
        .args(["fit", "--manifest", s(&p.manifest), "--method", "pca_unsupervised", "--run", "e"])
        .env("PALIMPSEST_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("e.model.json").exists());
}

fn save_gray(path: &Path, width: u32, data: Vec<u16>) {
    let height = data.len() as u32 / width;
    GrayImage::new(width, height, BitDepth::Eight, data)
        .unwrap()
        .save(path, ImageFormat::Png)
        .unwrap();
}

#[test]
fn evaluate_ranks_by_db_and_keeps_going_past_degenerate_images() {
    let dir = tempfile::tempdir().unwrap();
    let points = dir.path().join("eval.csv");
    fs::write(
        &points,
        "class,x,y\nunderwriting,0,0\nunderwriting,1,0\nparchment,2,0\nparchment,3,0\n",
    )
    .unwrap();
    // A separates the classes more widely than B at equal scatter
    save_gray(&dir.path().join("a.png"), 4, vec![10, 20, 200, 210]);
    save_gray(&dir.path().join("b.png"), 4, vec![100, 110, 150, 160]);
    save_gray(&dir.path().join("flat.png"), 4, vec![7, 7, 7, 7]);
    let csv = dir.path().join("rank.csv");
    let o = palimpsest(&[
        "evaluate", "--points", s(&points), "--csv", s(&csv),
        s(&dir.path().join("flat.png")), s(&dir.path().join("b.png")), s(&dir.path().join("a.png")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines: Vec<String> = fs::read_to_string(&csv).unwrap().lines().map(String::from).collect();
    assert_eq!(lines[0], "image,S_i,S_j,M,db,dunn");
    assert!(lines[1].starts_with("a.png,5,5,190,"), "{}", lines[1]);
    assert!(lines[2].starts_with("b.png,5,5,50,0.2,"), "{}", lines[2]);
    assert!(lines[3].starts_with("flat.png,,,,error:"), "{}", lines[3]);
    let table = stdout(&o);
    assert!(table.find("a.png").unwrap() < table.find("b.png").unwrap());

    fs::write(&points, "class,x,y\nunderwriting,0,0\n").unwrap();
    let o = palimpsest(&["evaluate", "--points", s(&points), s(&dir.path().join("a.png"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("parchment"));
}

#[test]
fn project_writes_score_planes_that_evaluate_raw() {
    let p = page(40, 30, 6);
    let out = p.path("out");
    let o = palimpsest(&[
        "project", "--manifest", s(&p.manifest), "--annotations", s(&p.points),
        "--method", "cva", "-k", "3", "--plane", "0", "--out", s(&out), "--run", "x",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(files(&out), ["x_plane0.tif"]);
    let (w, h, values) = load_f64_tiff(&out.join("x_plane0.tif")).unwrap();
    assert_eq!((w, h, values.len()), (40, 30, 1200));

    let o = palimpsest(&["evaluate", "--raw", "--points", s(&p.points), s(&out.join("x_plane0.tif"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("x_plane0.tif"));
}

#[test]
fn image_tools_write_their_outputs() {
    let p = page(32, 24, 5);
    let dir = p.path("tools");
    fs::create_dir_all(&dir).unwrap();
    let src = dir.join("in.png");
    save_gray(&src, 4, vec![0, 50, 100, 150, 200, 250, 255, 30]);

    let dt = dir.join("dt.png");
    let o = palimpsest(&["dt", s(&src), "--t1", "40", "--t2", "120", "-o", s(&dt)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let Raster::Gray(img) = load_image(&dt).unwrap() else { panic!() };
    assert_eq!(img.data()[0], 255, "at or below t1 turns white");

    let poly = dir.join("poly.tif");
    let o = palimpsest(&["contrast", s(&src), "--order", "3", "-o", s(&poly)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let Raster::Gray(img) = load_image(&poly).unwrap() else { panic!() };
    assert_eq!((img.data()[0], img.data()[6]), (0, 255));

    let pc = dir.join("pc.png");
    let o = palimpsest(&["pseudocolor", "--manifest", s(&p.manifest), "--red", "5", "--uv", "1", "-o", s(&pc)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let Raster::Rgb(rgb) = load_image(&pc).unwrap() else { panic!() };
    assert_eq!(rgb.channel(1), rgb.channel(2));

    let o = palimpsest(&["dt", s(&src), "--t1", "200", "--t2", "100", "-o", s(&dt)]);
    assert_eq!(o.status.code(), Some(1));
    let o = palimpsest(&["pseudocolor", "--manifest", s(&p.manifest), "--red", "9", "--uv", "1", "-o", s(&pc)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ingest_reports_and_rewrites_the_stack() {
    let p = page(30, 20, 3);
    let copy = p.path("normalized");
    let o = palimpsest(&["ingest", "--manifest", s(&p.manifest), "--crop", "5,5,10,8", "--write", s(&copy)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("10x8 pixels, 3 bands"), "{}", stdout(&o));
    let o = palimpsest(&["ingest", "--manifest", s(&copy.join("manifest.csv"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("source 8-bit"));
}

#[test]
fn bench_smoke_run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = palimpsest(&["bench", "--size", "16x16", "--bands", "3", "--seed", "5", "--out", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("pipeline"));
    }
    let names = files(&a);
    assert_eq!(names, files(&b));
    for n in names.iter().filter(|n| n.as_str() != "run.meta") {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n}");
    }
}
