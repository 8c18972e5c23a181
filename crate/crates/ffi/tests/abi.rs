use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use rdw_core::rnn::{Activation, CellKind, Checkpoint, RnnParameters, RnnSpec};
use rdw_core::dataset::Normalizer;
use rdw_ffi::*;

fn last_error() -> String {
    let p = rdw_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

const SMALL: &str = "seed = 3\n[sim]\nusers = 2\nduration = 5.0\n";

#[test]
fn simulation_round_trip() {
    let cfg = CString::new(SMALL).unwrap();
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { rdw_simulation_run(cfg.as_ptr(), &mut sim) }, RdwStatus::Ok);
    let n = unsafe { rdw_simulation_frame_count(sim) };
    assert_eq!(n, 2 * 50);
    let mut f = RdwFrame::default();
    assert_eq!(unsafe { rdw_simulation_frame(sim, 1, &mut f) }, RdwStatus::Ok);
    assert_eq!((f.tick, f.user), (0, 1));
    assert!(f.physical_x > 0.0 && f.physical_x < 7.5);
    assert_eq!(unsafe { rdw_simulation_frame(sim, n, &mut f) }, RdwStatus::OutOfRange);
    assert!(last_error().contains("frame"));
    unsafe { rdw_simulation_free(sim) };
}

#[test]
fn errors_are_reported() {
    let mut sim = ptr::null_mut();
    let bad = CString::new("[sim]\nusers = 0\n").unwrap();
    assert_eq!(unsafe { rdw_simulation_run(bad.as_ptr(), &mut sim) }, RdwStatus::Validation);
    assert!(sim.is_null());
    assert!(last_error().contains("users"));

    let unknown = CString::new("[sim]\nuserz = 2\n").unwrap();
    assert_eq!(unsafe { rdw_simulation_run(unknown.as_ptr(), &mut sim) }, RdwStatus::Config);
    assert_eq!(unsafe { rdw_simulation_run(ptr::null(), ptr::null_mut()) }, RdwStatus::NullPointer);

    let missing = CString::new("/nonexistent/model.json").unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { rdw_model_load(missing.as_ptr(), &mut model) }, RdwStatus::Io);
    assert!(model.is_null());

    unsafe {
        assert_eq!(rdw_simulation_frame_count(ptr::null()), 0);
        rdw_simulation_free(ptr::null_mut());
        rdw_model_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(rdw_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn model_predicts_like_the_library() {
    let spec = RnnSpec::new(CellKind::Gru, 2, 4, Activation::Linear);
    let params = RnnParameters::init(&spec, 11).unwrap();
    let mut ck = Checkpoint::new(spec, params);
    ck.normalizer = Some(Normalizer::room_side(&Default::default()));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    ck.save(&path).unwrap();

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { rdw_model_load(c_path.as_ptr(), &mut model) }, RdwStatus::Ok);
    assert_eq!(unsafe { rdw_model_input_dim(model) }, 2);

    let rows: Vec<[f64; 2]> = (0..20).map(|i| [3.0 + 0.1 * i as f64, 3.75]).collect();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let (mut x, mut y) = (f64::NAN, f64::NAN);
    let st = unsafe { rdw_model_predict(model, flat.as_ptr(), 20, 2, &mut x, &mut y) };
    assert_eq!(st, RdwStatus::Ok);

    use rdw_core::trainer::{Predictor, RnnPredictor};
    let direct = RnnPredictor::from_checkpoint(Checkpoint::load(&path).unwrap()).unwrap();
    let window = rdw_core::dataset::SampleWindow {
        inputs: rows.iter().map(|r| r.to_vec()).collect(),
        target: rdw_core::Vec2::new(0.0, 0.0),
        user: 0,
        t: 19,
        target_tick: 20,
    };
    let p = direct.predict(&window).unwrap();
    assert_eq!((x, y), (p.x, p.y));

    let st = unsafe { rdw_model_predict(model, flat.as_ptr(), 10, 4, &mut x, &mut y) };
    assert_eq!(st, RdwStatus::Config);
    unsafe { rdw_model_free(model) };
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/rdw.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["rdw_simulation_run", "rdw_model_predict", "rdw_last_error", "RDW_STATUS_PANIC"] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"rdw.h\"\nint main(void){RdwSimulation*s=0;RdwFrame f;(void)f;return rdw_simulation_run(0,&s)==RDW_STATUS_OK?0:1;}\n",
    )
    .unwrap();
    let Ok(out) = Command::new("cc")
        .args(["-std=c99", "-fsyntax-only", "-Wall", "-Werror", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
    else {
        eprintln!("no C compiler; header syntax not checked");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
