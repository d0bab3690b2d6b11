use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use tangencylab_ffi::*;

fn last_error() -> String {
    let p = tl_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn quadratic_anchors() {
    let mut q = TlQuadAnalysis::default();
    assert_eq!(unsafe { tl_quad_analyze(-0.75, &mut q) }, TlStatus::Ok);
    assert_eq!(q.fixed_point_count, 2);
    assert!((q.sink_multiplier + 1.0).abs() < 1e-12);
    assert_eq!(unsafe { tl_quad_analyze(0.5, &mut q) }, TlStatus::Ok);
    assert_eq!(q.fixed_point_count, 0);
    assert!(q.sink_multiplier.is_nan() && !q.is_sink);
    assert_eq!(
        unsafe { tl_quad_analyze(0.0, ptr::null_mut()) },
        TlStatus::NullPointer
    );
}

#[test]
fn thickness_and_errors() {
    let mut tau = 0.0;
    assert_eq!(
        unsafe { tl_thickness_affine(0.4, 8, &mut tau) },
        TlStatus::Ok
    );
    assert!((tau - 2.0).abs() < 1e-9);
    assert_eq!(
        unsafe { tl_thickness_affine(0.7, 8, &mut tau) },
        TlStatus::InvalidArgument
    );
    assert!(last_error().contains("0.7"));
}

#[test]
fn model_lifecycle_and_return_map() {
    let m = tl_model_default();
    let word = CString::new("00000").unwrap();
    let mut w = TlWindow::default();
    unsafe {
        assert_eq!(
            tl_sink_window(m, word.as_ptr(), 0.0, 0.0, &mut w),
            TlStatus::Ok
        );
        assert!((w.width * 8.0 * 2.1f64.powi(10) - 1.0).abs() < 1e-12);
        assert_eq!(
            tl_model_set_t(m, 0.5 * (w.t_minus + w.t_plus)),
            TlStatus::Ok
        );

        let mut orbit = std::mem::MaybeUninit::<TlOrbit>::uninit();
        let seed = TlPoint {
            x: 0.5,
            y: w.nu_zero,
        };
        assert_eq!(
            tl_find_periodic(m, word.as_ptr(), seed, orbit.as_mut_ptr()),
            TlStatus::Ok
        );
        let orbit = orbit.assume_init();
        assert_eq!(orbit.orbit_class, TlOrbitClass::Sink);
        assert_eq!(orbit.period, 6);

        let mut q = TlPoint::default();
        assert_eq!(
            tl_return_map(m, word.as_ptr(), orbit.point, &mut q),
            TlStatus::Ok
        );
        assert!((q.x - orbit.point.x).abs() < 1e-10 && (q.y - orbit.point.y).abs() < 1e-10);
        let mut j = [0.0; 4];
        assert_eq!(
            tl_return_jacobian(m, word.as_ptr(), orbit.point, j.as_mut_ptr()),
            TlStatus::Ok
        );
        let det = j[0] * j[3] - j[1] * j[2];
        let prod = orbit.multiplier_re[0] * orbit.multiplier_re[1]
            - orbit.multiplier_im[0] * orbit.multiplier_im[1];
        assert!((det - prod).abs() < 1e-10);

        let far = TlPoint { x: 0.5, y: 0.9 };
        assert_eq!(
            tl_return_map(m, word.as_ptr(), far, &mut q),
            TlStatus::Domain
        );
        let bad = CString::new("01x").unwrap();
        assert_eq!(
            tl_return_map(m, bad.as_ptr(), far, &mut q),
            TlStatus::InvalidArgument
        );
        tl_model_free(m);
        tl_model_free(ptr::null_mut());
    }
}

#[test]
fn model_from_json() {
    let mut m = ptr::null_mut();
    let good = CString::new(r#"{"saddle": {"lambda": 0.2, "sigma": 2.2}, "t": 0.01}"#).unwrap();
    let bad = CString::new(r#"{"saddle": {"lambda": 1.5}}"#).unwrap();
    let junk = CString::new("{").unwrap();
    unsafe {
        assert_eq!(tl_model_from_json(good.as_ptr(), &mut m), TlStatus::Ok);
        assert!(!m.is_null());
        tl_model_free(m);
        assert_eq!(
            tl_model_from_json(bad.as_ptr(), &mut m),
            TlStatus::InvalidArgument
        );
        assert!(m.is_null());
        assert_eq!(
            tl_model_from_json(junk.as_ptr(), &mut m),
            TlStatus::InvalidArgument
        );
        assert!(last_error().contains("model JSON"));
        assert_eq!(
            tl_model_from_json(ptr::null(), &mut m),
            TlStatus::NullPointer
        );
    }
}

#[test]
fn cascade_handle() {
    let m = tl_model_default();
    let min_n = [5usize, 8];
    let mut c = ptr::null_mut();
    unsafe {
        assert_eq!(
            tl_cascade_run(m, 2, 0.5, min_n.as_ptr(), 2, 0.1, &mut c),
            TlStatus::Ok
        );
        assert_eq!(tl_cascade_window_count(c), 2);
        let (mut a, mut b) = (TlWindow::default(), TlWindow::default());
        assert_eq!(tl_cascade_window(c, 0, &mut a), TlStatus::Ok);
        assert_eq!(tl_cascade_window(c, 1, &mut b), TlStatus::Ok);
        assert!(b.t_minus > a.t_minus && b.t_plus < a.t_plus);
        assert_eq!(tl_cascade_window(c, 2, &mut b), TlStatus::InvalidArgument);
        let mut t_inf = 0.0;
        assert_eq!(tl_cascade_t_infinity(c, &mut t_inf), TlStatus::Ok);
        assert!(t_inf > b.t_minus && t_inf < b.t_plus);

        let mut s = ptr::null_mut();
        assert_eq!(tl_cascade_to_json(c, &mut s), TlStatus::Ok);
        let json = CStr::from_ptr(s).to_str().unwrap().to_string();
        tl_string_free(s);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["windows"].as_array().unwrap().len(), 2);
        tl_cascade_free(c);

        let mut c3 = ptr::null_mut();
        let min3 = [5usize, 8, 11];
        assert_eq!(
            tl_cascade_run(m, 3, 0.5, min3.as_ptr(), 3, 0.1, &mut c3),
            TlStatus::Numerical
        );
        assert!(c3.is_null());
        assert!(last_error().contains("stage 3"));
        assert_eq!(tl_cascade_window_count(ptr::null()), 0);
        tl_model_free(m);
    }
}

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn find_staticlib() -> Option<PathBuf> {
    let dir = target_dir();
    [
        dir.join("libtangencylab_ffi.a"),
        dir.join("deps/libtangencylab_ffi.a"),
    ]
    .into_iter()
    .find(|p| p.exists())
}

#[test]
fn c_program_links_against_header() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = root.join("include/tangencylab.h");
    assert!(header.exists());
    let Some(lib) = find_staticlib() else {
        panic!("static library not found under {}", target_dir().display());
    };
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <math.h>
#include <stdio.h>
#include "tangencylab.h"
int main(void) {
    TlQuadAnalysis q;
    if (tl_quad_analyze(-0.75, &q) != TL_STATUS_OK || fabs(q.sink_multiplier + 1.0) > 1e-12) return 1;
    TlModel *m = tl_model_default();
    TlWindow w;
    if (tl_sink_window(m, "00000", 0.5, 0.0, &w) != TL_STATUS_OK) return 2;
    if (tl_sink_window(m, "0", 0.5, 0.0, &w) != TL_STATUS_PRECONDITION) return 3;
    if (tl_last_error_message() == NULL) return 4;
    tl_model_free(m);
    printf("%.6e\n", w.width);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = tmp.path().join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
}
