use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use pta_ffi::*;

fn rect_bits(w: usize, h: usize, x0: usize, x1: usize, y0: usize, y1: usize) -> Vec<u8> {
    (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            (x >= x0 && x < x1 && y >= y0 && y < y1) as u8
        })
        .collect()
}

fn mask(bits: &[u8], w: usize, h: usize) -> *mut PtaMask {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pta_mask_new(w, h, bits.as_ptr(), &mut out) }, PtaStatus::Ok);
    out
}

fn last_error() -> String {
    let p = pta_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn overlap_and_distance_metrics() {
    let g = mask(&rect_bits(200, 200, 70, 130, 70, 130), 200, 200);
    let s = mask(&rect_bits(200, 200, 68, 132, 68, 132), 200, 200);
    let (mut dsc, mut loss, mut hd, mut avg, mut p, mut r) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(pta_dsc(g, s, &mut dsc), PtaStatus::Ok);
        assert_eq!(pta_dsc_loss(g, s, &mut loss), PtaStatus::Ok);
        assert_eq!(pta_hausdorff(g, s, &mut hd), PtaStatus::Ok);
        assert_eq!(pta_assd(g, s, &mut avg), PtaStatus::Ok);
        assert_eq!(pta_precision_recall(g, s, &mut p, &mut r), PtaStatus::Ok);
        pta_mask_free(g);
        pta_mask_free(s);
    }
    assert_eq!(dsc, 7200.0 / 7696.0);
    assert_eq!(loss, 1.0 - dsc);
    assert!((hd - 8f64.sqrt()).abs() < 1e-12);
    assert!(avg > 0.0 && avg <= hd);
    assert_eq!((p, r), (3600.0 / 4096.0, 1.0));
}

#[test]
fn piecewise_loss_and_invalid_sectors() {
    let (w, h) = (60, 60);
    let bits = rect_bits(w, h, 20, 40, 20, 40);
    // a smooth ramp plus a step across the region boundary
    let values: Vec<f64> = (0..w * h).map(|i| bits[i] as f64 * 5.0 + ((i * 7919) % 13) as f64 * 0.1).collect();
    let mut image = ptr::null_mut();
    assert_eq!(unsafe { pta_image_new(w, h, values.as_ptr(), &mut image) }, PtaStatus::Ok);
    let m = mask(&bits, w, h);
    let cfg = pta_config_default();
    assert_eq!((cfg.sectors, cfg.band_width, cfg.lambda), (10, 2.0, 3.0));
    let mut aggregate = 0.0;
    let mut per = vec![0.0; cfg.sectors];
    let status = unsafe { pta_piecewise_loss(image, m, &cfg, &mut aggregate, per.as_mut_ptr(), per.len()) };
    assert_eq!(status, PtaStatus::Ok);
    assert!(aggregate > 0.0 && aggregate.is_finite());
    let valid: Vec<f64> = per.iter().copied().filter(|v| !v.is_nan()).collect();
    assert!((valid.iter().sum::<f64>() / valid.len() as f64 - aggregate).abs() < 1e-12);

    let mut short = vec![0.0; 3];
    let status = unsafe { pta_piecewise_loss(image, m, &cfg, &mut aggregate, short.as_mut_ptr(), short.len()) };
    assert_eq!(status, PtaStatus::BufferTooSmall);

    let bad = PtaConfig { mode: 7, ..cfg };
    assert_eq!(unsafe { pta_piecewise_loss(image, m, &bad, &mut aggregate, ptr::null_mut(), 0) }, PtaStatus::InvalidArgument);
    assert!(last_error().contains("mode"));

    let other = mask(&rect_bits(10, 10, 2, 5, 2, 5), 10, 10);
    assert_eq!(unsafe { pta_piecewise_loss(image, other, &cfg, &mut aggregate, ptr::null_mut(), 0) }, PtaStatus::DimensionMismatch);
    unsafe {
        pta_mask_free(other);
        pta_mask_free(m);
        pta_image_free(image);
    }
}

#[test]
fn error_codes_and_null_handling() {
    let mut out = 0.0;
    assert_eq!(unsafe { pta_dsc(ptr::null(), ptr::null(), &mut out) }, PtaStatus::NullPointer);
    assert!(last_error().contains("null"));

    let g = mask(&rect_bits(20, 20, 5, 10, 5, 10), 20, 20);
    let e = mask(&[0u8; 400], 20, 20);
    assert_eq!(unsafe { pta_hausdorff(g, e, &mut out) }, PtaStatus::EmptyRegion);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.pgm");
    std::fs::write(&bad, b"P5\n4 4\n255\nabc").unwrap();
    let path = CString::new(bad.to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { pta_mask_read(path.as_ptr(), &mut m) }, PtaStatus::Malformed);
    assert!(last_error().contains("byte offset"));
    assert!(m.is_null());
    unsafe {
        pta_mask_free(g);
        pta_mask_free(e);
        pta_mask_free(ptr::null_mut());
        pta_image_free(ptr::null_mut());
    }
}

#[test]
fn mask_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.png").to_str().unwrap()).unwrap();
    let bits = rect_bits(17, 9, 3, 11, 2, 7);
    let m = mask(&bits, 17, 9);
    let mut back = ptr::null_mut();
    let (mut w, mut h, mut n) = (0, 0, 0);
    let mut copy = vec![9u8; bits.len()];
    unsafe {
        assert_eq!(pta_mask_write(m, path.as_ptr()), PtaStatus::Ok);
        assert_eq!(pta_mask_read(path.as_ptr(), &mut back), PtaStatus::Ok);
        assert_eq!(pta_mask_dims(back, &mut w, &mut h, &mut n), PtaStatus::Ok);
        assert_eq!(pta_mask_bits(back, copy.as_mut_ptr(), copy.len()), PtaStatus::Ok);
        pta_mask_free(m);
        pta_mask_free(back);
    }
    assert_eq!((w, h, n), (17, 9, 40));
    assert_eq!(copy, bits);
}

#[test]
fn refine_with_huge_mu_returns_init() {
    let (w, h) = (40, 40);
    let bits = rect_bits(w, h, 12, 28, 12, 28);
    let values: Vec<f64> = (0..w * h).map(|i| bits[i] as f64 * 3.0 + ((i * 31) % 7) as f64).collect();
    let mut image = ptr::null_mut();
    assert_eq!(unsafe { pta_image_new(w, h, values.as_ptr(), &mut image) }, PtaStatus::Ok);
    let init = mask(&bits, w, h);
    let cfg = pta_config_default();
    let mut out = ptr::null_mut();
    let mut objective = f64::NAN;
    let status = unsafe { pta_refine(image, init, &cfg, 1e6, 20, 4, 1, &mut out, &mut objective) };
    assert_eq!(status, PtaStatus::Ok);
    let mut copy = vec![0u8; bits.len()];
    unsafe {
        assert_eq!(pta_mask_bits(out, copy.as_mut_ptr(), copy.len()), PtaStatus::Ok);
        pta_mask_free(out);
        pta_mask_free(init);
        pta_image_free(image);
    }
    assert_eq!(copy, bits);
    assert!(objective.is_finite());
}

// Compiles a small C program against the generated header and the static library.
#[test]
fn c_program_links_against_header() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = crate_dir.join("include");
    assert!(header_dir.join("pta.h").exists(), "header not generated");
    let exe = std::env::current_exe().unwrap();
    let target_dir = exe.parent().unwrap().parent().unwrap();
    let lib = target_dir.join("libpta_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "pta.h"
int main(void) {
    unsigned char bits[100] = {0};
    for (int y = 2; y < 8; y++) for (int x = 2; x < 8; x++) bits[y * 10 + x] = 1;
    PtaMask *a = NULL;
    if (pta_mask_new(10, 10, bits, &a) != PTA_STATUS_OK) return 1;
    double dsc = 0.0;
    if (pta_dsc(a, a, &dsc) != PTA_STATUS_OK || dsc != 1.0) return 2;
    if (pta_dsc(a, NULL, &dsc) != PTA_STATUS_NULL_POINTER) return 3;
    if (pta_last_error_message() == NULL) return 4;
    PtaConfig cfg = pta_config_default();
    if (cfg.sectors != 10 || cfg.mode != PTA_MODE_T_TEST) return 5;
    pta_mask_free(a);
    printf("ok\n");
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler is available");
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "ok\n");
}
