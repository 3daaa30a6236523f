//! The exported functions called from Rust, checked against the library.

use std::ffi::{CStr, CString};
use std::fs;
use std::ptr;

use csobench::gp::{GpModel, GpSettings, MaternKernel};
use csobench::Label;
use csobench_ffi::*;

fn last_error() -> String {
    let p = cso_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn c(s: &std::path::Path) -> CString {
    CString::new(s.to_str().unwrap()).unwrap()
}

#[test]
fn matern_matches_library() {
    let k = MaternKernel::new(10.0, 20.0, 1.5).unwrap();
    for r in [0.0, 0.5, 7.0, 33.0] {
        let mut out = 0.0;
        assert_eq!(
            unsafe { cso_matern(10.0, 20.0, 1.5, r, &mut out) },
            CsoStatus::Ok
        );
        assert_eq!(out, k.eval(r));
    }
    let mut out = 0.0;
    assert_eq!(
        unsafe { cso_matern(10.0, 20.0, 1.0, -1.0, &mut out) },
        CsoStatus::InvalidArgument
    );
    assert!(last_error().contains("distance"));
}

#[test]
fn null_pointers_are_reported() {
    assert_eq!(
        unsafe { cso_matern(10.0, 1.0, 1.0, 1.0, ptr::null_mut()) },
        CsoStatus::NullPointer
    );
    assert_eq!(
        unsafe { cso_minmax(ptr::null(), 3, ptr::null_mut()) },
        CsoStatus::NullPointer
    );
    assert_eq!(
        unsafe { cso_dataset_load(ptr::null(), ptr::null_mut()) },
        CsoStatus::NullPointer
    );
    assert_eq!(unsafe { cso_dataset_len(ptr::null()) }, 0);
    let mut l = 0;
    assert_eq!(
        unsafe { cso_dataset_label(ptr::null(), 0, &mut l) },
        CsoStatus::NullPointer
    );
    assert!(last_error().contains("dataset"));
}

#[test]
fn minmax_degenerate_is_numerical() {
    let v = [3.0; 4];
    let mut out = [0.0; 4];
    assert_eq!(
        unsafe { cso_minmax(v.as_ptr(), 4, out.as_mut_ptr()) },
        CsoStatus::Numerical
    );
}

#[test]
fn dataset_round_trip_and_corruption() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("d");
    let cdir = c(&dir);
    assert_eq!(
        unsafe { cso_simulate(cdir.as_ptr(), 5, 4, 9, false) },
        CsoStatus::Ok
    );
    let mut ds = ptr::null_mut();
    assert_eq!(
        unsafe { cso_dataset_load(cdir.as_ptr(), &mut ds) },
        CsoStatus::Ok
    );
    assert_eq!(unsafe { cso_dataset_len(ds) }, 9);
    let reference = csobench::io::load_dataset(&dir).unwrap();
    let mut px = vec![0f32; 576];
    for i in 0..9 {
        assert_eq!(
            unsafe { cso_dataset_pixels(ds, i, px.as_mut_ptr(), 576) },
            CsoStatus::Ok
        );
        assert_eq!(px.as_slice(), reference.cutout_pixels(i));
        let mut l = -1;
        assert_eq!(unsafe { cso_dataset_label(ds, i, &mut l) }, CsoStatus::Ok);
        assert_eq!(l as usize, reference.manifest.records[i].label.index());
    }
    unsafe { cso_dataset_free(ds) };

    let pix = dir.join("pixels.f32le");
    let mut bytes = fs::read(&pix).unwrap();
    bytes[100] ^= 0x10;
    fs::write(&pix, bytes).unwrap();
    let mut ds = ptr::null_mut();
    assert_eq!(
        unsafe { cso_dataset_load(cdir.as_ptr(), &mut ds) },
        CsoStatus::CorruptDataset
    );
    assert!(ds.is_null());
    assert!(last_error().contains("hash"));
}

#[test]
fn gp_matches_library() {
    let mut rng = 7u64;
    let mut next = || {
        rng = rng
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (rng >> 11) as f64 / (1u64 << 53) as f64
    };
    let (n, dim) = (60, 3);
    let x: Vec<f64> = (0..n * dim).map(|_| next()).collect();
    let y: Vec<i32> = (0..n)
        .map(|i| (x[i * dim] + x[i * dim + 1] > 1.0) as i32)
        .collect();
    let settings = CsoGpSettings {
        k_neighbors: 10,
        length_scale: 0.5,
        ..cso_gp_default_settings()
    };
    let mut model = ptr::null_mut();
    assert_eq!(
        unsafe { cso_gp_fit(x.as_ptr(), n, dim, y.as_ptr(), &settings, &mut model) },
        CsoStatus::Ok
    );
    let q: Vec<f64> = (0..10 * dim).map(|_| next()).collect();
    let mut labels = [0i32; 10];
    let mut mean = [0.0; 20];
    let mut var = [0.0; 10];
    assert_eq!(
        unsafe {
            cso_gp_predict(
                model,
                q.as_ptr(),
                10,
                labels.as_mut_ptr(),
                mean.as_mut_ptr(),
                var.as_mut_ptr(),
            )
        },
        CsoStatus::Ok
    );
    unsafe { cso_gp_free(model) };

    let rows: Vec<&[f64]> = x.chunks(dim).collect();
    let lab: Vec<Label> = y.iter().map(|&v| Label::from_index(v as usize)).collect();
    let reference = GpModel::fit(&rows, &lab, &GpSettings::from(settings)).unwrap();
    for (i, qr) in q.chunks(dim).enumerate() {
        let p = reference.posterior(qr).unwrap();
        assert_eq!(labels[i] as usize, p.label.index());
        assert_eq!(&mean[2 * i..2 * i + 2], &p.mean);
        assert_eq!(var[i], p.variance);
    }
}

#[test]
fn evaluate_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = c(&tmp.path().join("d"));
    let out = tmp.path().join("out");
    assert_eq!(
        unsafe { cso_simulate(data.as_ptr(), 15, 15, 3, false) },
        CsoStatus::Ok
    );
    let models = CString::new("gp,logreg").unwrap();
    let cfg = CString::new("gp.k = 8\nharness.pca_components = 4\nharness.bins = 3\n").unwrap();
    let status = unsafe {
        cso_evaluate(
            data.as_ptr(),
            models.as_ptr(),
            2,
            1,
            cfg.as_ptr(),
            c(&out).as_ptr(),
        )
    };
    assert_eq!(status, CsoStatus::Ok, "{}", last_error());
    assert!(out.join("results.csv").exists());
    assert!(out.join("confusion.csv").exists());
    let bad = CString::new("svm").unwrap();
    let status = unsafe {
        cso_evaluate(
            data.as_ptr(),
            bad.as_ptr(),
            1,
            1,
            ptr::null(),
            c(&out).as_ptr(),
        )
    };
    assert_eq!(status, CsoStatus::InvalidArgument);
}
