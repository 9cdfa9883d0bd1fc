use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use sos_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sos_last_error()) }.to_string_lossy().into_owned()
}

fn golden(name: &str) -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/golden").join(name);
    CString::new(p.to_str().unwrap()).unwrap()
}

unsafe fn energy(text: &str) -> *mut SosEnergy {
    let text = CString::new(text).unwrap();
    let mut e = ptr::null_mut();
    assert_eq!(sos_energy_parse(text.as_ptr(), &mut e), SosStatus::Ok, "{}", last_error());
    e
}

#[test]
fn minimize_matches_brute_force() {
    unsafe {
        let e = energy("sos 1\nvars 3\nunary 0 0 2\nunary 1 3 0\nunary 2 1 1\nclique 2 0 1 0 2 2 0\nclique 2 1 2 0 1 1 0\n");
        let mut n = 0;
        assert_eq!(sos_energy_num_vars(e, &mut n), SosStatus::Ok);
        assert_eq!(n, 3);
        let (mut a, mut b) = (0.0, 0.0);
        let (mut la, mut lb) = ([9u8; 3], [9u8; 3]);
        assert_eq!(sos_energy_minimize(e, &mut a, la.as_mut_ptr(), 3), SosStatus::Ok);
        assert_eq!(sos_energy_brute_force(e, &mut b, lb.as_mut_ptr(), 3), SosStatus::Ok);
        assert_eq!(a, b);
        let mut at = 0.0;
        assert_eq!(sos_energy_evaluate(e, la.as_ptr(), 3, &mut at), SosStatus::Ok);
        assert_eq!(at, a);
        assert!(last_error().is_empty());
        sos_energy_free(e);
    }
}

#[test]
fn build_energy_through_the_api() {
    unsafe {
        let mut e = ptr::null_mut();
        assert_eq!(sos_energy_new(3, &mut e), SosStatus::Ok);
        assert_eq!(sos_energy_set_unary(e, 0, 0.0, 5.0), SosStatus::Ok);
        assert_eq!(sos_energy_set_unary(e, 2, 5.0, 0.0), SosStatus::Ok);
        let members = [0usize, 1, 2];
        let table = [0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0];
        let mut id = 99;
        assert_eq!(
            sos_energy_add_clique(e, members.as_ptr(), 3, table.as_ptr(), 8, &mut id),
            SosStatus::Ok
        );
        assert_eq!(id, 0);
        let mut v = 0.0;
        let mut y = [0u8; 3];
        assert_eq!(sos_energy_minimize(e, &mut v, y.as_mut_ptr(), 3), SosStatus::Ok);
        assert_eq!(v, 1.0);
        assert_eq!((y[0], y[2]), (0, 1));
        sos_energy_free(e);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut e = ptr::null_mut();
        let bad = CString::new("sos 1\nvars two\n").unwrap();
        assert_eq!(sos_energy_parse(bad.as_ptr(), &mut e), SosStatus::Parse);
        assert!(last_error().contains("line"), "{}", last_error());
        assert!(e.is_null());

        assert_eq!(sos_energy_new(2, ptr::null_mut()), SosStatus::NullPointer);
        assert_eq!(sos_energy_num_vars(ptr::null(), &mut 0), SosStatus::NullPointer);

        let e = energy("sos 1\nvars 2\nclique 2 0 1 0 0 0 1\n");
        let mut v = 0.0;
        let mut y = [0u8; 2];
        assert_eq!(sos_energy_minimize(e, &mut v, y.as_mut_ptr(), 2), SosStatus::NotSubmodular);
        assert!(last_error().contains("submodular"));
        assert_eq!(sos_energy_brute_force(e, &mut v, y.as_mut_ptr(), 2), SosStatus::Ok);
        assert_eq!(sos_energy_minimize(e, &mut v, y.as_mut_ptr(), 3), SosStatus::Buffer);
        assert_eq!(sos_energy_evaluate(e, [0u8, 7].as_ptr(), 2, &mut v), SosStatus::InvalidInput);
        assert_eq!(sos_energy_set_unary(e, 5, 0.0, 0.0), SosStatus::InvalidInput);
        let members = [0usize, 0];
        let table = [0.0; 4];
        let s = sos_energy_add_clique(e, members.as_ptr(), 2, table.as_ptr(), 4, ptr::null_mut());
        assert_eq!(s, SosStatus::InvalidInput);
        sos_energy_free(e);
        sos_energy_free(ptr::null_mut());
    }
}

#[test]
fn error_messages_are_per_thread() {
    unsafe {
        assert_eq!(sos_energy_new(1, ptr::null_mut()), SosStatus::NullPointer);
        let other = std::thread::spawn(last_error).join().unwrap();
        assert!(other.is_empty());
        assert!(!last_error().is_empty());
    }
}

#[test]
fn model_inspection() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(sos_model_load(golden("denoise_model.txt").as_ptr(), &mut m), SosStatus::Ok, "{}", last_error());
        let mut task = SosTask::Segment;
        assert_eq!(sos_model_task(m, &mut task), SosStatus::Ok);
        assert_eq!(task, SosTask::Denoise);
        let mut dim = 0;
        assert_eq!(sos_model_dim(m, &mut dim), SosStatus::Ok);
        let mut w = vec![0.0; dim];
        assert_eq!(sos_model_weights(m, w.as_mut_ptr(), dim), SosStatus::Ok);
        assert!(w.iter().any(|&x| x != 0.0));
        assert_eq!(sos_model_weights(m, w.as_mut_ptr(), dim + 1), SosStatus::Buffer);

        let mut hash = [0 as std::ffi::c_char; 65];
        assert_eq!(sos_model_schema_hash(m, hash.as_mut_ptr(), 65), SosStatus::Ok);
        assert_eq!(CStr::from_ptr(hash.as_ptr()).to_bytes().len(), 64);
        assert_eq!(sos_model_schema_hash(m, hash.as_mut_ptr(), 64), SosStatus::Buffer);
        sos_model_free(m);

        let missing = CString::new("/nonexistent/model.txt").unwrap();
        assert_eq!(sos_model_load(missing.as_ptr(), &mut m), SosStatus::Io);
        let junk = CString::new("not a model").unwrap();
        assert_eq!(sos_model_parse(junk.as_ptr(), &mut m), SosStatus::Parse);
    }
}

#[test]
fn model_prediction() {
    unsafe {
        let (w, h) = (12usize, 10usize);
        // Left half dark, right half bright.
        let pixels: Vec<f64> = (0..w * h).map(|i| if i % w < w / 2 { 0.05 } else { 0.95 }).collect();

        let mut d = ptr::null_mut();
        assert_eq!(sos_model_load(golden("denoise_model.txt").as_ptr(), &mut d), SosStatus::Ok);
        let mut mask = vec![9u8; w * h];
        let s = sos_model_predict(d, w, h, 1, pixels.as_ptr(), ptr::null(), mask.as_mut_ptr());
        assert_eq!(s, SosStatus::Ok, "{}", last_error());
        assert!(mask.iter().all(|&b| b <= 1));
        assert_ne!(mask[0], mask[w - 1]);
        let s = sos_model_predict(d, w, h, 2, pixels.as_ptr(), ptr::null(), mask.as_mut_ptr());
        assert_eq!(s, SosStatus::InvalidInput);
        sos_model_free(d);

        let mut m = ptr::null_mut();
        assert_eq!(sos_model_load(golden("segment_model.txt").as_ptr(), &mut m), SosStatus::Ok, "{}", last_error());
        let rgb: Vec<f64> = pixels.iter().flat_map(|&v| [v, v, v]).collect();
        let s = sos_model_predict(m, w, h, 3, rgb.as_ptr(), ptr::null(), mask.as_mut_ptr());
        assert_eq!(s, SosStatus::InvalidInput, "segmentation needs scribbles");
        let mut scribbles = vec![255u8; w * h];
        scribbles[h / 2 * w + 1] = 0;
        scribbles[h / 2 * w + w - 2] = 1;
        let s = sos_model_predict(m, w, h, 3, rgb.as_ptr(), scribbles.as_ptr(), mask.as_mut_ptr());
        assert_eq!(s, SosStatus::Ok, "{}", last_error());
        assert_eq!(mask[h / 2 * w + 1], 0);
        assert_eq!(mask[h / 2 * w + w - 2], 1);
        sos_model_free(m);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(sos_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
