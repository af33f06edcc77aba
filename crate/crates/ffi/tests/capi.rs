use std::ffi::{c_char, CStr, CString};
use std::ptr;
use zigzag_dirac_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { zz_last_error_message(buf.as_mut_ptr(), buf.len()) };
    if n == 0 {
        return String::new();
    }
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn cube(cells: usize) -> *mut ZzDomain {
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { zz_domain_unit_cube(cells, &mut d) }, ZzStatus::Ok);
    d
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(zz_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn cube_counts_and_operator_shape() {
    let d = cube(4);
    let (mut all, mut interior) = (0, 0);
    assert_eq!(unsafe { zz_domain_counts(d, &mut all, &mut interior) }, ZzStatus::Ok);
    assert_eq!((all, interior), (27, 1));
    let mut op = ptr::null_mut();
    assert_eq!(unsafe { zz_operator_assemble(d, 1.0, ZzVariant::ZigzagA, &mut op) }, ZzStatus::Ok);
    let mut dim = 0;
    assert_eq!(unsafe { zz_operator_shape(op, &mut dim, ptr::null_mut()) }, ZzStatus::Ok);
    assert_eq!(dim, 2 * 27 + 2);
    unsafe {
        zz_operator_free(op);
        zz_domain_free(d);
    }
}

#[test]
fn mass_term_acts_on_the_diagonal() {
    // An upper unit vector keeps m on its own entry; the stencil only feeds
    // the lower block.
    let d = cube(4);
    let mut op = ptr::null_mut();
    unsafe { zz_operator_assemble(d, 2.5, ZzVariant::ZigzagA, &mut op) };
    let mut dim = 0;
    unsafe { zz_operator_shape(op, &mut dim, ptr::null_mut()) };
    let mut x = vec![0.0; 2 * dim];
    x[0] = 1.0;
    let mut y = vec![f64::NAN; 2 * dim];
    assert_eq!(unsafe { zz_operator_apply(op, x.as_ptr(), y.as_mut_ptr(), y.len()) }, ZzStatus::Ok);
    assert_eq!(y[0], 2.5);
    assert_eq!(y[1], 0.0);
    assert_eq!(unsafe { zz_operator_apply(op, x.as_ptr(), y.as_mut_ptr(), 3) }, ZzStatus::InvalidInput);
    assert!(last_error().contains("buffer length"));
    unsafe {
        zz_operator_free(op);
        zz_domain_free(d);
    }
}

#[test]
fn dense_eigenvalues_and_buffer_contract() {
    let d = cube(4);
    let mut op = ptr::null_mut();
    unsafe { zz_operator_assemble(d, 1.0, ZzVariant::ZigzagA, &mut op) };
    let mut written = 0;
    let status = unsafe { zz_operator_dense_eigenvalues(op, 4096, ptr::null_mut(), 0, &mut written) };
    assert_eq!(status, ZzStatus::BufferTooSmall);
    assert_eq!(written, 56);
    let mut values = vec![0.0; written];
    let status = unsafe { zz_operator_dense_eigenvalues(op, 4096, values.as_mut_ptr(), values.len(), &mut written) };
    assert_eq!(status, ZzStatus::Ok);
    assert!(values.windows(2).all(|w| w[0] <= w[1]));
    // The kernel of SS* at the mass has dimension 2|B| = 52.
    assert_eq!(values.iter().filter(|e| (*e - 1.0).abs() < 1e-10).count(), 52);
    unsafe {
        zz_operator_free(op);
        zz_domain_free(d);
    }
}

#[test]
fn theorem_report_round_trips_as_json() {
    let d = cube(6);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { zz_verify_theorem(d, 1.0, 4, &mut json) }, ZzStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    assert!(text.contains("theorem.exact_map"));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["checks"].as_array().unwrap().len() >= 5);
    unsafe {
        zz_string_free(json);
        zz_domain_free(d);
    }
}

#[test]
fn voxelize_from_json_with_box() {
    let spec = CString::new(r#"{"kind":"ball","center":[0.0,0.0,0.0],"radius":1.0}"#).unwrap();
    let mut d = ptr::null_mut();
    let status = unsafe { zz_domain_voxelize(spec.as_ptr(), 0.5, ptr::null(), ptr::null(), &mut d) };
    assert_eq!(status, ZzStatus::Ok);
    let mut all = 0;
    unsafe { zz_domain_counts(d, &mut all, ptr::null_mut()) };
    // Every point of {-0.5, 0, 0.5}³ lies within √0.75 < 1 of the centre.
    assert_eq!(all, 27);
    unsafe { zz_domain_free(d) };

    let ext = CString::new(r#"{"kind":"complement","of":{"kind":"ball","center":[0.0,0.0,0.0],"radius":1.0}}"#).unwrap();
    let status = unsafe { zz_domain_voxelize(ext.as_ptr(), 0.5, ptr::null(), ptr::null(), &mut d) };
    assert_eq!(status, ZzStatus::InvalidInput);
    assert!(last_error().contains("unbounded"));
    let (lo, hi) = ([-2.0; 3], [2.0; 3]);
    let status = unsafe { zz_domain_voxelize(ext.as_ptr(), 0.5, lo.as_ptr(), hi.as_ptr(), &mut d) };
    assert_eq!(status, ZzStatus::Ok);
    unsafe { zz_domain_free(d) };
}

#[test]
fn errors_are_reported_not_raised() {
    let mut d = ptr::null_mut();
    let bad = CString::new("{not json").unwrap();
    assert_eq!(unsafe { zz_domain_voxelize(bad.as_ptr(), 0.5, ptr::null(), ptr::null(), &mut d) }, ZzStatus::InvalidInput);
    assert!(last_error().starts_with("domain spec"));
    assert_eq!(unsafe { zz_domain_voxelize(ptr::null(), 0.5, ptr::null(), ptr::null(), &mut d) }, ZzStatus::NullPointer);
    assert_eq!(unsafe { zz_domain_unit_cube(0, &mut d) }, ZzStatus::InvalidInput);
    assert_eq!(unsafe { zz_domain_counts(ptr::null(), ptr::null_mut(), ptr::null_mut()) }, ZzStatus::NullPointer);
    // A cube with two cells per side has no interior node.
    let d = cube(2);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { zz_verify_theorem(d, 1.0, 2, &mut json) }, ZzStatus::InvalidInput);
    assert!(json.is_null());
    unsafe { zz_domain_free(d) };
    // Success clears the message.
    let d = cube(4);
    assert_eq!(unsafe { zz_domain_counts(d, ptr::null_mut(), ptr::null_mut()) }, ZzStatus::Ok);
    assert_eq!(last_error(), "");
    unsafe {
        zz_domain_free(d);
        zz_domain_free(ptr::null_mut());
        zz_operator_free(ptr::null_mut());
        zz_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/zigzag_dirac.h")).unwrap();
    for name in [
        "zz_version",
        "zz_last_error_message",
        "zz_domain_voxelize",
        "zz_domain_unit_cube",
        "zz_domain_counts",
        "zz_domain_free",
        "zz_operator_assemble",
        "zz_operator_shape",
        "zz_operator_apply",
        "zz_operator_dense_eigenvalues",
        "zz_operator_free",
        "zz_verify_theorem",
        "zz_string_free",
        "typedef struct ZzDomain ZzDomain",
        "ZZ_STATUS_NO_CONVERGENCE = 3",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
