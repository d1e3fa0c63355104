use std::ffi::{CStr, CString};
use std::ptr;

use softspace_ffi::*;

fn last_error() -> String {
    let p = ss_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// Two disciplines favour tools {0,1}, two favour {2,3}.
fn two_cluster_matrix() -> *mut SsCountMatrix {
    #[rustfmt::skip]
    let counts: [u64; 16] = [
        9, 8, 1, 1,
        8, 9, 1, 1,
        1, 1, 9, 8,
        1, 1, 8, 9,
    ];
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ss_count_matrix_new(counts.as_ptr(), 4, 4, ptr::null(), ptr::null(), &mut m) }, SsStatus::Ok);
    m
}

#[test]
fn rca_to_backbone_round_trip() {
    unsafe {
        let m = two_cluster_matrix();
        let mut r = ptr::null_mut();
        assert_eq!(ss_rca_compute(m, &mut r), SsStatus::Ok);
        let mut v = 0.0;
        assert_eq!(ss_rca_value(r, 0, 0, &mut v), SsStatus::Ok);
        // Row share 9/19 over column share 19/76.
        assert!((v - (9.0 / 19.0) / (19.0 / 76.0)).abs() < 1e-12);
        assert_eq!(ss_rca_value(r, 4, 0, &mut v), SsStatus::OutOfRange);

        let mut net = ptr::null_mut();
        assert_eq!(ss_proximity_network(r, 1.0, false, &mut net), SsStatus::Ok);
        let (mut n, mut e) = (0, 0);
        assert_eq!(ss_network_size(net, &mut n, &mut e), SsStatus::Ok);
        assert_eq!((n, e), (4, 2));
        let mut edge = SsEdge::default();
        assert_eq!(ss_network_edge(net, 0, &mut edge), SsStatus::Ok);
        assert_eq!((edge.source, edge.target, edge.weight), (0, 1, 1.0));

        let mut bb = ptr::null_mut();
        assert_eq!(ss_backbone_extract(net, 0.05, true, &mut bb), SsStatus::Ok);
        let mut len = 0;
        assert_eq!(ss_backbone_len(bb, &mut len), SsStatus::Ok);
        assert_eq!(len, 2);
        let mut be = SsBackboneEdge {
            source: 0,
            target: 0,
            weight: 0.0,
            significance: 0.0,
            origin: SsOrigin::Filter,
        };
        assert_eq!(ss_backbone_edge(bb, 1, &mut be), SsStatus::Ok);
        // Isolated pairs are degree-1 on both ends, so only the MST keeps them.
        assert_eq!(be.origin, SsOrigin::Mst);
        assert_eq!(be.significance, 1.0);

        ss_backbone_free(bb);
        ss_network_free(net);
        ss_rca_free(r);
        ss_count_matrix_free(m);
    }
}

#[test]
fn named_matrix_rejects_duplicates() {
    let names: Vec<CString> = ["a", "a"].iter().map(|s| CString::new(*s).unwrap()).collect();
    let ptrs: Vec<_> = names.iter().map(|s| s.as_ptr()).collect();
    let counts = [1u64, 2];
    let mut m = ptr::null_mut();
    let st = unsafe { ss_count_matrix_new(counts.as_ptr(), 2, 1, ptrs.as_ptr(), ptr::null(), &mut m) };
    assert_eq!(st, SsStatus::InvalidArgument);
    assert!(m.is_null());
    assert!(last_error().contains("row"));
}

#[test]
fn sbm_separates_two_cliques() {
    let mut edges = Vec::new();
    for base in [0usize, 6] {
        for i in 0..6 {
            for j in (i + 1)..6 {
                edges.push(SsEdge {
                    source: base + i,
                    target: base + j,
                    weight: 1.0,
                });
            }
        }
    }
    edges.push(SsEdge {
        source: 5,
        target: 6,
        weight: 1.0,
    });
    unsafe {
        let mut net = ptr::null_mut();
        assert_eq!(ss_network_new(12, edges.as_ptr(), edges.len(), &mut net), SsStatus::Ok);
        let mut c = ptr::null_mut();
        assert_eq!(ss_sbm_fit(net, 3, 4, &mut c), SsStatus::Ok);
        let (mut b, mut dl) = (0, 0.0);
        assert_eq!(ss_communities_summary(c, &mut b, &mut dl), SsStatus::Ok);
        assert!(dl.is_finite() && dl > 0.0);
        let mut labels = [0usize; 12];
        assert_eq!(ss_communities_labels(c, labels.as_mut_ptr(), 11), SsStatus::InvalidArgument);
        assert_eq!(ss_communities_labels(c, labels.as_mut_ptr(), 12), SsStatus::Ok);
        assert_eq!(b, 2, "labels {labels:?}");
        assert!(labels[..6].iter().all(|&l| l == labels[0]));
        assert!(labels[6..].iter().all(|&l| l == labels[6]));
        assert_ne!(labels[0], labels[6]);
        assert_eq!(ss_sbm_fit(net, 3, 0, &mut c), SsStatus::InvalidArgument);
        ss_communities_free(c);
        ss_network_free(net);
    }
}

#[test]
fn scalar_measures() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(ss_hhi([1u64, 1, 2].as_ptr(), 3, &mut v), SsStatus::Ok);
        assert!((v - 0.375).abs() < 1e-15);
        assert_eq!(ss_hhi(ptr::null(), 0, &mut v), SsStatus::Ok);
        assert!(v.is_nan());
        assert_eq!(ss_jaccard([1u64, 2, 3].as_ptr(), 3, [2u64, 3, 4, 4].as_ptr(), 4, &mut v), SsStatus::Ok);
        assert!((v - 0.5).abs() < 1e-15);
        assert_eq!(ss_jaccard(ptr::null(), 0, ptr::null(), 0, &mut v), SsStatus::Ok);
        assert!(v.is_nan());
        assert_eq!(ss_jaccard(ptr::null(), 2, ptr::null(), 0, &mut v), SsStatus::NullPointer);
    }
}

#[test]
fn power_law_fit_matches_core() {
    let data: Vec<u64> = (1..=400u64).map(|k| 1 + 4000 / (k * k)).collect();
    let mut fit = SsPowerLawFit::default();
    assert_eq!(unsafe { ss_power_law_fit(data.as_ptr(), data.len(), 2, &mut fit) }, SsStatus::Ok);
    let core = softspace::scalefit::fit_power_law(&data, Some(2), &Default::default()).unwrap();
    assert_eq!(fit.alpha, core.alpha);
    assert_eq!(fit.x_min, 2);
    assert_eq!(fit.n_tail, core.n_tail);
    let st = unsafe { ss_power_law_fit(data.as_ptr(), data.len(), 1_000_000, &mut fit) };
    assert_ne!(st, SsStatus::Ok);
    assert!(!last_error().is_empty());
}

#[test]
fn null_handles_are_reported() {
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { ss_rca_compute(ptr::null(), &mut r) }, SsStatus::NullPointer);
    assert!(last_error().contains("matrix"));
    let m = two_cluster_matrix();
    assert_eq!(unsafe { ss_rca_compute(m, ptr::null_mut()) }, SsStatus::NullPointer);
    assert!(ss_last_error_message().is_null() || !last_error().is_empty());
    unsafe {
        ss_count_matrix_free(m);
        ss_network_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/softspace.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["ss_rca_compute", "ss_sbm_fit", "ss_power_law_fit", "ss_last_error_message", "ss_communities_free"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler, syntax check skipped");
        return;
    };
    assert!(status.success());
}
