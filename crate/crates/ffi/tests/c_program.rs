//! Compiles a C program against the generated header and links the static library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "blochsum.h"

int main(void) {
    BsPotential *pot = NULL;
    int64_t freq[1] = {1};
    double amp[1] = {2.0};
    if (bs_potential_trig(1, freq, amp, NULL, 1, 3.0, &pot) != BS_STATUS_OK) return 10;

    double k = 0.0;
    BsSpectrum *spec = NULL;
    if (bs_spectrum_compute(pot, 16, &k, 3, &spec) != BS_STATUS_OK) return 11;
    double e[3];
    if (bs_spectrum_eigenvalues(spec, e, 3) != BS_STATUS_OK) return 12;

    BsMomentum *pi = NULL;
    if (bs_momentum_compute(spec, 0, &pi) != BS_STATUS_OK) return 13;
    double re, im;
    if (bs_momentum_entry(pi, 1, 2, &re, &im) != BS_STATUS_OK) return 14;

    if (bs_spectrum_compute(NULL, 16, &k, 3, &spec) != BS_STATUS_NULL_POINTER) return 15;
    if (bs_last_error() == NULL || strstr(bs_last_error(), "potential") == NULL) return 16;

    printf("%.17g %.17g %.17g %.17g\n", e[0], e[1], re * re + im * im, bs_version()[0] == '0' ? 1.0 : 0.0);
    bs_momentum_free(pi);
    bs_spectrum_free(spec);
    bs_potential_free(pot);
    return 0;
}
"#;

fn deps_dir() -> PathBuf {
    std::env::current_exe().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let lib = deps_dir().join("libblochsum_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("main.c");
    let exe = tmp.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl"])
        .status()
        .expect("C compiler");
    assert!(status.success());

    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let fields: Vec<f64> = String::from_utf8(out.stdout)
        .unwrap()
        .split_whitespace()
        .map(|x| x.parse().unwrap())
        .collect();

    let v = blochsum::build_potential(&blochsum::PotentialSpec::cosines_1d(&[(1, 2.0)], 3.0)).unwrap();
    let s = blochsum::fiber_spectrum(&v, &blochsum::build_basis(1, 16).unwrap(), &[0.0], Some(3)).unwrap();
    let pi = blochsum::momentum_matrix(&s, 0).unwrap();
    assert_eq!(fields[0], s.eigenvalue(1));
    assert_eq!(fields[1], s.eigenvalue(2));
    assert!((fields[2] - pi.entry(1, 2).norm_sqr()).abs() < 1e-12);
    assert_eq!(fields[3], 1.0);
}
