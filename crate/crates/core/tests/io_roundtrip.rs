use std::fs;

use sni::domain::{Domain, DomainMask};
use sni::field::{DepthMap, GradientField};
use sni::io::{self, StatsRow};
use sni::poisson::laplacian_matrix;
use sni::sparse::read_coo;

fn disc() -> Domain {
    Domain::new(DomainMask::from_fn(13, 9, |x, y| (x as f64 - 6.0).hypot(y as f64 - 4.0) < 4.5).unwrap()).unwrap()
}

#[test]
fn gradient_file_round_trip_keeps_mask() {
    let dir = tempfile::tempdir().unwrap();
    let d = disc();
    let g = GradientField {
        p: (0..d.len()).map(|k| k as f64 * 0.25).collect(),
        q: (0..d.len()).map(|k| -(k as f64) * 0.5).collect(),
    };
    let path = dir.path().join("g.gf");
    io::save_gradient(&path, &d, &g).unwrap();
    let header = fs::read(&path).unwrap();
    assert!(header.starts_with(b"Gf\n13 9\n"));
    let (d2, g2) = io::load_gradient::<f64>(&path, None).unwrap();
    assert_eq!(d2.mask(), d.mask());
    assert_eq!(g2, g);
}

#[test]
fn explicit_mask_overrides_finite_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let full = Domain::full(5, 4).unwrap();
    let g = GradientField { p: vec![1.0; 20], q: vec![2.0; 20] };
    let gpath = dir.path().join("g.gf");
    io::save_gradient(&gpath, &full, &g).unwrap();
    let mask = DomainMask::from_fn(5, 4, |x, _| x < 3).unwrap();
    let mpath = dir.path().join("m.png");
    io::save_mask(&mpath, &mask).unwrap();
    let (d, g2) = io::load_gradient::<f64>(&gpath, Some(io::load_mask(&mpath).unwrap())).unwrap();
    assert_eq!(d.len(), 12);
    assert!(g2.p.iter().all(|&v| v == 1.0));
}

#[test]
fn depth_round_trip_in_f32() {
    let dir = tempfile::tempdir().unwrap();
    let d = disc();
    let depth = DepthMap::new((0..d.len()).map(|k| (k as f32).sqrt()).collect::<Vec<f32>>());
    let path = dir.path().join("z.pfm");
    io::save_depth(&path, &d, &depth).unwrap();
    assert_eq!(io::load_depth::<f32>(&path, &d).unwrap(), depth);
}

#[test]
fn pgm_masks_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.pgm");
    fs::write(&path, b"P2\n3 2\n255\n0 128 255\n127 200 0\n").unwrap();
    let m = io::load_mask(&path).unwrap();
    assert_eq!(m.cells(), &[false, true, true, false, true, false]);
}

#[test]
fn lightings_round_trip() {
    let lights = vec![[0.5, 0.0, 0.866], [0.0, -0.5, 0.866], [-0.25, 0.25, 1.0]];
    assert_eq!(io::parse_lightings(&io::format_lightings(&lights)).unwrap(), lights);
    assert!(io::parse_lightings("1 2\n").is_err());
    assert!(io::parse_lightings("0 0 0\n").is_err());
}

#[test]
fn coo_export_round_trip() {
    let a = laplacian_matrix(&disc()).map(|v| v as f64);
    let mut buf = Vec::new();
    a.write_coo(&mut buf).unwrap();
    let b = read_coo(&String::from_utf8(buf).unwrap(), a.nrows()).unwrap();
    assert_eq!(a.to_dense(), b.to_dense());
}

#[test]
fn stats_csv_round_trip() {
    let rows = vec![
        StatsRow { size: 65536, preconditioner: "none".into(), tau: 0.0, alpha: 0.0, iterations: 322, seconds: 0.4, final_residual: 9.7e-5 },
        StatsRow { size: 65536, preconditioner: "mic(0.001,0.001)".into(), tau: 1e-3, alpha: 1e-3, iterations: 10, seconds: 0.1, final_residual: 5e-5 },
    ];
    let mut buf = Vec::new();
    io::write_csv(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("size,preconditioner,tau,alpha,iterations,seconds,final_residual\n"));
    assert_eq!(io::read_csv::<_, StatsRow>(buf.as_slice()).unwrap(), rows);
}

#[test]
fn error_map_paints_outside_white() {
    let dir = tempfile::tempdir().unwrap();
    let d = disc();
    let errors: Vec<f64> = (0..d.len()).map(|k| k as f64 / d.len() as f64).collect();
    let path = dir.path().join("e.png");
    io::save_error_map(&path, &d, &errors, 1.0).unwrap();
    let img = image::open(&path).unwrap().to_rgb8();
    assert_eq!(img.get_pixel(0, 0).0, [255, 255, 255]);
    let (x, y) = d.pixel_of(0);
    assert_eq!(img.get_pixel(x as u32, y as u32).0, [0, 0, 255]);
}
