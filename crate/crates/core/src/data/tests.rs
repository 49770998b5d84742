use std::f64::consts::PI;

use super::*;
use crate::pde::{Field, Grid2D, HeatConfig};
use crate::rng::stream;

fn heat_grid() -> Grid2D {
    Grid2D::heat(28).unwrap()
}

#[test]
fn rectangle_profile_runs_from_two_to_four() {
    let g = heat_grid();
    let spec = PriorSpec::rectangular();
    // Edges just inside node columns 7 and 20 so both are rasterized.
    let xi = [7.0 / 27.0 - 1e-9, 0.7, 20.0 / 27.0 + 1e-9, 0.3];
    let f = spec.rasterize(&xi, &g).unwrap();
    assert!((f.at(14, 7) - 2.0).abs() < 1e-6);
    assert!((f.at(14, 20) - 4.0).abs() < 1e-6);
    assert_eq!(f.at(14, 6), 0.0);
    assert_eq!(f.at(14, 21), 0.0);
    assert_eq!(f.at(3, 10), 0.0);
}

#[test]
fn rectangle_matches_per_pixel_formula() {
    let g = heat_grid();
    let xi = [0.3, 0.7, 0.7, 0.3];
    let f = PriorSpec::rectangular().rasterize(&xi, &g).unwrap();
    let l = 2.0 * PI;
    let (x1, x2, x3, x4) = (0.3 * l, 0.7 * l, 0.7 * l, 0.3 * l);
    for i in 0..28 {
        for j in 0..28 {
            let (s1, s2) = (j as f64 * l / 27.0, i as f64 * l / 27.0);
            let oracle = if s1 >= x1 && s1 <= x3 && s2 >= x4 && s2 <= x2 {
                2.0 + 2.0 * (s1 - x1) / (x3 - x1)
            } else {
                0.0
            };
            assert!((f.at(i, j) - oracle).abs() < 1e-12, "node ({i}, {j})");
        }
    }
}

#[test]
fn unit_contrast_circle_is_invisible() {
    let g = Grid2D::unit(64).unwrap();
    let f = PriorSpec::circular().rasterize(&[0.5, 0.5, 0.2, 1.0], &g).unwrap();
    assert!(f.values.iter().all(|&v| v == 1.0));
}

#[test]
fn circle_fields_take_two_values() {
    let g = Grid2D::unit(32).unwrap();
    let mut rng = stream(3, "circle", 0);
    for _ in 0..50 {
        let p = PriorSpec::circular().draw_params(&mut rng).unwrap();
        let f = PriorSpec::circular().rasterize(&p, &g).unwrap();
        let mut vals: Vec<f64> = f.values.clone();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        assert!(vals.len() <= 2 && vals.contains(&1.0), "{vals:?}");
        if vals.len() == 2 {
            assert_eq!(vals[1], p[3]);
        }
    }
}

#[test]
fn rectangle_parameter_coverage() {
    let spec = PriorSpec::rectangular();
    let mut rng = stream(5, "coverage", 0);
    let mut lo = [f64::INFINITY; 4];
    let mut hi = [f64::NEG_INFINITY; 4];
    for _ in 0..10_000 {
        let p = spec.draw_params(&mut rng).unwrap();
        for k in 0..4 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let bounds = [[0.2, 0.4], [0.6, 0.8], [0.6, 0.8], [0.2, 0.4]];
    for k in 0..4 {
        let w = bounds[k][1] - bounds[k][0];
        assert!(lo[k] >= bounds[k][0] && hi[k] <= bounds[k][1]);
        assert!(lo[k] - bounds[k][0] < 0.01 * w && bounds[k][1] - hi[k] < 0.01 * w, "xi{}: [{}, {}]", k + 1, lo[k], hi[k]);
    }
}

#[test]
fn ood_priors_rasterize() {
    let g = Grid2D::unit(32).unwrap();
    let ell = PriorSpec::Ellipse {
        center: [0.5, 0.5],
        semi_axis: [0.1, 0.3],
        contrast: [5.0, 5.0],
        background: 1.0,
    };
    let f = ell.rasterize(&[0.5, 0.5, 0.3, 0.1, 0.0, 5.0], &g).unwrap();
    // Long axis along s1.
    assert_eq!(f.at(16, 24), 5.0);
    assert_eq!(f.at(24, 16), 1.0);
    let two = PriorSpec::TwoCircles {
        center: [0.0, 1.0],
        radius: [0.05, 0.2],
        contrast: [2.0, 10.0],
        background: 1.0,
    };
    let f = two.rasterize(&[0.25, 0.25, 0.1, 3.0, 0.75, 0.75, 0.1, 7.0], &g).unwrap();
    assert_eq!(f.at(8, 8), 3.0);
    assert_eq!(f.at(23, 23), 7.0);
    assert_eq!(f.at(0, 31), 1.0);
    assert!(two.rasterize(&[0.0; 4], &g).is_err());
}

#[test]
fn prior_validation() {
    let bad = PriorSpec::Rectangular {
        xi1: [0.4, 0.2],
        xi2: [0.6, 0.8],
        xi3: [0.6, 0.8],
        xi4: [0.2, 0.4],
    };
    assert!(bad.validate().is_err());
    let bad = PriorSpec::CircularInclusion {
        center: [0.0, 1.0],
        radius: [0.05, 0.3],
        contrast: [0.0, 2.0],
        background: 1.0,
    };
    assert!(bad.validate().is_err());
}

#[test]
fn prior_spec_toml_defaults() {
    let s: PriorSpec = toml::from_str("kind = \"circular_inclusion\"").unwrap();
    assert_eq!(s, PriorSpec::circular());
    let s: PriorSpec = toml::from_str("kind = \"rectangular\"\nxi1 = [0.2, 0.4]").unwrap();
    assert_eq!(s, PriorSpec::rectangular());
    assert!(toml::from_str::<PriorSpec>("kind = \"rectangular\"\nxi9 = [0.2, 0.4]").is_err());
}

#[test]
fn zero_noise_is_identity() {
    let g = heat_grid();
    let clean = g.sample(|s| s[0] * s[1]);
    assert_eq!(add_noise(&clean, 0.0, &mut stream(0, "n", 0)).unwrap(), clean);
    assert!(add_noise(&clean, -1.0, &mut stream(0, "n", 0)).is_err());
}

#[test]
fn noise_level_and_whiteness() {
    let g = Grid2D::new(4, 4, (0.0, 1.0), (0.0, 1.0)).unwrap();
    let clean = Field::zeros(g);
    let sigma = 0.7;
    let draws = 100_000;
    let mut sum = [0.0; 16];
    let mut sq = [0.0; 16];
    let (mut lag, mut lag_v, mut var) = (0.0, 0.0, 0.0);
    let mut rng = stream(1, "noise-test", 0);
    for _ in 0..draws {
        let y = add_noise(&clean, sigma, &mut rng).unwrap();
        for (k, v) in y.values.iter().enumerate() {
            sum[k] += v;
            sq[k] += v * v;
            var += v * v;
        }
        for i in 0..4 {
            for j in 0..3 {
                lag += y.at(i, j) * y.at(i, j + 1);
                lag_v += y.at(j, i) * y.at(j + 1, i);
            }
        }
    }
    let n = draws as f64;
    for k in 0..16 {
        let sd = (sq[k] / n - (sum[k] / n).powi(2)).sqrt();
        assert!((sd - sigma).abs() / sigma < 0.02, "node {k}: sd {sd}");
    }
    let per_pair = var / (16.0 * n);
    assert!((lag / (12.0 * n) / per_pair).abs() < 0.02);
    assert!((lag_v / (12.0 * n) / per_pair).abs() < 0.02);
}

#[test]
fn noise_spec_resolution() {
    assert_eq!(NoiseSpec::Sigma(1.0).resolve(5.0).unwrap(), 1.0);
    assert!((NoiseSpec::Variance(0.3).resolve(5.0).unwrap() - 0.3f64.sqrt()).abs() < 1e-15);
    assert!((NoiseSpec::FractionOfMax(0.025).resolve(8.0).unwrap() - 0.2).abs() < 1e-15);
    assert!(NoiseSpec::Sigma(-1.0).resolve(1.0).is_err());
    assert!(NoiseSpec::Variance(-1.0).resolve(1.0).is_err());
}

fn tiny_idx() -> ImageStack {
    ImageStack {
        count: 1,
        rows: 1,
        cols: 3,
        pixels: vec![0, 128, 255],
    }
}

#[test]
fn idx_roundtrip_is_exact() {
    let mut buf = Vec::new();
    write_idx(&mut buf, &tiny_idx()).unwrap();
    assert_eq!(&buf[..4], &[0, 0, 8, 3]);
    assert_eq!(read_idx(buf.as_slice()).unwrap(), tiny_idx());
}

#[test]
fn idx_errors_name_the_offset() {
    let mut buf = Vec::new();
    write_idx(&mut buf, &tiny_idx()).unwrap();
    let mut bad = buf.clone();
    bad[3] = 1;
    let e = read_idx(bad.as_slice()).unwrap_err();
    assert!(matches!(e, crate::Error::Format { offset: 0, .. }), "{e}");
    let e = read_idx(&buf[..9]).unwrap_err();
    assert!(matches!(e, crate::Error::Format { offset: 9, .. }), "{e}");
    let e = read_idx(&buf[..17]).unwrap_err();
    assert!(matches!(e, crate::Error::Format { offset: 17, .. }), "{e}");
    assert!(e.to_string().contains("byte offset 17"));
}

#[test]
fn pixel_levels_map_to_low_and_high() {
    let g = Grid2D::new(3, 2, (0.0, 1.0), (0.0, 1.0)).unwrap();
    let dark = image_to_field(&[0; 6], 2, 3, &g, 0.0, 4.0).unwrap();
    assert!(dark.values.iter().all(|&v| v == 0.0));
    let bright = image_to_field(&[255; 6], 2, 3, &g, 0.0, 4.0).unwrap();
    assert!(bright.values.iter().all(|&v| v == 4.0));
    // Top image row maps to the largest s2.
    let f = image_to_field(&[255, 0, 0, 0, 0, 0], 2, 3, &g, 0.0, 4.0).unwrap();
    assert_eq!(f.at(1, 0), 4.0);
    assert!(image_to_field(&[0; 6], 3, 2, &g, 0.0, 4.0).is_err());
}

#[test]
fn image_directory_and_pgm_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid2D::new(4, 3, (0.0, 1.0), (0.0, 1.0)).unwrap();
    let f = g.sample_nodes(|i, j| (i * 4 + j) as f64 * 4.0 / 11.0);
    write_pgm(&dir.path().join("a.pgm"), &f, 0.0, 4.0).unwrap();
    write_png(&dir.path().join("b.png"), &f, 0.0, 4.0).unwrap();
    let back = load_image_dataset(dir.path(), &g, 0.0, 4.0).unwrap();
    assert_eq!(back.len(), 2);
    for b in back {
        for (x, y) in b.values.iter().zip(&f.values) {
            assert!((x - y).abs() <= 2.0 / 255.0 + 1e-12);
        }
    }
}

#[test]
fn tensor_file_roundtrip_and_errors() {
    let t = crate::autograd::Tensor::<f32>::new(vec![2, 3], vec![1.0, -2.5, 3.0, f32::MIN_POSITIVE, 0.0, 7.0]).unwrap();
    let mut buf = Vec::new();
    write_tensor(&mut buf, t.shape(), t.data()).unwrap();
    assert_eq!(&buf[..4], TENSOR_MAGIC);
    assert_eq!(buf.len(), 4 + 4 + 8 + 24);
    let back = read_tensor(&mut OffsetReader::new(buf.as_slice())).unwrap();
    assert_eq!(back, t);
    let e = read_tensor(&mut OffsetReader::new(&buf[..30])).unwrap_err();
    assert!(matches!(e, crate::Error::Format { offset: 30, .. }), "{e}");
    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(read_tensor(&mut OffsetReader::new(bad.as_slice())).is_err());
}

fn random_pair(g: Grid2D, seed: u64) -> FieldPair {
    let mut rng = stream(seed, "pair", 0);
    let x = sample_prior(&PriorSpec::rectangular(), &g, &mut rng).unwrap();
    let clean_y = g.sample(|s| s[0].sin());
    let y = add_noise(&clean_y, 1.0, &mut rng).unwrap();
    FieldPair { x, y, clean_y }
}

fn manifest(g: Grid2D) -> DatasetManifest {
    DatasetManifest {
        format_version: DATASET_FORMAT_VERSION,
        count: 0,
        height: g.n2,
        width: g.n1,
        prior: PriorSpec::rectangular(),
        forward: ForwardSpec::Heat(HeatConfig::new(0.64)),
        noise: NoiseSpec::Sigma(1.0),
        noise_sigma: 1.0,
        seed: 0,
        skipped: vec![],
    }
}

#[test]
fn dataset_roundtrip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid2D::heat(8).unwrap();
    let pairs: Vec<FieldPair> = (0..5).map(|s| random_pair(g, s)).collect();
    let m = write_dataset(dir.path(), &pairs, manifest(g)).unwrap();
    assert_eq!(m.count, 5);
    let d = read_dataset(dir.path()).unwrap();
    assert_eq!(d.manifest, m);
    assert_eq!(d.pairs.len(), 5);
    for (k, p) in pairs.iter().enumerate() {
        let n = g.len();
        let slot = |t: &crate::autograd::Tensor<f32>| t.data()[k * n..(k + 1) * n].to_vec();
        let f32s = |f: &Field| f.values.iter().map(|&v| v as f32).collect::<Vec<_>>();
        assert_eq!(slot(d.pairs.x()), f32s(&p.x));
        assert_eq!(slot(d.pairs.y()), f32s(&p.y));
        assert_eq!(slot(&d.clean_y), f32s(&p.clean_y));
    }
}

#[test]
fn dataset_corruption_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid2D::heat(6).unwrap();
    let pairs: Vec<FieldPair> = (0..3).map(|s| random_pair(g, s)).collect();
    let m = write_dataset(dir.path(), &pairs, manifest(g)).unwrap();

    for count in [2, 4] {
        DatasetManifest { count, ..m.clone() }.save(dir.path()).unwrap();
        assert!(read_dataset(dir.path()).is_err(), "count {count} accepted");
    }
    DatasetManifest { format_version: 99, ..m.clone() }.save(dir.path()).unwrap();
    let e = read_dataset(dir.path()).unwrap_err();
    assert!(e.to_string().contains("version 99"), "{e}");

    m.save(dir.path()).unwrap();
    let rec = dir.path().join(RECORDS_FILE);
    let bytes = std::fs::read(&rec).unwrap();
    let per_record = bytes.len() / 3;
    std::fs::write(&rec, &bytes[..per_record + per_record / 2]).unwrap();
    match read_dataset(dir.path()).unwrap_err() {
        crate::Error::Record { index, .. } => assert_eq!(index, 1),
        e => panic!("unexpected {e}"),
    }
}

fn small_spec(samples: usize) -> DatasetSpec {
    DatasetSpec {
        prior: PriorSpec::rectangular(),
        forward: ForwardSpec::Heat(HeatConfig { steps: 10, ..HeatConfig::new(0.64) }),
        data: DataConfig {
            samples,
            grid: 12,
            noise: NoiseSpec::Sigma(1.0),
            seed: 42,
        },
    }
}

#[test]
fn building_twice_gives_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    build_dataset(&small_spec(2), a.path()).unwrap();
    build_dataset(&small_spec(2), b.path()).unwrap();
    for f in [MANIFEST_FILE, RECORDS_FILE] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
    let d = read_dataset(a.path()).unwrap();
    assert_eq!(d.pairs.dims(), [12, 12, 1, 1]);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let c = tempfile::tempdir().unwrap();
    pool.install(|| build_dataset(&small_spec(2), c.path())).unwrap();
    assert_eq!(std::fs::read(a.path().join(RECORDS_FILE)).unwrap(), std::fs::read(c.path().join(RECORDS_FILE)).unwrap());
}

#[test]
fn failed_solves_are_skipped_and_counted() {
    let dir = tempfile::tempdir().unwrap();
    let images = ImageStack {
        count: 3,
        rows: 5,
        cols: 5,
        pixels: [vec![255u8; 25], vec![0u8; 25], vec![128u8; 25]].concat(),
    };
    let idx = dir.path().join("images.idx");
    let mut f = std::fs::File::create(&idx).unwrap();
    write_idx(&mut f, &images).unwrap();
    let spec = DatasetSpec {
        // Zero pixels become zero conductivity, which the solver rejects.
        prior: PriorSpec::ImageDirectory { path: idx, low: 0.0, high: 4.0 },
        forward: ForwardSpec::Conduction { source: 10.0 },
        data: DataConfig {
            samples: 3,
            grid: 5,
            noise: NoiseSpec::FractionOfMax(0.025),
            seed: 0,
        },
    };
    let out = dir.path().join("ds");
    let m = build_dataset(&spec, &out).unwrap();
    assert_eq!(m.count, 2);
    assert_eq!(m.skipped, vec![1]);
    let d = read_dataset(&out).unwrap();
    let max = d.clean_y.data().iter().fold(0.0f32, |a, &b| a.max(b)) as f64;
    assert!((m.noise_sigma - 0.025 * max).abs() < 1e-6 * max);
}

#[test]
fn circle_dataset_inputs_are_two_valued() {
    let dir = tempfile::tempdir().unwrap();
    let spec = DatasetSpec {
        prior: PriorSpec::circular(),
        forward: ForwardSpec::Conduction { source: 10.0 },
        data: DataConfig {
            samples: 6,
            grid: 16,
            noise: NoiseSpec::FractionOfMax(0.025),
            seed: 1,
        },
    };
    build_dataset(&spec, dir.path()).unwrap();
    let d = read_dataset(dir.path()).unwrap();
    for k in 0..6 {
        let mut v: Vec<f32> = d.pairs.x().data()[k * 256..(k + 1) * 256].to_vec();
        v.sort_by(f32::total_cmp);
        v.dedup();
        assert!(v.len() <= 2 && v[0] == 1.0, "{v:?}");
    }
}
