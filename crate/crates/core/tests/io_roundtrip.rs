mod common;

use common::{planted_dynamics, Block};
use faer::Mat;
use nirom::io::{self, ModelFile};
use nirom::{DmdModel, Error, NiromInterpolant, RbfLayout, SketchConfig, SnapshotMatrix, SvdMethod};
use proptest::prelude::*;

fn model_file(layout: Option<RbfLayout>) -> ModelFile {
    let blocks = [Block::Real(0.97), Block::Pair(0.95, 0.3), Block::Real(0.6)];
    let p = planted_dynamics(12, 9, &blocks, 51);
    let v = SnapshotMatrix::new(p.snapshots, 0.5, 4, 3, "u").unwrap();
    let model = DmdModel::fit(&v, SvdMethod::Randomized(SketchConfig::new(4, 2))).unwrap().model;
    let interpolant = layout.map(|l| NiromInterpolant::fit(&model, l).unwrap());
    ModelFile { model, interpolant, nx: 4, ny: 3, field: "u".into() }
}

#[test]
fn model_round_trips_bit_exact() {
    for layout in [None, Some(RbfLayout::Joint), Some(RbfLayout::PerMode)] {
        let file = model_file(layout);
        let bytes = io::encode_model(&file).unwrap();
        let back = io::decode_model(&bytes).unwrap();
        assert_eq!(back, file);
        assert_eq!(io::encode_model(&back).unwrap(), bytes);
    }
}

#[test]
fn every_truncation_is_a_format_error() {
    let bytes = io::encode_model(&model_file(Some(RbfLayout::Joint))).unwrap();
    for len in 0..bytes.len() {
        assert!(matches!(io::decode_model(&bytes[..len]), Err(Error::Format { .. })), "prefix {len}");
    }
    let snap = SnapshotMatrix::ungridded(Mat::from_fn(3, 2, |i, j| (i + j) as f64), 1.0, "h").unwrap();
    let bytes = io::encode_snapshots(&snap).unwrap();
    for len in 0..bytes.len() {
        assert!(matches!(io::decode_snapshots(&bytes[..len]), Err(Error::Format { .. })), "prefix {len}");
    }
}

#[test]
fn files_are_written_atomically_and_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.nirom");
    let file = model_file(Some(RbfLayout::PerMode));
    io::write_model(&path, &file).unwrap();
    assert_eq!(io::read_model(&path).unwrap(), file);
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1);
}

fn snapshot_strategy() -> impl Strategy<Value = SnapshotMatrix> {
    (1usize..6, 1usize..6, 1usize..8, 1e-6f64..1e4, "[a-z]{0,12}").prop_flat_map(|(nx, ny, cols, dt, name)| {
        prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL, nx * ny * cols)
            .prop_map(move |vals| {
                let data = Mat::from_fn(nx * ny, cols, |i, j| vals[i * cols + j]);
                SnapshotMatrix::new(data, dt, nx, ny, name.clone()).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn snapshots_round_trip(s in snapshot_strategy()) {
        let bytes = io::encode_snapshots(&s).unwrap();
        prop_assert_eq!(bytes.len(), 7 + 40 + 2 + s.field().len() + 8 * s.rows() * s.cols());
        let back = io::decode_snapshots(&bytes).unwrap();
        for i in 0..s.rows() {
            for j in 0..s.cols() {
                prop_assert_eq!(back.data()[(i, j)].to_bits(), s.data()[(i, j)].to_bits());
            }
        }
        prop_assert_eq!(io::encode_snapshots(&back).unwrap(), bytes);
    }
}
