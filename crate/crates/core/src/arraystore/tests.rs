use super::*;
use crate::image::FrontalImage;
use proptest::prelude::*;
use tempfile::tempdir;

fn payload_len(path: &Path) -> usize {
    let bytes = std::fs::read(path).unwrap();
    let h = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    bytes.len() - 8 - h
}

#[test]
fn real_round_trip() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("a.arr");
    let a = DenseArray::real(vec![2, 3], "x", vec![1.0, -2.5, 3.0, 0.0, f64::MAX, 1e-300])
        .with_meta(serde_json::json!({ "unit": "m" }));
    write_array(&p, &a).unwrap();
    assert_eq!(read_array(&p).unwrap(), a);
}

#[test]
fn complex_round_trip() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("c.arr");
    let data = (0..12).map(|i| Complex64::new(i as f64, -0.5 * i as f64)).collect();
    let a = DenseArray::complex(vec![3, 2, 2], "cube", data);
    write_array(&p, &a).unwrap();
    assert_eq!(read_array(&p).unwrap(), a);
}

#[test]
fn payload_sizes() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("s.arr");
    write_array(&p, &DenseArray::real(vec![2, 2], "s", vec![0.0; 4])).unwrap();
    assert_eq!(payload_len(&p), 32);
    write_array(&p, &DenseArray::real(vec![92, 92], "s", vec![0.0; 8464])).unwrap();
    assert_eq!(payload_len(&p), 67_712);
}

#[test]
fn header_is_json_with_little_endian_tag() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("h.arr");
    write_array(&p, &DenseArray::real(vec![1], "one", vec![7.0])).unwrap();
    let bytes = std::fs::read(&p).unwrap();
    let h = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    let v: serde_json::Value = serde_json::from_slice(&bytes[8..8 + h]).unwrap();
    assert_eq!(v["dtype"], "f64");
    assert_eq!(v["byte_order"], "little");
    assert_eq!(v["shape"], serde_json::json!([1]));
    assert_eq!(&bytes[8 + h..], &7.0f64.to_le_bytes());
}

#[test]
fn rejects_bad_shapes() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("bad.arr");
    assert!(matches!(write_array(&p, &DenseArray::real(vec![], "e", vec![])), Err(StoreError::Shape(_))));
    assert!(matches!(write_array(&p, &DenseArray::real(vec![2, 0], "e", vec![])), Err(StoreError::Shape(_))));
    assert!(matches!(
        write_array(&p, &DenseArray::real(vec![2, 2], "e", vec![0.0; 3])),
        Err(StoreError::Payload { .. })
    ));
}

#[test]
fn rejects_truncated_payload() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("t.arr");
    write_array(&p, &DenseArray::real(vec![4], "t", vec![1.0; 4])).unwrap();
    let mut bytes = std::fs::read(&p).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&p, bytes).unwrap();
    assert!(matches!(read_array(&p), Err(StoreError::Payload { .. })));
}

#[test]
fn split_examples() {
    let (tr, te) = split_indices(100, 0.8, 3).unwrap();
    assert_eq!((tr.len(), te.len()), (80, 20));
    for (f, want) in [(0.2, 15), (0.4, 30), (0.6, 45), (0.8, 60)] {
        assert_eq!(split_indices(75, f, 0).unwrap().0.len(), want);
    }
    assert_eq!(split_indices(100, 0.8, 3).unwrap(), (tr, te));
    assert_ne!(split_indices(100, 0.8, 4).unwrap().0, split_indices(100, 0.8, 3).unwrap().0);
    assert!(split_indices(1, 0.5, 0).is_err());
    assert!(split_indices(10, 1.0, 0).is_err());
    assert!(split_indices(10, 0.0, 0).is_err());
}

fn image(v: f64) -> FrontalImage {
    FrontalImage::new(3, 2, vec![v; 6], vec![-1.0, 0.0, 1.0], vec![0.0, 1.0]).unwrap()
}

#[test]
fn dataset_round_trip() {
    let dir = tempdir().unwrap();
    let mut ds = Dataset::default();
    for i in 0..4 {
        let label = PairLabel { wall: "dielectric".into(), aspect_deg: 45.0, frame: i, eta: 2 * i };
        ds.push(image(i as f64), image(0.5 * i as f64), label);
    }
    save_dataset(dir.path(), &ds).unwrap();
    assert!(dir.path().join("00003_corrupt.arr").exists());
    assert_eq!(load_dataset(dir.path()).unwrap(), ds);
    let (train, test) = split_dataset(&ds, 0.5, 9).unwrap();
    assert_eq!(train.len() + test.len(), 4);
}

#[test]
fn config_round_trip() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("cfg.json");
    let cfg = ExperimentConfig::default();
    cfg.save(&p).unwrap();
    assert_eq!(ExperimentConfig::load(&p).unwrap(), cfg);
    std::fs::write(&p, r#"{"split_fraction": 1.5}"#).unwrap();
    assert!(ExperimentConfig::load(&p).is_err());
    std::fs::write(&p, r#"{"seed": 7}"#).unwrap();
    assert_eq!(ExperimentConfig::load(&p).unwrap().seed, 7);
}

proptest! {
    #[test]
    fn split_is_a_partition(m in 2usize..300, f in 0.01f64..0.99, seed in any::<u64>()) {
        let (tr, te) = split_indices(m, f, seed).unwrap();
        prop_assert!(!tr.is_empty() && !te.is_empty());
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..m).collect::<Vec<_>>());
    }
}
