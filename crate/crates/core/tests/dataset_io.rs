use proptest::prelude::*;
use stvae::data::{load_dataset, read_dataset, save_dataset, write_dataset};
use stvae::generators::{generate_dataset, GeneratorKind, GeneratorSpec};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_datasets_round_trip(seed in any::<u64>(), n in 1usize..5, periods in 2usize..6, k in 0usize..2) {
        let kind = [GeneratorKind::St, GeneratorKind::Pw][k];
        let d = generate_dataset(&GeneratorSpec { kind, periods, n_series: n, seed }, None).unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        let back = read_dataset(&buf[..]).unwrap();
        prop_assert_eq!(&back, &d);
        let mut again = Vec::new();
        write_dataset(&back, &mut again).unwrap();
        prop_assert_eq!(again, buf);
    }
}

#[test]
fn file_round_trip_and_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    let d = generate_dataset(&GeneratorSpec { kind: GeneratorKind::St, periods: 3, n_series: 4, seed: 2 }, None).unwrap();
    save_dataset(&d, &path).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), d);
    let text = std::fs::read_to_string(&path).unwrap();
    let cut: String = text.lines().take(6).collect::<Vec<_>>().join("\n");
    std::fs::write(&path, cut).unwrap();
    let err = load_dataset(&path).unwrap_err().to_string();
    assert!(err.contains("truncated") && err.contains("line"), "{err}");
}
