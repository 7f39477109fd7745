mod common;

use common::*;
use rand::Rng;
use transnet::federation::{
    decode, decode_csv, encode, encode_csv, local_site_compute, read_summary, write_summary, SourceSummary, HEADER_LEN,
};
use transnet::netgen::{build_scenario, ExperimentConfig};
use transnet::privacy::PrivacyParams;
use transnet::spectral::EigenOrder;
use transnet::WireError;

fn random_summary(r: &mut rand_chacha::ChaCha8Rng) -> SourceSummary {
    let n = r.random_range(2..60);
    let k = r.random_range(1..=n.min(5));
    let q = r.random_range(0.5..=1.0);
    let qp = r.random_range(0.5..=1.0);
    SourceSummary::new(
        random_space(n, k, r),
        r.random_range(1e-4..1.0),
        PrivacyParams::new(q, qp).unwrap(),
        r.random_range(0..1000),
    )
}

#[test]
fn binary_roundtrip_is_bit_exact() {
    let mut r = rng(31);
    for _ in 0..100 {
        let s = random_summary(&mut r);
        let bytes = encode(&s);
        assert_eq!(bytes.len(), HEADER_LEN + 8 * s.n() * s.k());
        let back = decode(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(encode(&back), bytes);
    }
}

#[test]
fn csv_roundtrip_is_bit_exact() {
    let mut r = rng(32);
    for _ in 0..100 {
        let s = random_summary(&mut r);
        assert_eq!(decode_csv(&encode_csv(&s)).unwrap(), s);
    }
}

#[test]
fn summary_size_is_linear_in_n() {
    let config = ExperimentConfig::preset(1, 1).unwrap().with_l(4);
    let release = build_scenario(&config, 1).unwrap().release(2);
    let src = &release.sources[0];
    let s = local_site_compute(&src.network, src.params, 3, 1, true, EigenOrder::Magnitude).unwrap();
    let bytes = encode(&s);
    assert_eq!(bytes.len() - HEADER_LEN, 2880);
    // far below the n² adjacency
    assert!(bytes.len() < 120 * 120);
}

#[test]
fn files_roundtrip_and_corruption_is_reported() {
    let mut r = rng(33);
    let s = random_summary(&mut r);
    let dir = tempfile::tempdir().unwrap();
    let path = write_summary(dir.path(), &s).unwrap();
    assert_eq!(
        path.file_name().unwrap().to_str().unwrap(),
        format!("summary_{}.tns", s.l)
    );
    assert_eq!(read_summary(&path).unwrap(), s);

    let mut bytes = encode(&s);
    bytes[0] = b'X';
    assert!(matches!(decode(&bytes), Err(WireError::BadMagic(_))));
    let bytes = encode(&s);
    assert!(matches!(
        decode(&bytes[..HEADER_LEN - 1]),
        Err(WireError::TruncatedHeader { .. })
    ));
    let mut long = bytes.clone();
    long.push(0);
    assert_eq!(decode(&long), Err(WireError::TrailingBytes(1)));
    let mut v2 = bytes;
    v2[4] = 2;
    assert_eq!(decode(&v2), Err(WireError::UnsupportedVersion(2)));
}
