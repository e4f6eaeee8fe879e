use paperprint_cli::error::CliError;
use paperprint_cli::gridfile::GridFile;
use paperprint_core::Grid;
use proptest::prelude::*;

proptest! {
    #[test]
    fn round_trip_is_bit_exact(
        rows in 1usize..12,
        cols in 1usize..12,
        bits in proptest::collection::vec(any::<u64>(), 144),
        value in "[a-z0-9 .]{0,12}",
    ) {
        let data: Vec<f64> = bits[..rows * cols].iter().map(|&b| f64::from_bits(b)).collect();
        let f = GridFile::new(Grid::new(rows, cols, data.clone()).unwrap())
            .with("source", &value)
            .with("pixel_pitch", 84.66);
        let back = GridFile::from_bytes(&f.to_bytes().unwrap()).unwrap();
        let got: Vec<u64> = back.grid.data().iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(got, bits[..rows * cols].to_vec());
        prop_assert_eq!(back.meta, f.meta);
    }

    #[test]
    fn any_flipped_byte_is_detected(pos in 0usize..200, bit in 0u8..8) {
        let f = GridFile::new(Grid::from_fn(4, 5, |r, c| (r * 5 + c) as f64)).with("units", "um");
        let mut b = f.to_bytes().unwrap();
        let i = pos % b.len();
        b[i] ^= 1 << bit;
        prop_assert!(GridFile::from_bytes(&b).is_err());
    }
}

#[test]
fn truncated_file_is_integrity_error() {
    let b = GridFile::new(Grid::zeros(3, 3)).to_bytes().unwrap();
    assert!(matches!(
        GridFile::from_bytes(&b[..b.len() - 1]),
        Err(CliError::Integrity(_))
    ));
    assert!(matches!(
        GridFile::from_bytes(b"PGRD"),
        Err(CliError::Integrity(_))
    ));
    assert!(matches!(
        GridFile::from_bytes(&[0u8; 64]),
        Err(CliError::Invalid(_))
    ));
}
