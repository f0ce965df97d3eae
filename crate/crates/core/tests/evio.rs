use std::path::Path;

use evrender::eventsim::{Event, EventStream, Polarity};
use evrender::evio::{
    encode_pfm, format_events, format_report_csv, format_report_table, format_speedup,
    parse_events, read_events, read_pfm, write_events, write_pfm, write_report, FloatImage,
    ReportRow,
};
use evrender::Error;
use proptest::prelude::*;

fn golden() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/half_1x1.pfm")
}

fn events() -> impl Strategy<Value = EventStream> {
    prop::collection::btree_map((1u32..50, 0u32..300, 0u32..300), any::<bool>(), 0..200).prop_map(|m| {
        EventStream::new(
            m.into_iter()
                .map(|((s, x, y), p)| Event {
                    x,
                    y,
                    s,
                    polarity: if p { Polarity::Positive } else { Polarity::Negative },
                })
                .collect(),
        )
    })
}

#[test]
fn empty_stream_is_header_only() {
    assert_eq!(format_events(&EventStream::default()), "s,x,y,p\n");
}

#[test]
fn events_are_sorted_on_disk() {
    let stream = EventStream::new(vec![
        Event { x: 5, y: 1, s: 3, polarity: Polarity::Negative },
        Event { x: 2, y: 0, s: 3, polarity: Polarity::Positive },
        Event { x: 9, y: 9, s: 2, polarity: Polarity::Positive },
    ]);
    assert_eq!(format_events(&stream), "s,x,y,p\n2,9,9,1\n3,2,0,1\n3,5,1,-1\n");
}

#[test]
fn malformed_lines_report_line_numbers() {
    let origin = Path::new("events.csv");
    let err = parse_events("s,x,y,p\n2,10,11,1\n2,10,11,0\n", origin).unwrap_err();
    match err {
        Error::Format { line, ref message, .. } => {
            assert_eq!(line, 3);
            assert!(message.contains("polarity"), "{message}");
        }
        ref other => panic!("unexpected {other}"),
    }
    assert!(parse_events("s,x,y,p\n0,1,1,1\n", origin).is_err());
    assert!(parse_events("s,x,y,p\n2,1,1,1\n2,1,1,-1\n", origin).is_err());
    assert!(parse_events("x,y\n", origin).is_err());
    assert!(parse_events("", origin).is_err());
    assert!(parse_events("s,x,y,p\n2,-1,1,1\n", origin).is_err());
}

#[test]
fn golden_pfm_is_byte_exact() {
    let image = FloatImage::new(1, 1, vec![0.5]).unwrap();
    let bytes = encode_pfm(&image).unwrap();
    assert_eq!(bytes, std::fs::read(golden()).unwrap());
    assert_eq!(bytes.len(), 12 + 4);
    assert_eq!(read_pfm(golden()).unwrap(), image);
}

#[test]
fn pfm_rows_are_stored_bottom_up() {
    let image = FloatImage::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let bytes = encode_pfm(&image).unwrap();
    let payload: Vec<f32> = bytes[bytes.len() - 16..]
        .chunks(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    assert_eq!(payload, vec![3.0, 4.0, 1.0, 2.0]);
}

#[test]
fn nan_pfm_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nan.pfm");
    let image = FloatImage::new(2, 1, vec![0.0, f32::NAN]).unwrap();
    assert!(write_pfm(&path, &image).is_err());
    assert!(!path.exists());
}

#[test]
fn report_formatting() {
    assert_eq!(format_speedup(40.0 / 5.0), "8.00×");
    assert_eq!(format_speedup(1.0), "1.00×");
    let row = ReportRow {
        mode: "one_tailed".into(),
        rmse: 0.0,
        psnr: f64::INFINITY,
        f1: 1.0,
        pscd: 0.0,
        time_s: 5.0,
        baseline_time_s: 40.0,
    };
    assert_eq!(row.speedup(), 8.0);
    let table = format_report_table(std::slice::from_ref(&row));
    for label in ["RMSE", "PSNR", "F1", "PSCD", "Time", "Speed up"] {
        assert!(table.contains(label), "{label} missing from\n{table}");
    }
    assert!(table.contains("8.00×"));
    assert!(format_report_csv(std::slice::from_ref(&row)).contains("inf"));

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("report.csv");
    write_report(&csv, &[row]).unwrap();
    assert!(csv.exists() && dir.path().join("report.txt").exists());
}

proptest! {
    #[test]
    fn events_round_trip(stream in events()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        write_events(&path, &stream).unwrap();
        prop_assert_eq!(read_events(&path).unwrap(), stream);
    }

    #[test]
    fn pfm_round_trip(w in 1u32..20, h in 1u32..20, seed in any::<u32>()) {
        let data: Vec<f32> = (0..w * h)
            .map(|i| ((i.wrapping_mul(2_654_435_761) ^ seed) as f32 / 1e6) - 2000.0)
            .collect();
        let image = FloatImage::new(w, h, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pfm");
        write_pfm(&path, &image).unwrap();
        prop_assert_eq!(read_pfm(&path).unwrap(), image);
    }
}
