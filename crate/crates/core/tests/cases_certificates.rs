//! The published constants, the proof runner and its certificates.

use std::sync::OnceLock;

use roessler_core::cases::{CaseError, Runner, System};
use roessler_core::certificate::{Certificate, RunSettings};
use roessler_core::interval::Interval;

fn runner(system: System) -> &'static Runner {
    static A525: OnceLock<Runner> = OnceLock::new();
    static A47: OnceLock<Runner> = OnceLock::new();
    let cell = match system {
        System::A525 => &A525,
        System::A47 => &A47,
    };
    cell.get_or_init(|| Runner::new(system, RunSettings::default()).unwrap())
}

/// Lower and upper endpoint digits as they appear in the published tables.
fn endpoints(s: &str) -> (String, String) {
    let (head, rest) = s.split_once("_{").unwrap();
    let (lo, hi) = rest.trim_end_matches('}').split_once("}^{").unwrap();
    (format!("{head}{lo}"), format!("{head}{hi}"))
}

#[test]
fn orbit_tables_match_the_published_digits() {
    let expected: [(System, usize, &[[&str; 4]]); 4] = [
        (
            System::A525,
            3,
            &[
                [
                    "-3.466415205012922",
                    "-3.466415205008744",
                    "0.0346316054764013",
                    "0.03463160547651117",
                ],
                [
                    "-6.264007533282922",
                    "-6.264007533274157",
                    "0.03265435884602701",
                    "0.03265435884620798",
                ],
                [
                    "-9.748889918093569",
                    "-9.748889918088608",
                    "0.03075287338062635",
                    "0.03075287338070747",
                ],
            ],
        ),
        (
            System::A47,
            5,
            &[
                [
                    "-3.885277116910041",
                    "-3.885277116888829",
                    "0.03755839144432487",
                    "0.03755839144485094",
                ],
                [
                    "-6.858260447162484",
                    "-6.858260447126429",
                    "0.03505366666495363",
                    "0.03505366666561609",
                ],
                [
                    "-7.766631245392379",
                    "-7.766631245348371",
                    "0.03441713392818681",
                    "0.03441713392863033",
                ],
                [
                    "-5.895584354611225",
                    "-5.895584354509201",
                    "0.03578591178706747",
                    "0.03578591178835873",
                ],
                [
                    "-8.722396020073123",
                    "-8.722396020049997",
                    "0.03379629936404972",
                    "0.0337962993643551",
                ],
            ],
        ),
        (
            System::A47,
            2,
            &[
                [
                    "-4.883924258743846",
                    "-4.883924258742264",
                    "0.03663128109720363",
                    "0.03663128109729599",
                ],
                [
                    "-8.220951552235825",
                    "-8.220951552233453",
                    "0.03411620084268562",
                    "0.03411620084269375",
                ],
            ],
        ),
        (
            System::A47,
            4,
            &[
                [
                    "-6.332251180191433",
                    "-6.332251180186209",
                    "0.03544579954748502",
                    "0.03544579954786024",
                ],
                [
                    "-8.470343654125783",
                    "-8.470343654119862",
                    "0.03395554856430393",
                    "0.03395554856440434",
                ],
                [
                    "-4.36266725991514",
                    "-4.3626672599017",
                    "0.03710245585053683",
                    "0.03710245585075971",
                ],
                [
                    "-7.571669540362099",
                    "-7.571669540341765",
                    "0.0345497016342597",
                    "0.03454970163427861",
                ],
            ],
        ),
    ];
    for (system, period, rows) in expected {
        let orbit = system.constants().orbit(period).unwrap();
        assert_eq!(orbit.boxes.len(), rows.len());
        let boxes = orbit.paper_boxes().unwrap();
        for ((raw, row), b) in orbit.boxes.iter().zip(rows).zip(&boxes) {
            let (ylo, yhi) = endpoints(raw[0]);
            let (zlo, zhi) = endpoints(raw[1]);
            assert_eq!([ylo.as_str(), yhi.as_str(), zlo.as_str(), zhi.as_str()], *row);
            // the enclosure holds every endpoint, whatever their order
            for (i, s) in row.iter().enumerate() {
                let v = Interval::from_decimal(s).unwrap();
                assert!(v.subset(&b[i / 2]), "{s} not in {}", b[i / 2]);
            }
        }
    }
}

#[test]
fn chart_and_hset_constants() {
    let c = System::A525.constants();
    assert_eq!((c.a, c.b), ("5.25", "0.2"));
    assert_eq!(c.chart.m, ["-1", "0.000706767", "-0.000706767", "-1"]);
    assert_eq!(c.chart.p, ["-6.264007533274157", "0.03265435884602701"]);
    let names: Vec<_> = c.hsets.iter().map(|h| (h.name, h.center, h.half_width, h.r)).collect();
    assert_eq!(
        names,
        [
            ("N0", "-1.23094", "1.41278", "7e-4"),
            ("N1", "1.84699", "1.55949", "7e-4")
        ]
    );

    let c = System::A47.constants();
    assert_eq!((c.a, c.b), ("4.7", "0.2"));
    assert_eq!(c.chart.m, ["-1", "0.000842495", "-0.000842495", "-1"]);
    assert_eq!(c.chart.p, ["-6.858260447127058", "0.03505366666527084"]);
    let names: Vec<_> = c.hsets.iter().map(|h| (h.name, h.center, h.half_width, h.r)).collect();
    assert_eq!(
        names,
        [
            ("N0", "-1.96783", "1.02", "2e-4"),
            ("N2", "0.454186", "0.476895", "2e-4")
        ]
    );
    let chain: Vec<_> = c.chain.iter().map(|e| (e.source, e.target, e.iterate)).collect();
    assert_eq!(chain, [("N0", "N2", 1), ("N2", "N2", 1), ("N2", "N0", 3)]);

    let t = c.trapping.as_ref().unwrap();
    assert_eq!(t.chart.m, ["-1.", "0.000777754", "-0.000777754", "-1."]);
    assert_eq!(t.chart.p, ["-6.19384", "0.0356629"]);
    assert_eq!(t.radii, ["2.66856", "4e-4"]);
    let s = t.paper_residual().unwrap();
    assert!(s[0].contains(-7.186544568881281) && s[0].contains(-7.165195528898398));
    assert!(s[1].contains(0.0344908202443027) && !s[1].contains(0.0522742411001666));
    assert!(s[1].contains(0.03522742411001666));
    // the published h-sets are disjoint, which the period argument needs
    let h = c.hsets().unwrap();
    assert!(h[0].disjoint(&h[1]));
}

#[test]
fn runs_are_deterministic_and_certificates_round_trip() {
    let a = Runner::new(System::A525, RunSettings::default())
        .unwrap()
        .run_case(1)
        .unwrap();
    let b = Runner::new(System::A525, RunSettings::default())
        .unwrap()
        .run_case(1)
        .unwrap();
    assert!(a.verdict);
    assert_eq!(a.evidence.kind(), "periodic-orbit");
    assert_eq!(a.evidence_text(), b.evidence_text());
    let back = Certificate::from_text(&a.to_text()).unwrap();
    assert_eq!(back, a);
    back.recheck().unwrap();

    let dir = std::env::temp_dir().join(format!("roessler-cert-{}", std::process::id()));
    let path = a.write_to(&dir).unwrap();
    assert_eq!(path.file_name().unwrap(), "a525-case1.cert");
    let read = Certificate::from_text(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(read.evidence_text(), a.evidence_text());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn tampered_covering_evidence_is_caught() {
    let cert = runner(System::A525).run_case(2).unwrap();
    assert!(cert.verdict);
    assert_eq!(cert.evidence.kind(), "covering-chain");
    cert.recheck().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&cert.to_text()).unwrap();
    let body = v["evidence"]["edges"][1]["body"].as_array_mut().unwrap();
    body.remove(body.len() / 2);
    let tampered = Certificate::from_text(&v.to_string()).unwrap();
    assert!(tampered.recheck().is_err());
}

#[test]
fn periods_are_routed_to_the_right_argument() {
    let r = runner(System::A525);
    let seven = r.prove_period(7).unwrap();
    assert!(seven.verdict);
    assert_eq!(seven.evidence.kind(), "period-from-loop");
    assert_eq!(seven.case.file_stem(), "a525-period7");
    seven.recheck().unwrap();

    let r = runner(System::A47);
    for (n, kind) in [
        (1, "period-from-loop"),
        (2, "periodic-orbit"),
        (4, "periodic-orbit"),
        (6, "period-from-loop"),
    ] {
        let c = r.prove_period(n).unwrap();
        assert!(c.verdict, "period {n}");
        assert_eq!(c.evidence.kind(), kind, "period {n}");
        c.recheck().unwrap();
    }
}

#[test]
fn invalid_requests_are_errors() {
    let r = runner(System::A525);
    assert!(matches!(r.run_case(3), Err(CaseError::UnknownCase { .. })));
    assert!(matches!(r.prove_period(0), Err(CaseError::InvalidPeriod)));
    assert!("a99".parse::<System>().is_err());
}
