use horodrift::harness::{self, parse_config, SelftestOptions, Store};

#[test]
fn selftest_passes_for_every_master_seed() {
    let reference = harness::selftest(&SelftestOptions::default());
    assert!(reference.all_passed(), "{}", reference.render());
    for master in 1..5 {
        let rep = harness::selftest(&SelftestOptions {
            master,
            ..SelftestOptions::default()
        });
        assert_eq!(rep.passed_names(), reference.passed_names(), "master {master}\n{}", rep.render());
    }
}

#[test]
fn reports_are_byte_identical_across_stores() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config("space = h2xh2\nquantity = check\nT = 4\npaths = 400\nseed = 9").unwrap();
    let texts: Vec<String> = ["a.jsonl", "b.jsonl"]
        .iter()
        .map(|name| {
            let store = Store::new(dir.path().join(name));
            harness::run(&cfg, Some(&store)).unwrap();
            harness::report(&store.load().unwrap(), None).unwrap()
        })
        .collect();
    assert_eq!(texts[0], texts[1]);
}
