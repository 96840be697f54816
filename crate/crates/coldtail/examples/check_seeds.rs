//! One-shot validator for the checked-in fuzz corpus (not part of the API).
fn main() {
    let dir = std::env::args().nth(1).unwrap();
    let as_distribution = dir.contains("distribution");
    let mut bad = 0;
    let mut entries: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    for p in entries {
        let name = p.file_name().unwrap().to_string_lossy().to_string();
        let text = std::fs::read_to_string(&p).unwrap();
        let res = if as_distribution {
            coldtail::phase::io::import_text(&text).map(|_| ())
        } else {
            coldtail::shockctl::config::parse_config(&text).map(|_| ())
        };
        let expect_ok = if as_distribution {
            name.starts_with("valid")
        } else {
            !name.starts_with("malformed") && !name.starts_with("out_of_range")
        };
        match (expect_ok, res) {
            (true, Err(e)) => {
                println!("UNEXPECTED ERR {name}: {e}");
                bad += 1;
            }
            (false, Ok(_)) => {
                println!("UNEXPECTED OK {name}");
                bad += 1;
            }
            (_, r) => println!("ok {name} ({})", if r.is_ok() { "parses" } else { "rejected" }),
        }
    }
    std::process::exit(if bad > 0 { 1 } else { 0 });
}
