use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use noisy_rm::machine::RewardMachine;

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noisy-rm"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const COFFEE: &str = "\
states 4 0 2 3
0 1 0 coffee,!office,!decoration
0 3 0 decoration
0 2 1 coffee,office,!decoration
1 3 0 decoration
1 2 1 office,!decoration
";

#[test]
fn missing_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["run", "--config", "missing.file"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.file"));
}

#[test]
fn bad_field_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.ini"), "[noise]\nposterior = 2\n").unwrap();
    let o = bin(&["baseline", "--config", "c.ini"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("noise.posterior"));
}

#[test]
fn usage_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(bin(&["run"], dir.path()).status.code(), Some(1));
}

#[test]
fn induce_output_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("e.txt"),
        "# alphabet: coffee,mail,office,decoration,A,B,C,D\n\
         G;1;coffee|office\nG;1;coffee|-|office\nD;1;decoration\nD;1;coffee|decoration\nI;1;coffee\nI;1;office\n",
    )
    .unwrap();
    let o = bin(&["induce", "--examples", "e.txt", "--max-states", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let a = noisy_rm::events::Alphabet::office_world();
    let rm = RewardMachine::parse(&text, &a).unwrap();
    assert_eq!(rm.format(&a), text);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("score "));

    // the exhaustive solver only takes small alphabets
    let o = bin(&["induce", "--examples", "e.txt", "--exhaustive"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    fs::write(dir.path().join("s.txt"), "# alphabet: a,b,c\nG;10;a|b\nI;10;a\nI;10;b\nD;10;c\n").unwrap();
    let o = bin(&["induce", "--examples", "s.txt", "--max-states", "1", "--exhaustive", "--out", "m.rm"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let small = noisy_rm::events::Alphabet::new(["a", "b", "c"]).unwrap();
    let rm = RewardMachine::parse(&fs::read_to_string(dir.path().join("m.rm")).unwrap(), &small).unwrap();
    assert_eq!(rm.n_states(), 4);
}

#[test]
fn eval_rm_prints_agreement() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.rm"), COFFEE).unwrap();
    fs::write(dir.path().join("b.rm"), "states 3 0 1 2\n").unwrap();
    fs::write(dir.path().join("t.txt"), "G;coffee|office\nD;decoration\nI;office\nI;\n").unwrap();
    let o = bin(&["eval-rm", "a.rm", "b.rm", "--traces", "t.txt"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "agreement 50.00% (2/4)");
    let o = bin(&["eval-rm", "a.rm", "a.rm", "--traces", "t.txt"], dir.path());
    assert_eq!(stdout(&o).trim(), "agreement 100.00% (4/4)");
}

#[test]
fn run_writes_csvs_and_curves_reproduces_the_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.ini"),
        "[experiment]\nseeds = 3, 4\nepisodes = 120\nmax_ep_len = 60\n[learning]\nwarmup = 20\nbudget = 5\n",
    )
    .unwrap();
    let o = bin(&["run", "--config", "c.ini", "--out", "r", "--quiet"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = dir.path().join("r");
    for f in ["raw/seed3_map0.csv", "raw/seed4_map0.csv", "wall/seed3_map0.csv", "aggregate.csv"] {
        assert!(r.join(f).exists(), "{f}");
    }
    let o = bin(&["curves", "r"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), fs::read_to_string(r.join("aggregate.csv")).unwrap());

    // --seed overrides the configured list
    let o = bin(&["baseline", "--config", "c.ini", "--out", "b", "--seed", "9", "--quiet"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let raw: Vec<_> = fs::read_dir(dir.path().join("b/raw")).unwrap().collect();
    assert_eq!(raw.len(), 1);
}

#[test]
fn curves_on_a_missing_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert_ne!(bin(&["curves", "nowhere"], dir.path()).status.code(), Some(0));
}
