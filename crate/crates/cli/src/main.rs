use std::path::PathBuf;
use std::process::ExitCode;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};
use modeqc_cli::config::OUT_ENV;
use modeqc_cli::report::fmt_num;
use modeqc_cli::{resolve, run_scenario, Execution, Overrides, Registry};

fn command(registry: &Registry) -> Command {
    let global = [
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .value_parser(value_parser!(PathBuf))
            .global(true)
            .help("TOML file layered over the built-in defaults"),
        Arg::new("out")
            .long("out")
            .value_name("DIR")
            .value_parser(value_parser!(PathBuf))
            .global(true)
            .help(format!("output directory (overrides ${OUT_ENV})")),
        Arg::new("set")
            .long("set")
            .value_name("KEY=VALUE")
            .action(ArgAction::Append)
            .global(true)
            .help("override one dotted setting, e.g. mzi.delta_n=8e-4"),
        Arg::new("parallel")
            .long("parallel")
            .value_name("N")
            .value_parser(value_parser!(usize))
            .global(true)
            .help("sweep worker threads (0 = all cores)"),
    ];
    let mut cmd = Command::new("modeqc")
        .about("Simulates qubits carried by the two lowest modes of dual-mode slab waveguides")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .args(global);
    for s in registry.iter() {
        cmd = cmd.subcommand(Command::new(s.name()).about(s.summary()));
    }
    cmd
}

fn overrides(m: &ArgMatches) -> Overrides {
    Overrides {
        config_file: m.get_one::<PathBuf>("config").cloned(),
        out_dir: m.get_one::<PathBuf>("out").cloned(),
        sets: m.get_many::<String>("set").map(|v| v.cloned().collect()).unwrap_or_default(),
        parallel: m.get_one::<usize>("parallel").copied(),
    }
}

fn print_summary(registry: &Registry, ex: &Execution) {
    let r = &ex.report;
    if let Some(table) = registry.get(&r.scenario).and_then(|s| s.table(&r.outcome())) {
        print!("{table}");
    }
    for (name, value) in &r.metrics {
        println!("{name} = {value}");
    }
    for c in &r.checks {
        println!("{} {} = {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, fmt_num(c.value), c.bound);
    }
    if let Some(e) = &r.error {
        eprintln!("error in {}: {}", e.stage, e.message);
    }
    println!("report: {} ({:.1} s)", r.config.out_dir.join(modeqc_cli::scenario::REPORT_FILE).display(), r.duration_s);
}

fn main() -> ExitCode {
    let registry = Registry::builtin();
    let matches = command(&registry).get_matches();
    let (name, sub) = matches.subcommand().expect("a subcommand is required");
    let env_out = std::env::var_os(OUT_ENV).map(PathBuf::from);
    let result = resolve(name, &overrides(sub), env_out).and_then(|config| run_scenario(&registry, &config));
    match result {
        Ok(ex) => {
            print_summary(&registry, &ex);
            ExitCode::from(ex.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
