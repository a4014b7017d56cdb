use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, Command};

use glvar_cli::settings::{keys_for, read_config, Settings};
use glvar_cli::{run, CliError, COMMANDS};

fn cli() -> Command {
    let mut app = Command::new("glvar").version(env!("CARGO_PKG_VERSION")).about("Ginzburg-Landau toolkit for variable applied fields").subcommand_required(true);
    for (name, about) in COMMANDS {
        let mut sub = Command::new(*name).about(*about).arg(Arg::new("config").long("config").value_name("FILE").help("key = value settings file"));
        for k in keys_for(name) {
            let help = match k.default {
                Some(d) if !d.is_empty() => format!("{} [default: {d}]", k.help),
                Some(_) => k.help.to_string(),
                None => format!("{} (required)", k.help),
            };
            sub = sub.arg(Arg::new(k.name).long(k.name).value_name("VALUE").help(help).action(ArgAction::Set).allow_hyphen_values(true));
        }
        app = app.subcommand(sub);
    }
    app
}

fn resolve() -> Result<Settings, CliError> {
    let matches = cli().try_get_matches().map_err(|e| {
        if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
            e.exit();
        }
        CliError::Usage(e.to_string().trim().to_string())
    })?;
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let config = match sub.get_one::<String>("config") {
        Some(p) => read_config(&PathBuf::from(p))?,
        None => Vec::new(),
    };
    let flags: Vec<(String, String)> = keys_for(name).iter().filter_map(|k| sub.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone()))).collect();
    Settings::resolve(name, &config, &flags)
}

fn main() -> ExitCode {
    let result = resolve().and_then(|s| run(&s));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.code() as u8)
        }
    }
}
