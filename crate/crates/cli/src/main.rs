// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(qpev_cli::run(std::env::args_os()));
}
