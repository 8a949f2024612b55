// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(netcfg::cli::main_entry());
}
