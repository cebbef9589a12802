// SPDX-License-Identifier: Apache-2.0
#include "sspt/cli.hpp"

int main(int argc, char** argv) { return sspt::cli::main(argc, argv); }
