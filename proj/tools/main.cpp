// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#include "pdanet/cli.hpp"

int main(int argc, char** argv) { return pdanet::cli::run(argc, argv); }
