// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <iostream>

#include "nitcg/cli.h"

int main(int argc, char** argv) { return nitcg::cli::run(argc, argv, std::cout, std::cerr); }
