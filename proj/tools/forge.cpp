// SPDX-License-Identifier: Apache-2.0
#include "forge/cli.hpp"

int main(int argc, char** argv) {
    return forge::cli::dispatch(argc, argv);
}
