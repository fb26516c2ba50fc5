#pragma once

namespace mrphe {

// Entry point of the `mrphe` tool. Returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace mrphe
