#pragma once

namespace haug {

// subcommands: pretrain, linear-probe, aug-probe, invariance-report,
// rotation-study, gen-data. Exit codes: 0 ok, 1 failed direction check or
// runtime error, 2 usage error.
int cli_main(int argc, const char* const* argv);

}  // namespace haug
