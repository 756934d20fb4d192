#pragma once

namespace spatconf {

// Subcommands: simulate, basis, bias, fit, benchmark, app. Returns the
// process exit status; usage errors print help and return nonzero.
int cli_entry(int argc, const char* const* argv);

}  // namespace spatconf
