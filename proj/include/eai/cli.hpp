#pragma once

namespace eai::cli {

// Dispatches synth / train / eval / analyze / gradcheck. Returns 0 on
// success, 1 on validation or usage errors, 2 on I/O errors. Implemented in
// the library so tests can drive it in-process.
int run(int argc, const char* const* argv);

}  // namespace eai::cli
