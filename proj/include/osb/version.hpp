#pragma once

namespace osb {

inline constexpr const char* kToolName = "osb";
inline constexpr const char* kToolVersion = "0.1.0";

// Version stamp embedded in every emitted report and output file header.
inline constexpr int kSchemaVersion = 1;

}  // namespace osb
