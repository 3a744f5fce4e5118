#pragma once

#include <stdexcept>
#include <string>

namespace osb {

// Error categories map one-to-one onto CLI exit codes (see tools/osb.cpp).

// A referenced file is missing or unreadable.
struct FileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A document exists but its content is malformed (bad JSON, bad record,
// dangling cross-reference, invalid geometry).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A file parses but declares an unsupported schema_version.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Episodes, predictions and datasets do not agree with each other
// (unknown episode_id, category outside the evaluated subset, ...).
struct MismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace osb
