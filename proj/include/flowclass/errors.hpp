#pragma once

#include <stdexcept>
#include <string>

namespace flowclass {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : Error { using Error::Error; };          // unreadable or unwritable file
struct FormatError : Error { using Error::Error; };      // malformed file contents
struct ParamError : Error { using Error::Error; };       // invalid operation parameter
struct ShapeError : Error { using Error::Error; };       // tensor dimension mismatch
struct SchemaError : Error { using Error::Error; };      // unknown feature name
struct DataError : Error { using Error::Error; };        // inconsistent records or labels
struct TrainingError : Error { using Error::Error; };    // diverged optimization
struct ValidationError : Error { using Error::Error; };  // invalid train/test split

} // namespace flowclass
