#pragma once

#include <stdexcept>
#include <string>

namespace a2r {

// Any failure caused by input data: unreadable files, bad formats, violated
// preconditions on sizes or parameters. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Corrupt or unsupported on-disk content (bad magic, CRC mismatch, truncation).
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace a2r
