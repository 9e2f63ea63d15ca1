#pragma once

#include <stdexcept>
#include <string>

namespace smoe {

// Root of every error the library raises. Subclasses name the failing class
// of condition so the CLI can report the stage and pick an exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed file contents (bad magic, header, dtype, CSV row).
class FormatError : public Error {
public:
    using Error::Error;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Missing or unreadable/unwritable file.
class IoError : public Error {
public:
    using Error::Error;
};

// Caller passed arguments the operation does not accept.
class UsageError : public Error {
public:
    using Error::Error;
};

class BoundsError : public Error {
public:
    using Error::Error;
};

}  // namespace smoe
