#pragma once

#include <stdexcept>
#include <string>

namespace dspas {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (wrong chunk length, bad parameter range).
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Unreadable or malformed input (capture files, mask files, config).
class InputError : public Error {
public:
    using Error::Error;
};

/// Stored data failed validation. `kind()` names the check that failed.
class IntegrityError : public Error {
public:
    enum class Kind { bad_magic, unsupported_version, checksum_mismatch, truncated, corrupt_digest, bad_layout };

    IntegrityError(Kind kind, const std::string& what);

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

const char* to_string(IntegrityError::Kind kind) noexcept;

/// Archive parameters disagree with the querier or with each other.
class ParameterMismatchError : public Error {
public:
    using Error::Error;
};

class QueryTooShortError : public Error {
public:
    using Error::Error;
};

/// Correlation signal has zero spread, so no threshold can be formed.
class NoSignalError : public Error {
public:
    using Error::Error;
};

/// Noise calibration was handed fewer samples than it needs.
class CalibrationError : public Error {
public:
    using Error::Error;
};

} // namespace dspas
