#include "dspas/error.hpp"

namespace dspas {

IntegrityError::IntegrityError(Kind kind, const std::string& what)
    : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

const char* to_string(IntegrityError::Kind kind) noexcept {
    switch (kind) {
    case IntegrityError::Kind::bad_magic:
        return "bad magic";
    case IntegrityError::Kind::unsupported_version:
        return "unsupported version";
    case IntegrityError::Kind::checksum_mismatch:
        return "checksum mismatch";
    case IntegrityError::Kind::truncated:
        return "truncated";
    case IntegrityError::Kind::corrupt_digest:
        return "corrupt digest";
    case IntegrityError::Kind::bad_layout:
        return "bad layout";
    }
    return "integrity error";
}

} // namespace dspas
