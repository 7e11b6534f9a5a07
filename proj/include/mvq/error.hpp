#pragma once

#include <stdexcept>
#include <string>

namespace mvq {

enum class Errc {
    CoutNotMultipleOfD,
    DimensionMismatch,
    DNotMultipleOfM,
    InvalidPattern,
    InvalidPopcount,
    IdOutOfRange,
    TooFewSubvectors,
    IndexOutOfRange,
    ConfigInvalid,
    QNotIntegral,
    WrongPopcount,
    BadMagic,
    TruncatedStream,
    CorruptLengths,
    IoError,
    ParseError,
};

constexpr const char* errc_name(Errc c) {
    switch (c) {
        case Errc::CoutNotMultipleOfD: return "CoutNotMultipleOfD";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::DNotMultipleOfM: return "DNotMultipleOfM";
        case Errc::InvalidPattern: return "InvalidPattern";
        case Errc::InvalidPopcount: return "InvalidPopcount";
        case Errc::IdOutOfRange: return "IdOutOfRange";
        case Errc::TooFewSubvectors: return "TooFewSubvectors";
        case Errc::IndexOutOfRange: return "IndexOutOfRange";
        case Errc::ConfigInvalid: return "ConfigInvalid";
        case Errc::QNotIntegral: return "QNotIntegral";
        case Errc::WrongPopcount: return "WrongPopcount";
        case Errc::BadMagic: return "BadMagic";
        case Errc::TruncatedStream: return "TruncatedStream";
        case Errc::CorruptLengths: return "CorruptLengths";
        case Errc::IoError: return "IoError";
        case Errc::ParseError: return "ParseError";
    }
    return "UnknownError";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

} // namespace mvq
