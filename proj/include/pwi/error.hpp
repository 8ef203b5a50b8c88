#pragma once

#include <stdexcept>
#include <string>

namespace pwi {

// Error categories map one-to-one onto the CLI exit codes.
enum class ErrorKind { Config = 2, Provider = 3, Data = 4 };

enum class Errc {
    // config
    InvalidConfig,
    UnknownTemplate,
    MissingPlaceholderValue,
    InvalidTemplate,
    // provider
    ProtocolViolation,
    Timeout,
    ProviderFailure,
    UnsupportedPayload,
    OutOfVocabulary,
    // data
    MissingFile,
    ParseError,
    DuplicateId,
    TaxonomyConflict,
    EmptyManifest,
    EmptyPlan,
    DuplicateWord,
    UndecodableImage,
    EmptyWord,
    WordTooLong,
    DimensionMismatch,
    ZeroNorm,
    NoRecords,
    MissingCell,
    RaggedRows,
    MismatchedIds,
    TooFewItems,
    NoWithinPairs,
    ZeroVariance,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, Errc code, const std::string& what)
        : std::runtime_error(what), kind_(kind), code_(code) {}

    ErrorKind kind() const noexcept { return kind_; }
    Errc code() const noexcept { return code_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
    Errc code_;
};

struct ConfigError : Error {
    ConfigError(Errc code, const std::string& what) : Error(ErrorKind::Config, code, what) {}
};

struct ProviderError : Error {
    ProviderError(Errc code, const std::string& what) : Error(ErrorKind::Provider, code, what) {}
};

struct DataError : Error {
    DataError(Errc code, const std::string& what) : Error(ErrorKind::Data, code, what) {}
};

/// Re-throws `e` as the same subclass with `context` prepended to its message.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& context) {
    const std::string what = context + ": " + e.what();
    switch (e.kind()) {
        case ErrorKind::Config: throw ConfigError(e.code(), what);
        case ErrorKind::Provider: throw ProviderError(e.code(), what);
        case ErrorKind::Data: break;
    }
    throw DataError(e.code(), what);
}

}  // namespace pwi
