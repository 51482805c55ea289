#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ptco {

// Base class for every error this library raises on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// -- repository mining -------------------------------------------------------
class RepoUnreadable : public Error {
public:
    using Error::Error;
};
class CommitNotFound : public Error {
public:
    using Error::Error;
};

// -- vectors / knowledge base ------------------------------------------------
class DimensionMismatch : public Error {
public:
    using Error::Error;
};
class ZeroVector : public Error {
public:
    using Error::Error;
};
class EmptyStore : public Error {
public:
    using Error::Error;
};
class EmbeddingProviderError : public Error {
public:
    using Error::Error;
};

// -- chat providers ----------------------------------------------------------
class ProviderTimeout : public Error {
public:
    using Error::Error;
};
class ProviderRejection : public Error {
public:
    using Error::Error;
};
class MalformedResponse : public Error {
public:
    using Error::Error;
};
// A scripted transcript ran out of canned replies mid-run.
class ScriptedExhausted : public ProviderRejection {
public:
    using ProviderRejection::ProviderRejection;
};
class EmptyReply : public Error {
public:
    using Error::Error;
};

// -- identification ----------------------------------------------------------
class UnparseableVerdict : public Error {
public:
    using Error::Error;
};
class InsufficientSamples : public Error {
public:
    using Error::Error;
};

// -- validation ---------------------------------------------------------------
class WorkspaceCorrupt : public Error {
public:
    using Error::Error;
};
class ValidatorSetupError : public Error {
public:
    using Error::Error;
};

// Coverage report could not be parsed; carries the byte offset of the first
// offending input position.
class MalformedReport : public Error {
public:
    MalformedReport(const std::string& what, std::size_t byte_offset)
        : Error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}

    std::size_t byte_offset() const { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

// -- metrics -------------------------------------------------------------------
class EmptyCounts : public Error {
public:
    using Error::Error;
};
class EmptySessionList : public Error {
public:
    using Error::Error;
};
class MissingSession : public Error {
public:
    using Error::Error;
};

// -- configuration -------------------------------------------------------------
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace ptco
