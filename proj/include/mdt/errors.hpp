#pragma once

#include <stdexcept>
#include <string>

namespace mdt {

// Base for all engine errors so callers can catch the whole family.
class MdtError : public std::runtime_error {
public:
    explicit MdtError(const std::string& msg) : std::runtime_error(msg) {}
};

// core
class EmptyAfterNormalization : public MdtError {
public:
    explicit EmptyAfterNormalization(const std::string& raw)
        : MdtError("option id empty after normalization: \"" + raw + "\"") {}
};

class MissingSummary : public MdtError {
public:
    explicit MissingSummary(int round)
        : MdtError("historical shared pool has no summary for round " + std::to_string(round)) {}
};

class NonContiguousRound : public MdtError {
public:
    NonContiguousRound(int got, int expected)
        : MdtError("summary round " + std::to_string(got) + " breaks contiguity, expected round " +
                   std::to_string(expected)) {}
};

// llm
class BackendError : public MdtError {
public:
    enum class Kind { Transport, Auth, RateLimited, BadResponse };

    BackendError(Kind kind, const std::string& msg) : MdtError(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// triage / statement / reviewer output parsing
class ParseFailure : public MdtError {
public:
    explicit ParseFailure(const std::string& msg) : MdtError(msg) {}
};

// knowledge
class DimensionMismatch : public MdtError {
public:
    DimensionMismatch(size_t a, size_t b)
        : MdtError("embedding dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

class ZeroVector : public MdtError {
public:
    ZeroVector() : MdtError("cosine similarity undefined for a zero vector") {}
};

class IoError : public MdtError {
public:
    explicit IoError(const std::string& msg) : MdtError(msg) {}
};

class SchemaVersionMismatch : public MdtError {
public:
    SchemaVersionMismatch(const std::string& path, size_t line, const std::string& why)
        : MdtError(path + ":" + std::to_string(line) + ": " + why) {}
};

// harness
class MalformedRecord : public MdtError {
public:
    MalformedRecord(const std::string& path, size_t line, const std::string& why)
        : MdtError(path + ":" + std::to_string(line) + ": " + why) {}
};

class UnknownKind : public MdtError {
public:
    explicit UnknownKind(const std::string& kind) : MdtError("unknown dataset kind: " + kind) {}
};

class LengthMismatch : public MdtError {
public:
    explicit LengthMismatch(const std::string& msg) : MdtError(msg) {}
};

class ConfigError : public MdtError {
public:
    explicit ConfigError(const std::string& msg) : MdtError(msg) {}
};

} // namespace mdt
