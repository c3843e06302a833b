#pragma once

#include <cstddef>
#include <exception>
#include <stdexcept>
#include <string>

namespace promptforge {

// Base for every failure raised by the engine. Callers that only need a
// message can catch this; the CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- dataset / core ------------------------------------------------------

class DatasetError : public Error {
public:
    using Error::Error;
};

class DuplicateIdError : public DatasetError {
public:
    explicit DuplicateIdError(std::string id)
        : DatasetError("duplicate example id '" + id + "'"), id_(std::move(id)) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class EmptyFieldError : public DatasetError {
public:
    EmptyFieldError(std::size_t index, std::string field)
        : DatasetError("record " + std::to_string(index) + ": empty field '" + field + "'"),
          index_(index), field_(std::move(field)) {}
    std::size_t index() const noexcept { return index_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t index_;
    std::string field_;
};

class ParseError : public DatasetError {
public:
    ParseError(std::size_t line, const std::string& detail)
        : DatasetError("line " + std::to_string(line) + ": " + detail), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

class SchemaViolation : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// ---- gateway -------------------------------------------------------------

class BackendError : public Error {
public:
    using Error::Error;
};

class TransportError : public BackendError {
public:
    TransportError(const std::string& detail, bool retryable = true)
        : BackendError("transport: " + detail), retryable_(retryable) {}
    bool retryable() const noexcept { return retryable_; }

private:
    bool retryable_;
};

class ProtocolError : public BackendError {
public:
    explicit ProtocolError(const std::string& detail) : BackendError("protocol: " + detail) {}
};

class OverlongError : public BackendError {
public:
    OverlongError(std::size_t size, std::size_t cap)
        : BackendError("request of " + std::to_string(size) + " chars exceeds cap of " +
                       std::to_string(cap)) {}
};

class NoRuleMatchedError : public BackendError {
public:
    explicit NoRuleMatchedError(const std::string& summary)
        : BackendError("no scripted rule matched: " + summary) {}
};

// ---- algorithm stages ----------------------------------------------------

class ExtractionFailed : public Error {
public:
    ExtractionFailed(std::string dimension, const std::string& cause)
        : Error("extraction failed for dimension '" + dimension + "': " + cause),
          dimension_(std::move(dimension)) {}
    const std::string& dimension() const noexcept { return dimension_; }

private:
    std::string dimension_;
};

class ImprovementFailed : public Error {
public:
    ImprovementFailed(int round, const std::string& cause)
        : Error("self-improvement round " + std::to_string(round) + " failed: " + cause),
          round_(round) {}
    int round() const noexcept { return round_; }

private:
    int round_;
};

class GenerationFailed : public Error {
public:
    GenerationFailed(std::string column, const std::string& cause)
        : Error("generation failed for component '" + column + "': " + cause),
          column_(std::move(column)) {}
    const std::string& column() const noexcept { return column_; }

private:
    std::string column_;
};

class MatrixError : public Error {
public:
    using Error::Error;
};

class MissingRow : public MatrixError {
public:
    explicit MissingRow(std::string example_id)
        : MatrixError("missing row for example '" + example_id + "'"), example_id_(std::move(example_id)) {}
    const std::string& example_id() const noexcept { return example_id_; }

private:
    std::string example_id_;
};

class ShapeMismatch : public MatrixError {
public:
    ShapeMismatch(std::string row, std::size_t expected, std::size_t got)
        : MatrixError("shape mismatch in row '" + row + "': expected " + std::to_string(expected) +
                      " values, got " + std::to_string(got)),
          row_(std::move(row)), expected_(expected), got_(got) {}
    const std::string& row() const noexcept { return row_; }
    std::size_t expected() const noexcept { return expected_; }
    std::size_t got() const noexcept { return got_; }

private:
    std::string row_;
    std::size_t expected_;
    std::size_t got_;
};

class BadBatchSize : public Error {
public:
    using Error::Error;
};

class JudgeParseFailure : public Error {
public:
    explicit JudgeParseFailure(std::string raw)
        : Error("judge reply has no parsable SCORE line"), raw_(std::move(raw)) {}
    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

class SelectionFailed : public Error {
public:
    using Error::Error;
};

class InvalidChain : public Error {
public:
    using Error::Error;
};

class CorruptCheckpoint : public Error {
public:
    explicit CorruptCheckpoint(std::string phase, const std::string& detail = {})
        : Error("corrupt checkpoint for phase '" + phase + "'" + (detail.empty() ? "" : ": " + detail)),
          phase_(std::move(phase)) {}
    const std::string& phase() const noexcept { return phase_; }

private:
    std::string phase_;
};

class ConfigMismatch : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// Wraps a failure with the context in which it happened (example id, batch
// index, stage name, ...). The original exception is kept for callers that
// need to classify it.
class StageError : public Error {
public:
    StageError(const std::string& context, std::exception_ptr cause, const std::string& detail)
        : Error(context + ": " + detail), context_(context), detail_(detail), cause_(std::move(cause)) {}
    const std::string& context() const noexcept { return context_; }
    const std::string& detail() const noexcept { return detail_; }
    const std::exception_ptr& cause() const noexcept { return cause_; }

private:
    std::string context_;
    std::string detail_;
    std::exception_ptr cause_;
};

// Runs `fn`, re-raising any engine failure as a StageError prefixed with
// `context`. Nested calls accumulate context left to right.
template <typename F>
auto with_context(const std::string& context, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError& e) {
        throw StageError(context + ": " + e.context(), e.cause(), e.detail());
    } catch (const std::exception& e) {
        throw StageError(context, std::current_exception(), e.what());
    }
}

// Strips StageError wrappers and rethrows the underlying exception.
[[noreturn]] inline void rethrow_root(std::exception_ptr ep) {
    for (;;) {
        try {
            std::rethrow_exception(ep);
        } catch (const StageError& e) {
            ep = e.cause();
        }
    }
}

}  // namespace promptforge
