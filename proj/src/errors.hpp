#pragma once

#include <stdexcept>
#include <string>

namespace sfv {

// Error categories mirrored one-to-one by the C API status codes.
enum class ErrorCode {
    invalid_argument,
    io,
    format,
    shape,
    domain,
    numeric,
    pipeline,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg)
        : std::runtime_error(msg), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

// Pipeline failures carry the stage that aborted the run.
class PipelineError : public Error {
public:
    PipelineError(std::string stage, const std::string& cause)
        : Error(ErrorCode::pipeline, "stage '" + stage + "': " + cause),
          stage_(std::move(stage)) {}

    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

}  // namespace sfv
